use crate::{Real, ValueGrid};

/// Index of a parameter inside its [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone)]
pub struct Parameter<T> {
    pub name: String,
    pub group: String,
    pub value: ValueGrid<T>,
    pub grad: ValueGrid<T>,
    pub trainable: bool,
}

/// Named trainable grids with their accumulated gradients, in declaration order.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet<T> {
    params: Vec<Parameter<T>>,
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        Self { params: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, group: impl Into<String>, value: ValueGrid<T>) -> ParamId {
        let grad = ValueGrid::zeros(value.shape().to_vec());
        self.params.push(Parameter {
            name: name.into(),
            group: group.into(),
            value,
            grad,
            trainable: true,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn value(&self, id: ParamId) -> &ValueGrid<T> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut ValueGrid<T> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &ValueGrid<T> {
        &self.params[id.0].grad
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.params[id.0].trainable
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Marks only the parameters whose group is listed as trainable.
    pub fn set_trainable_groups(&mut self, groups: &[&str]) {
        for p in &mut self.params {
            p.trainable = groups.contains(&p.group.as_str());
        }
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        for p in &mut self.params {
            p.trainable = trainable;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(T::zero());
        }
    }

    /// Total number of stored scalar values.
    pub fn count_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn group_count(&self, group: &str) -> usize {
        self.params
            .iter()
            .filter(|p| p.group == group)
            .map(|p| p.value.len())
            .sum()
    }

    pub(crate) fn accumulate(&mut self, id: ParamId, delta: &[T]) {
        let g = self.params[id.0].grad.data_mut();
        for (a, &d) in g.iter_mut().zip(delta) {
            *a = *a + d;
        }
    }

    /// Copies values into a set of another precision, keeping names, groups and flags.
    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        ParameterSet {
            params: self
                .params
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    group: p.group.clone(),
                    value: p.value.cast(),
                    grad: p.grad.cast(),
                    trainable: p.trainable,
                })
                .collect(),
        }
    }
}
