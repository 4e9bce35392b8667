use crate::{AutodiffError, Real, Result};

/// Dense row-major array of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrid<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> ValueGrid<T> {
    pub fn from_vec(shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || expected != data.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "from_vec",
                left: shape,
                right: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        assert!(n > 0, "grid extents must be positive");
        Self {
            shape,
            data: vec![T::zero(); n],
        }
    }

    pub fn filled(shape: Vec<usize>, value: T) -> Self {
        let mut g = Self::zeros(shape);
        g.data.iter_mut().for_each(|v| *v = value);
        g
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a `rows x cols` matrix.
    pub fn matrix(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        Self::from_vec(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// `(rows, cols)` of a rank-2 grid.
    pub fn dims2(&self) -> Option<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Some((*r, *c)),
            _ => None,
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> ValueGrid<U> {
        ValueGrid {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }
}

impl<T: Real> std::ops::Index<usize> for ValueGrid<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}
