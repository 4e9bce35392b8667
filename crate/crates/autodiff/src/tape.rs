use crate::{AutodiffError, ParamId, ParameterSet, Real, Result, ValueGrid};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op<T> {
    Constant,
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Affine(NodeId, NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    ScaleShift(NodeId, T),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Ln(NodeId),
    Square(NodeId),
    Clamp(NodeId, T, T),
    Sum(NodeId),
    Mean(NodeId),
    Concat(Vec<NodeId>, usize),
    Slice {
        input: NodeId,
        axis: usize,
        start: usize,
    },
}

#[derive(Debug, Clone)]
struct Node<T> {
    op: Op<T>,
    value: ValueGrid<T>,
    requires_grad: bool,
}

/// Records a forward computation for later reverse-mode differentiation.
///
/// A tape is single-owner and append-only; nodes refer only to earlier
/// nodes, so the recording order is a topological order.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Adjoints of every node reached by a backward pass.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    adjoints: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, node: NodeId) -> Option<&[T]> {
        self.adjoints.get(node.0).and_then(|a| a.as_deref())
    }
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, node: NodeId) -> &ValueGrid<T> {
        &self.nodes[node.0].value
    }

    pub fn requires_grad(&self, node: NodeId) -> bool {
        self.nodes[node.0].requires_grad
    }

    fn push(&mut self, op: Op<T>, value: ValueGrid<T>, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn shape(&self, node: NodeId) -> &[usize] {
        self.nodes[node.0].value.shape()
    }

    fn dims2(&self, op: &'static str, node: NodeId) -> Result<(usize, usize)> {
        let v = &self.nodes[node.0].value;
        v.dims2().ok_or_else(|| mismatch(op, v.shape(), &[0, 0]))
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, value: ValueGrid<T>) -> NodeId {
        self.push(Op::Constant, value, false)
    }

    /// A free variable whose adjoint is reported by [`Gradients`].
    pub fn leaf(&mut self, value: ValueGrid<T>) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// Snapshot of a parameter. Gradients flow back only when the parameter
    /// is currently marked trainable.
    pub fn param(&mut self, params: &ParameterSet<T>, id: ParamId) -> NodeId {
        let p = params.get(id);
        self.push(Op::Param(id), p.value.clone(), p.trainable)
    }

    /// Copies a node's value into a fresh constant, cutting the gradient path.
    pub fn detach(&mut self, node: NodeId) -> NodeId {
        let v = self.nodes[node.0].value.clone();
        self.constant(v)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(mismatch("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            false,
            false,
            m,
            k,
            n,
            self.value(a).data(),
            self.value(b).data(),
            T::zero(),
            &mut out,
        );
        let value = ValueGrid::matrix(m, n, out)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), value, rg))
    }

    /// `x · w + bias`, with `bias` broadcast over the rows of the product.
    pub fn affine(&mut self, x: NodeId, w: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims2("affine", x)?;
        let (k2, n) = self.dims2("affine", w)?;
        if k != k2 {
            return Err(mismatch("affine", self.shape(x), self.shape(w)));
        }
        if self.value(bias).len() != n {
            return Err(mismatch("affine", self.shape(w), self.shape(bias)));
        }
        let b = self.value(bias).data();
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(b);
        }
        T::gemm(
            false,
            false,
            m,
            k,
            n,
            self.value(x).data(),
            self.value(w).data(),
            T::one(),
            &mut out,
        );
        let value = ValueGrid::matrix(m, n, out)?;
        let rg = self.rg(&[x, w, bias]);
        Ok(self.push(Op::Affine(x, w, bias), value, rg))
    }

    fn zip(&mut self, op: &'static str, a: NodeId, b: NodeId, f: impl Fn(T, T) -> T) -> Result<ValueGrid<T>> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, self.shape(a), self.shape(b)));
        }
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        ValueGrid::from_vec(va.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip("add", a, b, |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Add(a, b), v, rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Sub(a, b), v, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.zip("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Mul(a, b), v, rg))
    }

    /// Elementwise `scale * x + shift`.
    pub fn scale_shift(&mut self, x: NodeId, scale: T, shift: T) -> NodeId {
        let v = self.value(x).map(|e| scale * e + shift);
        let rg = self.rg(&[x]);
        self.push(Op::ScaleShift(x, scale), v, rg)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(sigmoid);
        let rg = self.rg(&[x]);
        self.push(Op::Sigmoid(x), v, rg)
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|e| e.tanh());
        let rg = self.rg(&[x]);
        self.push(Op::Tanh(x), v, rg)
    }

    /// Natural logarithm.
    pub fn ln(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|e| e.ln());
        let rg = self.rg(&[x]);
        self.push(Op::Ln(x), v, rg)
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).map(|e| e * e);
        let rg = self.rg(&[x]);
        self.push(Op::Square(x), v, rg)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero where the clamp is active.
    pub fn clamp(&mut self, x: NodeId, lo: T, hi: T) -> NodeId {
        let v = self.value(x).map(|e| e.max(lo).min(hi));
        let rg = self.rg(&[x]);
        self.push(Op::Clamp(x, lo, hi), v, rg)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().fold(T::zero(), |acc, &v| acc + v);
        let rg = self.rg(&[x]);
        self.push(Op::Sum(x), ValueGrid::scalar(s), rg)
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x);
        let s = v.data().iter().fold(T::zero(), |acc, &e| acc + e);
        let m = s / T::from_f64(v.len() as f64);
        let rg = self.rg(&[x]);
        self.push(Op::Mean(x), ValueGrid::scalar(m), rg)
    }

    /// Concatenates rank-2 grids along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId> {
        let first = *inputs.first().ok_or(AutodiffError::EmptyConcat)?;
        if axis > 1 {
            return Err(AutodiffError::InvalidAxis { axis, rank: 2 });
        }
        let (r0, c0) = self.dims2("concat", first)?;
        let mut dims = Vec::with_capacity(inputs.len());
        for &id in inputs {
            let (r, c) = self.dims2("concat", id)?;
            let ok = if axis == 0 { c == c0 } else { r == r0 };
            if !ok {
                return Err(mismatch("concat", self.shape(first), self.shape(id)));
            }
            dims.push((r, c));
        }
        let value = if axis == 0 {
            let rows = dims.iter().map(|d| d.0).sum();
            let mut data = Vec::with_capacity(rows * c0);
            for &id in inputs {
                data.extend_from_slice(self.value(id).data());
            }
            ValueGrid::matrix(rows, c0, data)?
        } else {
            let cols: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(r0 * cols);
            for r in 0..r0 {
                for (&id, &(_, c)) in inputs.iter().zip(&dims) {
                    data.extend_from_slice(&self.value(id).data()[r * c..(r + 1) * c]);
                }
            }
            ValueGrid::matrix(r0, cols, data)?
        };
        let rg = self.rg(inputs);
        Ok(self.push(Op::Concat(inputs.to_vec(), axis), value, rg))
    }

    /// Takes `len` rows (`axis` 0) or columns (`axis` 1) starting at `start`.
    pub fn slice(&mut self, x: NodeId, axis: usize, start: usize, len: usize) -> Result<NodeId> {
        if axis > 1 {
            return Err(AutodiffError::InvalidAxis { axis, rank: 2 });
        }
        let (rows, cols) = self.dims2("slice", x)?;
        let extent = if axis == 0 { rows } else { cols };
        if len == 0 || start + len > extent {
            return Err(AutodiffError::SliceOutOfBounds {
                start,
                end: start + len,
                extent,
            });
        }
        let src = self.value(x).data();
        let value = if axis == 0 {
            ValueGrid::matrix(len, cols, src[start * cols..(start + len) * cols].to_vec())?
        } else {
            let mut data = Vec::with_capacity(rows * len);
            for r in 0..rows {
                data.extend_from_slice(&src[r * cols + start..r * cols + start + len]);
            }
            ValueGrid::matrix(rows, len, data)?
        };
        let rg = self.rg(&[x]);
        Ok(self.push(Op::Slice { input: x, axis, start }, value, rg))
    }

    /// Propagates d(root)/d(node) to every node that requires a gradient and
    /// adds the parameter adjoints into `params`. Repeated calls accumulate.
    pub fn backward(&self, root: NodeId, params: &mut ParameterSet<T>) -> Result<Gradients<T>> {
        let rv = self.value(root);
        if !rv.is_scalar() {
            return Err(AutodiffError::NonScalarRoot(rv.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        if self.nodes[root.0].requires_grad {
            adj[root.0] = Some(vec![T::one()]);
        }
        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            self.propagate(i, &g, &mut adj);
            if let Op::Param(pid) = node.op {
                params.accumulate(pid, &g);
            }
            adj[i] = Some(g);
        }
        Ok(Gradients { adjoints: adj })
    }

    fn propagate(&self, i: usize, g: &[T], adj: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let mut acc = |id: NodeId, f: &mut dyn FnMut(&mut [T])| {
            if !self.nodes[id.0].requires_grad {
                return;
            }
            let n = self.nodes[id.0].value.len();
            let slot = adj[id.0].get_or_insert_with(|| vec![T::zero(); n]);
            f(slot);
        };
        match &node.op {
            Op::Constant | Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).dims2().unwrap().1;
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                acc(*a, &mut |da| T::gemm(false, true, m, n, k, g, bv, T::one(), da));
                acc(*b, &mut |db| T::gemm(true, false, k, m, n, av, g, T::one(), db));
            }
            Op::Affine(x, w, b) => {
                let (m, k) = self.value(*x).dims2().unwrap();
                let n = self.value(*w).dims2().unwrap().1;
                let xv = self.value(*x).data();
                let wv = self.value(*w).data();
                acc(*x, &mut |dx| T::gemm(false, true, m, n, k, g, wv, T::one(), dx));
                acc(*w, &mut |dw| T::gemm(true, false, k, m, n, xv, g, T::one(), dw));
                acc(*b, &mut |db| {
                    for row in g.chunks_exact(n) {
                        for (d, &v) in db.iter_mut().zip(row) {
                            *d = *d + v;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| add_into(d, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |d| add_into(d, g));
                acc(*b, &mut |d| {
                    for (x, &v) in d.iter_mut().zip(g) {
                        *x = *x - v;
                    }
                });
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                acc(*a, &mut |d| {
                    for ((x, &v), &o) in d.iter_mut().zip(g).zip(bv) {
                        *x = *x + v * o;
                    }
                });
                acc(*b, &mut |d| {
                    for ((x, &v), &o) in d.iter_mut().zip(g).zip(av) {
                        *x = *x + v * o;
                    }
                });
            }
            Op::ScaleShift(x, scale) => {
                acc(*x, &mut |d| {
                    for (e, &v) in d.iter_mut().zip(g) {
                        *e = *e + *scale * v;
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    for ((e, &v), &s) in d.iter_mut().zip(g).zip(y) {
                        *e = *e + v * s * (T::one() - s);
                    }
                });
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                acc(*x, &mut |d| {
                    for ((e, &v), &t) in d.iter_mut().zip(g).zip(y) {
                        *e = *e + v * (T::one() - t * t);
                    }
                });
            }
            Op::Ln(x) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |d| {
                    for ((e, &v), &a) in d.iter_mut().zip(g).zip(xv) {
                        *e = *e + v / a;
                    }
                });
            }
            Op::Square(x) => {
                let xv = self.value(*x).data();
                let two = T::from_f64(2.0);
                acc(*x, &mut |d| {
                    for ((e, &v), &a) in d.iter_mut().zip(g).zip(xv) {
                        *e = *e + two * a * v;
                    }
                });
            }
            Op::Clamp(x, lo, hi) => {
                let xv = self.value(*x).data();
                acc(*x, &mut |d| {
                    for ((e, &v), &a) in d.iter_mut().zip(g).zip(xv) {
                        if a >= *lo && a <= *hi {
                            *e = *e + v;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                let s = g[0];
                acc(*x, &mut |d| d.iter_mut().for_each(|e| *e = *e + s));
            }
            Op::Mean(x) => {
                let s = g[0] / T::from_f64(self.value(*x).len() as f64);
                acc(*x, &mut |d| d.iter_mut().for_each(|e| *e = *e + s));
            }
            Op::Concat(inputs, axis) => {
                let total_cols = node.value.dims2().unwrap().1;
                let mut offset = 0;
                for &id in inputs {
                    let (r, c) = self.value(id).dims2().unwrap();
                    if *axis == 0 {
                        let part = &g[offset * total_cols..(offset + r) * total_cols];
                        acc(id, &mut |d| add_into(d, part));
                        offset += r;
                    } else {
                        acc(id, &mut |d| {
                            for row in 0..r {
                                let src = &g[row * total_cols + offset..row * total_cols + offset + c];
                                add_into(&mut d[row * c..(row + 1) * c], src);
                            }
                        });
                        offset += c;
                    }
                }
            }
            Op::Slice { input, axis, start } => {
                let (rows, cols) = self.value(*input).dims2().unwrap();
                let (_, out_cols) = node.value.dims2().unwrap();
                acc(*input, &mut |d| {
                    if *axis == 0 {
                        add_into(&mut d[start * cols..start * cols + g.len()], g);
                    } else {
                        for r in 0..rows {
                            let dst = &mut d[r * cols + start..r * cols + start + out_cols];
                            add_into(dst, &g[r * out_cols..(r + 1) * out_cols]);
                        }
                    }
                });
            }
        }
    }
}

fn add_into<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = *d + s;
    }
}
