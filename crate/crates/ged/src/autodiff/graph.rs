use std::collections::HashMap;

use thiserror::Error;

use super::tensor::{Scalar, Tensor};

const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op} produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op} expects {expected}, got shape {got:?}")]
    BadRank {
        op: &'static str,
        expected: &'static str,
        got: Vec<usize>,
    },
    #[error("embedding lookup row {row} out of range for table with {rows} rows")]
    LookupOutOfRange { row: usize, rows: usize },
    #[error("backward target must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("concat requires at least one input")]
    EmptyConcat,
}

pub type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a named parameter tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Owns the trainable tensors. Graphs borrow the store immutably while a
/// forward/backward pass runs; the optimizer mutates it between passes.
#[derive(Clone, Debug)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, tensor: Tensor<S>) -> ParamId {
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId(self.names.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<S>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

/// Per-parameter gradients, aligned with a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    by_param: Vec<Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn zeros_like(store: &ParamStore<S>) -> Self {
        Gradients {
            by_param: store
                .iter()
                .map(|(_, _, t)| Tensor::zeros(t.shape()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.by_param[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.by_param[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<S>> {
        self.by_param.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor<S>> {
        self.by_param.iter_mut()
    }

    pub fn add_assign(&mut self, other: &Gradients<S>) {
        for (a, b) in self.by_param.iter_mut().zip(&other.by_param) {
            a.add_assign(b);
        }
    }

    pub fn scale_assign(&mut self, c: S) {
        for g in self.by_param.iter_mut() {
            g.scale_assign(c);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.by_param.iter().map(|g| g.sq_norm()).sum::<f64>().sqrt()
    }

    /// If the global norm exceeds `clip_norm`, scale every gradient by
    /// `clip_norm / norm`. All-zero gradients pass through untouched.
    pub fn clip_by_global_norm(&mut self, clip_norm: f64) {
        assert!(clip_norm > 0.0, "clip_norm must be positive");
        let norm = self.global_norm();
        if norm > clip_norm {
            let factor = S::from_f64(clip_norm / norm);
            self.scale_assign(factor);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op<S> {
    Const,
    Param(ParamId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    Concat(Vec<NodeId>),
    StackRows(Vec<NodeId>),
    Dot(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    SoftmaxRows(NodeId),
    Lookup { table: NodeId, row: usize },
    RowSum(NodeId),
    Mean(NodeId),
    /// Mean binary cross-entropy of probabilities against fixed 0/1 targets.
    BceMean { probs: NodeId, targets: Tensor<S> },
}

struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Records a forward computation over tensors so gradients can be pushed
/// back through it. Node creation order is a topological order: every op's
/// inputs have smaller ids.
pub struct Graph<'a, S: Scalar> {
    store: &'a ParamStore<S>,
    nodes: Vec<Node<S>>,
    param_nodes: HashMap<ParamId, NodeId>,
}

impl<'a, S: Scalar> Graph<'a, S> {
    pub fn new(store: &'a ParamStore<S>) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        match self.nodes[id.0].op {
            Op::Param(p) => self.store.get(p),
            _ => &self.nodes[id.0].value,
        }
    }

    fn push(&mut self, op: &'static str, value: Tensor<S>, kind: Op<S>) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite { op });
        }
        self.nodes.push(Node { value, op: kind });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, t: Tensor<S>) -> NodeId {
        self.nodes.push(Node {
            value: t,
            op: Op::Const,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// One node per parameter, reused across calls, so gradient
    /// accumulation across multiple uses happens naturally.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return n;
        }
        self.nodes.push(Node {
            value: Tensor::zeros(&[]),
            op: Op::Param(id),
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes.insert(id, n);
        n
    }

    /// Elementwise add. `b` may also be a scalar, or a vector broadcast
    /// across the rows of a matrix `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = Self::broadcast_zip(self.value(a), self.value(b), "add", |x, y| x + y)?;
        self.push("add", out, Op::Add(a, b))
    }

    /// Elementwise multiply, same broadcasting rules as [`Graph::add`].
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let out = Self::broadcast_zip(self.value(a), self.value(b), "mul", |x, y| x * y)?;
        self.push("mul", out, Op::Mul(a, b))
    }

    fn broadcast_zip(
        a: &Tensor<S>,
        b: &Tensor<S>,
        op: &'static str,
        f: impl Fn(S, S) -> S,
    ) -> Result<Tensor<S>> {
        if a.shape() == b.shape() {
            let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
            return Ok(Tensor::from_vec(a.shape(), data));
        }
        // scalar rhs
        if b.rank() == 0 {
            let s = b.item();
            let data = a.data().iter().map(|&x| f(x, s)).collect();
            return Ok(Tensor::from_vec(a.shape(), data));
        }
        // vector rhs broadcast over the leading dimension of a matrix lhs
        if a.rank() == 2 && b.rank() == 1 && a.cols() == b.len() {
            let cols = a.cols();
            let data = a
                .data()
                .iter()
                .enumerate()
                .map(|(i, &x)| f(x, b.data()[i % cols]))
                .collect();
            return Ok(Tensor::from_vec(a.shape(), data));
        }
        Err(AutodiffError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        })
    }

    /// Matrix × matrix, or matrix × vector.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rank() != 2 {
            return Err(AutodiffError::BadRank {
                op: "matmul",
                expected: "a matrix lhs",
                got: va.shape().to_vec(),
            });
        }
        let (m, k) = (va.rows(), va.cols());
        let out = match vb.rank() {
            2 => {
                if vb.rows() != k {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "matmul",
                        lhs: va.shape().to_vec(),
                        rhs: vb.shape().to_vec(),
                    });
                }
                let n = vb.cols();
                let mut data = vec![S::zero(); m * n];
                for i in 0..m {
                    for p in 0..k {
                        let aip = va.data()[i * k + p];
                        let brow = &vb.data()[p * n..(p + 1) * n];
                        let orow = &mut data[i * n..(i + 1) * n];
                        for j in 0..n {
                            orow[j] = orow[j] + aip * brow[j];
                        }
                    }
                }
                Tensor::matrix(m, n, data)
            }
            1 => {
                if vb.len() != k {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "matmul",
                        lhs: va.shape().to_vec(),
                        rhs: vb.shape().to_vec(),
                    });
                }
                let data = (0..m)
                    .map(|i| {
                        (0..k)
                            .map(|p| va.data()[i * k + p] * vb.data()[p])
                            .sum()
                    })
                    .collect();
                Tensor::vector(data)
            }
            _ => {
                return Err(AutodiffError::BadRank {
                    op: "matmul",
                    expected: "a matrix or vector rhs",
                    got: vb.shape().to_vec(),
                })
            }
        };
        self.push("matmul", out, Op::Matmul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.rank() != 2 {
            return Err(AutodiffError::BadRank {
                op: "transpose",
                expected: "a matrix",
                got: va.shape().to_vec(),
            });
        }
        let (m, n) = (va.rows(), va.cols());
        let mut data = vec![S::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = va.data()[i * n + j];
            }
        }
        self.push("transpose", Tensor::matrix(n, m, data), Op::Transpose(a))
    }

    /// Concatenate scalars and vectors into one vector.
    pub fn concat(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(AutodiffError::EmptyConcat);
        }
        let mut data = Vec::new();
        for &id in inputs {
            let v = self.value(id);
            if v.rank() > 1 {
                return Err(AutodiffError::BadRank {
                    op: "concat",
                    expected: "scalars or vectors",
                    got: v.shape().to_vec(),
                });
            }
            data.extend_from_slice(v.data());
        }
        self.push("concat", Tensor::vector(data), Op::Concat(inputs.to_vec()))
    }

    /// Stack equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        if inputs.is_empty() {
            return Err(AutodiffError::EmptyConcat);
        }
        let width = self.value(inputs[0]).len();
        let mut data = Vec::with_capacity(inputs.len() * width);
        for &id in inputs {
            let v = self.value(id);
            if v.rank() != 1 || v.len() != width {
                return Err(AutodiffError::ShapeMismatch {
                    op: "stack_rows",
                    lhs: vec![width],
                    rhs: v.shape().to_vec(),
                });
            }
            data.extend_from_slice(v.data());
        }
        self.push(
            "stack_rows",
            Tensor::matrix(inputs.len(), width, data),
            Op::StackRows(inputs.to_vec()),
        )
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.rank() != 1 || vb.rank() != 1 || va.len() != vb.len() {
            return Err(AutodiffError::ShapeMismatch {
                op: "dot",
                lhs: va.shape().to_vec(),
                rhs: vb.shape().to_vec(),
            });
        }
        let v = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(&x, &y)| x * y)
            .sum::<S>();
        self.push("dot", Tensor::scalar(v), Op::Dot(a, b))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .map(|&x| S::one() / (S::one() + (-x).exp()))
            .collect();
        let out = Tensor::from_vec(va.shape(), data);
        self.push("sigmoid", out, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| x.tanh()).collect();
        let out = Tensor::from_vec(va.shape(), data);
        self.push("tanh", out, Op::Tanh(a))
    }

    /// Softmax along the last axis: a vector is one row, a matrix is
    /// normalized row by row.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let (rows, cols) = match va.rank() {
            1 => (1, va.len()),
            2 => (va.rows(), va.cols()),
            _ => {
                return Err(AutodiffError::BadRank {
                    op: "softmax",
                    expected: "a vector or matrix",
                    got: va.shape().to_vec(),
                })
            }
        };
        let mut data = va.data().to_vec();
        for r in 0..rows {
            let row = &mut data[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(S::neg_infinity(), S::max);
            let mut sum = S::zero();
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum = sum + *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        let out = Tensor::from_vec(va.shape(), data);
        self.push("softmax", out, Op::SoftmaxRows(a))
    }

    /// Row `row` of an embedding table node.
    pub fn lookup(&mut self, table: NodeId, row: usize) -> Result<NodeId> {
        let vt = self.value(table);
        if vt.rank() != 2 {
            return Err(AutodiffError::BadRank {
                op: "lookup",
                expected: "a matrix table",
                got: vt.shape().to_vec(),
            });
        }
        if row >= vt.rows() {
            return Err(AutodiffError::LookupOutOfRange {
                row,
                rows: vt.rows(),
            });
        }
        let out = Tensor::vector(vt.row(row).to_vec());
        self.push("lookup", out, Op::Lookup { table, row })
    }

    /// Sum each row of a matrix into a vector.
    pub fn row_sum(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        if va.rank() != 2 {
            return Err(AutodiffError::BadRank {
                op: "row_sum",
                expected: "a matrix",
                got: va.shape().to_vec(),
            });
        }
        let data = (0..va.rows())
            .map(|i| va.row(i).iter().cloned().sum())
            .collect();
        self.push("row_sum", Tensor::vector(data), Op::RowSum(a))
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        let va = self.value(a);
        let n = S::from_f64(va.len() as f64);
        let v = va.data().iter().cloned().sum::<S>() / n;
        self.push("mean", Tensor::scalar(v), Op::Mean(a))
    }

    /// Mean binary cross-entropy: −mean[y·ln p + (1−y)·ln(1−p)], with p
    /// clamped to [ε, 1−ε], ε = 1e−7. `targets` entries must be 0 or 1.
    pub fn bce_mean(&mut self, probs: NodeId, targets: Tensor<S>) -> Result<NodeId> {
        let vp = self.value(probs);
        if vp.shape() != targets.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "bce",
                lhs: vp.shape().to_vec(),
                rhs: targets.shape().to_vec(),
            });
        }
        let eps = S::from_f64(BCE_EPS);
        let one = S::one();
        let mut acc = S::zero();
        for (&p, &y) in vp.data().iter().zip(targets.data()) {
            let p = p.max(eps).min(one - eps);
            acc = acc - (y * p.ln() + (one - y) * (one - p).ln());
        }
        let v = acc / S::from_f64(vp.len() as f64);
        self.push("bce", Tensor::scalar(v), Op::BceMean { probs, targets })
    }

    /// Cross-entropy of a single probability against a 0/1 target.
    pub fn binary_cross_entropy(&mut self, p: NodeId, target: S) -> Result<NodeId> {
        let vp = self.value(p);
        if vp.len() != 1 {
            return Err(AutodiffError::BadRank {
                op: "bce",
                expected: "a scalar probability",
                got: vp.shape().to_vec(),
            });
        }
        let shape = vp.shape().to_vec();
        self.bce_mean(p, Tensor::from_vec(&shape, vec![target]))
    }

    /// Reverse pass from a scalar loss. Returns gradients for every
    /// parameter in the store (zero for parameters the loss never touched).
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss(
                self.value(loss).shape().to_vec(),
            ));
        }
        let mut node_grads: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        node_grads[loss.0] = Some(Tensor::from_vec(
            self.value(loss).shape(),
            vec![S::one()],
        ));

        for id in (0..self.nodes.len()).rev() {
            let grad = match node_grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(id, &grad, &mut node_grads);
            node_grads[id] = Some(grad);
        }

        let mut out = Gradients::zeros_like(self.store);
        for (&pid, &nid) in &self.param_nodes {
            if let Some(g) = &node_grads[nid.0] {
                out.get_mut(pid).add_assign(g);
            }
        }
        Ok(out)
    }

    fn accumulate(
        &self,
        grads: &mut [Option<Tensor<S>>],
        target: NodeId,
        delta: Tensor<S>,
    ) {
        match &mut grads[target.0] {
            Some(g) => g.add_assign(&delta),
            slot @ None => {
                // params start from a correctly-shaped zero tensor
                if let Op::Param(p) = self.nodes[target.0].op {
                    let mut g = Tensor::zeros(self.store.get(p).shape());
                    g.add_assign(&delta);
                    *slot = Some(g);
                } else {
                    *slot = Some(delta);
                }
            }
        }
    }

    fn backprop_node(&self, id: usize, grad: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        match &self.nodes[id].op {
            Op::Const | Op::Param(_) => {}
            Op::Add(a, b) => {
                self.accumulate(grads, *a, grad.clone());
                let delta_b = Self::reduce_to_shape(grad, self.value(*b).shape());
                self.accumulate(grads, *b, delta_b);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let ga = Self::broadcast_zip(grad, vb, "mul", |g, y| g * y)
                    .expect("forward-checked shapes");
                self.accumulate(grads, *a, ga);
                let gb_full: Vec<S> = grad
                    .data()
                    .iter()
                    .zip(va.data())
                    .map(|(&g, &x)| g * x)
                    .collect();
                let gb_full = Tensor::from_vec(grad.shape(), gb_full);
                let gb = Self::reduce_to_shape(&gb_full, vb.shape());
                self.accumulate(grads, *b, gb);
            }
            Op::Matmul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k) = (va.rows(), va.cols());
                match vb.rank() {
                    2 => {
                        let n = vb.cols();
                        // dA = G Bᵀ
                        let mut da = vec![S::zero(); m * k];
                        for i in 0..m {
                            for p in 0..k {
                                let mut acc = S::zero();
                                for j in 0..n {
                                    acc = acc + grad.data()[i * n + j] * vb.data()[p * n + j];
                                }
                                da[i * k + p] = acc;
                            }
                        }
                        self.accumulate(grads, *a, Tensor::matrix(m, k, da));
                        // dB = Aᵀ G
                        let mut db = vec![S::zero(); k * n];
                        for p in 0..k {
                            for i in 0..m {
                                let aip = va.data()[i * k + p];
                                for j in 0..n {
                                    db[p * n + j] =
                                        db[p * n + j] + aip * grad.data()[i * n + j];
                                }
                            }
                        }
                        self.accumulate(grads, *b, Tensor::matrix(k, n, db));
                    }
                    _ => {
                        // matrix × vector: dA = g ⊗ x, dx = Aᵀ g
                        let mut da = vec![S::zero(); m * k];
                        for i in 0..m {
                            let gi = grad.data()[i];
                            for p in 0..k {
                                da[i * k + p] = gi * vb.data()[p];
                            }
                        }
                        self.accumulate(grads, *a, Tensor::matrix(m, k, da));
                        let mut dx = vec![S::zero(); k];
                        for i in 0..m {
                            let gi = grad.data()[i];
                            for (p, d) in dx.iter_mut().enumerate() {
                                *d = *d + va.data()[i * k + p] * gi;
                            }
                        }
                        self.accumulate(grads, *b, Tensor::vector(dx));
                    }
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (grad.rows(), grad.cols());
                let mut da = vec![S::zero(); m * n];
                for i in 0..m {
                    for j in 0..n {
                        da[j * m + i] = grad.data()[i * n + j];
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(n, m, da));
            }
            Op::Concat(inputs) => {
                let mut offset = 0;
                for &inp in inputs {
                    let v = self.value(inp);
                    let slice = grad.data()[offset..offset + v.len()].to_vec();
                    offset += v.len();
                    self.accumulate(grads, inp, Tensor::from_vec(v.shape(), slice));
                }
            }
            Op::StackRows(inputs) => {
                let width = grad.cols();
                for (i, &inp) in inputs.iter().enumerate() {
                    let slice = grad.data()[i * width..(i + 1) * width].to_vec();
                    self.accumulate(grads, inp, Tensor::vector(slice));
                }
            }
            Op::Dot(a, b) => {
                let g = grad.item();
                let (va, vb) = (self.value(*a), self.value(*b));
                let da: Vec<S> = vb.data().iter().map(|&y| g * y).collect();
                let db: Vec<S> = va.data().iter().map(|&x| g * x).collect();
                self.accumulate(grads, *a, Tensor::vector(da));
                self.accumulate(grads, *b, Tensor::vector(db));
            }
            Op::Sigmoid(a) => {
                let y = &self.nodes[id].value;
                let da: Vec<S> = grad
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&g, &s)| g * s * (S::one() - s))
                    .collect();
                self.accumulate(grads, *a, Tensor::from_vec(y.shape(), da));
            }
            Op::Tanh(a) => {
                let y = &self.nodes[id].value;
                let da: Vec<S> = grad
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(&g, &t)| g * (S::one() - t * t))
                    .collect();
                self.accumulate(grads, *a, Tensor::from_vec(y.shape(), da));
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[id].value;
                let (rows, cols) = match y.rank() {
                    1 => (1, y.len()),
                    _ => (y.rows(), y.cols()),
                };
                let mut da = vec![S::zero(); y.len()];
                for r in 0..rows {
                    let yr = &y.data()[r * cols..(r + 1) * cols];
                    let gr = &grad.data()[r * cols..(r + 1) * cols];
                    let inner: S = yr.iter().zip(gr).map(|(&yv, &gv)| yv * gv).sum();
                    for j in 0..cols {
                        da[r * cols + j] = yr[j] * (gr[j] - inner);
                    }
                }
                self.accumulate(grads, *a, Tensor::from_vec(y.shape(), da));
            }
            Op::Lookup { table, row } => {
                let vt = self.value(*table);
                let mut dt = Tensor::zeros(vt.shape());
                let cols = vt.cols();
                for j in 0..cols {
                    dt.data_mut()[row * cols + j] = grad.data()[j];
                }
                self.accumulate(grads, *table, dt);
            }
            Op::RowSum(a) => {
                let va = self.value(*a);
                let (m, n) = (va.rows(), va.cols());
                let mut da = vec![S::zero(); m * n];
                for i in 0..m {
                    let gi = grad.data()[i];
                    for j in 0..n {
                        da[i * n + j] = gi;
                    }
                }
                self.accumulate(grads, *a, Tensor::matrix(m, n, da));
            }
            Op::Mean(a) => {
                let va = self.value(*a);
                let g = grad.item() / S::from_f64(va.len() as f64);
                let da = vec![g; va.len()];
                self.accumulate(grads, *a, Tensor::from_vec(va.shape(), da));
            }
            Op::BceMean { probs, targets } => {
                let vp = self.value(*probs);
                let eps = S::from_f64(BCE_EPS);
                let one = S::one();
                let n = S::from_f64(vp.len() as f64);
                let g = grad.item();
                let da: Vec<S> = vp
                    .data()
                    .iter()
                    .zip(targets.data())
                    .map(|(&p, &y)| {
                        let p = p.max(eps).min(one - eps);
                        g * (p - y) / (p * (one - p)) / n
                    })
                    .collect();
                self.accumulate(grads, *probs, Tensor::from_vec(vp.shape(), da));
            }
        }
    }

    /// Undo broadcasting: sum a gradient down to the shape of the
    /// broadcast operand.
    fn reduce_to_shape(grad: &Tensor<S>, shape: &[usize]) -> Tensor<S> {
        if grad.shape() == shape {
            return grad.clone();
        }
        if shape.is_empty() {
            return Tensor::scalar(grad.data().iter().cloned().sum());
        }
        // matrix grad reduced to a row-broadcast vector
        let cols = shape[0];
        let mut out = vec![S::zero(); cols];
        for (i, &g) in grad.data().iter().enumerate() {
            out[i % cols] = out[i % cols] + g;
        }
        Tensor::vector(out)
    }
}
