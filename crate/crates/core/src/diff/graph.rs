use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Handle to a node recorded in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation kinds accepted by [`Graph::forward_op`].
///
/// Binary elementwise ops (`Add`, `Sub`, `Mul`) take equal shapes, or one
/// operand whose shape equals the other's shape without its leading batch
/// axis. `Concat`, `Softmax` work along the last axis. `Sum` and `Mean`
/// reduce everything to a scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpKind {
    MatMul,
    Add,
    Sub,
    Mul,
    Scale(f64),
    Relu,
    Tanh,
    Concat,
    Sum,
    Mean,
    Square,
    Log,
    Softmax,
}

impl OpKind {
    fn name(self) -> &'static str {
        match self {
            OpKind::MatMul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Scale(_) => "scale",
            OpKind::Relu => "relu",
            OpKind::Tanh => "tanh",
            OpKind::Concat => "concat",
            OpKind::Sum => "sum",
            OpKind::Mean => "mean",
            OpKind::Square => "square",
            OpKind::Log => "log",
            OpKind::Softmax => "softmax",
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Unary(OpKind, NodeId),
    Binary(OpKind, NodeId, NodeId, Broadcast),
    Concat(Vec<NodeId>),
}

/// Which operand of a binary op, if any, is repeated along the batch axis.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Broadcast {
    None,
    Lhs,
    Rhs,
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
}

/// Append-only record of a forward computation.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Adjoints for every node of a graph, indexed by [`NodeId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn take(&mut self, id: NodeId) -> Tensor {
        core::mem::replace(&mut self.grads[id.0], Tensor::scalar(0.0))
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input or parameter value.
    pub fn leaf(&mut self, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: "leaf" });
        }
        Ok(self.push(Op::Leaf, value))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    fn check(&self, id: NodeId) -> Result<&Tensor> {
        self.nodes.get(id.0).map(|n| &n.value).ok_or(Error::UnknownNode(id.0))
    }

    /// Evaluates `kind` on `inputs` and appends the result.
    pub fn forward_op(&mut self, kind: OpKind, inputs: &[NodeId]) -> Result<NodeId> {
        for &id in inputs {
            self.check(id)?;
        }
        let arity_err = |want: &str| shape_err(kind.name(), format!("expects {} input(s), got {}", want, inputs.len()));
        let (op, value) = match kind {
            OpKind::Concat => {
                if inputs.is_empty() {
                    return Err(arity_err("at least one"));
                }
                let parts: Vec<&Tensor> = inputs.iter().map(|&i| self.value(i)).collect();
                (Op::Concat(inputs.to_vec()), concat_last(&parts)?)
            }
            OpKind::MatMul | OpKind::Add | OpKind::Sub | OpKind::Mul => {
                let [a, b] = inputs else {
                    return Err(arity_err("2"));
                };
                let (va, vb) = (self.value(*a), self.value(*b));
                if kind == OpKind::MatMul {
                    (Op::Binary(kind, *a, *b, Broadcast::None), matmul(va, vb)?)
                } else {
                    let bc = broadcast_kind(kind.name(), va, vb)?;
                    let f: fn(f64, f64) -> f64 = match kind {
                        OpKind::Add => |x, y| x + y,
                        OpKind::Sub => |x, y| x - y,
                        _ => |x, y| x * y,
                    };
                    (Op::Binary(kind, *a, *b, bc), elementwise(va, vb, bc, f))
                }
            }
            _ => {
                let [a] = inputs else {
                    return Err(arity_err("1"));
                };
                let v = self.value(*a);
                let out = match kind {
                    OpKind::Scale(c) => v.map(|x| c * x),
                    OpKind::Relu => v.map(|x| if x > 0.0 { x } else { 0.0 }),
                    OpKind::Tanh => v.map(libm::tanh),
                    OpKind::Square => v.map(|x| x * x),
                    OpKind::Log => v.map(libm::log),
                    OpKind::Sum => Tensor::scalar(v.data().iter().sum()),
                    OpKind::Mean => {
                        if v.numel() == 0 {
                            return Err(Error::EmptyInput("mean"));
                        }
                        Tensor::scalar(v.data().iter().sum::<f64>() / v.numel() as f64)
                    }
                    OpKind::Softmax => softmax_last(v)?,
                    _ => unreachable!(),
                };
                (Op::Unary(kind, *a), out)
            }
        };
        if !value.is_finite() {
            return Err(Error::NonFinite { op: kind.name() });
        }
        Ok(self.push(op, value))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::MatMul, &[a, b])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Add, &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Sub, &[a, b])
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Mul, &[a, b])
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> Result<NodeId> {
        self.forward_op(OpKind::Scale(c), &[a])
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Relu, &[a])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Tanh, &[a])
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        self.forward_op(OpKind::Concat, parts)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Sum, &[a])
    }

    pub fn mean(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Mean, &[a])
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Square, &[a])
    }

    pub fn log(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Log, &[a])
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        self.forward_op(OpKind::Softmax, &[a])
    }

    /// Reverse sweep from a one-element `root`.
    ///
    /// Every node receives an adjoint of the same shape as its value; nodes
    /// the root does not depend on keep zeros.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let rv = self.check(root)?;
        if rv.numel() != 1 {
            return Err(Error::NonScalarRoot { numel: rv.numel() });
        }
        let mut grads: Vec<Tensor> = self.nodes.iter().map(|n| Tensor::zeros(n.value.shape())).collect();
        grads[root.0].data_mut()[0] = 1.0;

        for idx in (0..=root.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let upstream = core::mem::replace(&mut grads[idx], Tensor::scalar(0.0));
            if upstream.data().iter().all(|&g| g == 0.0) {
                grads[idx] = upstream;
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Unary(kind, a) => {
                    let x = self.value(*a);
                    let y = &node.value;
                    let ga = grads[a.0].data_mut();
                    let g = upstream.data();
                    match kind {
                        OpKind::Scale(c) => accumulate(ga, g.iter().map(|gi| c * gi)),
                        OpKind::Relu => {
                            accumulate(ga, g.iter().zip(x.data()).map(|(gi, xi)| if *xi > 0.0 { *gi } else { 0.0 }))
                        }
                        OpKind::Tanh => accumulate(ga, g.iter().zip(y.data()).map(|(gi, yi)| gi * (1.0 - yi * yi))),
                        OpKind::Square => accumulate(ga, g.iter().zip(x.data()).map(|(gi, xi)| 2.0 * xi * gi)),
                        OpKind::Log => accumulate(ga, g.iter().zip(x.data()).map(|(gi, xi)| gi / xi)),
                        OpKind::Sum => {
                            let g0 = g[0];
                            ga.iter_mut().for_each(|v| *v += g0);
                        }
                        OpKind::Mean => {
                            let g0 = g[0] / x.numel() as f64;
                            ga.iter_mut().for_each(|v| *v += g0);
                        }
                        OpKind::Softmax => {
                            let cols = y.last_dim();
                            for ((grow, yrow), garow) in
                                g.chunks(cols).zip(y.data().chunks(cols)).zip(ga.chunks_mut(cols))
                            {
                                let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                                for ((out, gi), yi) in garow.iter_mut().zip(grow).zip(yrow) {
                                    *out += yi * (gi - dot);
                                }
                            }
                        }
                        _ => unreachable!(),
                    }
                }
                Op::Binary(kind, a, b, bc) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let (da, db) = match kind {
                        OpKind::MatMul => matmul_backward(va, vb, &upstream),
                        OpKind::Add => (upstream.clone(), upstream.clone()),
                        OpKind::Sub => (upstream.clone(), upstream.map(|v| -v)),
                        OpKind::Mul => {
                            let (ea, eb) = match bc {
                                Broadcast::None => (vb.clone(), va.clone()),
                                Broadcast::Rhs => (tile_rows(vb, va.numel()), va.clone()),
                                Broadcast::Lhs => (vb.clone(), tile_rows(va, vb.numel())),
                            };
                            (hadamard(&upstream, &ea), hadamard(&upstream, &eb))
                        }
                        _ => unreachable!(),
                    };
                    let (da, db) = match bc {
                        Broadcast::None => (da, db),
                        Broadcast::Rhs => (da, fold_rows(&db, vb.numel())),
                        Broadcast::Lhs => (fold_rows(&da, va.numel()), db),
                    };
                    accumulate(grads[a.0].data_mut(), da.data().iter().copied());
                    accumulate(grads[b.0].data_mut(), db.data().iter().copied());
                }
                Op::Concat(parts) => {
                    let cols = node.value.last_dim();
                    let mut offset = 0;
                    for part in parts {
                        let w = self.value(*part).last_dim();
                        let gp = grads[part.0].data_mut();
                        for (row, grow) in upstream.data().chunks(cols).enumerate() {
                            for (j, gv) in grow[offset..offset + w].iter().enumerate() {
                                gp[row * w + j] += gv;
                            }
                        }
                        offset += w;
                    }
                }
            }
            grads[idx] = upstream;
        }
        Ok(Gradients { grads })
    }
}

fn accumulate(dst: &mut [f64], src: impl Iterator<Item = f64>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn broadcast_kind(op: &'static str, a: &Tensor, b: &Tensor) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        Ok(Broadcast::None)
    } else if !a.shape().is_empty() && &a.shape()[1..] == b.shape() {
        Ok(Broadcast::Rhs)
    } else if !b.shape().is_empty() && &b.shape()[1..] == a.shape() {
        Ok(Broadcast::Lhs)
    } else {
        Err(shape_err(op, format!("cannot combine {:?} with {:?}", a.shape(), b.shape())))
    }
}

fn elementwise(a: &Tensor, b: &Tensor, bc: Broadcast, f: fn(f64, f64) -> f64) -> Tensor {
    let (shape, data) = match bc {
        Broadcast::None => (a.shape(), a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect()),
        Broadcast::Rhs => (a.shape(), a.data().iter().zip(b.data().iter().cycle()).map(|(x, y)| f(*x, *y)).collect()),
        Broadcast::Lhs => (b.shape(), a.data().iter().cycle().zip(b.data()).map(|(x, y)| f(*x, *y)).collect()),
    };
    Tensor::new(shape.to_vec(), data).expect("broadcast shape")
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    elementwise(a, b, Broadcast::None, |x, y| x * y)
}

/// Repeats a per-row tensor `n / numel` times along a new leading axis.
fn tile_rows(t: &Tensor, n: usize) -> Tensor {
    let data: Vec<f64> = t.data().iter().copied().cycle().take(n).collect();
    let mut shape = vec![n / t.numel().max(1)];
    shape.extend_from_slice(t.shape());
    Tensor::new(shape, data).expect("tile shape")
}

/// Sums a batched adjoint over its leading axis down to `width` values.
fn fold_rows(g: &Tensor, width: usize) -> Tensor {
    let mut out = vec![0.0; width];
    for row in g.data().chunks(width.max(1)) {
        accumulate(&mut out, row.iter().copied());
    }
    let shape = g.shape()[1..].to_vec();
    Tensor::new(shape, out).expect("fold shape")
}

fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (&[m, k], &[k2, n]) = (a.shape(), b.shape()) else {
        return Err(shape_err("matmul", format!("expects 2-d operands, got {:?} and {:?}", a.shape(), b.shape())));
    };
    if k != k2 {
        return Err(shape_err("matmul", format!("inner dims differ: {:?} x {:?}", a.shape(), b.shape())));
    }
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, bv) in row.iter_mut().zip(&bd[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

fn matmul_backward(a: &Tensor, b: &Tensor, g: &Tensor) -> (Tensor, Tensor) {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let (ad, bd, gd) = (a.data(), b.data(), g.data());
    // dA = G · Bᵀ
    let mut da = vec![0.0; m * k];
    for i in 0..m {
        let grow = &gd[i * n..(i + 1) * n];
        for p in 0..k {
            da[i * k + p] = grow.iter().zip(&bd[p * n..(p + 1) * n]).map(|(x, y)| x * y).sum();
        }
    }
    // dB = Aᵀ · G
    let mut db = vec![0.0; k * n];
    for i in 0..m {
        let grow = &gd[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = ad[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, gv) in db[p * n..(p + 1) * n].iter_mut().zip(grow) {
                *o += aip * gv;
            }
        }
    }
    (Tensor::new(vec![m, k], da).expect("dA shape"), Tensor::new(vec![k, n], db).expect("dB shape"))
}

fn concat_last(parts: &[&Tensor]) -> Result<Tensor> {
    let lead = &parts[0].shape()[..parts[0].shape().len().saturating_sub(1)];
    if parts[0].shape().is_empty() {
        return Err(shape_err("concat", "scalars cannot be concatenated".into()));
    }
    for p in parts {
        let s = p.shape();
        if s.len() != parts[0].shape().len() || &s[..s.len() - 1] != lead {
            return Err(shape_err("concat", format!("leading dims differ: {:?} vs {:?}", parts[0].shape(), s)));
        }
    }
    let rows: usize = lead.iter().product();
    let widths: Vec<usize> = parts.iter().map(|p| p.last_dim()).collect();
    let total: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(rows * total);
    for r in 0..rows {
        for (p, &w) in parts.iter().zip(&widths) {
            data.extend_from_slice(&p.data()[r * w..(r + 1) * w]);
        }
    }
    let mut shape = lead.to_vec();
    shape.push(total);
    Tensor::new(shape, data)
}

fn softmax_last(v: &Tensor) -> Result<Tensor> {
    if v.shape().is_empty() || v.last_dim() == 0 {
        return Err(shape_err("softmax", format!("needs a non-empty last axis, got {:?}", v.shape())));
    }
    let cols = v.last_dim();
    let mut data = Vec::with_capacity(v.numel());
    for row in v.data().chunks(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let start = data.len();
        data.extend(row.iter().map(|x| libm::exp(x - max)));
        let z: f64 = data[start..].iter().sum();
        data[start..].iter_mut().for_each(|e| *e /= z);
    }
    Tensor::new(v.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_by_identity() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let eye = g.leaf(t(&[3, 3], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        let c = g.matmul(a, eye).unwrap();
        assert_eq!(g.value(c), g.value(a));
    }

    #[test]
    fn relu_definition() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![-1.0, 0.0, 2.0])).unwrap();
        let y = g.relu(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn softmax_of_constant_is_uniform() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![7.5, 7.5, 7.5])).unwrap();
        let y = g.softmax(x).unwrap();
        for v in g.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1000.0, 1000.0])).unwrap();
        let y = g.softmax(x).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn square_derivative() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::scalar(3.0)).unwrap();
        let y = g.mul(x, x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(x).data(), &[6.0]);
    }

    #[test]
    fn unreachable_leaf_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0])).unwrap();
        let unused = g.leaf(Tensor::vector(vec![3.0, 4.0])).unwrap();
        let y = g.sum(x).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(unused).data(), &[0.0, 0.0]);
        assert_eq!(grads.get(x).data(), &[1.0, 1.0]);
    }

    #[test]
    fn bias_broadcast_gradient_sums_over_batch() {
        let mut g = Graph::new();
        let x = g.leaf(t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])).unwrap();
        let b = g.leaf(Tensor::vector(vec![0.5, -0.5])).unwrap();
        let y = g.add(x, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, 1.5, 3.5, 3.5, 5.5, 5.5]);
        let s = g.sum(y).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(b).data(), &[3.0, 3.0]);
        assert_eq!(grads.get(b).shape(), &[2]);
    }

    #[test]
    fn errors_on_bad_shapes() {
        let mut g = Graph::new();
        let a = g.leaf(t(&[2, 3], &[0.0; 6])).unwrap();
        let b = g.leaf(t(&[2, 3], &[0.0; 6])).unwrap();
        assert!(matches!(g.matmul(a, b), Err(Error::ShapeMismatch { op: "matmul", .. })));
        let c = g.leaf(Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert!(matches!(g.add(a, c), Err(Error::ShapeMismatch { op: "add", .. })));
        assert!(g.forward_op(OpKind::Add, &[a]).is_err());
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut g = Graph::new();
        assert_eq!(g.leaf(Tensor::scalar(f64::NAN)), Err(Error::NonFinite { op: "leaf" }));
        let z = g.leaf(Tensor::vector(vec![0.0, 1.0])).unwrap();
        assert_eq!(g.log(z), Err(Error::NonFinite { op: "log" }));
    }

    #[test]
    fn backward_needs_scalar_root() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0, 2.0])).unwrap();
        assert_eq!(g.backward(x), Err(Error::NonScalarRoot { numel: 2 }));
    }

    #[test]
    fn mean_of_empty_batch_is_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[0, 3])).unwrap();
        assert_eq!(g.mean(x), Err(Error::EmptyInput("mean")));
    }

    #[test]
    fn constant_node_gradient_is_zero() {
        let mut g = Graph::new();
        let c = g.leaf(Tensor::scalar(4.0)).unwrap();
        let x = g.leaf(Tensor::scalar(2.0)).unwrap();
        let y = g.scale(x, 3.0).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(c).data(), &[0.0]);
        assert_eq!(grads.get(x).data(), &[3.0]);
    }
}
