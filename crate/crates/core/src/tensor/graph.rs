use std::collections::BTreeMap;

use super::array::{split_axis, Array, IndexArray, MAX_RANK};
use crate::error::{shape_err, Error, Result};

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// The closed set of differentiable operations.
#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    /// `[.., k] x [k, m] -> [.., m]`
    MatMul,
    Add,
    Sub,
    Mul,
    Concat {
        axis: usize,
    },
    Relu,
    Tanh,
    Softmax {
        axis: usize,
    },
    /// Gradient is routed to the first maximal position along the axis.
    ReduceMax {
        axis: usize,
    },
    ReduceSum {
        axis: usize,
    },
    ReduceMean {
        axis: usize,
    },
    Tile {
        axis: usize,
        factor: usize,
    },
    /// Output shape is `shape[..axis] ++ indices.shape ++ shape[axis + 1..]`.
    Gather {
        indices: IndexArray,
        axis: usize,
    },
    Reshape {
        shape: Vec<usize>,
    },
    Transpose {
        perm: Vec<usize>,
    },
    ScalarMul(f64),
}

/// Attribute value for building primitives by name.
#[derive(Clone, Debug, PartialEq)]
pub enum Attr {
    Int(usize),
    Float(f64),
    Ints(Vec<usize>),
    Indices(IndexArray),
}

pub type Attrs = BTreeMap<String, Attr>;

impl Primitive {
    pub fn name(&self) -> &'static str {
        match self {
            Primitive::MatMul => "matmul",
            Primitive::Add => "add",
            Primitive::Sub => "subtract",
            Primitive::Mul => "multiply",
            Primitive::Concat { .. } => "concat",
            Primitive::Relu => "relu",
            Primitive::Tanh => "tanh",
            Primitive::Softmax { .. } => "softmax",
            Primitive::ReduceMax { .. } => "reduce_max",
            Primitive::ReduceSum { .. } => "reduce_sum",
            Primitive::ReduceMean { .. } => "reduce_mean",
            Primitive::Tile { .. } => "tile",
            Primitive::Gather { .. } => "gather",
            Primitive::Reshape { .. } => "reshape",
            Primitive::Transpose { .. } => "transpose",
            Primitive::ScalarMul(_) => "scalar_mul",
        }
    }

    /// Looks a primitive up by its kind name, pulling attributes from `attrs`.
    pub fn from_name(name: &str, attrs: &Attrs) -> Result<Self> {
        let missing = |attr| Error::MissingAttr {
            op: name.to_string(),
            attr,
        };
        let int = |key: &'static str| match attrs.get(key) {
            Some(Attr::Int(v)) => Ok(*v),
            _ => Err(missing(key)),
        };
        let ints = |key: &'static str| match attrs.get(key) {
            Some(Attr::Ints(v)) => Ok(v.clone()),
            _ => Err(missing(key)),
        };
        Ok(match name {
            "matmul" => Primitive::MatMul,
            "add" => Primitive::Add,
            "subtract" | "sub" => Primitive::Sub,
            "multiply" | "mul" => Primitive::Mul,
            "concat" => Primitive::Concat { axis: int("axis")? },
            "relu" => Primitive::Relu,
            "tanh" => Primitive::Tanh,
            "softmax" => Primitive::Softmax { axis: int("axis")? },
            "reduce_max" => Primitive::ReduceMax { axis: int("axis")? },
            "reduce_sum" => Primitive::ReduceSum { axis: int("axis")? },
            "reduce_mean" => Primitive::ReduceMean { axis: int("axis")? },
            "tile" => Primitive::Tile {
                axis: int("axis")?,
                factor: int("factor")?,
            },
            "gather" => Primitive::Gather {
                axis: int("axis")?,
                indices: match attrs.get("indices") {
                    Some(Attr::Indices(ix)) => ix.clone(),
                    _ => return Err(missing("indices")),
                },
            },
            "reshape" => Primitive::Reshape { shape: ints("shape")? },
            "transpose" => Primitive::Transpose { perm: ints("perm")? },
            "scalar_mul" => match attrs.get("factor") {
                Some(Attr::Float(c)) => Primitive::ScalarMul(*c),
                _ => return Err(missing("factor")),
            },
            other => return Err(Error::UnknownPrimitive(other.to_string())),
        })
    }
}

pub(crate) struct Node {
    pub(crate) op: Option<Primitive>,
    pub(crate) inputs: Vec<NodeId>,
    pub(crate) value: Array,
    pub(crate) requires_grad: bool,
    /// Argmax positions for `ReduceMax`.
    pub(crate) saved: Vec<usize>,
}

/// Eagerly evaluated computation graph. Nodes are appended in creation
/// order, which is a valid topological order.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives a gradient.
    pub fn input(&mut self, value: Array) -> NodeId {
        self.leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Array) -> NodeId {
        self.leaf(value, false)
    }

    fn leaf(&mut self, value: Array, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op: None,
            inputs: Vec::new(),
            value,
            requires_grad,
            saved: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn op(&self, id: NodeId) -> Option<&Primitive> {
        self.nodes[id.0].op.as_ref()
    }

    pub fn inputs(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id.0].inputs
    }

    /// Applies a primitive by kind name.
    pub fn apply_named(&mut self, kind: &str, inputs: &[NodeId], attrs: &Attrs) -> Result<NodeId> {
        let prim = Primitive::from_name(kind, attrs)?;
        self.apply(prim, inputs)
    }

    pub fn apply(&mut self, prim: Primitive, inputs: &[NodeId]) -> Result<NodeId> {
        let arity = match prim {
            Primitive::MatMul | Primitive::Add | Primitive::Sub | Primitive::Mul => 2,
            Primitive::Concat { .. } => inputs.len().max(1),
            _ => 1,
        };
        if inputs.len() != arity {
            return Err(Error::InvalidArgument(format!(
                "{} expects {arity} inputs, got {}",
                prim.name(),
                inputs.len()
            )));
        }
        let vals: Vec<&Array> = inputs.iter().map(|&i| &self.nodes[i.0].value).collect();
        let mut saved = Vec::new();
        let value = forward(&prim, &vals, &mut saved)?;
        let requires_grad = inputs.iter().any(|&i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op: Some(prim),
            inputs: inputs.to_vec(),
            value,
            requires_grad,
            saved,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::MatMul, &[a, b])
    }
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Add, &[a, b])
    }
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Mul, &[a, b])
    }
    pub fn concat(&mut self, xs: &[NodeId], axis: usize) -> Result<NodeId> {
        self.apply(Primitive::Concat { axis }, xs)
    }
    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Relu, &[x])
    }
    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.apply(Primitive::Tanh, &[x])
    }
    pub fn softmax(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.apply(Primitive::Softmax { axis }, &[x])
    }
    pub fn reduce_max(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.apply(Primitive::ReduceMax { axis }, &[x])
    }
    pub fn reduce_sum(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.apply(Primitive::ReduceSum { axis }, &[x])
    }
    pub fn reduce_mean(&mut self, x: NodeId, axis: usize) -> Result<NodeId> {
        self.apply(Primitive::ReduceMean { axis }, &[x])
    }
    pub fn tile(&mut self, x: NodeId, axis: usize, factor: usize) -> Result<NodeId> {
        self.apply(Primitive::Tile { axis, factor }, &[x])
    }
    pub fn gather(&mut self, x: NodeId, indices: IndexArray, axis: usize) -> Result<NodeId> {
        self.apply(Primitive::Gather { indices, axis }, &[x])
    }
    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.apply(Primitive::Reshape { shape: shape.to_vec() }, &[x])
    }
    pub fn transpose(&mut self, x: NodeId, perm: &[usize]) -> Result<NodeId> {
        self.apply(Primitive::Transpose { perm: perm.to_vec() }, &[x])
    }
    pub fn scalar_mul(&mut self, x: NodeId, factor: f64) -> Result<NodeId> {
        self.apply(Primitive::ScalarMul(factor), &[x])
    }
}

/// Output shape with `axis` removed; rank-1 inputs reduce to shape `[1]`.
pub(crate) fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut out: Vec<usize> = shape.to_vec();
    out.remove(axis);
    if out.is_empty() {
        out.push(1);
    }
    out
}

/// Broadcast rule: equal shapes, the smaller operand's shape is a trailing
/// suffix of the larger one, or the smaller operand has a single element.
/// Returns the output shape.
pub(crate) fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let la: usize = a.iter().product();
    let lb: usize = b.iter().product();
    let (big, small, small_len) = if la >= lb { (a, b, lb) } else { (b, a, la) };
    if small_len == 1 || big.ends_with(small) {
        Ok(big.to_vec())
    } else {
        Err(shape_err(op, &[a, b]))
    }
}

fn check_axis(op: &'static str, shape: &[usize], axis: usize) -> Result<()> {
    if axis >= shape.len() {
        return Err(Error::ShapeMismatch {
            op,
            shapes: format!("axis {axis} out of range for {shape:?}"),
        });
    }
    Ok(())
}

/// `f(a_i, b_i)` where the shorter operand repeats cyclically; its length
/// must divide the longer one's.
pub(crate) fn zip_broadcast(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let (la, lb) = (a.len(), b.len());
    if la == lb {
        a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect()
    } else if lb == 1 {
        a.iter().map(|&p| f(p, b[0])).collect()
    } else if la == 1 {
        b.iter().map(|&q| f(a[0], q)).collect()
    } else if lb < la {
        a.chunks_exact(lb)
            .flat_map(|c| c.iter().zip(b).map(|(&p, &q)| f(p, q)))
            .collect()
    } else {
        b.chunks_exact(la)
            .flat_map(|c| a.iter().zip(c).map(|(&p, &q)| f(p, q)))
            .collect()
    }
}

/// Sums consecutive blocks of `len` elements; `len` must divide `full.len()`.
pub(crate) fn fold_blocks(full: Vec<f64>, len: usize) -> Vec<f64> {
    if full.len() == len {
        return full;
    }
    let mut out = vec![0.0; len];
    for chunk in full.chunks_exact(len) {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    out
}

pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: (&[f64], isize, isize),
    b: (&[f64], isize, isize),
    c: &mut [f64],
    beta: f64,
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the caller's strides address elements inside `a`, `b`, and `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.0.as_ptr(),
            a.1,
            a.2,
            b.0.as_ptr(),
            b.1,
            b.2,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn forward(prim: &Primitive, x: &[&Array], saved: &mut Vec<usize>) -> Result<Array> {
    let name = prim.name();
    Ok(match prim {
        Primitive::MatMul => {
            let (a, b) = (x[0], x[1]);
            let k = *a.shape().last().unwrap();
            if b.rank() != 2 || a.rank() < 2 || b.shape()[0] != k {
                return Err(shape_err(name, &[a.shape(), b.shape()]));
            }
            let m = b.shape()[1];
            let rows = a.len() / k;
            let mut out = vec![0.0; rows * m];
            gemm(
                rows,
                k,
                m,
                (a.data(), k as isize, 1),
                (b.data(), m as isize, 1),
                &mut out,
                0.0,
            );
            let mut shape = a.shape().to_vec();
            *shape.last_mut().unwrap() = m;
            Array::from_parts(shape, out)
        }
        Primitive::Add | Primitive::Sub | Primitive::Mul => {
            let (a, b) = (x[0], x[1]);
            let shape = broadcast_shape(name, a.shape(), b.shape())?;
            let n: usize = shape.iter().product();
            let (da, db) = (a.data(), b.data());
            let (la, lb) = (da.len(), db.len());
            let f: fn(f64, f64) -> f64 = match prim {
                Primitive::Add => |p, q| p + q,
                Primitive::Sub => |p, q| p - q,
                _ => |p, q| p * q,
            };
            debug_assert_eq!(n, la.max(lb));
            Array::from_parts(shape, zip_broadcast(da, db, f))
        }
        Primitive::Concat { axis } => {
            let axis = *axis;
            let first = x[0].shape();
            check_axis(name, first, axis)?;
            let mut total = 0;
            for a in x {
                let s = a.shape();
                let compatible =
                    s.len() == first.len() && s.iter().zip(first).enumerate().all(|(d, (p, q))| d == axis || p == q);
                if !compatible {
                    return Err(shape_err(name, &[first, s]));
                }
                total += s[axis];
            }
            let (outer, _, inner) = split_axis(first, axis);
            let mut data = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for a in x {
                    let w = a.shape()[axis] * inner;
                    data.extend_from_slice(&a.data()[o * w..(o + 1) * w]);
                }
            }
            let mut shape = first.to_vec();
            shape[axis] = total;
            Array::from_parts(shape, data)
        }
        Primitive::Relu => x[0].map(|v| v.max(0.0)),
        Primitive::Tanh => x[0].map(f64::tanh),
        Primitive::Softmax { axis } => {
            let a = x[0];
            check_axis(name, a.shape(), *axis)?;
            let (outer, n, inner) = split_axis(a.shape(), *axis);
            let src = a.data();
            let mut out = vec![0.0; a.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |j: usize| o * n * inner + j * inner + i;
                    let mx = (0..n).map(|j| src[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                    let mut total = 0.0;
                    for j in 0..n {
                        let e = (src[at(j)] - mx).exp();
                        out[at(j)] = e;
                        total += e;
                    }
                    for j in 0..n {
                        out[at(j)] /= total;
                    }
                }
            }
            Array::from_parts(a.shape().to_vec(), out)
        }
        Primitive::ReduceMax { axis } => {
            let a = x[0];
            check_axis(name, a.shape(), *axis)?;
            let (outer, n, inner) = split_axis(a.shape(), *axis);
            let src = a.data();
            let mut out = Vec::with_capacity(outer * inner);
            saved.reserve(outer * inner);
            for o in 0..outer {
                for i in 0..inner {
                    let base = o * n * inner + i;
                    let mut best = 0;
                    let mut best_v = src[base];
                    for j in 1..n {
                        let v = src[base + j * inner];
                        if v > best_v {
                            best = j;
                            best_v = v;
                        }
                    }
                    out.push(best_v);
                    saved.push(best);
                }
            }
            Array::from_parts(reduced_shape(a.shape(), *axis), out)
        }
        Primitive::ReduceSum { axis } | Primitive::ReduceMean { axis } => {
            let a = x[0];
            check_axis(name, a.shape(), *axis)?;
            let (outer, n, inner) = split_axis(a.shape(), *axis);
            let src = a.data();
            let mut out = vec![0.0; outer * inner];
            for o in 0..outer {
                for j in 0..n {
                    let row = &src[(o * n + j) * inner..(o * n + j + 1) * inner];
                    for (acc, v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            if matches!(prim, Primitive::ReduceMean { .. }) {
                let inv = 1.0 / n as f64;
                out.iter_mut().for_each(|v| *v *= inv);
            }
            Array::from_parts(reduced_shape(a.shape(), *axis), out)
        }
        Primitive::Tile { axis, factor } => {
            let a = x[0];
            check_axis(name, a.shape(), *axis)?;
            if *factor == 0 {
                return Err(shape_err(name, &[a.shape()]));
            }
            let (outer, n, inner) = split_axis(a.shape(), *axis);
            let block = n * inner;
            let mut data = Vec::with_capacity(a.len() * factor);
            for o in 0..outer {
                let src = &a.data()[o * block..(o + 1) * block];
                for _ in 0..*factor {
                    data.extend_from_slice(src);
                }
            }
            let mut shape = a.shape().to_vec();
            shape[*axis] *= factor;
            Array::from_parts(shape, data)
        }
        Primitive::Gather { indices, axis } => {
            let a = x[0];
            check_axis(name, a.shape(), *axis)?;
            let (outer, n, inner) = split_axis(a.shape(), *axis);
            let mut shape = a.shape()[..*axis].to_vec();
            shape.extend_from_slice(indices.shape());
            shape.extend_from_slice(&a.shape()[axis + 1..]);
            if shape.len() > MAX_RANK || indices.data().iter().any(|&i| i >= n) {
                return Err(shape_err(name, &[a.shape(), indices.shape()]));
            }
            let src = a.data();
            let mut data = Vec::with_capacity(outer * indices.len() * inner);
            for o in 0..outer {
                for &ix in indices.data() {
                    let start = (o * n + ix) * inner;
                    data.extend_from_slice(&src[start..start + inner]);
                }
            }
            Array::from_parts(shape, data)
        }
        Primitive::Reshape { shape } => x[0].clone().reshape(shape)?,
        Primitive::Transpose { perm } => {
            let a = x[0];
            let rank = a.rank();
            let mut seen = perm.clone();
            seen.sort_unstable();
            if perm.len() != rank || seen.iter().enumerate().any(|(i, &p)| i != p) {
                return Err(Error::ShapeMismatch {
                    op: name,
                    shapes: format!("perm {perm:?} invalid for {:?}", a.shape()),
                });
            }
            transpose(a, perm)
        }
        Primitive::ScalarMul(c) => x[0].map(|v| v * c),
    })
}

pub(crate) fn transpose(a: &Array, perm: &[usize]) -> Array {
    let shape = a.shape();
    let rank = shape.len();
    let mut strides = vec![1usize; rank];
    for d in (0..rank.saturating_sub(1)).rev() {
        strides[d] = strides[d + 1] * shape[d + 1];
    }
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let out_strides: Vec<usize> = perm.iter().map(|&p| strides[p]).collect();
    let mut data = Vec::with_capacity(a.len());
    let mut idx = vec![0usize; rank];
    let src = a.data();
    for _ in 0..a.len() {
        let off: usize = idx.iter().zip(&out_strides).map(|(i, s)| i * s).sum();
        data.push(src[off]);
        for d in (0..rank).rev() {
            idx[d] += 1;
            if idx[d] < out_shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Array::from_parts(out_shape, data)
}

pub(crate) fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr(shape: &[usize], data: &[f64]) -> Array {
        Array::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_shape_contract() {
        let mut g = Graph::new();
        let a = g.input(Array::from_fn(&[2, 3], |i| i as f64));
        let b = g.input(Array::from_fn(&[3, 4], |i| i as f64));
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.shape(c), &[2, 4]);
        // row 0 = [0,1,2] . cols
        assert_eq!(g.value(c).row(0), &[20.0, 23.0, 26.0, 29.0]);
        assert!(matches!(g.matmul(b, a), Err(Error::ShapeMismatch { op: "matmul", .. })));
    }

    #[test]
    fn softmax_of_equal_logits_is_uniform() {
        let mut g = Graph::new();
        let x = g.input(arr(&[1, 2], &[0.0, 0.0]));
        let y = g.softmax(x, 1).unwrap();
        assert_eq!(g.value(y).data(), &[0.5, 0.5]);
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let mut g = Graph::new();
        let x = g.input(Array::scalar(1.0));
        let err = g.apply_named("conv7d", &[x], &Attrs::new()).unwrap_err();
        assert!(matches!(err, Error::UnknownPrimitive(k) if k == "conv7d"));
        let err = g.apply_named("softmax", &[x], &Attrs::new()).unwrap_err();
        assert!(matches!(err, Error::MissingAttr { .. }));
    }

    #[test]
    fn broadcast_over_leading_axes() {
        let mut g = Graph::new();
        let a = g.input(Array::from_fn(&[2, 2, 3], |i| i as f64));
        let b = g.input(arr(&[3], &[10.0, 20.0, 30.0]));
        let c = g.add(a, b).unwrap();
        assert_eq!(g.value(c).get(&[1, 1, 2]), 41.0);
        let s = g.input(Array::scalar(2.0));
        let d = g.mul(s, a).unwrap();
        assert_eq!(g.shape(d), &[2, 2, 3]);
        let bad = g.input(arr(&[2], &[1.0, 1.0]));
        assert!(g.add(a, bad).is_err());
    }

    #[test]
    fn gather_matches_index_loop() {
        let pts = Array::from_fn(&[5, 3], |i| (i * 7 % 11) as f64);
        let ix = IndexArray::new(vec![5, 2], vec![0, 4, 1, 1, 3, 2, 4, 0, 2, 3]).unwrap();
        let mut g = Graph::new();
        let p = g.input(pts.clone());
        let out = g.gather(p, ix.clone(), 0).unwrap();
        assert_eq!(g.shape(out), &[5, 2, 3]);
        for i in 0..5 {
            for j in 0..2 {
                for c in 0..3 {
                    let want = pts.get(&[ix.data()[i * 2 + j], c]);
                    assert_eq!(g.value(out).get(&[i, j, c]), want);
                }
            }
        }
    }

    #[test]
    fn tile_concat_transpose() {
        let mut g = Graph::new();
        let a = g.input(arr(&[2, 1, 2], &[1.0, 2.0, 3.0, 4.0]));
        let t = g.tile(a, 1, 3).unwrap();
        assert_eq!(g.shape(t), &[2, 3, 2]);
        assert_eq!(g.value(t).get(&[1, 2, 1]), 4.0);
        let c = g.concat(&[a, a], 2).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 1.0, 2.0, 3.0, 4.0, 3.0, 4.0]);
        let m = g.input(Array::from_fn(&[2, 3], |i| i as f64));
        let mt = g.transpose(m, &[1, 0]).unwrap();
        assert_eq!(g.value(mt).data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
    }

    #[test]
    fn reduce_max_keeps_first_tie() {
        let mut g = Graph::new();
        let x = g.input(arr(&[3], &[3.0, 3.0, 1.0]));
        let m = g.reduce_max(x, 0).unwrap();
        assert_eq!(g.value(m).data(), &[3.0]);
        assert_eq!(g.nodes[m.0].saved, vec![0]);
    }
}
