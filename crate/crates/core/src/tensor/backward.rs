use super::array::{split_axis, Array};
use super::graph::{fold_blocks, gemm, inverse_perm, transpose, zip_broadcast, Graph, NodeId, Primitive};
use crate::error::{Error, Result};

/// Gradients of a scalar root with respect to every node that requires one.
pub struct Gradients {
    grads: Vec<Option<Array>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Array> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: NodeId) -> Option<Array> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }

    /// Iterates over `(node, gradient)` pairs in creation order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, &Array)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|g| (NodeId(i), g)))
    }
}

impl Graph {
    /// Reverse-mode sweep from a single-element root.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        let root_value = self.value(root);
        if root_value.len() != 1 {
            return Err(Error::NonScalarRoot(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Array>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Array::full(root_value.shape(), 1.0));

        for id in (0..=root.0).rev() {
            let node = &self.nodes[id];
            let Some(op) = &node.op else { continue };
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let needs: Vec<bool> = node.inputs.iter().map(|i| self.nodes[i.0].requires_grad).collect();
            let contributions = self.vjp(op, id, &g, &needs);
            for ((input, contribution), need) in node.inputs.iter().zip(contributions).zip(&needs) {
                let Some(c) = contribution else { continue };
                if !need {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.add_assign(&c),
                    slot @ None => *slot = Some(c),
                }
            }
            // Leaves and the root keep their gradients; interior nodes only
            // needed theirs to propagate, but callers may still query them.
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Vector-Jacobian product of one node's upstream gradient `g`.
    fn vjp(&self, op: &Primitive, id: usize, g: &Array, needs: &[bool]) -> Vec<Option<Array>> {
        let node = &self.nodes[id];
        let input = |k: usize| &self.nodes[node.inputs[k].0].value;
        match op {
            Primitive::MatMul => {
                let (a, b) = (input(0), input(1));
                let k = b.shape()[0];
                let m = b.shape()[1];
                let rows = a.len() / k;
                let da = needs[0].then(|| {
                    let mut out = vec![0.0; a.len()];
                    gemm(
                        rows,
                        m,
                        k,
                        (g.data(), m as isize, 1),
                        (b.data(), 1, m as isize),
                        &mut out,
                        0.0,
                    );
                    Array::from_parts(a.shape().to_vec(), out)
                });
                let db = needs[1].then(|| {
                    let mut out = vec![0.0; b.len()];
                    gemm(
                        k,
                        rows,
                        m,
                        (a.data(), 1, k as isize),
                        (g.data(), m as isize, 1),
                        &mut out,
                        0.0,
                    );
                    Array::from_parts(b.shape().to_vec(), out)
                });
                vec![da, db]
            }
            Primitive::Add | Primitive::Sub | Primitive::Mul => {
                let (a, b) = (input(0), input(1));
                let gd = g.data();
                // Upstream gradient times the local derivative, then summed
                // back down to the operand's own (possibly broadcast) size.
                let operand_grad = |own: &Array, other: &Array, sign: f64| {
                    let full = match op {
                        Primitive::Mul => zip_broadcast(gd, other.data(), |p, q| p * q),
                        _ if sign < 0.0 => gd.iter().map(|v| -v).collect(),
                        _ => gd.to_vec(),
                    };
                    Array::from_parts(own.shape().to_vec(), fold_blocks(full, own.len()))
                };
                let da = needs[0].then(|| operand_grad(a, b, 1.0));
                let sign = if matches!(op, Primitive::Sub) { -1.0 } else { 1.0 };
                let db = needs[1].then(|| operand_grad(b, a, sign));
                vec![da, db]
            }
            Primitive::Concat { axis } => {
                let (outer, total, inner) = split_axis(g.shape(), *axis);
                let mut offset = 0;
                node.inputs
                    .iter()
                    .zip(needs)
                    .map(|(i, &need)| {
                        let v = &self.nodes[i.0].value;
                        let n = v.shape()[*axis];
                        let part = need.then(|| {
                            let mut out = Vec::with_capacity(v.len());
                            for o in 0..outer {
                                let start = (o * total + offset) * inner;
                                out.extend_from_slice(&g.data()[start..start + n * inner]);
                            }
                            Array::from_parts(v.shape().to_vec(), out)
                        });
                        offset += n;
                        part
                    })
                    .collect()
            }
            Primitive::Relu => {
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gi, &yi)| if yi > 0.0 { *gi } else { 0.0 })
                    .collect();
                vec![Some(Array::from_parts(g.shape().to_vec(), data))]
            }
            Primitive::Tanh => {
                let y = &node.value;
                let data = g
                    .data()
                    .iter()
                    .zip(y.data())
                    .map(|(gi, yi)| gi * (1.0 - yi * yi))
                    .collect();
                vec![Some(Array::from_parts(g.shape().to_vec(), data))]
            }
            Primitive::Softmax { axis } => {
                let y = node.value.data();
                let (outer, n, inner) = split_axis(g.shape(), *axis);
                let gd = g.data();
                let mut out = vec![0.0; g.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| o * n * inner + j * inner + i;
                        let dot: f64 = (0..n).map(|j| gd[at(j)] * y[at(j)]).sum();
                        for j in 0..n {
                            out[at(j)] = y[at(j)] * (gd[at(j)] - dot);
                        }
                    }
                }
                vec![Some(Array::from_parts(g.shape().to_vec(), out))]
            }
            Primitive::ReduceMax { axis } => {
                let x = input(0);
                let (outer, n, inner) = split_axis(x.shape(), *axis);
                let mut out = vec![0.0; x.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let r = o * inner + i;
                        let j = node.saved[r];
                        out[o * n * inner + j * inner + i] += g.data()[r];
                    }
                }
                vec![Some(Array::from_parts(x.shape().to_vec(), out))]
            }
            Primitive::ReduceSum { axis } | Primitive::ReduceMean { axis } => {
                let x = input(0);
                let (outer, n, inner) = split_axis(x.shape(), *axis);
                let scale = if matches!(op, Primitive::ReduceMean { .. }) {
                    1.0 / n as f64
                } else {
                    1.0
                };
                let mut out = Vec::with_capacity(x.len());
                for o in 0..outer {
                    let row = &g.data()[o * inner..(o + 1) * inner];
                    for _ in 0..n {
                        out.extend(row.iter().map(|v| v * scale));
                    }
                }
                vec![Some(Array::from_parts(x.shape().to_vec(), out))]
            }
            Primitive::Tile { axis, factor } => {
                let x = input(0);
                let (outer, n, inner) = split_axis(x.shape(), *axis);
                let block = n * inner;
                let mut out = vec![0.0; x.len()];
                for o in 0..outer {
                    let dst = &mut out[o * block..(o + 1) * block];
                    for f in 0..*factor {
                        let start = (o * factor + f) * block;
                        for (d, s) in dst.iter_mut().zip(&g.data()[start..start + block]) {
                            *d += s;
                        }
                    }
                }
                vec![Some(Array::from_parts(x.shape().to_vec(), out))]
            }
            Primitive::Gather { indices, axis } => {
                let x = input(0);
                let (outer, n, inner) = split_axis(x.shape(), *axis);
                let mut out = vec![0.0; x.len()];
                let gd = g.data();
                let mut pos = 0;
                for o in 0..outer {
                    for &ix in indices.data() {
                        let start = (o * n + ix) * inner;
                        for (d, s) in out[start..start + inner].iter_mut().zip(&gd[pos..pos + inner]) {
                            *d += s;
                        }
                        pos += inner;
                    }
                }
                vec![Some(Array::from_parts(x.shape().to_vec(), out))]
            }
            Primitive::Reshape { .. } => {
                let x = input(0);
                vec![Some(Array::from_parts(x.shape().to_vec(), g.data().to_vec()))]
            }
            Primitive::Transpose { perm } => vec![Some(transpose(g, &inverse_perm(perm)))],
            Primitive::ScalarMul(c) => vec![Some(g.map(|v| v * c))],
        }
    }
}
