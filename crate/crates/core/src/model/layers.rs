use crate::error::Result;
use crate::tensor::{BoundParams, Graph, NodeId};

/// `x @ weight + bias` applied to the last axis.
pub(crate) fn linear(g: &mut Graph, p: &BoundParams, prefix: &str, x: NodeId) -> Result<NodeId> {
    let w = p.get(&format!("{prefix}.weight"))?;
    let b = p.get(&format!("{prefix}.bias"))?;
    let y = g.matmul(x, w)?;
    g.add(y, b)
}

/// Stack of shared linear layers with ReLU between them. `relu_last`
/// controls the activation after the final layer.
pub(crate) fn mlp(
    g: &mut Graph,
    p: &BoundParams,
    prefix: &str,
    layers: usize,
    x: NodeId,
    relu_last: bool,
) -> Result<NodeId> {
    let mut h = x;
    for i in 0..layers {
        h = linear(g, p, &format!("{prefix}.{i}"), h)?;
        if i + 1 < layers || relu_last {
            h = g.relu(h)?;
        }
    }
    Ok(h)
}
