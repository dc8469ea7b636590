use crate::cloud::{nearest_dist2, Point};
use crate::error::{shape_err, Error, Result};
use crate::tensor::{Graph, IndexArray, NodeId};

fn points_of(g: &Graph, id: NodeId) -> Result<Vec<Point>> {
    let v = g.value(id);
    if v.rank() != 2 || v.shape()[1] != 3 {
        return Err(shape_err("chamfer", &[v.shape()]));
    }
    Ok(v.data().chunks(3).map(|r| [r[0], r[1], r[2]]).collect())
}

/// Mean over rows of `a` of the squared distance to the matched row of `b`.
fn directed(g: &mut Graph, a: NodeId, b: NodeId, matches: Vec<usize>) -> Result<NodeId> {
    let n = matches.len();
    let idx = IndexArray::new(vec![n], matches)?;
    let matched = g.gather(b, idx, 0)?;
    let diff = g.sub(a, matched)?;
    let sq = g.mul(diff, diff)?;
    let per_point = g.reduce_sum(sq, 1)?;
    g.reduce_mean(per_point, 0)
}

/// Differentiable squared Chamfer distance between two `M x 3` nodes.
///
/// Nearest neighbors are found on the forward values and held fixed, so the
/// gradient flows through the matched pairs only.
pub fn chamfer_node(g: &mut Graph, a: NodeId, b: NodeId) -> Result<NodeId> {
    let pa = points_of(g, a)?;
    let pb = points_of(g, b)?;
    let ab = nearest_dist2(&pb, &pa).into_iter().map(|(i, _)| i).collect();
    let ba = nearest_dist2(&pa, &pb).into_iter().map(|(i, _)| i).collect();
    let forward = directed(g, a, b, ab)?;
    let backward = directed(g, b, a, ba)?;
    let sum = g.add(forward, backward)?;
    g.scalar_mul(sum, 0.5)
}

pub struct LossNodes {
    pub total: NodeId,
    /// `CD(Q', target)`.
    pub coarse: NodeId,
    /// `CD(Q, target)`; absent when the model has no refiner.
    pub refined: Option<NodeId>,
}

/// `CD(Q', target) + lambda * CD(Q, target)`, or the coarse term alone when
/// `refined` is `None`.
pub fn total_loss(
    g: &mut Graph,
    coarse: NodeId,
    refined: Option<NodeId>,
    target: NodeId,
    lambda: f64,
) -> Result<LossNodes> {
    let expected = g.shape(target).to_vec();
    for id in std::iter::once(coarse).chain(refined) {
        if g.shape(id) != expected.as_slice() {
            return Err(Error::ShapeMismatch {
                op: "total_loss",
                shapes: format!("{:?} vs target {:?}", g.shape(id), expected),
            });
        }
    }
    let coarse_cd = chamfer_node(g, coarse, target)?;
    let Some(refined) = refined else {
        return Ok(LossNodes {
            total: coarse_cd,
            coarse: coarse_cd,
            refined: None,
        });
    };
    let refined_cd = chamfer_node(g, refined, target)?;
    let weighted = g.scalar_mul(refined_cd, lambda)?;
    let total = g.add(coarse_cd, weighted)?;
    Ok(LossNodes {
        total,
        coarse: coarse_cd,
        refined: Some(refined_cd),
    })
}
