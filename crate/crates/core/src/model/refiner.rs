//! Spatial refiner: local and global refinement units whose summed features
//! drive a per-point offset head.

use super::config::{ModelConfig, Variant};
use super::layers::{linear, mlp};
use crate::cloud::knn_rows;
use crate::error::{Error, Result};
use crate::tensor::{BoundParams, Graph, Initializer, NodeId};

pub(crate) fn init(init: &mut Initializer, cfg: &ModelConfig) -> Result<()> {
    let c = cfg.c;
    let v = cfg.variant;
    if v.has_local() {
        init.linear("refiner.local.f_mlp.0", c + 5, c)?;
        init.linear("refiner.local.pool_mlp.0", c, c)?;
        init.linear("refiner.local.w_mlp.0", 3, c)?;
        init.linear("refiner.local.w_mlp.1", c, c)?;
    }
    if v.has_global() {
        init.linear("refiner.global.embed.0", c + 5, c)?;
        init.linear("refiner.global.query", c, c / cfg.attn_reduction)?;
        init.linear("refiner.global.key", c, c / cfg.attn_reduction)?;
        init.linear("refiner.global.value", c, c)?;
        init.scalar("refiner.global.gamma", 0.0)?;
    }
    init.linear("refiner.head.0", c, c / 2)?;
    if v.has_offset() {
        init.zero_linear("refiner.head.1", c / 2, 3)
    } else {
        init.linear("refiner.head.1", c / 2, 3)
    }
}

/// Intermediate nodes of the local unit, exposed for inspection.
pub struct LocalNodes {
    pub output: NodeId,
    /// Normalized spatial weights, `rN x K x C`.
    pub weights: NodeId,
    /// Relative point volume, `rN x K x 3`.
    pub relative: NodeId,
}

/// Local refinement unit (`rN x C`).
///
/// Groups the K nearest coarse points (self included), encodes
/// `[neighbor - center, grouped F_E]` into `F_L`, and sums a max-pooled
/// branch with a branch weighting `F_L` by softmax-normalized spatial
/// weights regressed from the relative volume.
pub fn local_refine(
    g: &mut Graph,
    coarse: NodeId,
    expanded: NodeId,
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<LocalNodes> {
    let m = g.shape(coarse)[0];
    let k = cfg.k;
    if m < k {
        return Err(Error::NotEnoughPoints {
            requested: k,
            available: m,
        });
    }
    let idx = knn_rows(g.value(coarse).data(), g.value(coarse).data(), 3, k, true)?;
    let grouped_pts = g.gather(coarse, idx.clone(), 0)?;
    let centers = {
        let c = g.reshape(coarse, &[m, 1, 3])?;
        g.tile(c, 1, k)?
    };
    let relative = g.sub(grouped_pts, centers)?;
    let grouped_feat = g.gather(expanded, idx, 0)?;
    let encoded = g.concat(&[relative, grouped_feat], 2)?;
    let local = mlp(g, params, "refiner.local.f_mlp", 1, encoded, true)?;

    let pooled = {
        let h = mlp(g, params, "refiner.local.pool_mlp", 1, local, true)?;
        g.reduce_max(h, 1)?
    };
    let weights = {
        let w = mlp(g, params, "refiner.local.w_mlp", 2, relative, false)?;
        g.softmax(w, 1)?
    };
    let weighted = {
        let h = g.mul(weights, local)?;
        g.reduce_sum(h, 1)?
    };
    let output = g.add(pooled, weighted)?;
    Ok(LocalNodes {
        output,
        weights,
        relative,
    })
}

pub struct GlobalNodes {
    pub output: NodeId,
    /// Input embedding `x`.
    pub embedding: NodeId,
    /// Row-stochastic attention, `rN x rN`.
    pub attention: NodeId,
}

/// Global refinement unit (`rN x C`): self-attention over the embedding of
/// `[F_E, Q']`, blended back through a learnable scale `gamma`.
pub fn global_refine(
    g: &mut Graph,
    coarse: NodeId,
    expanded: NodeId,
    params: &BoundParams,
    _cfg: &ModelConfig,
) -> Result<GlobalNodes> {
    let input = g.concat(&[expanded, coarse], 1)?;
    let embedding = mlp(g, params, "refiner.global.embed", 1, input, true)?;
    let q = linear(g, params, "refiner.global.query", embedding)?;
    let k = linear(g, params, "refiner.global.key", embedding)?;
    let v = linear(g, params, "refiner.global.value", embedding)?;
    let kt = g.transpose(k, &[1, 0])?;
    let logits = g.matmul(q, kt)?;
    let attention = g.softmax(logits, 1)?;
    let attended = g.matmul(attention, v)?;
    let gamma = params.get("refiner.global.gamma")?;
    let scaled = g.mul(gamma, attended)?;
    let output = g.add(scaled, embedding)?;
    Ok(GlobalNodes {
        output,
        embedding,
        attention,
    })
}

/// Offset head `C -> C / 2 -> 3`.
pub fn regress_offsets(g: &mut Graph, features: NodeId, params: &BoundParams) -> Result<NodeId> {
    mlp(g, params, "refiner.head", 2, features, false)
}

pub struct RefinerOutput {
    /// Refined points `Q`, `rN x 3`.
    pub points: NodeId,
    /// Offsets `ΔQ` with `Q = Q' + ΔQ`; absent when the head regresses `Q` directly.
    pub delta: Option<NodeId>,
    /// `F_R`, `rN x C`.
    pub features: NodeId,
}

pub fn refiner_forward(
    g: &mut Graph,
    coarse: NodeId,
    expanded: NodeId,
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<RefinerOutput> {
    let v = cfg.variant;
    if v == Variant::NoRefiner {
        return Err(Error::Config("variant A has no refiner".into()));
    }
    let local = v
        .has_local()
        .then(|| local_refine(g, coarse, expanded, params, cfg))
        .transpose()?;
    let global = v
        .has_global()
        .then(|| global_refine(g, coarse, expanded, params, cfg))
        .transpose()?;
    let features = match (local, global) {
        (Some(l), Some(gl)) => g.add(l.output, gl.output)?,
        (Some(l), None) => l.output,
        (None, Some(gl)) => gl.output,
        (None, None) => unreachable!("every refiner variant keeps one unit"),
    };
    let head = regress_offsets(g, features, params)?;
    if v.has_offset() {
        let points = g.add(coarse, head)?;
        Ok(RefinerOutput {
            points,
            delta: Some(head),
            features,
        })
    } else {
        Ok(RefinerOutput {
            points: head,
            delta: None,
            features,
        })
    }
}
