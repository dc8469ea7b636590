//! Dense generator: per-point features, duplication with 2D grid codes, and
//! coordinate regression into a coarse dense set.

use super::config::ModelConfig;
use super::layers::{linear, mlp};
use crate::cloud::knn_rows;
use crate::error::{Error, Result};
use crate::tensor::{Array, BoundParams, Graph, Initializer, NodeId};

/// `r` distinct 2D codes in `[-1, 1]^2`: the first `r` row-major entries of
/// an `s x s` lattice with `s = ceil(sqrt(r))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridCode {
    codes: Vec<[f64; 2]>,
}

impl GridCode {
    pub fn codes(&self) -> &[[f64; 2]] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    fn to_array(&self) -> Array {
        let data = self.codes.iter().flatten().copied().collect();
        Array::new(vec![1, self.codes.len(), 2], data).expect("grid is non-empty")
    }
}

pub fn make_grid(r: usize) -> Result<GridCode> {
    if r == 0 {
        return Err(Error::InvalidArgument("grid needs r >= 1".into()));
    }
    let s = (1..).find(|s| s * s >= r).unwrap();
    let coord = |i: usize| {
        if s == 1 {
            0.0
        } else {
            -1.0 + 2.0 * i as f64 / (s - 1) as f64
        }
    };
    let codes = (0..r).map(|j| [coord(j / s), coord(j % s)]).collect();
    Ok(GridCode { codes })
}

/// Width of the feature rows entering block `b`.
fn block_input_width(cfg: &ModelConfig, b: usize) -> usize {
    if b == 0 {
        3
    } else {
        b * cfg.c
    }
}

pub(crate) fn init(init: &mut Initializer, cfg: &ModelConfig) -> Result<()> {
    for b in 0..cfg.feat_blocks {
        init.linear(
            &format!("generator.feat.block{b}.mlp.0"),
            block_input_width(cfg, b) + 3,
            cfg.c,
        )?;
    }
    init.linear("generator.feat.bottleneck", cfg.feat_blocks * cfg.c, cfg.c)?;
    init.linear("generator.coarse.0", cfg.c + 2, cfg.c / 2)?;
    init.linear("generator.coarse.1", cfg.c / 2, 3)
}

/// Per-point features `F_P` (`N x C`).
///
/// Each block groups the `feat_knn` nearest neighbors of every point (in
/// coordinate space for the first block, in the block's input feature space
/// after that), encodes `[neighbor features, neighbor - center]`, applies a
/// shared layer and max-pools over the neighborhood. Block inputs are the
/// concatenation of all earlier block outputs; a bottleneck layer fuses them.
pub fn extract_features(g: &mut Graph, points: NodeId, params: &BoundParams, cfg: &ModelConfig) -> Result<NodeId> {
    let n = g.shape(points)[0];
    if g.shape(points) != [n, 3] {
        return Err(Error::InvalidArgument(format!(
            "generator expects N x 3 input, got {:?}",
            g.shape(points)
        )));
    }
    if n < cfg.feat_knn {
        return Err(Error::NotEnoughPoints {
            requested: cfg.feat_knn,
            available: n,
        });
    }
    let k = cfg.feat_knn;
    let centers = {
        let r = g.reshape(points, &[n, 1, 3])?;
        g.tile(r, 1, k)?
    };
    let mut outputs: Vec<NodeId> = Vec::with_capacity(cfg.feat_blocks);
    for b in 0..cfg.feat_blocks {
        let features = match outputs.len() {
            0 => points,
            1 => outputs[0],
            _ => g.concat(&outputs, 1)?,
        };
        let width = g.shape(features)[1];
        let idx = knn_rows(g.value(features).data(), g.value(features).data(), width, k, true)?;
        let grouped_pts = g.gather(points, idx.clone(), 0)?;
        let relative = g.sub(grouped_pts, centers)?;
        let grouped = g.gather(features, idx, 0)?;
        let edge = g.concat(&[grouped, relative], 2)?;
        let h = mlp(g, params, &format!("generator.feat.block{b}.mlp"), 1, edge, true)?;
        outputs.push(g.reduce_max(h, 1)?);
    }
    let dense = if outputs.len() == 1 {
        outputs[0]
    } else {
        g.concat(&outputs, 1)?
    };
    let fused = linear(g, params, "generator.feat.bottleneck", dense)?;
    g.relu(fused)
}

/// `F_E` (`rN x (C + 2)`): row `i * r + j` is `F_P` row `i` followed by grid code `j`.
pub fn expand_features(g: &mut Graph, features: NodeId, grid: &GridCode) -> Result<NodeId> {
    let [n, c] = g.shape(features) else {
        return Err(Error::InvalidArgument("features must be N x C".into()));
    };
    let (n, c) = (*n, *c);
    let r = grid.len();
    let dup = {
        let f = g.reshape(features, &[n, 1, c])?;
        g.tile(f, 1, r)?
    };
    let codes = {
        let k = g.constant(grid.to_array());
        g.tile(k, 0, n)?
    };
    let joined = g.concat(&[dup, codes], 2)?;
    g.reshape(joined, &[n * r, c + 2])
}

/// Shared MLP `C + 2 -> C / 2 -> 3` with no activation on the output.
pub fn regress_coarse(g: &mut Graph, expanded: NodeId, params: &BoundParams) -> Result<NodeId> {
    mlp(g, params, "generator.coarse", 2, expanded, false)
}

pub struct GeneratorOutput {
    /// `Q'`, `rN x 3`.
    pub coarse: NodeId,
    /// `F_E`, `rN x (C + 2)`.
    pub expanded: NodeId,
}

pub fn generator_forward(
    g: &mut Graph,
    points: NodeId,
    params: &BoundParams,
    cfg: &ModelConfig,
) -> Result<GeneratorOutput> {
    let features = extract_features(g, points, params, cfg)?;
    let grid = make_grid(cfg.r)?;
    let expanded = expand_features(g, features, &grid)?;
    let coarse = regress_coarse(g, expanded, params)?;
    Ok(GeneratorOutput { coarse, expanded })
}
