//! Two-stage upsampling network: a dense generator producing a coarse set
//! `Q'` and a spatial refiner adding per-point offsets to reach `Q`.

mod config;
pub mod generator;
mod layers;
pub mod refiner;

use std::path::Path;

pub use config::{ModelConfig, Variant};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::tensor::{checkpoint, BoundParams, Graph, Initializer, NodeId, ParamStore};

/// Nodes produced by one forward pass.
pub struct ForwardNodes {
    /// Coarse dense set `Q'`, `rN x 3`.
    pub coarse: NodeId,
    /// Expanded features `F_E`, `rN x (C + 2)`.
    pub expanded: NodeId,
    /// Final output: `Q` for refining variants, `Q'` otherwise.
    pub output: NodeId,
    /// `ΔQ` when the variant regresses offsets.
    pub delta: Option<NodeId>,
}

/// Builds the full forward graph for an `N x 3` input node.
pub fn forward(g: &mut Graph, input: NodeId, params: &BoundParams, cfg: &ModelConfig) -> Result<ForwardNodes> {
    let gen = generator::generator_forward(g, input, params, cfg)?;
    if !cfg.variant.has_refiner() {
        return Ok(ForwardNodes {
            coarse: gen.coarse,
            expanded: gen.expanded,
            output: gen.coarse,
            delta: None,
        });
    }
    let refined = refiner::refiner_forward(g, gen.coarse, gen.expanded, params, cfg)?;
    Ok(ForwardNodes {
        coarse: gen.coarse,
        expanded: gen.expanded,
        output: refined.points,
        delta: refined.delta,
    })
}

/// Freshly initialized parameters for `cfg`.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let mut init = Initializer::new(seed);
    generator::init(&mut init, cfg)?;
    if cfg.variant.has_refiner() {
        refiner::init(&mut init, cfg)?;
    }
    Ok(init.finish())
}

/// Configuration plus parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
}

/// Result of running a model on one patch without gradients.
pub struct Prediction {
    pub coarse: PointCloud,
    pub output: PointCloud,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Self { config, params })
    }

    /// Runs one normalized `N x 3` patch.
    pub fn predict(&self, patch: &PointCloud) -> Result<Prediction> {
        if patch.len() != self.config.n {
            return Err(Error::InvalidArgument(format!(
                "model expects {} input points, got {}",
                self.config.n,
                patch.len()
            )));
        }
        let mut g = Graph::new();
        let bound = self.params.bind_constant(&mut g);
        let input = g.constant(patch.to_array());
        let nodes = forward(&mut g, input, &bound, &self.config)?;
        Ok(Prediction {
            coarse: PointCloud::from_array(g.value(nodes.coarse))?,
            output: PointCloud::from_array(g.value(nodes.output))?,
        })
    }

    pub fn upsample(&self, patch: &PointCloud) -> Result<PointCloud> {
        Ok(self.predict(patch)?.output)
    }

    /// Checkpoint metadata: the model configuration under `"model"`.
    pub fn meta(&self) -> serde_json::Value {
        serde_json::json!({ "model": self.config })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.params, &self.meta())
    }

    /// Loads a checkpoint and checks that its tensors match the stored
    /// configuration exactly.
    pub fn load(path: &Path) -> Result<Self> {
        let (params, meta) = checkpoint::load(path)?;
        let config: ModelConfig = serde_json::from_value(
            meta.get("model")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("header has no model configuration".into()))?,
        )?;
        let expected = init_params(&config, 0)?;
        for (name, value) in expected.iter() {
            let got = params.get(name)?;
            if got.shape() != value.shape() {
                return Err(Error::Checkpoint(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    got.shape(),
                    value.shape()
                )));
            }
        }
        if params.len() != expected.len() {
            let extra = params
                .iter()
                .map(|(n, _)| n)
                .find(|n| !expected.contains(n))
                .unwrap_or_default()
                .to_string();
            return Err(Error::Checkpoint(format!("unexpected tensor `{extra}`")));
        }
        Ok(Self { config, params })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(variant: Variant) -> ModelConfig {
        ModelConfig {
            n: 24,
            r: 4,
            c: 16,
            feat_blocks: 2,
            feat_knn: 6,
            k: 6,
            attn_reduction: 4,
            variant,
        }
    }

    fn patch(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ]
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn output_shapes_for_every_variant() {
        for v in Variant::ALL {
            let cfg = small(v);
            let model = Model::new(cfg.clone(), 3).unwrap();
            let pred = model.predict(&patch(24, 1)).unwrap();
            assert_eq!(pred.coarse.len(), 96);
            assert_eq!(pred.output.len(), 96);
            if v == Variant::NoRefiner {
                assert!(!model.params.iter().any(|(n, _)| n.starts_with("refiner.")));
            }
        }
    }

    #[test]
    fn refined_equals_coarse_at_init() {
        for v in [Variant::Full, Variant::NoLocal, Variant::NoGlobal] {
            let pred = Model::new(small(v), 9).unwrap().predict(&patch(24, 2)).unwrap();
            assert_eq!(pred.coarse.points(), pred.output.points());
        }
    }

    #[test]
    fn direct_regression_differs_from_coarse() {
        let pred = Model::new(small(Variant::NoOffset), 9)
            .unwrap()
            .predict(&patch(24, 2))
            .unwrap();
        assert_ne!(pred.coarse.points(), pred.output.points());
    }

    #[test]
    fn wrong_patch_size_is_rejected() {
        let model = Model::new(small(Variant::Full), 1).unwrap();
        assert!(model.predict(&patch(23, 1)).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = Model::new(small(Variant::NoGlobal), 4).unwrap();
        model.save(&path).unwrap();
        let back = Model::load(&path).unwrap();
        assert_eq!(back.config, model.config);
        let p = patch(24, 8);
        let a = model.predict(&p).unwrap().coarse;
        let b = back.predict(&p).unwrap().coarse;
        for (x, y) in a.points().iter().zip(b.points()) {
            // Stored as f32.
            assert!(crate::cloud::dist2(x, y) < 1e-8);
        }
    }
}
