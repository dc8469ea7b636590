use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cloud::{Point, PointCloud};
use crate::dataset::{random_rotation, PatchPair};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub rotate: bool,
    /// Shared uniform scale range.
    pub scale: [f64; 2],
    /// Standard deviation of the input-only jitter.
    pub jitter_sigma: f64,
    /// Jitter is clipped at this many standard deviations.
    pub jitter_clip: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            rotate: true,
            scale: [0.8, 1.2],
            jitter_sigma: 0.005,
            jitter_clip: 3.0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.scale;
        if !(lo > 0.0 && lo <= hi) || self.jitter_sigma < 0.0 || self.jitter_clip < 0.0 {
            return Err(Error::Config(format!("invalid augmentation settings: {self:?}")));
        }
        Ok(())
    }
}

fn rotate_scale(p: &Point, r: &[[f64; 3]; 3], s: f64) -> Point {
    [0, 1, 2].map(|i| s * (r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2]))
}

/// One shared rotation and scale for input and target, then clipped
/// Gaussian jitter on the input only.
pub fn augment(pair: &PatchPair, cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<PatchPair> {
    if !cfg.enabled {
        return Ok(pair.clone());
    }
    let rot = if cfg.rotate {
        random_rotation(rng)
    } else {
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    };
    let [lo, hi] = cfg.scale;
    let s = if lo < hi { rng.gen_range(lo..=hi) } else { lo };
    let clip = cfg.jitter_clip * cfg.jitter_sigma;
    let input = pair.input.map_points(|p| {
        let mut q = rotate_scale(p, &rot, s);
        if cfg.jitter_sigma > 0.0 {
            for v in &mut q {
                let z: f64 = rng.sample(StandardNormal);
                *v += (cfg.jitter_sigma * z).clamp(-clip, clip);
            }
        }
        q
    })?;
    let target = pair.target.map_points(|p| rotate_scale(p, &rot, s))?;
    PatchPair::new(input, target, pair.transform, pair.shape.clone())
}

/// `scale * rotation * p` for every point.
pub fn apply_rigid(cloud: &PointCloud, rotation: &[[f64; 3]; 3], scale: f64) -> Result<PointCloud> {
    cloud.map_points(|p| rotate_scale(p, rotation, scale))
}
