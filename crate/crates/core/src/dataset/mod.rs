//! Synthetic training and test data drawn from analytic surfaces.

mod surface;

use std::fs;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use surface::{random_rotation, Pose, ShapeKind, ShapeSpec, Surface};

use crate::cloud::io::{load_xyz, save_xyz};
use crate::cloud::{dist2, fps, PatchTransform, PointCloud};
use crate::error::{Error, Result};

/// Oversampling factor ahead of farthest point thinning.
const OVERSAMPLE: usize = 4;

/// `n` roughly uniform points on `geometry`: `4n` area-weighted random samples
/// thinned by farthest point sampling.
pub fn sample_surface(geometry: &ShapeSpec, n: usize, seed: u64) -> Result<PointCloud> {
    if n == 0 {
        return Err(Error::InvalidArgument("cannot sample zero points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = geometry.sample_random(OVERSAMPLE * n, &mut rng);
    let keep = fps(&raw, n, 0)?;
    PointCloud::new(keep.into_iter().map(|i| raw[i]).collect())
}

/// Normalized training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    /// Sparse input `P`, `N` points.
    pub input: PointCloud,
    /// Dense target, `rN` points.
    pub target: PointCloud,
    /// Maps the original coordinates to the normalized ones stored here.
    pub transform: PatchTransform,
    pub shape: Option<ShapeSpec>,
}

impl PatchPair {
    pub fn new(
        input: PointCloud,
        target: PointCloud,
        transform: PatchTransform,
        shape: Option<ShapeSpec>,
    ) -> Result<Self> {
        if target.len() % input.len() != 0 {
            return Err(Error::InvalidArgument(format!(
                "target size {} is not a multiple of input size {}",
                target.len(),
                input.len()
            )));
        }
        Ok(Self {
            input,
            target,
            transform,
            shape,
        })
    }

    pub fn rate(&self) -> usize {
        self.target.len() / self.input.len()
    }
}

/// Samples `rN` target points on `geometry` and draws `N` of them as the input,
/// either uniformly (`bias = 0`) or with probability proportional to
/// `exp(-bias * d)` where `d` is the normalized distance to a random anchor
/// point. Both clouds share one normalizing transform, so the input rows are
/// exact copies of target rows.
pub fn make_pair(geometry: &ShapeSpec, n: usize, r: usize, bias: f64, seed: u64) -> Result<PatchPair> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!(
            "pairs need at least 8 input points, got {n}"
        )));
    }
    if r < 1 {
        return Err(Error::InvalidArgument("rate must be positive".into()));
    }
    if !(0.0..=1.0).contains(&bias) {
        return Err(Error::InvalidArgument(format!("bias must lie in [0, 1], got {bias}")));
    }
    let raw = sample_surface(geometry, r * n, seed)?;
    let transform = PatchTransform::fit(raw.points());
    let target: Vec<_> = raw.points().iter().map(|p| transform.apply(p)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut chosen: Vec<usize> = if bias == 0.0 {
        rand::seq::index::sample(&mut rng, target.len(), n).into_vec()
    } else {
        let anchor = target[rng.gen_range(0..target.len())];
        // Weighted sampling without replacement: keep the n largest ln(u) / w.
        let mut keys: Vec<(f64, usize)> = target
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let w = (-bias * dist2(p, &anchor).sqrt()).exp();
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (u.ln() / w, i)
            })
            .collect();
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        keys.into_iter().take(n).map(|(_, i)| i).collect()
    };
    chosen.sort_unstable();
    let input = PointCloud::new(chosen.iter().map(|&i| target[i]).collect())?;
    PatchPair::new(input, PointCloud::new(target)?, transform, Some(geometry.clone()))
}

/// Isotropic Gaussian perturbation with `sigma = level` (relative to a unit
/// patch radius).
pub fn add_noise(cloud: &PointCloud, level: f64, seed: u64) -> Result<PointCloud> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise level must be >= 0, got {level}")));
    }
    if level == 0.0 {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    cloud.map_points(|p| {
        let mut q = *p;
        for v in &mut q {
            let z: f64 = rng.sample(StandardNormal);
            *v += level * z;
        }
        q
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Parameters controlling a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub kinds: Vec<ShapeKind>,
    pub train_per_kind: usize,
    pub test_per_kind: usize,
    pub n: usize,
    pub r: usize,
    /// Per-pair bias is drawn uniformly from `[0, max_bias]`.
    pub max_bias: f64,
    /// Shape variation range for training shapes; see [`shape_for`].
    pub train_variation: [f64; 2],
    pub test_variation: [f64; 2],
    /// Largest pose translation per axis.
    pub max_offset: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kinds: ShapeKind::ALL.to_vec(),
            train_per_kind: 32,
            test_per_kind: 8,
            n: 64,
            r: 4,
            max_bias: 1.0,
            train_variation: [0.0, 0.6],
            test_variation: [0.65, 1.0],
            max_offset: 1.0,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.kinds.is_empty() {
            return fail("dataset needs at least one surface kind".into());
        }
        for range in [self.train_variation, self.test_variation] {
            if !(0.0 <= range[0] && range[0] <= range[1] && range[1] <= 1.0) {
                return fail(format!("variation range {range:?} must lie inside [0, 1]"));
            }
        }
        let [a, b] = self.train_variation;
        let [c, d] = self.test_variation;
        if a.max(c) < b.min(d) {
            return fail("train and test variation ranges overlap".into());
        }
        if !(0.0..=1.0).contains(&self.max_bias) {
            return fail(format!("max_bias must lie in [0, 1], got {}", self.max_bias));
        }
        if self.n < 8 || self.r < 1 {
            return fail(format!("need n >= 8 and r >= 1, got n = {} r = {}", self.n, self.r));
        }
        Ok(())
    }
}

/// Surface of the given kind at shape variation `v` in `[0, 1]`.
pub fn shape_for(kind: ShapeKind, v: f64) -> Surface {
    match kind {
        ShapeKind::Sphere => Surface::Sphere { radius: 0.5 + v },
        ShapeKind::Torus => Surface::Torus {
            major_radius: 1.0,
            minor_radius: 0.15 + 0.4 * v,
        },
        ShapeKind::Cylinder => Surface::Cylinder {
            radius: 0.5,
            height: 0.5 + 2.5 * v,
        },
        ShapeKind::Plane => Surface::Plane {
            width: 1.0,
            depth: 0.3 + 0.7 * v,
        },
        ShapeKind::Superellipsoid => Surface::Superellipsoid {
            axes: [1.0, 0.5 + 0.5 * v, 0.4 + 0.6 * v],
            e1: 0.3 + 0.7 * v,
            e2: 1.0 - 0.6 * v,
        },
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetEntry {
    pub name: String,
    pub split: Split,
    pub variation: f64,
    pub bias: f64,
    pub seed: u64,
    pub pair: PatchPair,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub entries: Vec<DatasetEntry>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    pub fn pairs(&self, split: Split) -> Vec<PatchPair> {
        self.split(split).map(|e| e.pair.clone()).collect()
    }
}

/// Generates every pair of `config`; a pure function of the config.
pub fn build_dataset(config: &DatasetConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = Vec::new();
    for (split, count, range) in [
        (Split::Train, config.train_per_kind, config.train_variation),
        (Split::Test, config.test_per_kind, config.test_variation),
    ] {
        for &kind in &config.kinds {
            for _ in 0..count {
                let variation = if range[0] < range[1] {
                    rng.gen_range(range[0]..=range[1])
                } else {
                    range[0]
                };
                let pose = Pose::random(&mut rng, config.max_offset);
                let bias = if config.max_bias > 0.0 {
                    rng.gen_range(0.0..=config.max_bias)
                } else {
                    0.0
                };
                let seed = rng.gen();
                let geometry = ShapeSpec::new(shape_for(kind, variation), pose)?;
                let pair = make_pair(&geometry, config.n, config.r, bias, seed)?;
                entries.push(DatasetEntry {
                    name: format!("pair_{:05}", entries.len()),
                    split,
                    variation,
                    bias,
                    seed,
                    pair,
                });
            }
        }
    }
    Ok(Dataset {
        config: config.clone(),
        entries,
    })
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    split: Split,
    input: String,
    target: String,
    shape: Option<ShapeSpec>,
    transform: PatchTransform,
    variation: f64,
    bias: f64,
    seed: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    config: DatasetConfig,
    pairs: Vec<ManifestEntry>,
}

pub const MANIFEST: &str = "manifest.json";

/// Writes `manifest.json` plus `<name>_input.xyz` / `<name>_target.xyz` per pair.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut pairs = Vec::with_capacity(dataset.entries.len());
    for e in &dataset.entries {
        let input = format!("{}_input.xyz", e.name);
        let target = format!("{}_target.xyz", e.name);
        save_xyz(&e.pair.input, &dir.join(&input))?;
        save_xyz(&e.pair.target, &dir.join(&target))?;
        pairs.push(ManifestEntry {
            name: e.name.clone(),
            split: e.split,
            input,
            target,
            shape: e.pair.shape.clone(),
            transform: e.pair.transform,
            variation: e.variation,
            bias: e.bias,
            seed: e.seed,
        });
    }
    let manifest = Manifest {
        config: dataset.config.clone(),
        pairs,
    };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Reads a directory written by [`save_dataset`]. `path` may name the
/// directory or its manifest file.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (dir, manifest_path): (PathBuf, PathBuf) = if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST))
    } else {
        (
            path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            path.to_path_buf(),
        )
    };
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let entries = manifest
        .pairs
        .into_iter()
        .map(|m| {
            let input = load_xyz(&dir.join(&m.input))?;
            let target = load_xyz(&dir.join(&m.target))?;
            Ok(DatasetEntry {
                name: m.name,
                split: m.split,
                variation: m.variation,
                bias: m.bias,
                seed: m.seed,
                pair: PatchPair::new(input, target, m.transform, m.shape)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        config: manifest.config,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere() -> ShapeSpec {
        ShapeSpec::at_origin(Surface::Sphere { radius: 1.0 }).unwrap()
    }

    #[test]
    fn sampled_points_are_on_the_sphere() {
        let c = sample_surface(&sphere(), 100, 7).unwrap();
        assert_eq!(c.len(), 100);
        for p in c.points() {
            assert!((dist2(p, &[0.0; 3]).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pair_input_is_a_subset_of_target() {
        for bias in [0.0, 1.0] {
            let pair = make_pair(&sphere(), 16, 4, bias, 3).unwrap();
            assert_eq!(pair.input.len(), 16);
            assert_eq!(pair.target.len(), 64);
            for p in pair.input.points() {
                assert!(pair.target.points().contains(p));
            }
        }
    }

    #[test]
    fn invalid_pair_arguments() {
        assert!(make_pair(&sphere(), 4, 4, 0.0, 0).is_err());
        assert!(make_pair(&sphere(), 16, 4, 1.5, 0).is_err());
    }

    #[test]
    fn zero_noise_is_identity() {
        let c = sample_surface(&sphere(), 10, 1).unwrap();
        assert_eq!(add_noise(&c, 0.0, 5).unwrap(), c);
        assert_eq!(add_noise(&c, 0.01, 5).unwrap(), add_noise(&c, 0.01, 5).unwrap());
        assert!(add_noise(&c, -0.1, 5).is_err());
    }

    #[test]
    fn dataset_counts_and_splits() {
        let cfg = DatasetConfig {
            kinds: vec![ShapeKind::Sphere, ShapeKind::Plane],
            train_per_kind: 3,
            test_per_kind: 2,
            n: 8,
            r: 2,
            ..Default::default()
        };
        let ds = build_dataset(&cfg).unwrap();
        assert_eq!(ds.split(Split::Train).count(), 6);
        assert_eq!(ds.split(Split::Test).count(), 4);
        assert_eq!(ds, build_dataset(&cfg).unwrap());
    }

    #[test]
    fn overlapping_variation_ranges_are_rejected() {
        let cfg = DatasetConfig {
            train_variation: [0.0, 0.7],
            test_variation: [0.5, 1.0],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
