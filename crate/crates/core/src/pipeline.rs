//! Whole-cloud inference and evaluation protocols built from the other modules.

use serde::{Deserialize, Serialize};

use crate::cloud::{default_num_seeds, denormalize, extract_patches, merge_patches, PointCloud};
use crate::dataset::{add_noise, DatasetEntry, PatchPair};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, MetricsReport, MetricsRow};
use crate::model::{Model, Variant};
use crate::training::{train, TrainConfig};

/// Splits `cloud` into overlapping patches of the model's input size,
/// upsamples each and consolidates the union to exactly `r * M` points.
pub fn upsample_cloud(model: &Model, cloud: &PointCloud, num_seeds: Option<usize>) -> Result<PointCloud> {
    let n = model.config.n;
    let seeds = num_seeds.unwrap_or_else(|| default_num_seeds(cloud.len(), n));
    let upsampled = extract_patches(cloud, seeds, n)?
        .into_iter()
        .map(|(patch, t)| Ok((model.upsample(&patch)?, t)))
        .collect::<Result<Vec<_>>>()?;
    merge_patches(&upsampled, model.config.r * cloud.len())
}

/// Runs the model on one pair (optionally with a noisy input) and scores the
/// prediction against the clean target in original coordinates.
pub fn evaluate_pair(
    model: &Model,
    pair: &PatchPair,
    noise: f64,
    noise_seed: u64,
) -> Result<(PointCloud, MetricsReport)> {
    if pair.input.len() != model.config.n || pair.rate() != model.config.r {
        return Err(Error::Config(format!(
            "model expects {} points at rate {}, pair has {} at rate {}",
            model.config.n,
            model.config.r,
            pair.input.len(),
            pair.rate()
        )));
    }
    let input = add_noise(&pair.input, noise, noise_seed)?;
    let predicted = denormalize(&model.upsample(&input)?, &pair.transform);
    let target = denormalize(&pair.target, &pair.transform);
    let report = evaluate(&predicted, &target, pair.shape.as_ref())?;
    Ok((predicted, report))
}

/// One metrics row per entry.
pub fn evaluate_entries(model: &Model, entries: &[&DatasetEntry], noise: f64, seed: u64) -> Result<Vec<MetricsRow>> {
    entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let (pred, report) = evaluate_pair(model, &e.pair, noise, seed.wrapping_add(i as u64))?;
            Ok(MetricsRow::new(
                &e.name,
                e.pair.input.len(),
                e.pair.rate(),
                &report,
                pred.len(),
            ))
        })
        .collect()
}

/// Column-wise mean of `rows` under the given name.
pub fn mean_row(name: &str, rows: &[MetricsRow]) -> Result<MetricsRow> {
    let first = rows.first().ok_or(Error::EmptyInput)?;
    let n = rows.len() as f64;
    let avg = |f: &dyn Fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let avg_opt = |f: &dyn Fn(&MetricsRow) -> Option<f64>| {
        rows.iter()
            .map(f)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n)
    };
    Ok(MetricsRow {
        name: name.to_string(),
        n_in: first.n_in,
        n_out: first.n_out,
        r: first.r,
        cd_e3: avg(&|r| r.cd_e3),
        hd_e3: avg(&|r| r.hd_e3),
        p2f_mean_e3: avg_opt(&|r| r.p2f_mean_e3),
        p2f_std_e3: avg_opt(&|r| r.p2f_std_e3),
    })
}

/// Held-out scores of one trained variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    pub seed: u64,
    pub cd_e3: f64,
    pub hd_e3: f64,
    pub p2f_mean_e3: Option<f64>,
}

/// Trains each variant under the same budget and scores it on `test`.
/// Models are returned alongside their rows for reuse.
pub fn run_ablation(
    train_pairs: &[PatchPair],
    test: &[&DatasetEntry],
    base: &TrainConfig,
    variants: &[Variant],
    seed: u64,
) -> Result<Vec<(AblationRow, Model)>> {
    variants
        .iter()
        .map(|&variant| {
            let mut cfg = base.clone();
            cfg.model.variant = variant;
            cfg.seed = seed;
            let model = train(train_pairs, &cfg, None)?.model;
            let mean = mean_row(variant.label(), &evaluate_entries(&model, test, 0.0, seed)?)?;
            let row = AblationRow {
                model: variant.label().to_string(),
                seed,
                cd_e3: mean.cd_e3,
                hd_e3: mean.hd_e3,
                p2f_mean_e3: mean.p2f_mean_e3,
            };
            Ok((row, model))
        })
        .collect()
}

pub const NOISE_LEVELS: [f64; 5] = [0.0, 0.001, 0.005, 0.01, 0.02];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub noise_level: f64,
    pub cd_e3: f64,
    pub hd_e3: f64,
    pub p2f_mean_e3: Option<f64>,
}

/// Held-out metrics of one model with Gaussian noise added to every input.
pub fn noise_sweep(model: &Model, test: &[&DatasetEntry], levels: &[f64], seed: u64) -> Result<Vec<NoiseRow>> {
    levels
        .iter()
        .map(|&level| {
            let mean = mean_row("", &evaluate_entries(model, test, level, seed)?)?;
            Ok(NoiseRow {
                noise_level: level,
                cd_e3: mean.cd_e3,
                hd_e3: mean.hd_e3,
                p2f_mean_e3: mean.p2f_mean_e3,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{sample_surface, ShapeSpec, Surface};
    use crate::model::ModelConfig;

    #[test]
    fn whole_cloud_upsampling_hits_the_exact_count() {
        let cfg = ModelConfig {
            n: 16,
            r: 3,
            c: 8,
            feat_blocks: 1,
            feat_knn: 4,
            k: 4,
            ..Default::default()
        };
        let model = Model::new(cfg, 0).unwrap();
        let geometry = ShapeSpec::at_origin(Surface::Sphere { radius: 2.0 }).unwrap();
        let cloud = sample_surface(&geometry, 100, 1).unwrap();
        let out = upsample_cloud(&model, &cloud, None).unwrap();
        assert_eq!(out.len(), 300);
    }

    #[test]
    fn mean_row_averages() {
        let row = |cd: f64| MetricsRow {
            name: "x".into(),
            n_in: 4,
            n_out: 8,
            r: 2,
            cd_e3: cd,
            hd_e3: 1.0,
            p2f_mean_e3: Some(cd),
            p2f_std_e3: None,
        };
        let m = mean_row("m", &[row(1.0), row(3.0)]).unwrap();
        assert_eq!((m.cd_e3, m.p2f_mean_e3, m.p2f_std_e3), (2.0, Some(2.0), None));
    }
}
