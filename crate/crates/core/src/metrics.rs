//! Chamfer, Hausdorff and point-to-surface metrics plus per-point error maps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{nearest_dist2, Point, PointCloud};
use crate::dataset::ShapeSpec;
use crate::error::{Error, Result};

fn nonempty(a: &[Point], b: &[Point]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

fn mean(v: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = v.len() as f64;
    v.sum::<f64>() / n
}

/// Symmetric squared Chamfer distance: half the sum of the mean squared
/// nearest distance in each direction.
pub fn chamfer(a: &[Point], b: &[Point]) -> Result<f64> {
    nonempty(a, b)?;
    let ab = mean(nearest_dist2(b, a).into_iter().map(|(_, d)| d));
    let ba = mean(nearest_dist2(a, b).into_iter().map(|(_, d)| d));
    Ok(0.5 * (ab + ba))
}

/// Symmetric Hausdorff distance (unsquared).
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    nonempty(a, b)?;
    let worst = |from: &[Point], to: &[Point]| nearest_dist2(to, from).into_iter().map(|(_, d)| d).fold(0.0, f64::max);
    Ok(worst(a, b).max(worst(b, a)).sqrt())
}

/// Distance from every target point to its nearest predicted point.
pub fn error_map(target: &[Point], predicted: &[Point]) -> Result<Vec<f64>> {
    nonempty(target, predicted)?;
    Ok(nearest_dist2(predicted, target)
        .into_iter()
        .map(|(_, d)| d.sqrt())
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceDistance {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub distances: Vec<f64>,
}

/// Point-to-surface distance of every predicted point.
pub fn p2f(predicted: &[Point], surface: &ShapeSpec) -> Result<SurfaceDistance> {
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    let distances: Vec<f64> = predicted.iter().map(|p| surface.distance(p)).collect();
    let m = mean(distances.iter().copied());
    let var = mean(distances.iter().map(|d| (d - m) * (d - m)));
    Ok(SurfaceDistance {
        mean: m,
        std: var.sqrt(),
        distances,
    })
}

/// Raw metric values for one evaluated shape.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub cd: f64,
    pub hd: f64,
    pub p2f_mean: Option<f64>,
    pub p2f_std: Option<f64>,
    /// Nearest predicted distance per target point.
    pub error_map: Vec<f64>,
}

impl MetricsReport {
    /// Values in units of 1e-3: `(cd, hd, p2f_mean, p2f_std)`.
    pub fn scaled(&self) -> (f64, f64, Option<f64>, Option<f64>) {
        (
            self.cd * 1e3,
            self.hd * 1e3,
            self.p2f_mean.map(|v| v * 1e3),
            self.p2f_std.map(|v| v * 1e3),
        )
    }
}

pub fn evaluate(predicted: &PointCloud, target: &PointCloud, surface: Option<&ShapeSpec>) -> Result<MetricsReport> {
    let (p, t) = (predicted.points(), target.points());
    let surface = surface.map(|s| p2f(p, s)).transpose()?;
    Ok(MetricsReport {
        cd: chamfer(p, t)?,
        hd: hausdorff(p, t)?,
        p2f_mean: surface.as_ref().map(|s| s.mean),
        p2f_std: surface.as_ref().map(|s| s.std),
        error_map: error_map(t, p)?,
    })
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub name: String,
    pub n_in: usize,
    pub n_out: usize,
    pub r: usize,
    pub cd_e3: f64,
    pub hd_e3: f64,
    /// Empty when no analytic surface was available.
    pub p2f_mean_e3: Option<f64>,
    pub p2f_std_e3: Option<f64>,
}

impl MetricsRow {
    pub fn new(name: impl Into<String>, n_in: usize, r: usize, report: &MetricsReport, n_out: usize) -> Self {
        let (cd, hd, pm, ps) = report.scaled();
        Self {
            name: name.into(),
            n_in,
            n_out,
            r,
            cd_e3: cd,
            hd_e3: hd,
            p2f_mean_e3: pm,
            p2f_std_e3: ps,
        }
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}
