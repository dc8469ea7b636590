use serde::{Deserialize, Serialize};

use super::neighbors::{fps, knn};
use super::{Point, PointCloud};
use crate::error::{Error, Result};

/// Maps a patch to the unit ball: `normalized = (p - centroid) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchTransform {
    pub centroid: Point,
    pub scale: f64,
}

impl PatchTransform {
    pub const IDENTITY: Self = Self {
        centroid: [0.0; 3],
        scale: 1.0,
    };

    pub fn apply(&self, p: &Point) -> Point {
        let c = &self.centroid;
        [
            (p[0] - c[0]) / self.scale,
            (p[1] - c[1]) / self.scale,
            (p[2] - c[2]) / self.scale,
        ]
    }

    pub fn invert(&self, q: &Point) -> Point {
        let c = &self.centroid;
        [
            q[0] * self.scale + c[0],
            q[1] * self.scale + c[1],
            q[2] * self.scale + c[2],
        ]
    }

    /// Transform that centers `points` and scales the farthest one to unit norm.
    pub fn fit(points: &[Point]) -> Self {
        let n = points.len() as f64;
        let mut centroid = [0.0; 3];
        for p in points {
            for a in 0..3 {
                centroid[a] += p[a];
            }
        }
        centroid.iter_mut().for_each(|c| *c /= n);
        let radius = points
            .iter()
            .map(|p| super::dist2(p, &centroid))
            .fold(0.0, f64::max)
            .sqrt();
        let scale = if radius > 0.0 { radius } else { 1.0 };
        Self { centroid, scale }
    }
}

pub fn normalize_patch(patch: &PointCloud) -> (PointCloud, PatchTransform) {
    let t = PatchTransform::fit(patch.points());
    let out = PointCloud::new(patch.points().iter().map(|p| t.apply(p)).collect())
        .expect("normalizing a valid cloud keeps it valid");
    (out, t)
}

pub fn denormalize(patch: &PointCloud, t: &PatchTransform) -> PointCloud {
    PointCloud::new(patch.points().iter().map(|q| t.invert(q)).collect())
        .expect("denormalizing a valid cloud keeps it valid")
}

/// Overlapping seed count used for whole-cloud inference: `ceil(3M / patch_size)`.
pub fn default_num_seeds(m: usize, patch_size: usize) -> usize {
    (3 * m).div_ceil(patch_size).min(m)
}

/// FPS seeds, each grown into its `patch_size` nearest neighbors and normalized.
pub fn extract_patches(
    cloud: &PointCloud,
    num_seeds: usize,
    patch_size: usize,
) -> Result<Vec<(PointCloud, PatchTransform)>> {
    if patch_size == 0 || patch_size > cloud.len() {
        return Err(Error::NotEnoughPoints {
            requested: patch_size,
            available: cloud.len(),
        });
    }
    if num_seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let points = cloud.points();
    let seeds = fps(points, num_seeds, 0)?;
    let seed_points: Vec<Point> = seeds.iter().map(|&s| points[s]).collect();
    let groups = knn(points, &seed_points, patch_size, false)?;
    groups
        .data()
        .chunks(patch_size)
        .map(|rows| Ok(normalize_patch(&cloud.select(rows)?)))
        .collect()
}

/// Denormalizes and concatenates patches, then thins the union to exactly
/// `target_count` points by FPS from index 0.
pub fn merge_patches(upsampled: &[(PointCloud, PatchTransform)], target_count: usize) -> Result<PointCloud> {
    let merged: Vec<Point> = upsampled
        .iter()
        .flat_map(|(patch, t)| patch.points().iter().map(move |q| t.invert(q)))
        .collect();
    if merged.len() < target_count || target_count == 0 {
        return Err(Error::NotEnoughPoints {
            requested: target_count,
            available: merged.len(),
        });
    }
    let keep = fps(&merged, target_count, 0)?;
    PointCloud::new(keep.into_iter().map(|i| merged[i]).collect())
}
