//! Point sets, neighborhoods, sampling, file formats and patch handling.

pub mod io;
mod neighbors;
mod patch;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tensor::Array;

pub use neighbors::{fps, knn, knn_rows, nearest, nearest_dist2};
pub use patch::{default_num_seeds, denormalize, extract_patches, merge_patches, normalize_patch, PatchTransform};

pub type Point = [f64; 3];

/// Ordered 3D points with optional named per-point scalar columns.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    attrs: BTreeMap<String, Vec<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        Ok(Self {
            points,
            attrs: BTreeMap::new(),
        })
    }

    /// Reads the rows of an `M x 3` array.
    pub fn from_array(a: &Array) -> Result<Self> {
        if a.rank() != 2 || a.shape()[1] != 3 {
            return Err(Error::InvalidArgument(format!(
                "expected an M x 3 array, got {:?}",
                a.shape()
            )));
        }
        Self::new((0..a.shape()[0]).map(|i| row3(a.row(i))).collect())
    }

    pub fn to_array(&self) -> Array {
        Array::from_rows3(&self.points)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn attr(&self, name: &str) -> Option<&[f64]> {
        self.attrs.get(name).map(Vec::as_slice)
    }

    pub fn attrs(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.attrs.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn set_attr(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        if values.len() != self.points.len() {
            return Err(Error::InvalidArgument(format!(
                "attribute has {} values for {} points",
                values.len(),
                self.points.len()
            )));
        }
        self.attrs.insert(name.into(), values);
        Ok(())
    }

    pub fn with_attr(mut self, name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        self.set_attr(name, values)?;
        Ok(self)
    }

    /// Sub-cloud of the given rows (attributes are dropped).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.points[i]).collect())
    }

    /// Each point repeated `r` times, point-major.
    pub fn tile(&self, r: usize) -> Self {
        let points = self.points.iter().flat_map(|p| std::iter::repeat(*p).take(r)).collect();
        Self {
            points,
            attrs: BTreeMap::new(),
        }
    }

    pub fn map_points(&self, f: impl FnMut(&Point) -> Point) -> Result<Self> {
        Self::new(self.points.iter().map(f).collect())
    }
}

pub(crate) fn row3(r: &[f64]) -> Point {
    [r[0], r[1], r[2]]
}

pub(crate) fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
