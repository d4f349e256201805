//! Point-cloud ingestion and synthetic pair generation.

mod mesh;
mod pairs;
pub mod shapes;
mod xyz;

pub use mesh::{format_off, parse_off, sample_surface, TriMesh};
pub use pairs::{
    add_clipped_gaussian_noise, dataset_split, generate_pair, LabeledPair, PairGenConfig, SplitMode,
};
pub use xyz::{format_gt, format_xyz, parse_gt, parse_xyz};

use crate::geometry::Vec3;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("degenerate mesh: total surface area is zero")]
    DegenerateMesh,
    #[error("degenerate cloud: {0}")]
    DegenerateCloud(&'static str),
    #[error("by-category split needs a label on every cloud (cloud {0} has none)")]
    MissingLabel(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

/// An ordered list of 3D points with an optional category label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub label: Option<String>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self {
            points,
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Vec3 {
        if self.points.is_empty() {
            return Vec3::zeros();
        }
        self.points.iter().fold(Vec3::zeros(), |a, p| a + p) / self.points.len() as f64
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Reorders points so that output `i` is input `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PointCloud {
        PointCloud {
            points: perm.iter().map(|&i| self.points[i]).collect(),
            label: self.label.clone(),
        }
    }
}

/// Centers at the origin and scales so the farthest point has norm 1.
///
/// An input that is already centered with max norm 1 is returned bit-for-bit.
pub fn normalize_unit_sphere(p: &PointCloud) -> Result<PointCloud, DataError> {
    if p.is_empty() {
        return Err(DataError::DegenerateCloud("empty cloud"));
    }
    if !p.is_finite() {
        return Err(DataError::DegenerateCloud("non-finite coordinate"));
    }
    let c = p.centroid();
    let radius = p.points.iter().map(|x| (x - c).norm()).fold(0.0, f64::max);
    if radius == 0.0 {
        return Err(DataError::DegenerateCloud("all points identical"));
    }
    if radius == 1.0 && c.norm() < 1e-12 {
        return Ok(p.clone());
    }
    let scale = 1.0 / radius;
    Ok(PointCloud {
        points: p.points.iter().map(|x| (x - c) * scale).collect(),
        label: p.label.clone(),
    })
}
