//! Rigid-motion algebra in 64-bit floating point.
//!
//! Rotations act on column vectors: a [`RigidTransform`] maps `x` to
//! `R·x + t`. The 3×3 SVD uses the signed convention: both orthogonal factors
//! are proper rotations and a reflection, if any, shows up as a negative last
//! singular value.

mod euler;
mod procrustes;
mod svd;
mod transform;

pub use euler::{rotation_metrics, EulerAngles, TransformErrors};
pub use procrustes::{paired_objective, procrustes_solve, Procrustes, ProcrustesWork};
pub use svd::{svd3, Svd3};
pub use transform::{apply_transform, rot_x, rot_y, rot_z, RigidTransform};

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("point lists differ in length ({src} vs {dst})")]
    LengthMismatch { src: usize, dst: usize },
    #[error("rotation violates orthogonality or det = +1 (residual {residual:e})")]
    NotARotation { residual: f64 },
}

/// `‖RᵀR − I‖_F + |det R − 1|`, the quantity bounded by the rotation invariants.
pub fn rotation_residual(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm() + (r.determinant() - 1.0).abs()
}
