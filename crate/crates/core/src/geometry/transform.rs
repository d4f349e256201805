use super::{rotation_residual, svd3, GeometryError, Mat3, Vec3};
use crate::dataio::PointCloud;
use alloc::vec::Vec;
use num_traits::Float;

/// Rotation about the x axis by `a` radians.
pub fn rot_x(a: f64) -> Mat3 {
    let (s, c) = Float::sin_cos(a);
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Mat3 {
    let (s, c) = Float::sin_cos(a);
    Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Mat3 {
    let (s, c) = Float::sin_cos(a);
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// An element of SE(3): `x ↦ rotation·x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub const ROTATION_TOL: f64 = 1e-9;

    pub fn identity() -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validates that `rotation` is a proper rotation within [`Self::ROTATION_TOL`].
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|x| !x.is_finite())
        {
            return Err(GeometryError::InvalidInput("non-finite transform entry"));
        }
        let residual = rotation_residual(&rotation);
        if residual > Self::ROTATION_TOL {
            return Err(GeometryError::NotARotation { residual });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Snaps an approximately orthogonal matrix onto SO(3) (nearest rotation in
    /// Frobenius norm). Used for rotations produced in single precision.
    pub fn from_approximate(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        let d = svd3(&rotation)?;
        Ok(Self {
            rotation: d.u * d.v.transpose(),
            translation,
        })
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation: t,
        }
    }

    #[inline]
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Twelve numbers: rotation row-major, then translation.
    #[rustfmt::skip]
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)],
            r[(1, 0)], r[(1, 1)], r[(1, 2)],
            r[(2, 0)], r[(2, 1)], r[(2, 2)],
            t.x, t.y, t.z,
        ]
    }

    pub fn from_row_major(v: &[f64; 12]) -> Result<Self, GeometryError> {
        let r = Mat3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
        Self::new(r, Vec3::new(v[9], v[10], v[11]))
    }

    /// Geodesic rotation distance to `other`, in radians.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        let rel = self.rotation.transpose() * other.rotation;
        let c = ((rel.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        // acos loses precision near 0; use the skew part there.
        let skew = rel - rel.transpose();
        let s = 0.5 * Float::sqrt(0.5 * skew.norm_squared());
        Float::atan2(s, c)
    }
}

/// Pointwise `R·x + t`. The label is carried over.
pub fn apply_transform(t: &RigidTransform, p: &PointCloud) -> PointCloud {
    PointCloud {
        points: p.points.iter().map(|x| t.apply(x)).collect::<Vec<_>>(),
        label: p.label.clone(),
    }
}
