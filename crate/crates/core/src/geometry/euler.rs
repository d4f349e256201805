use super::{rot_x, rot_y, rot_z, Mat3, RigidTransform};
use core::f64::consts::{FRAC_PI_2, PI};
use num_traits::Float;

/// Intrinsic Z-Y-X angles in radians: `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
///
/// This is the same matrix as applying the extrinsic rotations about x, then
/// y, then z, which is how synthetic pairs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

const GIMBAL_TOL: f64 = 1e-6;

fn wrap_pi(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

impl EulerAngles {
    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self { yaw, pitch, roll }
    }

    pub fn from_degrees(yaw: f64, pitch: f64, roll: f64) -> Self {
        Self::new(yaw.to_radians(), pitch.to_radians(), roll.to_radians())
    }

    pub fn to_rotation(&self) -> Mat3 {
        rot_z(self.yaw) * rot_y(self.pitch) * rot_x(self.roll)
    }

    /// Canonical angles: each in (−π, π], pitch in [−π/2, π/2]. At gimbal lock
    /// the roll is set to zero and the whole in-plane angle goes to yaw.
    pub fn from_rotation(r: &Mat3) -> Self {
        let sp = (-r[(2, 0)]).clamp(-1.0, 1.0);
        if 1.0 - sp.abs() < 1e-12 {
            let pitch = if sp > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
            let yaw = Float::atan2(-r[(0, 1)], r[(1, 1)]);
            return Self {
                yaw: wrap_pi(yaw),
                pitch,
                roll: 0.0,
            };
        }
        let pitch = Float::asin(sp);
        let yaw = Float::atan2(r[(1, 0)], r[(0, 0)]);
        let roll = Float::atan2(r[(2, 1)], r[(2, 2)]);
        Self {
            yaw: wrap_pi(yaw),
            pitch,
            roll: wrap_pi(roll),
        }
    }

    pub fn near_gimbal_lock(&self) -> bool {
        (FRAC_PI_2 - self.pitch.abs()).abs() < GIMBAL_TOL
    }

    /// `[yaw, pitch, roll]` in degrees.
    pub fn degrees(&self) -> [f64; 3] {
        [
            self.yaw.to_degrees(),
            self.pitch.to_degrees(),
            self.roll.to_degrees(),
        ]
    }
}

/// Per-axis errors of a predicted transform against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TransformErrors {
    /// Signed Euler differences `pred − gt` in degrees, wrapped to (−180, 180],
    /// ordered yaw (z), pitch (y), roll (x).
    pub angle_deg: [f64; 3],
    /// `t_pred − t_gt`, per component.
    pub translation: [f64; 3],
    /// Either rotation sits within 1e-6 rad of pitch = ±90°, where yaw and
    /// roll are not separately identifiable.
    pub gimbal_lock: bool,
}

impl TransformErrors {
    pub fn angle_sq(&self) -> [f64; 3] {
        self.angle_deg.map(|e| e * e)
    }

    pub fn angle_abs(&self) -> [f64; 3] {
        self.angle_deg.map(Float::abs)
    }

    pub fn translation_sq(&self) -> [f64; 3] {
        self.translation.map(|e| e * e)
    }

    pub fn translation_abs(&self) -> [f64; 3] {
        self.translation.map(Float::abs)
    }
}

pub fn rotation_metrics(pred: &RigidTransform, gt: &RigidTransform) -> TransformErrors {
    let ep = EulerAngles::from_rotation(&pred.rotation);
    let eg = EulerAngles::from_rotation(&gt.rotation);
    let dp = [ep.yaw - eg.yaw, ep.pitch - eg.pitch, ep.roll - eg.roll];
    let dt = pred.translation - gt.translation;
    TransformErrors {
        angle_deg: dp.map(|d| wrap_pi(d).to_degrees()),
        translation: [dt.x, dt.y, dt.z],
        gimbal_lock: ep.near_gimbal_lock() || eg.near_gimbal_lock(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Shepperd's method, written independently of the Euler extraction.
    fn quat_from_matrix(r: &Mat3) -> [f64; 4] {
        let tr = r.trace();
        let (w, x, y, z);
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (r[(2, 1)] - r[(1, 2)]) / s;
            y = (r[(0, 2)] - r[(2, 0)]) / s;
            z = (r[(1, 0)] - r[(0, 1)]) / s;
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            w = (r[(2, 1)] - r[(1, 2)]) / s;
            x = 0.25 * s;
            y = (r[(0, 1)] + r[(1, 0)]) / s;
            z = (r[(0, 2)] + r[(2, 0)]) / s;
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            w = (r[(0, 2)] - r[(2, 0)]) / s;
            x = (r[(0, 1)] + r[(1, 0)]) / s;
            y = 0.25 * s;
            z = (r[(1, 2)] + r[(2, 1)]) / s;
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            w = (r[(1, 0)] - r[(0, 1)]) / s;
            x = (r[(0, 2)] + r[(2, 0)]) / s;
            y = (r[(1, 2)] + r[(2, 1)]) / s;
            z = 0.25 * s;
        }
        [w, x, y, z]
    }

    /// ZYX angles from a unit quaternion (aerospace formulas).
    fn quat_to_zyx(q: [f64; 4]) -> [f64; 3] {
        let [w, x, y, z] = q;
        let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
        let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
        let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
        [yaw, pitch, roll]
    }

    #[test]
    fn identical_transforms_have_zero_error() {
        let t = RigidTransform::new(
            EulerAngles::from_degrees(10.0, 20.0, 30.0).to_rotation(),
            Vec3::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        let e = rotation_metrics(&t, &t);
        assert_eq!(e.angle_deg, [0.0; 3]);
        assert_eq!(e.translation, [0.0; 3]);
    }

    #[test]
    fn single_axis_yaw() {
        let gt = RigidTransform::identity();
        let pred = RigidTransform::new(rot_z(10f64.to_radians()), Vec3::zeros()).unwrap();
        let e = rotation_metrics(&pred, &gt);
        assert!((e.angle_deg[0] - 10.0).abs() < 1e-12);
        assert!(e.angle_deg[1].abs() < 1e-12 && e.angle_deg[2].abs() < 1e-12);
    }

    #[test]
    fn round_trip_away_from_gimbal_lock() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5000 {
            let e = EulerAngles::new(
                rng.random_range(-PI..PI),
                rng.random_range(-FRAC_PI_2 + 0.01..FRAC_PI_2 - 0.01),
                rng.random_range(-PI..PI),
            );
            let back = EulerAngles::from_rotation(&e.to_rotation());
            assert!((back.yaw - e.yaw).abs() < 1e-9);
            assert!((back.pitch - e.pitch).abs() < 1e-9);
            assert!((back.roll - e.roll).abs() < 1e-9);
        }
    }

    #[test]
    fn gimbal_lock_is_flagged() {
        let gt = RigidTransform::new(
            EulerAngles::new(0.3, FRAC_PI_2, 0.2).to_rotation(),
            Vec3::zeros(),
        )
        .unwrap();
        let e = rotation_metrics(&gt, &RigidTransform::identity());
        assert!(e.gimbal_lock);
        assert!(e.angle_deg.iter().all(|x| x.is_finite()));
        let back = EulerAngles::from_rotation(&gt.rotation);
        assert!((back.to_rotation() - gt.rotation).norm() < 1e-9);
    }

    #[test]
    fn agrees_with_quaternion_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..2000 {
            let a = EulerAngles::new(
                rng.random_range(-PI..PI),
                rng.random_range(-1.5..1.5),
                rng.random_range(-PI..PI),
            );
            let b = EulerAngles::new(
                rng.random_range(-PI..PI),
                rng.random_range(-1.5..1.5),
                rng.random_range(-PI..PI),
            );
            let pred = RigidTransform::new(a.to_rotation(), Vec3::zeros()).unwrap();
            let gt = RigidTransform::new(b.to_rotation(), Vec3::zeros()).unwrap();
            let e = rotation_metrics(&pred, &gt);
            let qa = quat_to_zyx(quat_from_matrix(&pred.rotation));
            let qb = quat_to_zyx(quat_from_matrix(&gt.rotation));
            for i in 0..3 {
                let oracle = wrap_pi(qa[i] - qb[i]).to_degrees();
                let mut d = (oracle - e.angle_deg[i]).abs();
                d = d.min((360.0 - d).abs());
                assert!(d < 1e-6, "axis {i}: {oracle} vs {}", e.angle_deg[i]);
            }
        }
    }
}
