use crate::geometry::{rotation_metrics, RigidTransform};
use num_traits::Float;

/// Pooled registration errors. Rotation errors are per-axis Euler angle
/// differences in degrees, translation errors per component; each pools all
/// three axes of every sample.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub mse_r: f64,
    pub rmse_r: f64,
    pub mae_r: f64,
    pub mse_t: f64,
    pub rmse_t: f64,
    pub mae_t: f64,
    pub count: usize,
    /// Samples whose prediction or ground truth sits at gimbal lock.
    pub gimbal_lock: usize,
}

impl Metrics {
    /// Pools errors of `(prediction, ground truth)` pairs.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = (&'a RigidTransform, &'a RigidTransform)>,
    ) -> Self {
        let mut m = Metrics::default();
        let (mut sr, mut ar, mut st, mut at) = (0.0, 0.0, 0.0, 0.0);
        for (pred, gt) in pairs {
            let e = rotation_metrics(pred, gt);
            sr += e.angle_sq().iter().sum::<f64>();
            ar += e.angle_abs().iter().sum::<f64>();
            st += e.translation_sq().iter().sum::<f64>();
            at += e.translation_abs().iter().sum::<f64>();
            m.count += 1;
            m.gimbal_lock += usize::from(e.gimbal_lock);
        }
        if m.count == 0 {
            return m;
        }
        let n = 3.0 * m.count as f64;
        m.mse_r = sr / n;
        m.rmse_r = Float::sqrt(m.mse_r);
        m.mae_r = ar / n;
        m.mse_t = st / n;
        m.rmse_t = Float::sqrt(m.mse_t);
        m.mae_t = at / n;
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_z, EulerAngles, Vec3};
    use alloc::vec::Vec;

    #[test]
    fn oracle_predictions_score_zero() {
        let gts: Vec<RigidTransform> = (0..5)
            .map(|i| {
                RigidTransform::new(
                    EulerAngles::from_degrees(10.0 * i as f64, 5.0, -3.0).to_rotation(),
                    Vec3::new(0.1, 0.0, -0.2),
                )
                .unwrap()
            })
            .collect();
        let m = Metrics::from_pairs(gts.iter().zip(&gts));
        assert_eq!(
            (m.mse_r, m.mae_r, m.mse_t, m.mae_t, m.count),
            (0.0, 0.0, 0.0, 0.0, 5)
        );
    }

    #[test]
    fn identity_against_thirty_degrees_about_z() {
        let gt = RigidTransform::new(rot_z(30f64.to_radians()), Vec3::zeros()).unwrap();
        let id = RigidTransform::identity();
        let m = Metrics::from_pairs([(&id, &gt), (&id, &gt)]);
        assert!((m.mae_r - 10.0).abs() < 1e-9);
        assert!((m.mse_r - 300.0).abs() < 1e-7);
        assert_eq!(m.rmse_r, m.mse_r.sqrt());
    }
}
