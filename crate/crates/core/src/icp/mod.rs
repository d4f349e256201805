//! Point-to-point ICP over an exact k-d tree, and ICP polishing of an
//! externally supplied initial alignment.

mod kdtree;

pub use kdtree::SpatialIndex;

use crate::dataio::PointCloud;
use crate::geometry::{procrustes_solve, GeometryError, Procrustes, RigidTransform, Vec3};
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IcpError {
    #[error("need at least 3 points in each cloud (source {source_len}, target {target_len})")]
    TooFewPoints {
        source_len: usize,
        target_len: usize,
    },
    #[error("all correspondences collapsed onto target point {target} after {} recorded iterates", history.len())]
    Degenerate {
        target: usize,
        history: Vec<IcpState>,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpConfig {
    pub max_iters: usize,
    /// Stop once the objective decreases by less than this.
    pub tol: f64,
    /// Stop once `‖ΔR‖_F + ‖Δt‖` relative to `1 + ‖t‖` falls below this.
    pub transform_tol: f64,
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-8,
            transform_tol: 1e-10,
        }
    }
}

impl IcpConfig {
    /// Exactly `iters` updates, no early stop. Used for timing.
    pub fn fixed(iters: usize) -> Self {
        Self {
            max_iters: iters,
            tol: f64::NEG_INFINITY,
            transform_tol: f64::NEG_INFINITY,
        }
    }
}

/// One iterate: the transform, its closest-point correspondence and the
/// objective `1/N Σ ‖R·xᵢ + t − y_{m(i)}‖²` under that correspondence.
#[derive(Debug, Clone, PartialEq)]
pub struct IcpState {
    pub iteration: usize,
    pub transform: RigidTransform,
    pub objective: f64,
    pub correspondence: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    pub transform: RigidTransform,
    /// Every iterate, starting with the initial transform at iteration 0.
    pub history: Vec<IcpState>,
    pub converged: bool,
}

impl IcpResult {
    pub fn objective(&self) -> f64 {
        self.history.last().map_or(f64::INFINITY, |s| s.objective)
    }
}

/// Closest-point assignment of `T(x)` into the index and its objective.
pub fn correspond(index: &SpatialIndex, x: &[Vec3], t: &RigidTransform) -> (Vec<usize>, f64) {
    let mut sum = 0.0;
    let corr = x
        .iter()
        .map(|p| {
            let (j, d) = index.nearest(&t.apply(p)).expect("non-empty index");
            sum += d * d;
            j
        })
        .collect();
    (
        corr,
        if x.is_empty() {
            0.0
        } else {
            sum / x.len() as f64
        },
    )
}

/// Closest-point objective of `t` (mean squared distance to nearest targets).
pub fn closest_point_objective(x: &PointCloud, y: &PointCloud, t: &RigidTransform) -> f64 {
    correspond(&SpatialIndex::new(&y.points), &x.points, t).1
}

/// The alignment half of an ICP iteration: Procrustes on `x[i] ↔ y[corr[i]]`.
pub fn icp_step(x: &[Vec3], y: &[Vec3], corr: &[usize]) -> Result<Procrustes, GeometryError> {
    let matched: Vec<Vec3> = corr.iter().map(|&j| y[j]).collect();
    procrustes_solve(x, &matched)
}

fn transform_change(a: &RigidTransform, b: &RigidTransform) -> f64 {
    ((a.rotation - b.rotation).norm() + (a.translation - b.translation).norm())
        / (1.0 + b.translation.norm())
}

/// Vanilla ICP: alternate closest-point correspondence (source → target) and
/// closed-form alignment until the objective stalls.
///
/// The recorded objective is non-increasing: the Procrustes step cannot raise
/// it under the old correspondence, and re-matching cannot raise it under the
/// new transform.
pub fn icp_register(
    x: &PointCloud,
    y: &PointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> Result<IcpResult, IcpError> {
    if x.len() < 3 || y.len() < 3 {
        return Err(IcpError::TooFewPoints {
            source_len: x.len(),
            target_len: y.len(),
        });
    }
    let index = SpatialIndex::new(&y.points);
    let (corr, objective) = correspond(&index, &x.points, init);
    let mut history = alloc::vec![IcpState {
        iteration: 0,
        transform: *init,
        objective,
        correspondence: corr
    }];
    let mut converged = false;

    for k in 1..=cfg.max_iters {
        let prev = history.last().expect("history starts non-empty");
        let first = prev.correspondence[0];
        if prev.correspondence.iter().all(|&j| j == first) {
            return Err(IcpError::Degenerate {
                target: first,
                history,
            });
        }
        let step = icp_step(&x.points, &y.points, &prev.correspondence)?;
        let transform = step.transform;
        let (corr, objective) = correspond(&index, &x.points, &transform);
        let decrease = prev.objective - objective;
        let moved = transform_change(&transform, &prev.transform);
        history.push(IcpState {
            iteration: k,
            transform,
            objective,
            correspondence: corr,
        });
        if decrease < cfg.tol || moved < cfg.transform_tol {
            converged = true;
            break;
        }
    }
    let transform = history.last().expect("non-empty").transform;
    Ok(IcpResult {
        transform,
        history,
        converged,
    })
}

/// ICP started from an alignment produced elsewhere (e.g. the learned
/// model). The final objective never exceeds the objective at `init`.
pub fn polish_with_icp(
    x: &PointCloud,
    y: &PointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> Result<IcpResult, IcpError> {
    icp_register(x, y, init, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{shapes, PairGenConfig};
    use crate::geometry::{apply_transform, rot_x, rot_y, rot_z};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn shape_cloud(k: usize, n: usize, seed: u64) -> PointCloud {
        let m = shapes::shape_mesh(k);
        crate::dataio::normalize_unit_sphere(&crate::dataio::sample_surface(&m, n, seed).unwrap())
            .unwrap()
    }

    fn assert_monotone(h: &[IcpState]) {
        for w in h.windows(2) {
            assert!(
                w[1].objective <= w[0].objective + 1e-12,
                "{} -> {}",
                w[0].objective,
                w[1].objective
            );
        }
    }

    #[test]
    fn identical_clouds_converge_at_once() {
        let x = shape_cloud(0, 300, 1);
        let r = icp_register(&x, &x, &RigidTransform::identity(), &IcpConfig::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.history.len(), 2);
        assert!(r.objective() < 1e-12);
    }

    #[test]
    fn small_rotation_recovered() {
        let x = shape_cloud(5, 1024, 2);
        let gt = RigidTransform::new(rot_z(5f64.to_radians()), Vec3::zeros()).unwrap();
        let y = apply_transform(&gt, &x);
        let r = icp_register(
            &x,
            &y,
            &RigidTransform::identity(),
            &IcpConfig {
                max_iters: 50,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(r.history.len() <= 51);
        assert!(r.transform.rotation_angle_to(&gt).to_degrees() < 0.1);
        assert_monotone(&r.history);
    }

    #[test]
    fn exact_correspondence_step_is_procrustes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<Vec3> = (0..50)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let y: Vec<Vec3> = (0..50)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let corr: Vec<usize> = (0..50).rev().collect();
        let matched: Vec<Vec3> = corr.iter().map(|&j| y[j]).collect();
        assert_eq!(
            icp_step(&x, &y, &corr).unwrap(),
            procrustes_solve(&x, &matched).unwrap()
        );
    }

    #[test]
    fn objective_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = PairGenConfig::default();
        for trial in 0..20 {
            let x = shape_cloud(trial % 20, 256, trial as u64);
            let pair = crate::dataio::generate_pair(&x, &cfg, &mut rng).unwrap();
            let r = icp_register(
                &pair.source,
                &pair.target,
                &RigidTransform::identity(),
                &IcpConfig::default(),
            )
            .unwrap();
            assert_monotone(&r.history);
        }
    }

    #[test]
    fn polishing_from_near_truth() {
        let x = shape_cloud(1, 512, 5);
        let gt = RigidTransform::new(
            rot_z(0.5) * rot_y(0.3) * rot_x(0.2),
            Vec3::new(0.1, 0.2, -0.1),
        )
        .unwrap();
        let y = apply_transform(&gt, &x);
        let near = RigidTransform {
            rotation: gt.rotation * rot_x(4f64.to_radians()),
            translation: gt.translation,
        };
        let start = closest_point_objective(&x, &y, &near);
        let r = polish_with_icp(&x, &y, &near, &IcpConfig::default()).unwrap();
        assert!(r.objective() <= start);
        assert!(r.transform.rotation_angle_to(&gt).to_degrees() < 0.1);

        let at_truth = polish_with_icp(&x, &y, &gt, &IcpConfig::default()).unwrap();
        assert!(at_truth.transform.rotation_angle_to(&gt) < 1e-8);
    }

    #[test]
    fn near_truth_beats_identity_on_large_rotation() {
        let gt = RigidTransform::new(
            rot_z(40f64.to_radians()) * rot_y(40f64.to_radians()) * rot_x(40f64.to_radians()),
            Vec3::new(0.2, 0.0, 0.1),
        )
        .unwrap();
        let near = RigidTransform {
            rotation: gt.rotation * rot_z(3f64.to_radians()),
            translation: gt.translation,
        };
        let mut strictly_better = 0;
        for k in 0..shapes::SHAPE_NAMES.len() {
            let x = shape_cloud(k, 256, 6);
            let y = apply_transform(&gt, &x);
            let from_id =
                polish_with_icp(&x, &y, &RigidTransform::identity(), &IcpConfig::default())
                    .unwrap();
            let from_near = polish_with_icp(&x, &y, &near, &IcpConfig::default()).unwrap();
            let (a, b) = (
                from_near.transform.rotation_angle_to(&gt),
                from_id.transform.rotation_angle_to(&gt),
            );
            assert!(a <= b + 1e-9, "shape {k}: {a} vs {b}");
            if a + 1e-3 < b {
                strictly_better += 1;
            }
        }
        assert!(strictly_better > 0);
    }

    #[test]
    fn collapsed_correspondences_error() {
        let x = PointCloud::new(alloc::vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(0.1, 0.0, 0.0),
            Vec3::new(0.0, 0.1, 0.0)
        ]);
        let y = PointCloud::new(alloc::vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(50.0, 0.0, 0.0),
            Vec3::new(0.0, 50.0, 0.0)
        ]);
        match icp_register(&x, &y, &RigidTransform::identity(), &IcpConfig::default()) {
            Err(IcpError::Degenerate { target: 0, history }) => assert_eq!(history.len(), 1),
            other => panic!("unexpected {other:?}"),
        }
        let tiny = PointCloud::new(alloc::vec![Vec3::zeros(); 2]);
        assert!(matches!(
            icp_register(
                &tiny,
                &y,
                &RigidTransform::identity(),
                &IcpConfig::default()
            ),
            Err(IcpError::TooFewPoints { .. })
        ));
    }
}
