use super::{DataError, PointCloud};
use crate::geometry::{apply_transform, rot_x, rot_y, rot_z, RigidTransform, Vec3};
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Debug, Clone, PartialEq)]
pub struct PairGenConfig {
    /// Per-axis rotation angles are drawn from `[0, max_rot_deg]`.
    pub max_rot_deg: f64,
    /// Translation components are drawn from `[-trans_bound, trans_bound]`.
    pub trans_bound: f64,
    /// Clouds longer than this are truncated to their first `n_points`.
    pub n_points: usize,
    pub shuffle_target: bool,
    /// Perturb the source with clipped Gaussian noise after the target has
    /// been generated from the clean source.
    pub noise: bool,
    pub noise_sigma: f64,
    pub noise_clip: f64,
    pub seed: u64,
}

impl Default for PairGenConfig {
    fn default() -> Self {
        Self {
            max_rot_deg: 45.0,
            trans_bound: 0.5,
            n_points: 1024,
            shuffle_target: true,
            noise: false,
            noise_sigma: 0.01,
            noise_clip: 0.05,
            seed: 0,
        }
    }
}

impl PairGenConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        if !(self.max_rot_deg >= 0.0 && self.max_rot_deg.is_finite()) {
            return Err(DataError::InvalidConfig(
                "max_rot_deg must be finite and non-negative",
            ));
        }
        if !(self.trans_bound >= 0.0 && self.trans_bound.is_finite()) {
            return Err(DataError::InvalidConfig(
                "trans_bound must be finite and non-negative",
            ));
        }
        if self.n_points < 3 {
            return Err(DataError::InvalidConfig("n_points must be at least 3"));
        }
        if !(self.noise_sigma >= 0.0) || !(self.noise_clip > 0.0) {
            return Err(DataError::InvalidConfig(
                "noise_sigma must be >= 0 and noise_clip > 0",
            ));
        }
        Ok(())
    }

    /// A fresh generator seeded from `seed`.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// A source cloud, its transformed copy and the motion between them.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub source: PointCloud,
    pub target: PointCloud,
    pub ground_truth: RigidTransform,
    pub noise_applied: bool,
    /// `target[i]` was generated from `source[target_perm[i]]`.
    pub target_perm: Vec<usize>,
}

impl LabeledPair {
    /// Source points re-ordered to match the target index by index.
    pub fn matched_source(&self) -> Vec<Vec3> {
        self.target_perm
            .iter()
            .map(|&i| self.source.points[i])
            .collect()
    }
}

/// Draws a rigid motion and applies it to `p`.
///
/// Angles about x, y and z are each uniform in `[0, max_rot_deg]` and are
/// composed as `Rz·Ry·Rx`. The generator is consumed in a fixed order
/// (angles, translation, shuffle, noise) so a seed pins the whole pair.
pub fn generate_pair<R: Rng + ?Sized>(
    p: &PointCloud,
    cfg: &PairGenConfig,
    rng: &mut R,
) -> Result<LabeledPair, DataError> {
    cfg.validate()?;
    if p.len() < 3 {
        return Err(DataError::DegenerateCloud("fewer than 3 points"));
    }
    let mut source = p.clone();
    source.points.truncate(cfg.n_points);

    let max = cfg.max_rot_deg.to_radians();
    let ax = rng.random::<f64>() * max;
    let ay = rng.random::<f64>() * max;
    let az = rng.random::<f64>() * max;
    let b = cfg.trans_bound;
    let t = Vec3::new(
        (2.0 * rng.random::<f64>() - 1.0) * b,
        (2.0 * rng.random::<f64>() - 1.0) * b,
        (2.0 * rng.random::<f64>() - 1.0) * b,
    );
    let ground_truth = RigidTransform {
        rotation: rot_z(az) * rot_y(ay) * rot_x(ax),
        translation: t,
    };

    let moved = apply_transform(&ground_truth, &source);
    let mut perm: Vec<usize> = (0..source.len()).collect();
    if cfg.shuffle_target {
        perm.shuffle(rng);
    }
    let target = moved.permuted(&perm);
    if cfg.noise {
        source = add_clipped_gaussian_noise(&source, cfg.noise_sigma, cfg.noise_clip, rng);
    }
    Ok(LabeledPair {
        source,
        target,
        ground_truth,
        noise_applied: cfg.noise,
        target_perm: perm,
    })
}

/// Adds i.i.d. `N(0, sigma²)` to every coordinate, each offset clamped to
/// `[-clip, clip]`. Offsets are drawn in point order, x then y then z.
pub fn add_clipped_gaussian_noise<R: Rng + ?Sized>(
    p: &PointCloud,
    sigma: f64,
    clip: f64,
    rng: &mut R,
) -> PointCloud {
    if sigma == 0.0 {
        return p.clone();
    }
    let mut draw = || {
        let z: f64 = StandardNormal.sample(rng);
        (z * sigma).clamp(-clip, clip)
    };
    PointCloud {
        points: p
            .points
            .iter()
            .map(|q| q + Vec3::new(draw(), draw(), draw()))
            .collect(),
        label: p.label.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    RandomInstance,
    /// Whole categories go to one side: the first `fraction` of the sorted
    /// category names train, the rest test.
    ByCategory,
}

/// Returns `(train, test)` index lists into `clouds`, each in ascending order.
pub fn dataset_split(
    clouds: &[PointCloud],
    mode: SplitMode,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DataError::InvalidConfig(
            "split fraction must lie in [0, 1]",
        ));
    }
    match mode {
        SplitMode::RandomInstance => {
            let mut idx: Vec<usize> = (0..clouds.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_train = Float::round(fraction * clouds.len() as f64) as usize;
            let mut train = idx[..n_train].to_vec();
            let mut test = idx[n_train..].to_vec();
            train.sort_unstable();
            test.sort_unstable();
            Ok((train, test))
        }
        SplitMode::ByCategory => {
            let mut cats: BTreeSet<&String> = BTreeSet::new();
            for (i, c) in clouds.iter().enumerate() {
                cats.insert(c.label.as_ref().ok_or(DataError::MissingLabel(i))?);
            }
            let n_train = Float::round(fraction * cats.len() as f64) as usize;
            let train_cats: BTreeSet<&String> = cats.into_iter().take(n_train).collect();
            let (train, test) = (0..clouds.len()).partition(|&i| {
                train_cats.contains(clouds[i].label.as_ref().expect("checked above"))
            });
            Ok((train, test))
        }
    }
}
