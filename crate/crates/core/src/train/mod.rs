//! Optimization loop, learning-rate schedule and evaluation metrics.

mod adam;
mod metrics;

pub use adam::{AdamConfig, LrSchedule, OptimizerState};
pub use metrics::Metrics;

use crate::autodiff::{Scalar, Tape};
use crate::dataio::{LabeledPair, PointCloud};
use crate::dcpnet::{
    apply_bn_updates, bind, dcp_forward, dcp_loss, predict, DcpConfig, DcpError, Embedding, Mode,
    ModelParams, PairBatch, BN_MOMENTUM,
};
use crate::geometry::RigidTransform;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite gradient in {param} at element {index}")]
    NonFiniteGradient { param: String, index: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error(transparent)]
    Model(#[from] DcpError),
}

/// Knobs of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    /// Validate every this many epochs (and after the last); 0 disables.
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn full(seed: u64) -> Self {
        Self {
            epochs: 250,
            batch_size: 32,
            seed,
            schedule: LrSchedule::full(),
            adam: AdamConfig::default(),
            eval_every: 1,
        }
    }

    pub fn desk(seed: u64) -> Self {
        Self {
            epochs: 50,
            schedule: LrSchedule::desk(),
            ..Self::full(seed)
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val: Option<Metrics>,
}

fn graph_k(cfg: &DcpConfig) -> Option<usize> {
    (cfg.embedding == Embedding::Dgcnn).then_some(cfg.k)
}

/// One optimizer step on a batch; returns the batch loss.
pub fn train_step<T: Scalar>(
    params: &mut ModelParams<T>,
    opt: &mut OptimizerState<T>,
    batch: &[&LabeledPair],
    lr: f64,
) -> Result<f64, TrainError> {
    let refs: Vec<(&PointCloud, &PointCloud)> =
        batch.iter().map(|p| (&p.source, &p.target)).collect();
    let gts: Vec<RigidTransform> = batch.iter().map(|p| p.ground_truth).collect();
    let pb = PairBatch::new(&refs, graph_k(&params.config))?;
    let mut tape = Tape::new();
    let vars = bind(&mut tape, params, true);
    let out = dcp_forward(&mut tape, params, &vars, &pb, Mode::Train)?;
    let loss = dcp_loss(&mut tape, out.rotation, out.translation, &gts)?;
    let value = tape.value(loss).item().map_or(f64::NAN, Scalar::as_f64);
    if !value.is_finite() {
        return Err(TrainError::NonFiniteLoss { epoch: 0, batch: 0 });
    }
    tape.backward(loss).map_err(DcpError::from)?;
    let grads: Vec<Option<&[T]>> = vars.iter().map(|&v| tape.grad(v)).collect();
    opt.step(params, &grads, lr)?;
    apply_bn_updates(params, &out.bn_updates, BN_MOMENTUM);
    Ok(value)
}

/// Trains from fresh weights (seeded by `cfg.seed`). `on_epoch` sees every
/// finished epoch, e.g. to write checkpoints; a non-finite loss stops the
/// run and leaves whatever the callback last saved untouched.
pub fn train<T: Scalar>(
    model: &DcpConfig,
    train_set: &[LabeledPair],
    val_set: &[LabeledPair],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &ModelParams<T>),
) -> Result<(ModelParams<T>, Vec<EpochRecord>), TrainError> {
    let mut params = ModelParams::<T>::init(model, cfg.seed)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    if cfg.epochs == 0 {
        return Ok((params, log));
    }
    if train_set.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut opt = OptimizerState::new(&params, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_da7a);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let batch: Vec<&LabeledPair> = chunk.iter().map(|&i| &train_set[i]).collect();
            let loss = match train_step(&mut params, &mut opt, &batch, lr) {
                Err(TrainError::NonFiniteLoss { .. }) => {
                    return Err(TrainError::NonFiniteLoss { epoch, batch: b })
                }
                r => r?,
            };
            total += loss * chunk.len() as f64;
        }
        let last = epoch + 1 == cfg.epochs;
        let val = if !val_set.is_empty()
            && cfg.eval_every > 0
            && ((epoch + 1) % cfg.eval_every == 0 || last)
        {
            Some(evaluate(&params, val_set, cfg.batch_size)?)
        } else {
            None
        };
        let rec = EpochRecord {
            epoch,
            lr,
            train_loss: total / train_set.len() as f64,
            val,
        };
        on_epoch(&rec, &params);
        log.push(rec);
    }
    Ok((params, log))
}

/// Metrics of the model's predictions on `pairs`.
pub fn evaluate<T: Scalar>(
    params: &ModelParams<T>,
    pairs: &[LabeledPair],
    batch: usize,
) -> Result<Metrics, DcpError> {
    let refs: Vec<(&PointCloud, &PointCloud)> =
        pairs.iter().map(|p| (&p.source, &p.target)).collect();
    let preds = predict(params, &refs, batch)?;
    Ok(Metrics::from_pairs(
        preds.iter().zip(pairs.iter().map(|p| &p.ground_truth)),
    ))
}

#[cfg(test)]
mod tests;
