//! Building blocks shared by the subcommands: pair generation, per-method
//! prediction over a worker pool, and training with checkpointing.
//!
//! Parallel maps collect in input order, so results do not depend on the
//! number of workers.

use crate::error::{Result, ToolError};
use crate::io::{mix_seed, ArchivePair, Model};
use crate::report::training_log_csv;
use dcp_core::autodiff::Scalar;
use dcp_core::dataio::{generate_pair, LabeledPair, PairGenConfig, PointCloud};
use dcp_core::dcpnet::{DcpConfig, ModelParams};
use dcp_core::geometry::RigidTransform;
use dcp_core::icp::{icp_register, polish_with_icp, IcpConfig, IcpError};
use dcp_core::train::{self, EpochRecord, Metrics, TrainConfig, TrainError};
use rayon::prelude::*;
use std::path::Path;

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ToolError::usage(format!("cannot start {workers} workers: {e}")))
}

/// `per_cloud` pairs from each selected cloud. Pair `j` of cloud `i` draws
/// from its own generator seeded with `mix_seed(seed, i·per_cloud + j)`, so
/// a pair does not depend on which other clouds were selected.
pub fn make_pairs(
    clouds: &[PointCloud],
    selected: &[usize],
    cfg: &PairGenConfig,
    per_cloud: usize,
    seed: u64,
) -> Result<Vec<ArchivePair>> {
    let mut out = Vec::with_capacity(selected.len() * per_cloud);
    for &i in selected {
        for j in 0..per_cloud {
            let index = (i * per_cloud + j) as u64;
            let s = mix_seed(seed, index);
            let mut rng = PairGenConfig {
                seed: s,
                ..cfg.clone()
            }
            .rng();
            let pair = generate_pair(&clouds[i], cfg, &mut rng)
                .map_err(|e| ToolError::data(format!("cloud {i}"), e))?;
            out.push(ArchivePair {
                id: format!("{index:06}"),
                seed: s,
                pair,
            });
        }
    }
    Ok(out)
}

pub fn metrics_of(preds: &[RigidTransform], pairs: &[LabeledPair]) -> Metrics {
    Metrics::from_pairs(preds.iter().zip(pairs.iter().map(|p| &p.ground_truth)))
}

/// The final transform of an ICP run. A collapsed correspondence keeps the
/// last iterate that was reached.
fn icp_transform(
    r: std::result::Result<dcp_core::icp::IcpResult, IcpError>,
) -> std::result::Result<RigidTransform, IcpError> {
    match r {
        Ok(r) => Ok(r.transform),
        Err(IcpError::Degenerate { history, .. }) if !history.is_empty() => {
            Ok(history[history.len() - 1].transform)
        }
        Err(e) => Err(e),
    }
}

/// ICP from identity on every pair.
pub fn run_icp(
    pool: &rayon::ThreadPool,
    pairs: &[LabeledPair],
    cfg: &IcpConfig,
) -> Result<Vec<RigidTransform>> {
    run_polish(
        pool,
        pairs,
        &vec![RigidTransform::identity(); pairs.len()],
        cfg,
    )
}

/// ICP seeded with `init[i]` on pair `i`.
pub fn run_polish(
    pool: &rayon::ThreadPool,
    pairs: &[LabeledPair],
    init: &[RigidTransform],
    cfg: &IcpConfig,
) -> Result<Vec<RigidTransform>> {
    pool.install(|| {
        pairs
            .par_iter()
            .zip(init.par_iter())
            .enumerate()
            .map(|(i, (p, t0))| {
                icp_transform(polish_with_icp(&p.source, &p.target, t0, cfg))
                    .map_err(|e| ToolError::icp(format!("pair {i}"), e))
            })
            .collect()
    })
}

/// Network predictions, `batch` pairs per forward pass, batches spread over
/// the pool.
pub fn run_dcp(
    pool: &rayon::ThreadPool,
    model: &Model,
    pairs: &[LabeledPair],
    batch: usize,
) -> Result<Vec<RigidTransform>> {
    let refs: Vec<(&PointCloud, &PointCloud)> =
        pairs.iter().map(|p| (&p.source, &p.target)).collect();
    let chunks: Vec<Vec<RigidTransform>> = pool.install(|| {
        refs.par_chunks(batch.max(1))
            .enumerate()
            .map(|(c, chunk)| {
                model
                    .predict(chunk, chunk.len())
                    .map_err(|e| ToolError::model(format!("batch {c}"), e))
            })
            .collect::<Result<_>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Identity single-pair ICP, used by `register`.
pub fn register_icp(
    x: &PointCloud,
    y: &PointCloud,
    init: &RigidTransform,
    cfg: &IcpConfig,
) -> std::result::Result<RigidTransform, IcpError> {
    icp_transform(icp_register(x, y, init, cfg))
}

/// Outcome of a training run.
#[derive(Debug)]
pub struct Trained {
    pub model: Model,
    pub log: Vec<EpochRecord>,
}

/// Training stopped early; the log covers the finished epochs.
#[derive(Debug)]
pub struct TrainFailure {
    pub error: ToolError,
    pub log: Vec<EpochRecord>,
}

fn train_typed<T: Scalar>(
    model: &DcpConfig,
    train_set: &[LabeledPair],
    val_set: &[LabeledPair],
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord, Model),
) -> std::result::Result<(Model, Vec<EpochRecord>), (TrainError, Vec<EpochRecord>)> {
    let mut log = Vec::new();
    let r = train::train::<T>(
        model,
        train_set,
        val_set,
        cfg,
        |rec, params: &ModelParams<T>| {
            log.push(rec.clone());
            on_epoch(rec, Model::from(params.clone()));
        },
    );
    match r {
        Ok((params, log)) => Ok((Model::from(params), log)),
        Err(e) => Err((e, log)),
    }
}

/// Trains a model. With `out_dir`, writes `training_log.csv` there after
/// every epoch and the latest weights to `checkpoint`.
pub fn train_model(
    model: &DcpConfig,
    train_set: &[LabeledPair],
    val_set: &[LabeledPair],
    cfg: &TrainConfig,
    precision: crate::config::Precision,
    out_dir: Option<&Path>,
    checkpoint: Option<&Path>,
) -> std::result::Result<Trained, TrainFailure> {
    let mut io_error = None;
    let mut seen = Vec::new();
    let mut on_epoch = |rec: &EpochRecord, m: Model| {
        seen.push(rec.clone());
        if io_error.is_some() {
            return;
        }
        let write = || -> Result<()> {
            if let Some(dir) = out_dir {
                crate::io::write_file(&dir.join("training_log.csv"), training_log_csv(&seen))?;
            }
            if let Some(path) = checkpoint {
                m.save(path)?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            io_error = Some(e);
        }
    };
    let r = match precision {
        crate::config::Precision::F32 => {
            train_typed::<f32>(model, train_set, val_set, cfg, &mut on_epoch)
        }
        crate::config::Precision::F64 => {
            train_typed::<f64>(model, train_set, val_set, cfg, &mut on_epoch)
        }
    };
    match r {
        Ok((m, log)) => {
            if let Some(e) = io_error {
                return Err(TrainFailure { error: e, log });
            }
            if cfg.epochs == 0 {
                if let Some(path) = checkpoint {
                    m.save(path).map_err(|error| TrainFailure {
                        error,
                        log: Vec::new(),
                    })?;
                }
                if let Some(dir) = out_dir {
                    crate::io::write_file(&dir.join("training_log.csv"), training_log_csv(&[]))
                        .map_err(|error| TrainFailure {
                            error,
                            log: Vec::new(),
                        })?;
                }
            }
            Ok(Trained { model: m, log })
        }
        Err((e, log)) => Err(TrainFailure {
            error: ToolError::train(e),
            log,
        }),
    }
}

/// Plain pairs out of archive entries.
pub fn labeled(pairs: &[ArchivePair]) -> Vec<LabeledPair> {
    pairs.iter().map(|p| p.pair.clone()).collect()
}
