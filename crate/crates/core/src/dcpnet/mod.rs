//! The DCP registration network: embeddings, attention residual, pointer,
//! rigid head and training loss.

mod checkpoint;
mod config;
mod knn;
mod model;
mod params;

pub use checkpoint::{
    decode as decode_checkpoint, encode as encode_checkpoint, read_records, CheckpointError,
    RawRecord, CONFIG_RECORD,
};
pub use config::{DcpConfig, Embedding, Head};
pub use knn::{knn_features, knn_graph, KnnGraph};
pub use model::{
    bind, dcp_forward, dcp_loss, pointer_softmatch, predict, read_transforms, soft_correspondence,
    transform_loss, DcpOutput, Layers, Mode, PairBatch,
};
pub use params::{ModelParams, ParamEntry};

use crate::autodiff::{AutodiffError, BatchStats, Scalar};
use crate::geometry::GeometryError;
use alloc::string::String;
use alloc::vec::Vec;

/// Momentum of the running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DcpError {
    #[error("invalid model config: {0}")]
    InvalidConfig(&'static str),
    #[error("bad value {value:?} for {key}")]
    ConfigValue { key: String, value: String },
    #[error("unknown config key {0}")]
    UnknownKey(String),
    #[error("parameter {0} missing")]
    MissingParam(String),
    #[error("unexpected parameter {0}")]
    UnexpectedParam(String),
    #[error("parameter {name}: expected shape {expected:?}, found {found:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("k = {k} needs more than k points, got {n}")]
    InvalidK { k: usize, n: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch clouds must share sizes {expected:?}, got {found:?}")]
    BatchShape {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("dgcnn embedding needs a neighbor graph")]
    MissingGraph,
    #[error("non-finite network output")]
    NonFinite,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

/// Folds batch statistics into the running estimates:
/// `running ← (1 − m)·running + m·batch`.
pub fn apply_bn_updates<T: Scalar>(
    params: &mut ModelParams<T>,
    updates: &[(usize, BatchStats<T>)],
    momentum: f64,
) {
    let m = T::from_f64(momentum);
    let keep = T::one() - m;
    let entries = params.entries_mut();
    for (pos, stats) in updates {
        for (slot, batch) in [(*pos, &stats.mean), (*pos + 1, &stats.var)] {
            for (r, &b) in entries[slot].value.data_mut().iter_mut().zip(batch) {
                *r = keep * *r + m * b;
            }
        }
    }
}

#[cfg(test)]
mod tests;
