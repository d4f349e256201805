use crate::cli::{TrainArgs, TrainMethod};
use crate::cmd::resolve_config;
use crate::config::{ExperimentConfig, Method};
use crate::error::{Result, ToolError};
use crate::io::load_corpus;
use crate::pipeline::{labeled, make_pairs, train_model};
use dcp_core::dataio::dataset_split;

/// Trains on the training split; the test split is only scored in the log.
/// Writes `training_log.csv` and `checkpoints/<method>.dcpk` under the
/// output directory, both refreshed after every epoch.
pub fn train(a: &TrainArgs) -> Result<()> {
    let kv = resolve_config(&a.config)?;
    let cfg = ExperimentConfig::from_kv(&kv)?;
    let method = match a.method {
        TrainMethod::DcpV1 => Method::DcpV1,
        TrainMethod::DcpV2 => Method::DcpV2,
    };
    let clouds = load_corpus(&cfg.data.corpus, cfg.data.n_points, cfg.seed)?;
    let (train_idx, test_idx) =
        dataset_split(&clouds, cfg.data.split, cfg.data.train_fraction, cfg.seed)
            .map_err(|e| ToolError::data("corpus", e))?;
    let ppc = cfg.data.pairs_per_cloud;
    let train = labeled(&make_pairs(
        &clouds,
        &train_idx,
        &cfg.data.pairs,
        ppc,
        cfg.seed,
    )?);
    let val = labeled(&make_pairs(
        &clouds,
        &test_idx,
        &cfg.data.pairs,
        ppc,
        cfg.seed,
    )?);
    let ckpt = cfg
        .output
        .join("checkpoints")
        .join(format!("{}.dcpk", method.name()));
    let trained = train_model(
        &cfg.model_for(method),
        &train,
        &val,
        &cfg.train,
        cfg.precision,
        Some(&cfg.output),
        Some(&ckpt),
    )
    .map_err(|f| f.error)?;
    if let Some(last) = trained.log.last() {
        eprintln!("epoch {}: train loss {:.6}", last.epoch, last.train_loss);
        if let Some(m) = &last.val {
            eprintln!(
                "validation MAE(R) {:.4} deg, MAE(t) {:.6}",
                m.mae_r, m.mae_t
            );
        }
    }
    eprintln!("checkpoint: {}", ckpt.display());
    Ok(())
}
