use crate::cli::EvalArgs;
use crate::error::{Result, ToolError};
use crate::io::{read_archive, Model, MANIFEST};
use crate::pipeline::{labeled, metrics_of, run_dcp, run_polish, thread_pool};
use crate::report::{Report, RowResult};
use dcp_core::icp::IcpConfig;
use sha2::{Digest, Sha256};

/// Scores a checkpoint on an archive. The report hash covers the checkpoint
/// bytes, the archive manifest and the polish flag.
pub fn eval(a: &EvalArgs) -> Result<()> {
    if !a.checkpoint.is_file() {
        return Err(ToolError::usage(format!(
            "checkpoint {} does not exist",
            a.checkpoint.display()
        )));
    }
    let bytes = std::fs::read(&a.checkpoint).map_err(|e| ToolError::io(&a.checkpoint, e))?;
    let model = Model::decode(&bytes).map_err(|e| ToolError::data(&a.checkpoint, e))?;
    let pairs = labeled(&read_archive(&a.pairs)?);
    let mut h = Sha256::new();
    h.update(&bytes);
    h.update(std::fs::read(a.pairs.join(MANIFEST)).unwrap_or_default());
    h.update([u8::from(a.polish)]);
    let pool = thread_pool(a.workers)?;
    let name = if model.config().attention {
        "dcp-v2"
    } else {
        "dcp-v1"
    };
    let mut report = Report::new(
        format!(
            "Evaluation of {} on {} pairs",
            a.checkpoint.display(),
            pairs.len()
        ),
        hex::encode(h.finalize()),
    );
    let preds = run_dcp(&pool, &model, &pairs, a.batch)?;
    report.push(name, RowResult::Ok(metrics_of(&preds, &pairs)));
    if a.polish {
        let polished = run_polish(&pool, &pairs, &preds, &IcpConfig::default())?;
        report.push("dcp+icp", RowResult::Ok(metrics_of(&polished, &pairs)));
    }
    if let Some(out) = &a.out {
        report.write(out)?;
    }
    print!("{}", report.to_text());
    Ok(())
}
