use crate::config::{ExperimentConfig, ExperimentKind, KvConfig, Method};
use crate::error::{Result, ToolError};
use crate::io::{load_corpus, Model};
use crate::pipeline::{
    labeled, make_pairs, metrics_of, run_dcp, run_icp, run_polish, thread_pool, train_model,
};
use crate::report::{Report, RowResult};
use dcp_core::dataio::{dataset_split, LabeledPair};
use dcp_core::geometry::RigidTransform;
use std::collections::BTreeMap;

/// A written report plus the first failure, if any method failed.
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub report: Report,
    pub failure: Option<ToolError>,
}

impl ExperimentOutcome {
    pub fn into_result(self) -> Result<()> {
        self.failure.map_or(Ok(()), Err)
    }
}

struct Models<'a> {
    cfg: &'a ExperimentConfig,
    train: &'a [LabeledPair],
    test: &'a [LabeledPair],
    cache: BTreeMap<Method, std::result::Result<Model, String>>,
    first_error: Option<ToolError>,
}

impl Models<'_> {
    /// Trained (or loaded) weights for `dcp-v1` / `dcp-v2`, built once.
    fn get(&mut self, m: Method) -> std::result::Result<&Model, String> {
        if !self.cache.contains_key(&m) {
            let r = self.build(m);
            let entry = match r {
                Ok(model) => Ok(model),
                Err(e) => {
                    let msg = e.to_string();
                    self.first_error.get_or_insert(e);
                    Err(msg)
                }
            };
            self.cache.insert(m, entry);
        }
        self.cache[&m].as_ref().map_err(Clone::clone)
    }

    fn build(&self, m: Method) -> Result<Model> {
        let ckpt = match m {
            Method::DcpV1 => &self.cfg.checkpoint_v1,
            _ => &self.cfg.checkpoint_v2,
        };
        if let Some(p) = ckpt {
            return Model::load(p);
        }
        let dir = self.cfg.output.join("training").join(m.name());
        let ckpt = self
            .cfg
            .output
            .join("checkpoints")
            .join(format!("{}.dcpk", m.name()));
        train_model(
            &self.cfg.model_for(m),
            self.train,
            self.test,
            &self.cfg.train,
            self.cfg.precision,
            Some(&dir),
            Some(&ckpt),
        )
        .map(|t| t.model)
        .map_err(|f| {
            let done = f.log.len();
            match f.error {
                ToolError::Numerical(msg) => ToolError::Numerical(format!(
                    "{} training diverged after {done} epoch(s): {msg}",
                    m.name()
                )),
                other => other,
            }
        })
    }
}

fn title(cfg: &ExperimentConfig, n_train: usize, n_test: usize) -> String {
    let kind = match cfg.kind {
        ExperimentKind::Full => "random split",
        ExperimentKind::Unseen => "unseen categories",
        ExperimentKind::Noise => "noisy source",
    };
    format!(
        "Experiment: {kind}; {n_train} training pairs, {n_test} test pairs, {} points, seed {}",
        cfg.data.n_points, cfg.seed
    )
}

/// Split, train what is needed, evaluate every method and write the report.
/// A method that fails (e.g. diverged training) becomes an annotated row;
/// the others are still reported.
pub fn experiment(kv: &KvConfig) -> Result<ExperimentOutcome> {
    let cfg = ExperimentConfig::from_kv(kv)?;
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
    let test = labeled(&make_pairs(
        &clouds,
        &test_idx,
        &cfg.data.pairs,
        ppc,
        cfg.seed,
    )?);
    if test.is_empty() {
        return Err(ToolError::usage("the split leaves no test pairs"));
    }
    let pool = thread_pool(cfg.workers)?;
    let batch = cfg.train.batch_size;
    let mut report = Report::new(title(&cfg, train.len(), test.len()), cfg.hash.clone());
    let mut models = Models {
        cfg: &cfg,
        train: &train,
        test: &test,
        cache: BTreeMap::new(),
        first_error: None,
    };
    for &m in &cfg.methods {
        let preds: std::result::Result<Vec<RigidTransform>, String> = match m {
            Method::Identity => Ok(vec![RigidTransform::identity(); test.len()]),
            Method::Oracle => Ok(test.iter().map(|p| p.ground_truth).collect()),
            Method::Icp => run_icp(&pool, &test, &cfg.icp).map_err(|e| e.to_string()),
            Method::DcpV1 | Method::DcpV2 => models
                .get(m)
                .and_then(|model| run_dcp(&pool, model, &test, batch).map_err(|e| e.to_string())),
            Method::DcpIcp => models.get(cfg.polish).and_then(|model| {
                let init = run_dcp(&pool, model, &test, batch).map_err(|e| e.to_string())?;
                run_polish(&pool, &test, &init, &cfg.icp).map_err(|e| e.to_string())
            }),
        };
        let row = match preds {
            Ok(p) => RowResult::Ok(metrics_of(&p, &test)),
            Err(msg) => RowResult::Failed(msg),
        };
        report.push(m.name(), row);
    }
    report.write(&cfg.output)?;
    let failure = models.first_error.take().or_else(|| {
        report.rows.iter().find_map(|r| match &r.result {
            RowResult::Failed(msg) => Some(ToolError::Numerical(format!("{}: {msg}", r.method))),
            RowResult::Ok(_) => None,
        })
    });
    Ok(ExperimentOutcome {
        config: cfg,
        report,
        failure,
    })
}
