//! `key = value` configuration files and the experiment settings read from them.
//!
//! Lines are `key = value`; `#` starts a comment; keys are dotted
//! (`train.epochs`). Every key must be consumed by the command that reads the
//! file, so a misspelt key is an error rather than a silent default.

use crate::error::{Result, ToolError};
use dcp_core::dataio::{PairGenConfig, SplitMode};
use dcp_core::dcpnet::DcpConfig;
use dcp_core::icp::IcpConfig;
use dcp_core::train::TrainConfig;
use sha2::{Digest, Sha256};
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// Keys left out of the config hash: where output goes and how many
/// threads run do not change a report.
pub const UNHASHED_KEYS: [&str; 2] = ["output", "experiment.workers"];

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ToolError::usage(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = k.trim();
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | '+'))
            {
                return Err(ToolError::usage(format!(
                    "config line {}: bad key {key:?}",
                    i + 1
                )));
            }
            if entries
                .insert(key.to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(ToolError::usage(format!(
                    "config line {}: duplicate key {key}",
                    i + 1
                )));
            }
        }
        Ok(Self {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ToolError::io(path, e))?;
        Self::parse(&text)
    }

    /// Command-line override; replaces any value from the file.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Applies `key=value` override strings.
    pub fn apply_overrides(&mut self, sets: &[String]) -> Result<()> {
        for s in sets {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| ToolError::usage(format!("--set expects key=value, got {s:?}")))?;
            self.set(k.trim(), v.trim());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ToolError::usage(format!("bad value {v:?} for {key}"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self
            .get(key)
            .ok_or_else(|| ToolError::usage(format!("missing required key {key}")))?;
        v.parse()
            .map_err(|_| ToolError::usage(format!("bad value {v:?} for {key}")))
    }

    /// Keys under `prefix.` with the prefix stripped, marked as used.
    pub fn section(&self, prefix: &str) -> Vec<(String, String)> {
        let p = format!("{prefix}.");
        let out: Vec<(String, String)> = self
            .entries
            .iter()
            .filter_map(|(k, v)| Some((k.strip_prefix(&p)?.to_string(), v.clone())))
            .collect();
        for (k, _) in &out {
            self.used.borrow_mut().insert(format!("{p}{k}"));
        }
        out
    }

    /// Fails on any key nobody asked for.
    pub fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .entries
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(ToolError::usage(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )))
        }
    }

    /// Sorted `key = value` lines, without the keys that cannot change
    /// results ([`UNHASHED_KEYS`]).
    pub fn canonical_text(&self) -> String {
        self.entries
            .iter()
            .filter(|(k, _)| !UNHASHED_KEYS.contains(&k.as_str()))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// SHA-256 of [`KvConfig::canonical_text`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_text().as_bytes()))
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| ToolError::usage(format!("bad list item {s:?} for {key}")))
        })
        .collect()
}

/// Where clouds come from.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusSource {
    /// The procedural shapes shipped with the core crate; `clouds` samples.
    Builtin { clouds: usize },
    /// A directory of `.off` / `.xyz` files; the top-level folder is the label.
    Dir(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub corpus: CorpusSource,
    pub n_points: usize,
    pub pairs_per_cloud: usize,
    pub split: SplitMode,
    pub train_fraction: f64,
    pub pairs: PairGenConfig,
}

impl DataConfig {
    /// Reads the `data.*` and `pairs.*` keys. `noise` is the default of
    /// `pairs.noise`, `split` of `data.split`.
    pub fn from_kv(kv: &KvConfig, seed: u64, split: SplitMode, noise: bool) -> Result<Self> {
        let corpus = match kv.get("data.corpus").unwrap_or("builtin") {
            "builtin" => CorpusSource::Builtin {
                clouds: kv.parse_or("data.clouds", 500)?,
            },
            dir => {
                let p = PathBuf::from(dir);
                if !p.is_dir() {
                    return Err(ToolError::usage(format!(
                        "data.corpus: {} is not a directory",
                        p.display()
                    )));
                }
                CorpusSource::Dir(p)
            }
        };
        let split = match kv.get("data.split") {
            None => split,
            Some("random") => SplitMode::RandomInstance,
            Some("category") => SplitMode::ByCategory,
            Some(v) => return Err(ToolError::usage(format!("data.split: unknown mode {v:?}"))),
        };
        let n_points = kv.parse_or("data.n_points", 1024)?;
        let d = PairGenConfig::default();
        let pairs = PairGenConfig {
            max_rot_deg: kv.parse_or("pairs.max_rot_deg", d.max_rot_deg)?,
            trans_bound: kv.parse_or("pairs.trans_bound", d.trans_bound)?,
            n_points,
            shuffle_target: kv.parse_or("pairs.shuffle", d.shuffle_target)?,
            noise: kv.parse_or("pairs.noise", noise)?,
            noise_sigma: kv.parse_or("pairs.noise_sigma", d.noise_sigma)?,
            noise_clip: kv.parse_or("pairs.noise_clip", d.noise_clip)?,
            seed,
        };
        pairs
            .validate()
            .map_err(|e| ToolError::usage(e.to_string()))?;
        let cfg = Self {
            corpus,
            n_points,
            pairs_per_cloud: kv.parse_or("data.pairs_per_cloud", 1)?,
            split,
            train_fraction: kv.parse_or("data.train_fraction", 0.8)?,
            pairs,
        };
        if cfg.n_points < 3 || cfg.pairs_per_cloud == 0 {
            return Err(ToolError::usage(
                "data.n_points must be >= 3 and data.pairs_per_cloud >= 1",
            ));
        }
        if !(0.0..=1.0).contains(&cfg.train_fraction) {
            return Err(ToolError::usage("data.train_fraction must lie in [0, 1]"));
        }
        Ok(cfg)
    }
}

/// Floating-point type used for training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl FromStr for Precision {
    type Err = ();
    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            _ => Err(()),
        }
    }
}

/// Model preset plus `model.*` overrides. `dcp-v1` and `dcp-v2` both start
/// from this and differ only in `attention`.
pub fn model_from_kv(kv: &KvConfig) -> Result<DcpConfig> {
    let mut cfg = match kv.get("model.preset").unwrap_or("v1") {
        "v1" => DcpConfig::v1(),
        "v2" => DcpConfig::v2(),
        "pointnet" => DcpConfig::pointnet(),
        "tiny" => DcpConfig::tiny(),
        other => {
            return Err(ToolError::usage(format!(
                "model.preset: unknown preset {other:?}"
            )))
        }
    };
    for (k, v) in kv.section("model") {
        if k == "preset" {
            continue;
        }
        cfg.set(&k, &v)
            .map_err(|e| ToolError::usage(format!("model.{k}: {e}")))?;
    }
    cfg.validate()
        .map_err(|e| ToolError::usage(e.to_string()))?;
    Ok(cfg)
}

pub fn train_from_kv(kv: &KvConfig, seed: u64) -> Result<(TrainConfig, Precision)> {
    let mut cfg = match kv.get("train.preset").unwrap_or("desk") {
        "desk" => TrainConfig::desk(seed),
        "full" => TrainConfig::full(seed),
        other => {
            return Err(ToolError::usage(format!(
                "train.preset: unknown preset {other:?}"
            )))
        }
    };
    cfg.epochs = kv.parse_or("train.epochs", cfg.epochs)?;
    cfg.batch_size = kv.parse_or("train.batch_size", cfg.batch_size)?;
    cfg.eval_every = kv.parse_or("train.eval_every", cfg.eval_every)?;
    cfg.schedule.base = kv.parse_or("train.lr", cfg.schedule.base)?;
    cfg.schedule.gamma = kv.parse_or("train.gamma", cfg.schedule.gamma)?;
    if let Some(v) = kv.get("train.milestones") {
        cfg.schedule.milestones = parse_list("train.milestones", v)?;
    }
    cfg.adam.weight_decay = kv.parse_or("train.weight_decay", cfg.adam.weight_decay)?;
    if cfg.batch_size == 0 {
        return Err(ToolError::usage("train.batch_size must be positive"));
    }
    let precision = kv.parse_or("train.precision", Precision::F32)?;
    Ok((cfg, precision))
}

pub fn icp_from_kv(kv: &KvConfig) -> Result<IcpConfig> {
    let d = IcpConfig::default();
    Ok(IcpConfig {
        max_iters: kv.parse_or("icp.max_iters", d.max_iters)?,
        tol: kv.parse_or("icp.tol", d.tol)?,
        transform_tol: kv.parse_or("icp.transform_tol", d.transform_tol)?,
    })
}

/// Registration methods a report can contain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Identity,
    Oracle,
    Icp,
    DcpV1,
    DcpV2,
    DcpIcp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Identity => "identity",
            Method::Oracle => "oracle",
            Method::Icp => "icp",
            Method::DcpV1 => "dcp-v1",
            Method::DcpV2 => "dcp-v2",
            Method::DcpIcp => "dcp+icp",
        }
    }
}

impl FromStr for Method {
    type Err = ToolError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => Method::Identity,
            "oracle" => Method::Oracle,
            "icp" => Method::Icp,
            "dcp-v1" => Method::DcpV1,
            "dcp-v2" => Method::DcpV2,
            "dcp+icp" => Method::DcpIcp,
            _ => return Err(ToolError::usage(format!("unknown method {s:?}"))),
        })
    }
}

/// The protocols: random split, held-out categories, noisy source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Full,
    Unseen,
    Noise,
}

impl FromStr for ExperimentKind {
    type Err = ToolError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "full" => ExperimentKind::Full,
            "unseen" => ExperimentKind::Unseen,
            "noise" => ExperimentKind::Noise,
            _ => return Err(ToolError::usage(format!("unknown experiment kind {s:?}"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub data: DataConfig,
    pub model: DcpConfig,
    pub train: TrainConfig,
    pub precision: Precision,
    pub icp: IcpConfig,
    pub methods: Vec<Method>,
    /// Which trained model `dcp+icp` polishes.
    pub polish: Method,
    /// Pretrained checkpoints that replace training for `dcp-v1` / `dcp-v2`.
    pub checkpoint_v1: Option<PathBuf>,
    pub checkpoint_v2: Option<PathBuf>,
    pub workers: usize,
    pub output: PathBuf,
    /// Hash of the resolved key/value text.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let seed: u64 = kv.require("seed")?;
        let kind: ExperimentKind = kv.parse_or("experiment", ExperimentKind::Full)?;
        let (split, noise) = match kind {
            ExperimentKind::Full => (SplitMode::RandomInstance, false),
            ExperimentKind::Unseen => (SplitMode::ByCategory, false),
            ExperimentKind::Noise => (SplitMode::RandomInstance, true),
        };
        let data = DataConfig::from_kv(kv, seed, split, noise)?;
        let model = model_from_kv(kv)?;
        let (train, precision) = train_from_kv(kv, seed)?;
        let icp = icp_from_kv(kv)?;
        let methods = match kv.get("experiment.methods") {
            Some(v) => parse_list("experiment.methods", v)?,
            None => vec![Method::Icp, Method::DcpV1, Method::DcpV2],
        };
        if methods.is_empty() {
            return Err(ToolError::usage("experiment.methods is empty"));
        }
        let polish = match kv.get("experiment.polish").unwrap_or("dcp-v2") {
            "dcp-v1" => Method::DcpV1,
            "dcp-v2" => Method::DcpV2,
            other => {
                return Err(ToolError::usage(format!(
                    "experiment.polish: {other:?} is not dcp-v1 or dcp-v2"
                )))
            }
        };
        let existing = |key: &str| -> Result<Option<PathBuf>> {
            match kv.get(key) {
                None => Ok(None),
                Some(p) => {
                    let p = PathBuf::from(p);
                    if p.is_file() {
                        Ok(Some(p))
                    } else {
                        Err(ToolError::usage(format!(
                            "{key}: {} does not exist",
                            p.display()
                        )))
                    }
                }
            }
        };
        let cfg = Self {
            kind,
            seed,
            data,
            model,
            train,
            precision,
            icp,
            methods,
            polish,
            checkpoint_v1: existing("checkpoint.v1")?,
            checkpoint_v2: existing("checkpoint.v2")?,
            workers: kv.parse_or("experiment.workers", 1usize)?.max(1),
            output: PathBuf::from(kv.get("output").unwrap_or("out")),
            hash: kv.hash(),
        };
        kv.check_unused()?;
        Ok(cfg)
    }

    /// Model config for one of the learned methods.
    pub fn model_for(&self, m: Method) -> DcpConfig {
        let mut cfg = self.model.clone();
        cfg.attention = m == Method::DcpV2;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dotted_keys() {
        let kv = KvConfig::parse("# top\nseed = 3\n\ntrain.epochs=2 # inline\n").unwrap();
        assert_eq!(kv.require::<u64>("seed").unwrap(), 3);
        assert_eq!(kv.parse_or("train.epochs", 0usize).unwrap(), 2);
        assert!(kv.check_unused().is_ok());
    }

    #[test]
    fn duplicate_and_malformed_lines_are_usage_errors() {
        assert_eq!(KvConfig::parse("a=1\na=2").unwrap_err().exit_code(), 2);
        assert_eq!(KvConfig::parse("just words").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn seed_is_mandatory() {
        let kv = KvConfig::parse("experiment = full").unwrap();
        let e = ExperimentConfig::from_kv(&kv).unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let kv = KvConfig::parse("seed = 1\ntrain.epoch = 5").unwrap();
        let e = ExperimentConfig::from_kv(&kv).unwrap_err();
        assert!(e.to_string().contains("train.epoch"), "{e}");
    }

    #[test]
    fn missing_corpus_dir_is_rejected() {
        let kv = KvConfig::parse("seed = 1\ndata.corpus = /definitely/not/here").unwrap();
        assert_eq!(ExperimentConfig::from_kv(&kv).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn hash_ignores_order_and_comments() {
        let a = KvConfig::parse("seed=1\nb=2").unwrap();
        let b = KvConfig::parse("# c\nb = 2\nseed = 1").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), KvConfig::parse("seed=2\nb=2").unwrap().hash());
        let c = KvConfig::parse("seed=1\nb=2\noutput=/tmp/x\nexperiment.workers=4").unwrap();
        assert_eq!(a.hash(), c.hash());
    }

    #[test]
    fn model_overrides_apply() {
        let kv =
            KvConfig::parse("seed=1\nmodel.preset=tiny\nmodel.k=5\nexperiment.methods=icp,oracle")
                .unwrap();
        let cfg = ExperimentConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.model.k, 5);
        assert_eq!(cfg.model.emb_dims, 64);
        assert_eq!(cfg.methods, vec![Method::Icp, Method::Oracle]);
        assert!(cfg.model_for(Method::DcpV2).attention);
    }
}
