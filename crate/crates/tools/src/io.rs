//! Files on disk: point-cloud corpora, pair archives and checkpoints.
//!
//! A pair archive is a directory holding `manifest.txt` and
//! `pairs/<id>/{source.xyz, target.xyz, gt.txt, correspondence.txt}`.
//! `gt.txt` has the twelve numbers of the ground-truth motion (rotation rows,
//! then translation); `correspondence.txt` lists, for every target point, the
//! index of the source point it came from.

use crate::error::{Result, ToolError};
use dcp_core::autodiff::{DType, Scalar};
use dcp_core::dataio::{
    format_gt, format_xyz, normalize_unit_sphere, parse_gt, parse_off, parse_xyz, sample_surface,
    shapes, LabeledPair, PointCloud,
};
use dcp_core::dcpnet::{self, DcpConfig, DcpError, ModelParams};
use dcp_core::geometry::RigidTransform;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use walkdir::WalkDir;

/// SplitMix64 finalizer; derives independent per-item seeds from one seed.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ToolError::io(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| ToolError::io(path, e))
}

/// Reads an `.xyz` cloud.
pub fn load_xyz(path: &Path) -> Result<PointCloud> {
    parse_xyz(&read_text(path)?).map_err(|e| ToolError::data(path, e))
}

/// Loads one corpus file: meshes are sampled with `n_points` surface
/// points, XYZ clouds keep their points. Both are normalized to the unit
/// sphere.
pub fn load_corpus_file(
    path: &Path,
    n_points: usize,
    seed: u64,
) -> std::result::Result<PointCloud, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let cloud = if ext.eq_ignore_ascii_case("off") {
        let mesh = parse_off(&text).map_err(|e| e.to_string())?;
        sample_surface(&mesh, n_points, seed).map_err(|e| e.to_string())?
    } else {
        parse_xyz(&text).map_err(|e| e.to_string())?
    };
    normalize_unit_sphere(&cloud).map_err(|e| e.to_string())
}

fn is_corpus_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("off") || e.eq_ignore_ascii_case("xyz"))
}

/// Every `.off` / `.xyz` below `root`, in sorted path order. The label of a
/// cloud is its top-level directory under `root` (files directly in `root`
/// are labeled by file stem). All unreadable files are reported together.
pub fn load_corpus_dir(root: &Path, n_points: usize, seed: u64) -> Result<Vec<PointCloud>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let p = e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.to_path_buf());
            ToolError::data(p, e)
        })?;
        if entry.file_type().is_file() && is_corpus_file(entry.path()) {
            files.push(entry.into_path());
        }
    }
    if files.is_empty() {
        return Err(ToolError::data(root, "no .off or .xyz files found"));
    }
    let mut clouds = Vec::with_capacity(files.len());
    let mut failures = Vec::new();
    for (i, f) in files.iter().enumerate() {
        match load_corpus_file(f, n_points, mix_seed(seed, i as u64)) {
            Ok(c) => {
                let rel = f.strip_prefix(root).unwrap_or(f);
                let mut parts = rel.components();
                let first = parts
                    .next()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned());
                let label = if parts.next().is_some() {
                    first.unwrap_or_default()
                } else {
                    f.file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_default()
                };
                clouds.push(c.with_label(label));
            }
            Err(msg) => failures.push(format!("  {}: {msg}", f.display())),
        }
    }
    if !failures.is_empty() {
        return Err(ToolError::data(
            root,
            format!(
                "{} unreadable file(s):\n{}",
                failures.len(),
                failures.join("\n")
            ),
        ));
    }
    Ok(clouds)
}

/// Corpus named by a config value: `builtin` or a directory.
pub fn load_corpus(
    source: &crate::config::CorpusSource,
    n_points: usize,
    seed: u64,
) -> Result<Vec<PointCloud>> {
    match source {
        crate::config::CorpusSource::Builtin { clouds } => {
            shapes::builtin_corpus(*clouds, n_points, seed)
                .map_err(|e| ToolError::data("builtin corpus", e))
        }
        crate::config::CorpusSource::Dir(d) => load_corpus_dir(d, n_points, seed),
    }
}

/// One archive entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchivePair {
    pub id: String,
    pub seed: u64,
    pub pair: LabeledPair,
}

pub const MANIFEST: &str = "manifest.txt";

/// Writes an archive. `header` lines (generation settings) go at the top of
/// the manifest, one `id label seed` line per pair after them.
pub fn write_archive(root: &Path, header: &str, pairs: &[ArchivePair]) -> Result<()> {
    let mut manifest = String::from("# dcp pair archive\n");
    for line in header.lines() {
        let _ = writeln!(manifest, "# {line}");
    }
    let _ = writeln!(manifest, "# id label seed noise");
    for p in pairs {
        let dir = root.join("pairs").join(&p.id);
        let lp = &p.pair;
        write_file(&dir.join("source.xyz"), format_xyz(&lp.source))?;
        write_file(&dir.join("target.xyz"), format_xyz(&lp.target))?;
        write_file(&dir.join("gt.txt"), format_gt(&lp.ground_truth))?;
        let corr: String = lp.target_perm.iter().map(|i| format!("{i}\n")).collect();
        write_file(&dir.join("correspondence.txt"), corr)?;
        let label = lp.source.label.as_deref().unwrap_or("-");
        let _ = writeln!(
            manifest,
            "{} {} {} {}",
            p.id, label, p.seed, lp.noise_applied
        );
    }
    write_file(&root.join(MANIFEST), manifest)
}

struct ManifestLine {
    label: Option<String>,
    seed: u64,
    noise: bool,
}

fn read_manifest(root: &Path) -> Result<std::collections::BTreeMap<String, ManifestLine>> {
    let path = root.join(MANIFEST);
    let mut out = std::collections::BTreeMap::new();
    if !path.is_file() {
        return Ok(out);
    }
    for (i, raw) in read_text(&path)?.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || {
            ToolError::data(
                &path,
                format!("line {}: expected `id label seed noise`", i + 1),
            )
        };
        if f.len() != 4 {
            return Err(bad());
        }
        out.insert(
            f[0].to_string(),
            ManifestLine {
                label: (f[1] != "-").then(|| f[1].to_string()),
                seed: f[2].parse().map_err(|_| bad())?,
                noise: f[3].parse().map_err(|_| bad())?,
            },
        );
    }
    Ok(out)
}

fn read_correspondence(path: &Path, n: usize) -> Result<Vec<usize>> {
    if !path.is_file() {
        return Ok((0..n).collect());
    }
    let perm: Vec<usize> = read_text(path)?
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| ToolError::data(path, format!("bad index {t:?}")))
        })
        .collect::<Result<_>>()?;
    if perm.len() != n || perm.iter().any(|&i| i >= n) {
        return Err(ToolError::data(
            path,
            "correspondence does not match the clouds",
        ));
    }
    Ok(perm)
}

/// Reads every `pairs/<id>` entry, sorted by id. Entries that fail to parse
/// are all listed in one error.
pub fn read_archive(root: &Path) -> Result<Vec<ArchivePair>> {
    let dir = root.join("pairs");
    let rd = fs::read_dir(&dir).map_err(|e| ToolError::io(&dir, e))?;
    let mut ids: Vec<PathBuf> = rd
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .map(|e| e.path())
        .collect();
    ids.sort();
    if ids.is_empty() {
        return Err(ToolError::data(&dir, "archive holds no pairs"));
    }
    let manifest = read_manifest(root)?;
    let mut out = Vec::with_capacity(ids.len());
    let mut failures = Vec::new();
    for d in ids {
        let id = d
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let entry = (|| -> Result<ArchivePair> {
            let mut source = load_xyz(&d.join("source.xyz"))?;
            let target = load_xyz(&d.join("target.xyz"))?;
            let gt_path = d.join("gt.txt");
            let ground_truth =
                parse_gt(&read_text(&gt_path)?).map_err(|e| ToolError::data(&gt_path, e))?;
            let target_perm = read_correspondence(&d.join("correspondence.txt"), target.len())?;
            if source.len() != target.len() {
                return Err(ToolError::data(&d, "source and target differ in size"));
            }
            let meta = manifest.get(&id);
            source.label = meta.and_then(|m| m.label.clone());
            Ok(ArchivePair {
                seed: meta.map_or(0, |m| m.seed),
                pair: LabeledPair {
                    source,
                    target,
                    ground_truth,
                    noise_applied: meta.is_some_and(|m| m.noise),
                    target_perm,
                },
                id: id.clone(),
            })
        })();
        match entry {
            Ok(p) => out.push(p),
            Err(e) => failures.push(format!("  {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(ToolError::data(
            root,
            format!(
                "{} bad archive entr(ies):\n{}",
                failures.len(),
                failures.join("\n")
            ),
        ));
    }
    Ok(out)
}

/// Trained weights in whichever precision the checkpoint stores.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    F32(ModelParams<f32>),
    F64(ModelParams<f64>),
}

impl Model {
    pub fn config(&self) -> &DcpConfig {
        match self {
            Model::F32(p) => &p.config,
            Model::F64(p) => &p.config,
        }
    }

    pub fn predict(
        &self,
        pairs: &[(&PointCloud, &PointCloud)],
        batch: usize,
    ) -> std::result::Result<Vec<RigidTransform>, DcpError> {
        match self {
            Model::F32(p) => dcpnet::predict(p, pairs, batch),
            Model::F64(p) => dcpnet::predict(p, pairs, batch),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Model::F32(p) => dcpnet::encode_checkpoint(p),
            Model::F64(p) => dcpnet::encode_checkpoint(p),
        }
    }

    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, DcpError> {
        let records = dcpnet::read_records(bytes)?;
        let float = records
            .iter()
            .find(|r| r.name != dcpnet::CONFIG_RECORD)
            .and_then(|r| DType::from_code(r.dtype));
        Ok(match float {
            Some(DType::F64) => Model::F64(dcpnet::decode_checkpoint(bytes)?),
            _ => Model::F32(dcpnet::decode_checkpoint(bytes)?),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| ToolError::io(path, e))?;
        Self::decode(&bytes).map_err(|e| ToolError::data(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.encode())
    }
}

impl<T: Scalar> From<ModelParams<T>> for Model {
    fn from(p: ModelParams<T>) -> Self {
        match T::DTYPE {
            DType::F32 => Model::F32(p.cast()),
            DType::F64 => Model::F64(p.cast()),
        }
    }
}
