use crate::cli::BenchArgs;
use crate::error::{Result, ToolError};
use crate::io::{write_file, Model};
use crate::report::{timing_csv, timing_text, TimingRow};
use dcp_core::dataio::{generate_pair, shapes, LabeledPair, PairGenConfig};
use dcp_core::dcpnet::{DcpConfig, ModelParams};
use dcp_core::geometry::RigidTransform;
use dcp_core::icp::{icp_register, IcpConfig};
use std::time::Instant;

/// CPU model, logical core count, OS and build profile.
pub fn hardware_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let profile = if cfg!(debug_assertions) {
        "debug"
    } else {
        "release"
    };
    format!(
        "cpu: {cpu}\nlogical cores: {cores}\nos: {} {}\nbuild: {profile}\nthreads per registration: 1\n",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

fn bench_pair(n: usize, seed: u64) -> Result<LabeledPair> {
    let cloud = shapes::builtin_corpus(1, n, seed)
        .map_err(|e| ToolError::data("builtin corpus", e))?
        .remove(0);
    let cfg = PairGenConfig {
        n_points: n,
        seed,
        ..PairGenConfig::default()
    };
    generate_pair(&cloud, &cfg, &mut cfg.rng()).map_err(|e| ToolError::data("builtin corpus", e))
}

/// Mean wall time of `f` over `trials` calls, after one untimed warm-up.
fn time_mean(trials: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    f()?;
    let start = Instant::now();
    for _ in 0..trials {
        f()?;
    }
    Ok(start.elapsed().as_secs_f64() / trials as f64)
}

fn network(a: &BenchArgs, attention: bool) -> Result<Model> {
    let ckpt = if attention {
        &a.checkpoint_v2
    } else {
        &a.checkpoint_v1
    };
    if let Some(p) = ckpt {
        return Model::load(p);
    }
    let mut cfg = match a.model.as_str() {
        "v1" => DcpConfig::v1(),
        "tiny" => DcpConfig::tiny(),
        other => {
            return Err(ToolError::usage(format!(
                "--model {other:?}: expected v1 or tiny"
            )))
        }
    };
    cfg.attention = attention;
    let params =
        ModelParams::<f32>::init(&cfg, a.seed).map_err(|e| ToolError::usage(e.to_string()))?;
    Ok(Model::F32(params))
}

/// Times each method at each size and writes `timing.csv`, `timing.txt` and
/// `hardware.txt`. ICP runs a fixed number of iterations so that cost per
/// size is comparable; network methods above `--dcp-max-points` are skipped.
pub fn bench(a: &BenchArgs) -> Result<Vec<TimingRow>> {
    if a.trials == 0 {
        return Err(ToolError::usage("--trials must be positive"));
    }
    let mut models = Vec::new();
    for m in &a.methods {
        match m.as_str() {
            "icp" => models.push((m.clone(), None)),
            "dcp-v1" => models.push((m.clone(), Some(network(a, false)?))),
            "dcp-v2" => models.push((m.clone(), Some(network(a, true)?))),
            other => return Err(ToolError::usage(format!("bench: unknown method {other:?}"))),
        }
    }
    let icp = IcpConfig::fixed(a.icp_iters);
    let mut rows = Vec::new();
    for &n in &a.sizes {
        let pair = bench_pair(n, a.seed)?;
        for (name, model) in &models {
            let row = |mean: Option<f64>, note: &str| TimingRow {
                method: name.clone(),
                points: n,
                trials: if mean.is_some() { a.trials } else { 0 },
                mean_seconds: mean,
                note: note.to_string(),
            };
            match model {
                None => {
                    let t = time_mean(a.trials, || {
                        icp_register(
                            &pair.source,
                            &pair.target,
                            &RigidTransform::identity(),
                            &icp,
                        )
                        .map(|_| ())
                        .map_err(|e| ToolError::icp("bench pair", e))
                    })?;
                    rows.push(row(Some(t), &format!("{} iterations", a.icp_iters)));
                }
                Some(_) if n > a.dcp_max_points => {
                    rows.push(row(None, "skipped: above --dcp-max-points"));
                }
                Some(m) => {
                    let t = time_mean(a.trials, || {
                        m.predict(&[(&pair.source, &pair.target)], 1)
                            .map(|_| ())
                            .map_err(|e| ToolError::model("bench pair", e))
                    })?;
                    rows.push(row(Some(t), ""));
                }
            }
            eprintln!("{name} @ {n}: done");
        }
    }
    let hw = hardware_description();
    write_file(&a.out.join("timing.csv"), timing_csv(&rows))?;
    write_file(&a.out.join("timing.txt"), timing_text(&rows, &hw))?;
    write_file(&a.out.join("hardware.txt"), &hw)?;
    print!("{}", timing_text(&rows, &hw));
    Ok(rows)
}
