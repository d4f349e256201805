use crate::cli::GenDataArgs;
use crate::config::CorpusSource;
use crate::error::{Result, ToolError};
use crate::io::{load_corpus, write_archive};
use crate::pipeline::make_pairs;
use dcp_core::dataio::PairGenConfig;
use std::path::PathBuf;

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    let source = if a.corpus == "builtin" {
        CorpusSource::Builtin { clouds: a.clouds }
    } else {
        let p = PathBuf::from(&a.corpus);
        if !p.is_dir() {
            return Err(ToolError::usage(format!(
                "--corpus {}: not a directory",
                p.display()
            )));
        }
        CorpusSource::Dir(p)
    };
    let cfg = PairGenConfig {
        max_rot_deg: a.max_rot_deg,
        trans_bound: a.trans_bound,
        n_points: a.n_points,
        shuffle_target: !a.no_shuffle,
        noise: a.noise,
        noise_sigma: a.noise_sigma,
        noise_clip: a.noise_clip,
        seed: a.seed,
    };
    cfg.validate()
        .map_err(|e| ToolError::usage(e.to_string()))?;
    if a.pairs_per_cloud == 0 {
        return Err(ToolError::usage("--pairs-per-cloud must be positive"));
    }
    let clouds = load_corpus(&source, a.n_points, a.seed)?;
    let all: Vec<usize> = (0..clouds.len()).collect();
    let pairs = make_pairs(&clouds, &all, &cfg, a.pairs_per_cloud, a.seed)?;
    let header = format!(
        "seed = {}\ncorpus = {}\nclouds = {}\nn_points = {}\npairs_per_cloud = {}\nmax_rot_deg = {}\ntrans_bound = {}\nshuffle = {}\nnoise = {} (sigma {}, clip {})",
        a.seed,
        a.corpus,
        clouds.len(),
        a.n_points,
        a.pairs_per_cloud,
        a.max_rot_deg,
        a.trans_bound,
        !a.no_shuffle,
        a.noise,
        a.noise_sigma,
        a.noise_clip
    );
    write_archive(&a.out, &header, &pairs)?;
    eprintln!("wrote {} pairs to {}", pairs.len(), a.out.display());
    Ok(())
}
