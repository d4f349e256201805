//! One module per subcommand.

mod bench;
mod eval;
mod experiment;
mod gen_data;
mod register;
mod train;

pub use bench::{bench, hardware_description};
pub use eval::eval;
pub use experiment::{experiment, ExperimentOutcome};
pub use gen_data::gen_data;
pub use register::{register, Registration};
pub use train::train;

use crate::cli::{Cli, Command, ConfigArgs};
use crate::config::KvConfig;
use crate::error::Result;

/// Config file plus command-line overrides.
pub fn resolve_config(args: &ConfigArgs) -> Result<KvConfig> {
    let mut kv = match &args.config {
        Some(p) => KvConfig::load(p)?,
        None => KvConfig::default(),
    };
    kv.apply_overrides(&args.sets)?;
    if let Some(s) = args.seed {
        kv.set("seed", s);
    }
    if let Some(o) = &args.out {
        kv.set("output", o.display());
    }
    if let Some(w) = args.workers {
        kv.set("experiment.workers", w);
    }
    Ok(kv)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Register(a) => {
            let r = register(&a)?;
            println!("{}", r.row_major_line());
            eprintln!("closest-point objective: {:e}", r.objective);
            Ok(())
        }
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::Experiment(a) => {
            let out = experiment(&resolve_config(&a.config)?)?;
            print!("{}", out.report.to_text());
            out.into_result()
        }
        Command::Bench(a) => bench(&a).map(|_| ()),
    }
}
