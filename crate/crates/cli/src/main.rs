use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bdl_harness::plot::{emit_plot_data, PlotKind};
use bdl_harness::{replay, run_experiment, Config, ExperimentKind, HarnessError, RunManifest};

#[derive(Parser)]
#[command(name = "bdl", version, about = "Generalized BEC numerical lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// overrides the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "BDL_OUT", default_value = "bdl-out")]
    out: PathBuf,
    /// worker threads (0 = all cores)
    #[arg(long, env = "BDL_JOBS")]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    Ids(RunArgs),
    Thermo(RunArgs),
    Occupation(RunArgs),
    Fk(RunArgs),
    Scaled(RunArgs),
    Sweep(RunArgs),
    /// gnuplot-ready columns from a finished run
    Plot {
        #[arg(long)]
        kind: PlotKind,
        #[arg(long)]
        run: PathBuf,
    },
    /// re-run a manifest and compare output digests
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, env = "BDL_OUT", default_value = "bdl-replay")]
        out: PathBuf,
    },
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<(), HarnessError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| HarnessError::Validation(format!("cannot read {}: {e}", args.config.display())))?;
    let mut config = Config::parse(&text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(j) = args.jobs {
        config.jobs = j;
    }
    config.validate(kind)?;
    if config.jobs > 0 {
        // the global pool can only be set once; results do not depend on it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build_global();
    }
    let m = run_experiment(&config, kind, &args.out)?;
    for o in &m.outputs {
        println!("{}  {}", o.sha256, args.out.join(&o.path).display());
    }
    if m.failed_realizations > 0 {
        println!("failed realizations excluded: {}", m.failed_realizations);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ids(a) => execute(ExperimentKind::Ids, a),
        Command::Thermo(a) => execute(ExperimentKind::Thermo, a),
        Command::Occupation(a) => execute(ExperimentKind::Occupation, a),
        Command::Fk(a) => execute(ExperimentKind::Fk, a),
        Command::Scaled(a) => execute(ExperimentKind::Scaled, a),
        Command::Sweep(a) => execute(ExperimentKind::Sweep, a),
        Command::Plot { kind, run } => emit_plot_data(&run, kind).map(|p| println!("{}", p.display())),
        Command::Replay { manifest, out } => RunManifest::load(&manifest).and_then(|m| replay(&m, &out)).and_then(|bad| {
            if bad.is_empty() {
                println!("all outputs reproduced");
                Ok(())
            } else {
                Err(HarnessError::Numerical(format!("digest mismatch: {}", bad.join(", "))))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bdl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
