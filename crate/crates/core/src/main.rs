use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use sphnn::pipeline::{
    cmd_evaluate, cmd_generate, cmd_passivity, cmd_report, cmd_stability, cmd_train, CommandOutput, EvalTarget,
    PassivityTarget, PipelineError, RunConfig, Variant,
};

/// Stochastic port-Hamiltonian neural networks: data, training and diagnostics.
#[derive(Parser)]
#[command(name = "sphnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run directory; overrides `out_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate training and held-out paths.
    Generate(Common),
    /// Train the configured variants (or one, with --variant).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Roll out trained models against the reference dynamics; `--variant truth` evaluates the reference itself.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        variant: Option<String>,
    },
    /// Passivity residual and Monte-Carlo energy balance for `analytic` (default) or a trained variant.
    Passivity {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "analytic")]
        variant: String,
    },
    /// Gronwall stability bound against the data-generating system.
    Stability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "analytic")]
        variant: String,
    },
    /// Collect the rollout tables of several runs into `<out>/table2.csv`.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Run directories; defaults to `--out` itself.
        runs: Vec<PathBuf>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), PipelineError> {
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = match (&common.out, &cfg.out_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => return Err(PipelineError::usage("no output directory: pass --out or set out_dir")),
    };
    Ok((cfg, out))
}

fn variants(cfg: &RunConfig, flag: &Option<String>) -> Result<Vec<Variant>, PipelineError> {
    match flag {
        Some(v) => Ok(vec![v.parse()?]),
        None => cfg.variants(),
    }
}

fn subject(name: &str) -> Result<PassivityTarget, PipelineError> {
    if name == "analytic" {
        Ok(PassivityTarget::Analytic)
    } else {
        name.parse().map(PassivityTarget::Model)
    }
}

fn run(command: Command) -> Result<CommandOutput, PipelineError> {
    match command {
        Command::Generate(common) => {
            let (cfg, out) = load(&common)?;
            cmd_generate(&cfg, &out)
        }
        Command::Train { common, variant } => {
            let (cfg, out) = load(&common)?;
            cmd_train(&cfg, &out, &variants(&cfg, &variant)?)
        }
        Command::Evaluate { common, variant } => {
            let (cfg, out) = load(&common)?;
            let targets = match variant.as_deref() {
                Some("truth") => vec![EvalTarget::Truth],
                _ => variants(&cfg, &variant)?.into_iter().map(EvalTarget::Model).collect(),
            };
            cmd_evaluate(&cfg, &out, &targets)
        }
        Command::Passivity { common, variant } => {
            let (cfg, out) = load(&common)?;
            cmd_passivity(&cfg, &out, subject(&variant)?)
        }
        Command::Stability { common, variant } => {
            let (cfg, out) = load(&common)?;
            cmd_stability(&cfg, &out, subject(&variant)?)
        }
        Command::Report { out, runs } => {
            let runs = if runs.is_empty() { vec![out.clone()] } else { runs };
            cmd_report(&runs, Path::new(&out))
        }
    }
}

fn init_threads() -> Result<(), PipelineError> {
    let Ok(value) = std::env::var("SPHNN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| PipelineError::usage(format!("SPHNN_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PipelineError::usage(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = init_threads().and_then(|_| run(cli.command));
    match result {
        Ok(output) => {
            for notice in &output.notices {
                eprintln!("notice: {notice}");
            }
            for file in &output.files {
                println!("{}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
