//! Runs the desk-scale pipeline for the configs given on the command line
//! (default: all three under `configs/`) and prints the rollout table.
//!
//! `cargo run --release --example reproduce_table -- [out_dir] [config.toml ...]`

use std::path::{Path, PathBuf};

use sphnn::pipeline::{cmd_evaluate, cmd_generate, cmd_report, cmd_train, EvalTarget, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("sphnn_table"));
    let mut configs: Vec<PathBuf> = args.map(PathBuf::from).collect();
    if configs.is_empty() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        configs = ["mass_spring", "duffing", "van_der_pol"].iter().map(|n| dir.join(format!("{n}.toml"))).collect();
    }
    let mut runs = Vec::new();
    for path in &configs {
        let cfg = RunConfig::load(path)?;
        let run = out.join(&cfg.system);
        let start = std::time::Instant::now();
        cmd_generate(&cfg, &run)?;
        let variants = cfg.variants()?;
        cmd_train(&cfg, &run, &variants)?;
        let mut targets = vec![EvalTarget::Truth];
        targets.extend(variants.iter().copied().map(EvalTarget::Model));
        cmd_evaluate(&cfg, &run, &targets)?;
        eprintln!("{}: {:.0} s", cfg.system, start.elapsed().as_secs_f64());
        runs.push(run);
    }
    cmd_report(&runs, &out)?;
    print!("{}", std::fs::read_to_string(out.join("table2.csv"))?);
    Ok(())
}
