use std::fs;
use std::path::Path;
use std::process::Command;

use sphnn::kv::read_kv;
use sphnn::pipeline::{
    cmd_evaluate, cmd_generate, cmd_passivity, cmd_report, cmd_stability, cmd_train, EvalTarget, PassivityTarget,
    RunConfig, Variant,
};
use sphnn::training::persist::save_baseline;
use sphnn::training::BaselineModel;

const TINY: &str = r#"
system = "mass_spring"
seed = 11

[data]
dt = 0.01
t_train = 0.5
n_paths = 2
held_out_paths = 1

[train]
epochs = 2
batch_size = 16
hidden = [4]

[evaluate]
horizon = 1.0

[passivity]
n_paths = 50
horizon = 0.1

[stability]
n_paths = 10
horizon = 0.1

[box]
lower = [-2.0, -2.0]
upper = [2.0, 2.0]
grid = 11
"#;

fn tiny() -> RunConfig {
    RunConfig::from_toml_str(TINY, "tiny").unwrap()
}

fn sphnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphnn"))
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn generate_writes_one_row_per_grid_point() {
    let text = TINY.replace("t_train = 0.5\nn_paths = 2", "t_train = 0.1\nn_paths = 1");
    let cfg = RunConfig::from_toml_str(&text, "mem").unwrap();
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&cfg, dir.path()).unwrap();
    let traj = read(&dir.path().join("data/train_p0.csv"));
    assert_eq!(traj.lines().count(), 1 + 11);
    assert_eq!(read(&dir.path().join("data/transitions.csv")).lines().count(), 1 + 10);
    let manifest = read_kv(&dir.path().join("data/manifest.txt")).unwrap();
    assert_eq!(manifest["seed.data"], "11");
    assert_eq!(manifest["config_sha256"], cfg.hash());
    assert!(manifest.contains_key("output.train_p0.csv"));
    assert!(manifest["tool_version"].starts_with("sphnn "));
}

fn full_run(cfg: &RunConfig, out: &Path) {
    cmd_generate(cfg, out).unwrap();
    cmd_train(cfg, out, &Variant::ALL).unwrap();
    let targets: Vec<EvalTarget> = std::iter::once(EvalTarget::Truth)
        .chain(Variant::ALL.into_iter().map(EvalTarget::Model))
        .collect();
    cmd_evaluate(cfg, out, &targets).unwrap();
    cmd_passivity(cfg, out, PassivityTarget::Model(Variant::Ib)).unwrap();
    cmd_stability(cfg, out, PassivityTarget::Model(Variant::Nll)).unwrap();
}

fn csv_files(root: &Path, acc: &mut Vec<std::path::PathBuf>) {
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            csv_files(&path, acc);
        } else {
            acc.push(path);
        }
    }
}

#[test]
fn identical_config_gives_identical_bytes() {
    let cfg = tiny();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    full_run(&cfg, a.path());
    full_run(&cfg, b.path());
    let mut files = Vec::new();
    csv_files(a.path(), &mut files);
    files.sort();
    assert!(files.len() > 20);
    for f in files {
        let rel = f.strip_prefix(a.path()).unwrap();
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.path().join(rel)).unwrap(), "{}", rel.display());
    }
}

#[test]
fn truth_as_model_scores_zero() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&cfg, dir.path()).unwrap();
    cmd_evaluate(&cfg, dir.path(), &[EvalTarget::Truth]).unwrap();
    let csv = read(&dir.path().join("eval/rollout.csv"));
    let row = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "truth");
    for v in &fields[1..5] {
        assert_eq!(v.parse::<f64>().unwrap(), 0.0, "{row}");
    }
    assert_eq!(fields[5], "true");
}

#[test]
fn zero_epochs_saves_initial_model_with_headered_history() {
    let text = TINY.replace("epochs = 2", "epochs = 0");
    let cfg = RunConfig::from_toml_str(&text, "mem").unwrap();
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&cfg, dir.path()).unwrap();
    cmd_train(&cfg, dir.path(), &[Variant::Ib]).unwrap();
    assert_eq!(read(&dir.path().join("models/ib/loss_history.csv")), "epoch,loss\n");
    assert!(dir.path().join("models/ib/h.params").exists());
}

#[test]
fn analytic_mass_spring_passivity_and_self_stability() {
    let text = TINY.replace("grid = 11", "grid = 41");
    let cfg = RunConfig::from_toml_str(&text, "mem").unwrap();
    let dir = tempfile::tempdir().unwrap();
    cmd_passivity(&cfg, dir.path(), PassivityTarget::Analytic).unwrap();
    let summary = read_kv(&dir.path().join("passivity/analytic/summary.txt")).unwrap();
    assert_eq!(summary["c0_hat"].parse::<f64>().unwrap(), 4.0);
    let header = read(&dir.path().join("passivity/analytic/passivity.csv"));
    assert!(header.starts_with("t,E_H,se_H,supply,margin\n"));

    cmd_stability(&cfg, dir.path(), PassivityTarget::Analytic).unwrap();
    let csv = read(&dir.path().join("stability/analytic/stability.csv"));
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!((row[0], row[1]), (0.0, 0.0));
    assert_eq!(row[3], 0.0);
    assert_eq!(row[4], 0.0);
}

#[test]
fn missing_box_falls_back_with_notice() {
    let start = TINY.find("[box]").unwrap();
    let cfg = RunConfig::from_toml_str(&TINY[..start], "mem").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_passivity(&cfg, dir.path(), PassivityTarget::Analytic).unwrap();
    assert_eq!(out.notices.len(), 1);
    assert!(out.notices[0].contains("[-2, 2]"));
}

#[test]
fn report_prefixes_rows_with_system() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    cmd_generate(&cfg, dir.path()).unwrap();
    cmd_evaluate(&cfg, dir.path(), &[EvalTarget::Truth]).unwrap();
    let out = tempfile::tempdir().unwrap();
    cmd_report(&[dir.path().to_path_buf(), dir.path().to_path_buf()], out.path()).unwrap();
    let table = read(&out.path().join("table2.csv"));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "system,model,true_mse,mean_abs_dq,mean_abs_dp,mean_abs_dH,valid");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("mass_spring,truth,"));
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");

    // missing required field
    let bad = write_config(dir.path(), "seed = 1\n");
    let res = sphnn().args(["generate", "--config"]).arg(&bad).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("system"));

    // missing config file and missing dataset are artifact errors
    let res = sphnn().args(["generate", "--config"]).arg(dir.path().join("nope.toml")).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(2));
    let good = write_config(dir.path(), TINY);
    let res = sphnn().args(["train", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(2));

    let res = sphnn().args(["generate", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));

    let res = sphnn().args(["train", "--variant", "mlp", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("unknown variant"));

    // unknown flag
    let res = sphnn().args(["train", "--frobnicate"]).output().unwrap();
    assert_eq!(res.status.code(), Some(1));

    // a model whose state dimension disagrees with the config
    save_baseline(&BaselineModel::new(3, &[4], 0).unwrap(), &out.join("models/baseline"), &Default::default()).unwrap();
    let res = sphnn().args(["evaluate", "--variant", "baseline", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));

    // passivity on an unstructured model is a usage error
    let res = sphnn().args(["passivity", "--variant", "baseline", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn cli_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    let res = sphnn().args(["generate", "--seed", "99", "--config"]).arg(&good).arg("--out").arg(&out).output().unwrap();
    assert_eq!(res.status.code(), Some(0));
    let manifest = read_kv(&out.join("data/manifest.txt")).unwrap();
    assert_eq!(manifest["seed.master"], "99");
}

#[test]
fn cli_train_improves_ib_loss_on_mass_spring() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY.replace("epochs = 2", "epochs = 40").replace("t_train = 0.5", "t_train = 2.0");
    let good = write_config(dir.path(), &text);
    let out = dir.path().join("run");
    for verb in [vec!["generate"], vec!["train", "--variant", "ib"]] {
        let res = sphnn().args(&verb).arg("--config").arg(&good).arg("--out").arg(&out).output().unwrap();
        assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let manifest = read_kv(&out.join("models/ib/manifest.txt")).unwrap();
    let first: f64 = manifest["initial_loss"].parse().unwrap();
    let last: f64 = manifest["final_loss"].parse().unwrap();
    assert!(last < first, "{first} -> {last}");
}

#[test]
fn shipped_configs_load_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["mass_spring", "duffing", "van_der_pol"] {
        let cfg = RunConfig::load(&dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(cfg.system, name);
        assert_eq!(cfg.variants().unwrap(), Variant::ALL.to_vec());
        let (_, notice) = cfg.compact_box().unwrap();
        assert!(notice.is_none());
    }
}
