use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::config::{RunConfig, Variant};
use super::svg::{line_chart, Series};
use super::{PipelineError, TOOL_VERSION};
use crate::data::{ce_targets, extract_transitions_every, ib_targets, load_dataset, shift_increments, write_dataset, TransitionDataset};
use crate::diagnostics::report::{passivity_csv, phase_csv, rollout_csv, stability_csv, ROLLOUT_HEADER};
use crate::diagnostics::{
    residual_grid, rollout_metrics, stability_bound_check, weak_passivity_mc, PassivityOptions, RolloutComparison,
    RolloutMetrics, RolloutSettings,
};
use crate::error::Error;
use crate::kv::{read_kv, render_kv, KvMap};
use crate::numfmt::fmt_f64;
use crate::sde::{simulate_ensemble, write_trajectory, Benchmark, BenchmarkKind, SdeSystem};
use crate::structure::{coefficient_distance, CoefficientSet};
use crate::training::persist::{load_model, save_baseline, save_sphnn, SavedModel};
use crate::training::{
    baseline_train_model, train_model, BaselineModel, LossKind, ModelSpec, SphnnModel, TrainOutcome,
};

type Res<T> = std::result::Result<T, PipelineError>;

/// Files a command wrote, and notices for the user (defaults applied etc.).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub notices: Vec<String>,
}

impl CommandOutput {
    fn absorb(&mut self, other: CommandOutput) {
        self.files.extend(other.files);
        for n in other.notices {
            if !self.notices.contains(&n) {
                self.notices.push(n);
            }
        }
    }
}

/// A model to evaluate: a trained variant, or the reference dynamics itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    Truth,
    Model(Variant),
}

impl EvalTarget {
    fn name(self) -> &'static str {
        match self {
            EvalTarget::Truth => "truth",
            EvalTarget::Model(v) => v.as_str(),
        }
    }
}

/// Subject of a passivity or stability check: the analytic coefficients or a trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassivityTarget {
    Analytic,
    Model(Variant),
}

impl PassivityTarget {
    fn name(self) -> &'static str {
        match self {
            PassivityTarget::Analytic => "analytic",
            PassivityTarget::Model(v) => v.as_str(),
        }
    }
}

/// Writes files into one stage directory and records their digests for the manifest.
struct Stage<'a> {
    cfg: &'a RunConfig,
    dir: PathBuf,
    digests: BTreeMap<String, String>,
    extra: KvMap,
}

fn hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl<'a> Stage<'a> {
    fn open(cfg: &'a RunConfig, dir: PathBuf) -> Res<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Stage {
            cfg,
            dir,
            digests: BTreeMap::new(),
            extra: KvMap::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Res<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.digests.insert(name.to_string(), hex(bytes));
        Ok(())
    }

    /// Records a file some other writer produced.
    fn record(&mut self, name: &str) -> Res<()> {
        let path = self.dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.digests.insert(name.to_string(), hex(&bytes));
        Ok(())
    }

    fn set(&mut self, key: &str, value: impl ToString) {
        self.extra.insert(key.to_string(), value.to_string());
    }

    fn finish(self) -> Res<CommandOutput> {
        let mut kv = self.extra;
        kv.insert("tool_version".into(), TOOL_VERSION.into());
        kv.insert("config_sha256".into(), self.cfg.hash());
        kv.insert("system".into(), self.cfg.system.clone());
        for (k, v) in self.cfg.seeds().entries() {
            kv.insert(k.into(), v.to_string());
        }
        let mut files: Vec<PathBuf> = Vec::new();
        for (name, digest) in &self.digests {
            kv.insert(format!("output.{name}"), digest.clone());
            files.push(self.dir.join(name));
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, render_kv(&kv)).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(CommandOutput {
            files,
            notices: Vec::new(),
        })
    }
}

fn dataset_bytes(ds: &TransitionDataset) -> Vec<u8> {
    let mut buf = Vec::new();
    write_dataset(ds, &mut buf).expect("writing to memory cannot fail");
    buf
}

fn uniform_states(lower: &[f64], upper: &[f64], count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| DVector::from_iterator(lower.len(), lower.iter().zip(upper).map(|(l, u)| rng.random_range(*l..=*u))))
        .collect()
}

fn zero_u(_: f64) -> DVector<f64> {
    DVector::zeros(1)
}

/// Simulates training and held-out paths from the data-generating SDE.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Res<CommandOutput> {
    let bench = cfg.benchmark()?;
    let seeds = cfg.seeds();
    let d = &cfg.data;
    let mut stage = Stage::open(cfg, out.join("data"))?;

    let x0s = uniform_states(&d.x0_lower, &d.x0_upper, d.n_paths, seeds.data);
    let ens = simulate_ensemble(&bench.system, &x0s, &zero_u, d.dt, d.t_train, None, seeds.data)?;
    for tr in &ens.trajectories {
        let mut buf = Vec::new();
        write_trajectory(tr, &mut buf).expect("writing to memory cannot fail");
        stage.write(&format!("train_p{}.csv", tr.path_index), &buf)?;
    }
    let train = extract_transitions_every(&ens, &zero_u, d.stride)?;
    stage.write("transitions.csv", &dataset_bytes(&train))?;

    let held_x0s = uniform_states(&d.x0_lower, &d.x0_upper, d.held_out_paths, seeds.held_out);
    let held = simulate_ensemble(&bench.system, &held_x0s, &zero_u, d.dt, d.t_train, None, seeds.held_out)?;
    let held_ds = extract_transitions_every(&held, &zero_u, d.stride)?;
    stage.write("held_out.csv", &dataset_bytes(&held_ds))?;
    stage.set("transitions", train.len());
    stage.set("held_out_transitions", held_ds.len());
    stage.finish()
}

fn model_spec(kind: BenchmarkKind, v: Variant, hidden: &[usize]) -> ModelSpec {
    let base = match kind {
        BenchmarkKind::VanDerPol => ModelSpec::dissipative(2),
        BenchmarkKind::MassSpring | BenchmarkKind::Duffing => ModelSpec::conservative(2),
    };
    let spec = ModelSpec {
        hidden: hidden.to_vec(),
        ..base
    };
    if v == Variant::Nll {
        spec.with_learned_sigma()
    } else {
        spec
    }
}

fn load_training_data(out: &Path) -> Res<TransitionDataset> {
    let path = out.join("data").join("transitions.csv");
    if !path.exists() {
        return Err(PipelineError::missing(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run `generate` first"),
        ));
    }
    Ok(load_dataset(&path)?)
}

fn history_csv(history: &[f64]) -> String {
    let mut s = String::from("epoch,loss\n");
    for (e, l) in history.iter().enumerate() {
        let _ = writeln!(s, "{},{}", e + 1, fmt_f64(*l));
    }
    s
}

/// Trains each variant on `data/transitions.csv` and saves it under `models/<variant>`.
pub fn cmd_train(cfg: &RunConfig, out: &Path, variants: &[Variant]) -> Res<CommandOutput> {
    let bench = cfg.benchmark()?;
    let ds = load_training_data(out)?;
    if ds.n != 2 {
        return Err(Error::dim("training data state dimension", 2, ds.n).into());
    }
    // Structured models learn the port-Hamiltonian drift, so their increments
    // lose the Itô correction of the known diffusion; the baseline fits raw data.
    let structured_ds = shift_increments(&ds, |x| bench.ito_correction(x))?;
    let seeds = cfg.seeds();
    let mut output = CommandOutput::default();
    for &v in variants {
        let settings = cfg.variant_settings(v);
        let tc = &settings.train;
        let mut stage = Stage::open(cfg, out.join("models").join(v.as_str()))?;
        let mut extra = KvMap::new();
        extra.insert("variant".into(), v.to_string());
        extra.insert("objective".into(), tc.objective.to_string());
        extra.insert("epochs".into(), tc.epochs.to_string());
        extra.insert("batch_size".into(), tc.batch_size.to_string());
        extra.insert("lr".into(), fmt_f64(tc.lr));
        extra.insert("init_seed".into(), seeds.init.to_string());
        extra.insert("shuffle_seed".into(), tc.seed.to_string());

        let history = if v == Variant::Baseline {
            let model = BaselineModel::new(ds.n, &settings.hidden, seeds.init)?;
            extra.insert("increments".into(), "raw".into());
            let TrainOutcome { model, history } = baseline_train_model(&ds, &ib_targets(&ds)?, model, tc)?;
            save_baseline(&model, &stage.dir, &extra)?;
            stage.record("baseline.params")?;
            history
        } else {
            let ds = &structured_ds;
            extra.insert("increments".into(), "ito_corrected".into());
            let spec = model_spec(bench.kind, v, &settings.hidden);
            let model = SphnnModel::new(spec, bench.coefficients.clone(), seeds.init)?;
            let targets = match tc.objective {
                LossKind::Ib => Some(ib_targets(ds)?),
                LossKind::Ce => Some(ce_targets(ds, tc.ce_neighbors.min(ds.len()))?),
                LossKind::Nll => None,
            };
            let TrainOutcome { model, history } = train_model(ds, targets.as_ref(), model, tc)?;
            save_sphnn(&model, &stage.dir, &extra)?;
            for id in model.field_ids() {
                stage.record(&format!("{}.params", id.name()))?;
            }
            history
        };
        stage.record("model.txt")?;
        stage.write("loss_history.csv", history_csv(&history).as_bytes())?;
        let points: Vec<(f64, f64)> = history.iter().enumerate().map(|(e, l)| ((e + 1) as f64, *l)).collect();
        let svg = line_chart(&format!("{} training loss ({v})", bench.kind), "epoch", "loss", &[Series::new(v.as_str(), points)]);
        stage.write("loss.svg", svg.as_bytes())?;
        if let (Some(first), Some(last)) = (history.first(), history.last()) {
            stage.set("initial_loss", fmt_f64(*first));
            stage.set("final_loss", fmt_f64(*last));
        }
        stage.set("variant", v);
        output.absorb(stage.finish()?);
    }
    Ok(output)
}

enum Loaded {
    Sphnn(Box<SphnnModel>),
    Baseline(BaselineModel),
}

fn load_variant(out: &Path, bench: &Benchmark, v: Variant) -> Res<Loaded> {
    let dir = out.join("models").join(v.as_str());
    let manifest = dir.join("model.txt");
    if !manifest.exists() {
        return Err(PipelineError::missing(
            &manifest,
            std::io::Error::new(std::io::ErrorKind::NotFound, format!("run `train --variant {v}` first")),
        ));
    }
    let (model, _) = load_model(&dir, &bench.coefficients)?;
    Ok(match model {
        SavedModel::Sphnn(m) => Loaded::Sphnn(m),
        SavedModel::Baseline(m) => Loaded::Baseline(m),
    })
}

fn structured(out: &Path, bench: &Benchmark, v: Variant) -> Res<SphnnModel> {
    match load_variant(out, bench, v)? {
        Loaded::Sphnn(m) => Ok(*m),
        Loaded::Baseline(_) => Err(PipelineError::usage(format!(
            "model `{v}` is an unstructured baseline; passivity and stability need a port-Hamiltonian model"
        ))),
    }
}

fn held_out_states(out: &Path) -> Res<Vec<DVector<f64>>> {
    let path = out.join("data").join("held_out.csv");
    if !path.exists() {
        return Err(PipelineError::missing(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "run `generate` first"),
        ));
    }
    Ok(load_dataset(&path)?.transitions.into_iter().map(|t| t.x).collect())
}

/// Deterministic rollouts of each target against the reference dynamics.
pub fn cmd_evaluate(cfg: &RunConfig, out: &Path, targets: &[EvalTarget]) -> Res<CommandOutput> {
    let bench = cfg.benchmark()?;
    let held = held_out_states(out)?;
    let e = &cfg.evaluate;
    let settings = RolloutSettings {
        x0: DVector::from_vec(e.x0.clone()),
        horizon: e.horizon,
        dt: e.dt,
    };
    let u0 = DVector::zeros(1);
    let reference = bench.reference.clone();
    let truth = |x: &DVector<f64>| {
        reference
            .drift_at(0.0, x, &u0)
            .unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN))
    };
    let energy = bench.energy.clone();
    let energy = |x: &DVector<f64>| energy(x);

    let mut stage = Stage::open(cfg, out.join("eval"))?;
    let mut rows: Vec<(String, RolloutMetrics)> = Vec::new();
    let mut comparisons: Vec<(String, RolloutComparison)> = Vec::new();
    for &target in targets {
        let cmp = match target {
            EvalTarget::Truth => rollout_metrics(truth, truth, energy, &held, &settings)?,
            EvalTarget::Model(v) => match load_variant(out, &bench, v)? {
                Loaded::Sphnn(m) => {
                    let f = |x: &DVector<f64>| m.drift(x, &u0).unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN));
                    rollout_metrics(f, truth, energy, &held, &settings)?
                }
                Loaded::Baseline(m) => {
                    let f = |x: &DVector<f64>| m.drift(x).unwrap_or_else(|_| DVector::from_element(x.len(), f64::NAN));
                    rollout_metrics(f, truth, energy, &held, &settings)?
                }
            },
        };
        let name = target.name().to_string();
        stage.write(&format!("phase_{name}.csv"), phase_csv(&cmp).as_bytes())?;
        rows.push((name.clone(), cmp.metrics));
        comparisons.push((name, cmp));
    }
    stage.write("rollout.csv", rollout_csv(&rows).as_bytes())?;

    if let Some((_, first)) = comparisons.first() {
        let mut phase = vec![Series::new("truth", first.truth.iter().map(|x| (x[0], x[1])).collect())];
        let mut energy_series = vec![Series::new(
            "truth",
            first.times.iter().copied().zip(first.truth_energy.iter().copied()).collect(),
        )];
        for (name, cmp) in comparisons.iter().filter(|(n, _)| n != "truth") {
            phase.push(Series::new(name.as_str(), cmp.model.iter().map(|x| (x[0], x[1])).collect()));
            energy_series.push(Series::new(
                name.as_str(),
                cmp.times.iter().copied().zip(cmp.model_energy.iter().copied()).collect(),
            ));
        }
        let title = format!("{} phase portrait from ({}, {})", bench.kind, e.x0[0], e.x0[1]);
        stage.write("phase.svg", line_chart(&title, "q", "p", &phase).as_bytes())?;
        let title = format!("{} true energy along rollouts", bench.kind);
        stage.write("energy.svg", line_chart(&title, "t", "H", &energy_series).as_bytes())?;
    }
    stage.set("held_out_states", held.len());
    stage.finish()
}

fn subject(out: &Path, bench: &Benchmark, target: PassivityTarget) -> Res<(CoefficientSet, &'static str)> {
    Ok(match target {
        PassivityTarget::Analytic => (bench.coefficients.clone(), "analytic"),
        PassivityTarget::Model(v) => (structured(out, bench, v)?.coefficient_set(), "learned"),
    })
}

/// Passivity residual on the box grid and the Monte-Carlo energy balance.
pub fn cmd_passivity(cfg: &RunConfig, out: &Path, target: PassivityTarget) -> Res<CommandOutput> {
    let bench = cfg.benchmark()?;
    let (bx, notice) = cfg.compact_box()?;
    let (coeffs, provenance) = subject(out, &bench, target)?;
    // The approximation tolerance is the measured coefficient distance to the truth.
    let epsilon = match target {
        PassivityTarget::Analytic => 0.0,
        PassivityTarget::Model(_) => coefficient_distance(&bench.coefficients, &coeffs, &bx)?.total(),
    };
    let p = &cfg.passivity;
    let opts = PassivityOptions {
        n_paths: p.n_paths,
        master_seed: cfg.seeds().passivity,
        strict: p.strict,
        epsilon,
    };
    let x0 = DVector::from_vec(p.x0.clone());
    let rep = weak_passivity_mc(&coeffs, &x0, &zero_u, &bx, p.dt, p.horizon, &opts)?;

    let mut stage = Stage::open(cfg, out.join("passivity").join(target.name()))?;
    stage.write("passivity.csv", passivity_csv(&rep).as_bytes())?;
    let mut residuals = String::from("x1,x2,r\n");
    for (x, r) in bx.grid().iter().zip(residual_grid(&coeffs, &bx)?) {
        let _ = writeln!(residuals, "{},{},{}", fmt_f64(x[0]), fmt_f64(x[1]), fmt_f64(r));
    }
    stage.write("residuals.csv", residuals.as_bytes())?;
    let mut summary = KvMap::new();
    summary.insert("coefficients".into(), provenance.into());
    summary.insert("c0_hat".into(), fmt_f64(rep.c0_hat));
    summary.insert("epsilon".into(), fmt_f64(rep.epsilon));
    summary.insert("strict".into(), rep.strict.to_string());
    summary.insert("h0".into(), fmt_f64(rep.h0));
    summary.insert("rate0".into(), fmt_f64(rep.rate0));
    summary.insert("n_paths".into(), rep.n_paths.to_string());
    summary.insert("exited".into(), rep.exited.to_string());
    summary.insert("holds_within_2se".into(), rep.holds_within(2.0).to_string());
    stage.write("summary.txt", render_kv(&summary).as_bytes())?;
    let mut output = stage.finish()?;
    output.notices.extend(notice);
    Ok(output)
}

/// The same process driven by `d ≥ sys.d()` Brownian motions, the extra ones
/// entering through zero columns, so it can be coupled with a model that
/// has more noise channels.
fn pad_noise(sys: &SdeSystem, d: usize) -> SdeSystem {
    if d <= sys.d() {
        return sys.clone();
    }
    let (a, b) = (sys.clone(), sys.clone());
    let (n, d0) = (sys.n(), sys.d());
    SdeSystem::new(
        format!("{}-padded", sys.name),
        n,
        d,
        sys.m(),
        Arc::new(move |t, x, u| a.drift_at(t, x, u).expect("dimensions checked by caller")),
        Arc::new(move |x| {
            let mut s = DMatrix::zeros(n, d);
            s.columns_mut(0, d0).copy_from(&b.diffusion_at(x).expect("dimensions checked by caller"));
            s
        }),
    )
}

/// Coefficient gaps, Lipschitz estimate and coupled-path check of the Gronwall bound.
pub fn cmd_stability(cfg: &RunConfig, out: &Path, target: PassivityTarget) -> Res<CommandOutput> {
    let bench = cfg.benchmark()?;
    let (bx, notice) = cfg.compact_box()?;
    let learned = match target {
        PassivityTarget::Analytic => bench.system.clone(),
        PassivityTarget::Model(v) => SdeSystem::from_coefficients(v.as_str(), &structured(out, &bench, v)?.coefficient_set()),
    };
    let truth = pad_noise(&bench.system, learned.d());
    let s = &cfg.stability;
    let x0 = DVector::from_vec(s.x0.clone());
    let rep = stability_bound_check(
        &truth,
        &learned,
        &bx,
        &x0,
        &zero_u,
        s.dt,
        s.horizon,
        s.n_paths,
        cfg.seeds().stability,
    )?;
    let mut stage = Stage::open(cfg, out.join("stability").join(target.name()))?;
    stage.write("stability.csv", stability_csv(&rep).as_bytes())?;
    let mut summary = KvMap::new();
    summary.insert("holds".into(), rep.holds().to_string());
    summary.insert("horizon".into(), fmt_f64(rep.horizon));
    summary.insert("n_paths".into(), rep.n_paths.to_string());
    summary.insert("exited".into(), rep.exited.to_string());
    stage.write("summary.txt", render_kv(&summary).as_bytes())?;
    let mut output = stage.finish()?;
    output.notices.extend(notice);
    Ok(output)
}

/// Concatenates `eval/rollout.csv` of each run into `<out>/table2.csv`,
/// prefixing every row with the run's system.
pub fn cmd_report(runs: &[PathBuf], out: &Path) -> Res<CommandOutput> {
    let mut table = format!("system,{ROLLOUT_HEADER}\n");
    let mut kv = KvMap::new();
    kv.insert("tool_version".into(), TOOL_VERSION.into());
    for (i, run) in runs.iter().enumerate() {
        let eval = run.join("eval");
        let csv_path = eval.join("rollout.csv");
        let text = fs::read_to_string(&csv_path).map_err(|e| PipelineError::missing(&csv_path, e))?;
        let manifest = read_kv(&eval.join("manifest.txt"))?;
        let system = manifest.get("system").cloned().unwrap_or_default();
        let mut lines = text.lines();
        if lines.next() != Some(ROLLOUT_HEADER) {
            return Err(Error::parse(csv_path.display().to_string(), 1, "unexpected rollout header").into());
        }
        for line in lines.filter(|l| !l.is_empty()) {
            let _ = writeln!(table, "{system},{line}");
        }
        kv.insert(format!("source.{i}.system"), system);
        kv.insert(format!("source.{i}.rollout_sha256"), hex(text.as_bytes()));
        if let Some(h) = manifest.get("config_sha256") {
            kv.insert(format!("source.{i}.config_sha256"), h.clone());
        }
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join("table2.csv");
    fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    kv.insert("output.table2.csv".into(), hex(table.as_bytes()));
    let manifest = out.join("report_manifest.txt");
    fs::write(&manifest, render_kv(&kv)).map_err(|e| Error::io(&manifest, e))?;
    Ok(CommandOutput {
        files: vec![path, manifest],
        notices: Vec::new(),
    })
}
