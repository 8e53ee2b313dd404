//! Run configuration: one TOML file per experiment.
//!
//! Only `system` is required; every other key has a default. Unknown keys are
//! rejected so typos surface as errors instead of silently using defaults.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::sde::{Benchmark, BenchmarkKind, BenchmarkParams, NoiseAmplitude};
use crate::structure::CompactBox;
use crate::training::{LossKind, TrainConfig};

/// A model family the pipeline can train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Baseline,
    Ib,
    Ce,
    Nll,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Baseline, Variant::Ib, Variant::Ce, Variant::Nll];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Ib => "ib",
            Variant::Ce => "ce",
            Variant::Nll => "nll",
        }
    }

    /// Objective the variant minimizes; the baseline regresses IB targets.
    pub fn objective(self) -> LossKind {
        match self {
            Variant::Baseline | Variant::Ib => LossKind::Ib,
            Variant::Ce => LossKind::Ce,
            Variant::Nll => LossKind::Nll,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, PipelineError> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| PipelineError::usage(format!("unknown variant `{s}` (expected baseline, ib, ce or nll)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub k: f64,
    pub m: f64,
    /// Constant external force `F`.
    pub force: f64,
    /// Duffing noise level.
    pub sigma0: f64,
    /// Van der Pol damping parameter.
    pub mu: f64,
    /// Van der Pol noise amplitude `ξ(p) = xi + xi_slope·p`.
    pub xi: f64,
    pub xi_slope: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        let d = BenchmarkParams::default();
        let xi = match d.xi {
            NoiseAmplitude::Constant(v) => v,
            NoiseAmplitude::Affine { offset, .. } => offset,
        };
        SystemParams {
            k: d.k,
            m: d.mass,
            force: d.force,
            sigma0: d.sigma0,
            mu: d.mu,
            xi,
            xi_slope: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dt: f64,
    pub t_train: f64,
    pub n_paths: usize,
    /// Initial states are drawn uniformly from `[x0_lower, x0_upper]`.
    pub x0_lower: Vec<f64>,
    pub x0_upper: Vec<f64>,
    /// Independent paths whose states are used for the one-step drift error.
    pub held_out_paths: usize,
    /// Training transitions span this many simulation steps (non-overlapping).
    pub stride: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dt: 0.01,
            t_train: 10.0,
            n_paths: 20,
            x0_lower: vec![-1.5, -1.5],
            x0_upper: vec![1.5, 1.5],
            held_out_paths: 5,
            stride: 1,
        }
    }
}

/// Per-variant replacements for the shared `[train]` settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub variants: Vec<String>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub nll_jitter: f64,
    pub ce_neighbors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<TrainOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ib: Option<TrainOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ce: Option<TrainOverride>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nll: Option<TrainOverride>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            variants: Variant::ALL.iter().map(|v| v.to_string()).collect(),
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            hidden: vec![64, 64],
            nll_jitter: t.nll_jitter,
            ce_neighbors: t.ce_neighbors,
            baseline: None,
            ib: None,
            ce: None,
            nll: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            x0: vec![1.0, 0.0],
            horizon: 20.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_grid() -> usize {
    41
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassivityConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
    /// Check the inequality without the `(c₀ + ε) t` allowance.
    pub strict: bool,
}

impl Default for PassivityConfig {
    fn default() -> Self {
        PassivityConfig {
            n_paths: 1000,
            horizon: 1.0,
            dt: 0.01,
            x0: vec![1.0, 0.0],
            strict: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilityConfig {
    pub n_paths: usize,
    pub horizon: f64,
    pub dt: f64,
    pub x0: Vec<f64>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            n_paths: 200,
            horizon: 1.0,
            dt: 0.01,
            x0: vec![1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub params: SystemParams,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub evaluate: EvalConfig,
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub state_box: Option<BoxConfig>,
    #[serde(default)]
    pub passivity: PassivityConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
}

/// Seeds of every random stream in a run, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub master: u64,
    pub data: u64,
    pub held_out: u64,
    pub init: u64,
    pub shuffle: u64,
    pub passivity: u64,
    pub stability: u64,
}

impl RunSeeds {
    pub fn from_master(master: u64) -> Self {
        RunSeeds {
            master,
            data: master,
            held_out: master.wrapping_add(1),
            init: master.wrapping_add(2),
            shuffle: master.wrapping_add(3),
            passivity: master.wrapping_add(4),
            stability: master.wrapping_add(5),
        }
    }

    pub fn entries(&self) -> [(&'static str, u64); 7] {
        [
            ("seed.master", self.master),
            ("seed.data", self.data),
            ("seed.held_out", self.held_out),
            ("seed.init", self.init),
            ("seed.shuffle", self.shuffle),
            ("seed.passivity", self.passivity),
            ("seed.stability", self.stability),
        ]
    }
}

/// Training settings resolved for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantSettings {
    pub train: TrainConfig,
    pub hidden: Vec<usize>,
}

fn invalid(field: &str, message: impl Into<String>) -> PipelineError {
    PipelineError::config(field, message)
}

fn positive(field: &str, v: f64) -> Result<(), PipelineError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn finite_vec(field: &str, v: &[f64], n: usize) -> Result<(), PipelineError> {
    if v.len() != n {
        return Err(invalid(field, format!("expected {n} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(())
}

fn multiple_of(field: &str, horizon: f64, dt: f64) -> Result<(), PipelineError> {
    crate::sde::step_count(dt, horizon).map(|_| ()).map_err(|e| invalid(field, e.to_string()))
}

impl RunConfig {
    /// Parses TOML text; `source` names the file in error messages.
    pub fn from_toml_str(text: &str, source: &str) -> Result<Self, PipelineError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::config(source, e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::missing(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config fields are all TOML-representable")
    }

    pub fn kind(&self) -> Result<BenchmarkKind, PipelineError> {
        self.system.parse().map_err(|e: crate::Error| invalid("system", e.to_string()))
    }

    pub fn benchmark_params(&self) -> BenchmarkParams {
        let p = &self.params;
        BenchmarkParams {
            k: p.k,
            mass: p.m,
            force: p.force,
            sigma0: p.sigma0,
            mu: p.mu,
            xi: if p.xi_slope == 0.0 {
                NoiseAmplitude::Constant(p.xi)
            } else {
                NoiseAmplitude::Affine {
                    offset: p.xi,
                    slope: p.xi_slope,
                }
            },
        }
    }

    pub fn benchmark(&self) -> Result<Benchmark, PipelineError> {
        Benchmark::new(self.kind()?, self.benchmark_params()).map_err(|e| invalid("params", e.to_string()))
    }

    pub fn seeds(&self) -> RunSeeds {
        RunSeeds::from_master(self.seed)
    }

    pub fn variants(&self) -> Result<Vec<Variant>, PipelineError> {
        self.train
            .variants
            .iter()
            .map(|s| s.parse::<Variant>().map_err(|_| invalid("train.variants", format!("unknown variant `{s}`"))))
            .collect()
    }

    pub fn variant_settings(&self, v: Variant) -> VariantSettings {
        let t = &self.train;
        let o = match v {
            Variant::Baseline => &t.baseline,
            Variant::Ib => &t.ib,
            Variant::Ce => &t.ce,
            Variant::Nll => &t.nll,
        }
        .clone()
        .unwrap_or_default();
        VariantSettings {
            train: TrainConfig {
                objective: v.objective(),
                epochs: o.epochs.unwrap_or(t.epochs),
                batch_size: o.batch_size.unwrap_or(t.batch_size),
                lr: o.lr.unwrap_or(t.lr),
                seed: self.seeds().shuffle,
                nll_jitter: t.nll_jitter,
                ce_neighbors: t.ce_neighbors,
            },
            hidden: o.hidden.unwrap_or_else(|| t.hidden.clone()),
        }
    }

    /// The diagnostic box, or `[−2, 2]ⁿ` with a notice when none is configured.
    pub fn compact_box(&self) -> Result<(CompactBox, Option<String>), PipelineError> {
        match &self.state_box {
            Some(b) => CompactBox::new(DVector::from_vec(b.lower.clone()), DVector::from_vec(b.upper.clone()), b.grid)
                .map(|bx| (bx, None))
                .map_err(|e| invalid("box", e.to_string())),
            None => Ok((
                CompactBox::default_for(2),
                Some("no [box] section; using [-2, 2]^2 with 41 grid points per axis".into()),
            )),
        }
    }

    /// SHA-256 of the canonical TOML rendering, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out_dir = None;
        let digest = Sha256::digest(canonical.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.kind()?;
        let n = 2;
        let p = &self.params;
        positive("params.k", p.k)?;
        positive("params.m", p.m)?;
        for (field, v) in [("params.force", p.force), ("params.sigma0", p.sigma0), ("params.mu", p.mu)] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if !(p.xi.is_finite() && p.xi_slope.is_finite()) {
            return Err(invalid("params.xi", "must be finite"));
        }

        let d = &self.data;
        positive("data.dt", d.dt)?;
        multiple_of("data.t_train", d.t_train, d.dt)?;
        if d.n_paths == 0 {
            return Err(invalid("data.n_paths", "must be >= 1"));
        }
        if d.stride == 0 {
            return Err(invalid("data.stride", "must be >= 1"));
        }
        finite_vec("data.x0_lower", &d.x0_lower, n)?;
        finite_vec("data.x0_upper", &d.x0_upper, n)?;
        if d.x0_lower.iter().zip(&d.x0_upper).any(|(l, u)| !(l <= u)) {
            return Err(invalid("data.x0_upper", "must be >= x0_lower componentwise"));
        }

        let t = &self.train;
        self.variants()?;
        for v in Variant::ALL {
            let s = self.variant_settings(v);
            let section = format!("train.{v}");
            if s.train.batch_size == 0 {
                return Err(invalid(&format!("{section}.batch_size"), "must be >= 1"));
            }
            positive(&format!("{section}.lr"), s.train.lr)?;
            if s.hidden.is_empty() || s.hidden.contains(&0) {
                return Err(invalid(&format!("{section}.hidden"), "needs at least one layer, all widths >= 1"));
            }
        }
        if !(t.nll_jitter >= 0.0 && t.nll_jitter.is_finite()) {
            return Err(invalid("train.nll_jitter", "must be >= 0"));
        }
        if t.ce_neighbors == 0 {
            return Err(invalid("train.ce_neighbors", "must be >= 1"));
        }

        let e = &self.evaluate;
        finite_vec("evaluate.x0", &e.x0, n)?;
        positive("evaluate.dt", e.dt)?;
        multiple_of("evaluate.horizon", e.horizon, e.dt)?;

        if let Some(b) = &self.state_box {
            finite_vec("box.lower", &b.lower, n)?;
            finite_vec("box.upper", &b.upper, n)?;
        }
        let (bx, _) = self.compact_box()?;

        let pa = &self.passivity;
        if pa.n_paths < 2 {
            return Err(invalid("passivity.n_paths", "must be >= 2"));
        }
        positive("passivity.dt", pa.dt)?;
        multiple_of("passivity.horizon", pa.horizon, pa.dt)?;
        finite_vec("passivity.x0", &pa.x0, n)?;
        if !bx.contains(&DVector::from_vec(pa.x0.clone())) {
            return Err(invalid("passivity.x0", "lies outside the box"));
        }

        let st = &self.stability;
        if st.n_paths == 0 {
            return Err(invalid("stability.n_paths", "must be >= 1"));
        }
        positive("stability.dt", st.dt)?;
        multiple_of("stability.horizon", st.horizon, st.dt)?;
        finite_vec("stability.x0", &st.x0, n)?;
        if !bx.contains(&DVector::from_vec(st.x0.clone())) {
            return Err(invalid("stability.x0", "lies outside the box"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml_str("system = \"duffing\"\n", "mem").unwrap();
        assert_eq!(cfg.kind().unwrap(), BenchmarkKind::Duffing);
        assert_eq!(cfg.data, DataConfig::default());
        assert_eq!(cfg.variants().unwrap(), Variant::ALL.to_vec());
        let (bx, notice) = cfg.compact_box().unwrap();
        assert_eq!(bx, CompactBox::default_for(2));
        assert!(notice.is_some());
    }

    #[test]
    fn round_trip_is_lossless() {
        let text = r#"
system = "van_der_pol"
seed = 9
[params]
mu = -0.25
xi_slope = 0.5
[train]
epochs = 5
variants = ["ib", "nll"]
[train.nll]
lr = 0.01
hidden = [8]
[box]
lower = [-3.0, -3.0]
upper = [3.0, 3.0]
grid = 11
"#;
        let cfg = RunConfig::from_toml_str(text, "mem").unwrap();
        let again = RunConfig::from_toml_str(&cfg.to_toml_string(), "mem").unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        let nll = cfg.variant_settings(Variant::Nll);
        assert_eq!(nll.train.lr, 0.01);
        assert_eq!(nll.hidden, vec![8]);
        assert_eq!(nll.train.epochs, 5);
        assert_eq!(cfg.variant_settings(Variant::Ib).hidden, vec![64, 64]);
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_toml_str("seed = 1\n", "mem").unwrap_err();
        assert!(err.to_string().contains("system"), "{err}");
        let err = RunConfig::from_toml_str("system = \"duffing\"\n[data]\ndt = -1.0\n", "mem").unwrap_err();
        assert!(err.to_string().contains("data.dt"), "{err}");
        let err = RunConfig::from_toml_str("system = \"pendulum\"\n", "mem").unwrap_err();
        assert!(err.to_string().contains("system"), "{err}");
        let err = RunConfig::from_toml_str("system = \"duffing\"\n[train]\nvariants = [\"mlp\"]\n", "mem").unwrap_err();
        assert!(err.to_string().contains("train.variants"), "{err}");
        let err = RunConfig::from_toml_str("system = \"duffing\"\n[data]\ndtt = 1.0\n", "mem").unwrap_err();
        assert!(err.to_string().contains("dtt"), "{err}");
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn hash_ignores_output_directory_but_not_seed() {
        let mut a = RunConfig::from_toml_str("system = \"mass_spring\"\n", "mem").unwrap();
        let h = a.hash();
        a.out_dir = Some("elsewhere".into());
        assert_eq!(a.hash(), h);
        a.seed = 1;
        assert_ne!(a.hash(), h);
        assert_eq!(h.len(), 64);
    }
}
