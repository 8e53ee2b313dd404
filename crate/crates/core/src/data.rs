//! Transition datasets and velocity targets.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{ensure_dim, Error, Result};
use crate::numfmt::fmt_f64;
use crate::sde::Ensemble;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x: DVector<f64>,
    pub x_next: DVector<f64>,
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetMeta {
    pub system: String,
    pub master_seed: Option<u64>,
    pub horizon: Option<f64>,
}

/// `(x_k, x_{k+1}, u_k)` tuples sharing one sampling step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    pub n: usize,
    pub m: usize,
    pub dt: f64,
    pub transitions: Vec<Transition>,
    pub meta: DatasetMeta,
}

impl TransitionDataset {
    pub fn new(n: usize, m: usize, dt: f64) -> Self {
        TransitionDataset {
            n,
            m,
            dt,
            transitions: Vec::new(),
            meta: DatasetMeta::default(),
        }
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        ensure_dim("transition state", self.n, t.x.len())?;
        ensure_dim("transition next state", self.n, t.x_next.len())?;
        ensure_dim("transition input", self.m, t.u.len())?;
        let finite = t.x.iter().chain(t.x_next.iter()).chain(t.u.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::non_finite("transition"));
        }
        self.transitions.push(t);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Every `stride`-th transition, starting from the first.
    pub fn thinned(&self, stride: usize) -> Self {
        let stride = stride.max(1);
        TransitionDataset {
            transitions: self.transitions.iter().step_by(stride).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Consecutive-pair transitions from every path; `u_fn` supplies the input
/// applied over each step.
pub fn extract_transitions<U>(ens: &Ensemble, u_fn: &U) -> Result<TransitionDataset>
where
    U: Fn(f64) -> DVector<f64> + ?Sized,
{
    extract_transitions_every(ens, u_fn, 1)
}

/// Non-overlapping `stride`-step transitions `x_k → x_{k+stride}` with
/// sampling step `stride·dt`; the input is held at its value at `t_k`.
///
/// Increments telescope, so the coarse set carries the same drift
/// information as the fine one in `1/stride` as many samples. A trailing
/// partial window is dropped.
pub fn extract_transitions_every<U>(ens: &Ensemble, u_fn: &U, stride: usize) -> Result<TransitionDataset>
where
    U: Fn(f64) -> DVector<f64> + ?Sized,
{
    if stride == 0 {
        return Err(Error::InvalidParameter("transition stride must be >= 1".into()));
    }
    let Some(first) = ens.trajectories.first() else {
        return Ok(TransitionDataset::new(0, u_fn(0.0).len(), 0.0));
    };
    let dt = first.dt;
    let mut ds = TransitionDataset::new(first.dim(), u_fn(0.0).len(), dt * stride as f64);
    ds.meta.master_seed = Some(first.master_seed);
    ds.meta.horizon = first.times.last().copied();
    for tr in &ens.trajectories {
        if tr.dt != dt {
            return Err(Error::InvalidParameter(format!(
                "mixed sampling steps in ensemble: {dt} and {} (path {})",
                tr.dt, tr.path_index
            )));
        }
        let mut k = 0;
        while k + stride < tr.states.len() {
            ds.push(Transition {
                x: tr.states[k].clone(),
                x_next: tr.states[k + stride].clone(),
                u: u_fn(tr.times[k]),
            })?;
            k += stride;
        }
    }
    Ok(ds)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    /// Raw increments over `dt`.
    Ib,
    /// Increments averaged over nearby states.
    Ce,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityTargets {
    pub kind: TargetKind,
    pub ce_neighbors: Option<usize>,
    pub targets: Vec<DVector<f64>>,
}

impl VelocityTargets {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Copy with every target scaled.
    pub fn scaled(&self, s: f64) -> Self {
        VelocityTargets {
            targets: self.targets.iter().map(|t| t * s).collect(),
            ..self.clone()
        }
    }
}

/// `(x_{k+1} − x_k) / dt` per transition.
pub fn ib_targets(ds: &TransitionDataset) -> Result<VelocityTargets> {
    if !ds.is_empty() && !(ds.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {}", ds.dt)));
    }
    Ok(VelocityTargets {
        kind: TargetKind::Ib,
        ce_neighbors: None,
        targets: ds.transitions.iter().map(|t| (&t.x_next - &t.x) / ds.dt).collect(),
    })
}

/// How conditional-expectation targets average increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CeEstimator {
    /// Mean over the `k` nearest states (Euclidean), the sample itself first,
    /// remaining ties by index.
    Knn { k: usize },
    /// Gaussian-kernel weighted mean with the given bandwidth.
    Kernel { bandwidth: f64 },
}

pub fn ce_targets(ds: &TransitionDataset, k_neighbors: usize) -> Result<VelocityTargets> {
    ce_targets_with(ds, CeEstimator::Knn { k: k_neighbors })
}

pub fn ce_targets_with(ds: &TransitionDataset, estimator: CeEstimator) -> Result<VelocityTargets> {
    if ds.is_empty() {
        return Err(Error::InvalidParameter("conditional-expectation targets need a non-empty dataset".into()));
    }
    let ib = ib_targets(ds)?;
    let xs: Vec<&DVector<f64>> = ds.transitions.iter().map(|t| &t.x).collect();
    let n = xs.len();
    match estimator {
        CeEstimator::Knn { k } => {
            if k == 0 || k > n {
                return Err(Error::InvalidParameter(format!("k_neighbors must be in 1..={n}, got {k}")));
            }
            let finder = NeighbourFinder::new(&xs);
            let targets = (0..n)
                .map(|i| {
                    let mut sum = ib.targets[i].clone();
                    for j in finder.nearest(i, k - 1) {
                        sum += &ib.targets[j];
                    }
                    sum / k as f64
                })
                .collect();
            Ok(VelocityTargets {
                kind: TargetKind::Ce,
                ce_neighbors: Some(k),
                targets,
            })
        }
        CeEstimator::Kernel { bandwidth } => {
            if !(bandwidth > 0.0) {
                return Err(Error::InvalidParameter(format!("kernel bandwidth must be positive, got {bandwidth}")));
            }
            let inv = 1.0 / (2.0 * bandwidth * bandwidth);
            let targets = (0..n)
                .map(|i| {
                    let mut sum = DVector::zeros(ds.n);
                    let mut wsum = 0.0;
                    for j in 0..n {
                        let w = (-(xs[i] - xs[j]).norm_squared() * inv).exp();
                        sum += &ib.targets[j] * w;
                        wsum += w;
                    }
                    sum / wsum
                })
                .collect();
            Ok(VelocityTargets {
                kind: TargetKind::Ce,
                ce_neighbors: None,
                targets,
            })
        }
    }
}

/// Candidate neighbour ordered by distance, then index.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2.total_cmp(&other.d2).then(self.index.cmp(&other.index))
    }
}

/// Exact k-nearest-neighbour search by a sweep over points sorted on the
/// first coordinate; a side of the sweep stops once the first-coordinate gap
/// alone exceeds the current k-th distance.
struct NeighbourFinder<'a> {
    xs: &'a [&'a DVector<f64>],
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl<'a> NeighbourFinder<'a> {
    fn new(xs: &'a [&'a DVector<f64>]) -> Self {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a][0].total_cmp(&xs[b][0]).then(a.cmp(&b)));
        let mut rank = vec![0; xs.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        NeighbourFinder { xs, order, rank }
    }

    /// The `count` points closest to point `i`, excluding `i`; ties go to the lower index.
    fn nearest(&self, i: usize, count: usize) -> Vec<usize> {
        if count == 0 {
            return Vec::new();
        }
        let x = self.xs[i];
        let mut heap: std::collections::BinaryHeap<Candidate> = std::collections::BinaryHeap::with_capacity(count + 1);
        let visit = |j: usize, heap: &mut std::collections::BinaryHeap<Candidate>| -> bool {
            let gap = self.xs[j][0] - x[0];
            if heap.len() == count && gap * gap > heap.peek().expect("non-empty heap").d2 {
                return false;
            }
            let cand = Candidate {
                d2: (self.xs[j] - x).norm_squared(),
                index: j,
            };
            if heap.len() < count {
                heap.push(cand);
            } else if cand < *heap.peek().expect("non-empty heap") {
                heap.pop();
                heap.push(cand);
            }
            true
        };
        let r = self.rank[i];
        for &j in &self.order[r + 1..] {
            if !visit(j, &mut heap) {
                break;
            }
        }
        for &j in self.order[..r].iter().rev() {
            if !visit(j, &mut heap) {
                break;
            }
        }
        heap.into_iter().map(|c| c.index).collect()
    }
}

fn header(n: usize, m: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("xk_{i}"))
        .chain((1..=n).map(|i| format!("xn_{i}")))
        .chain(std::iter::once("dt".to_string()))
        .chain((1..=m).map(|i| format!("u_{i}")))
        .collect()
}

/// Removes a known drift term from every increment: `x_next − offset(x)·dt`.
/// With the Itô correction as `offset`, increment targets estimate the
/// port-Hamiltonian drift instead of the Itô drift.
pub fn shift_increments<F>(ds: &TransitionDataset, offset: F) -> Result<TransitionDataset>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut out = TransitionDataset {
        transitions: Vec::with_capacity(ds.len()),
        ..ds.clone()
    };
    for t in &ds.transitions {
        let shift = offset(&t.x)?;
        ensure_dim("increment offset", ds.n, shift.len())?;
        out.push(Transition {
            x: t.x.clone(),
            x_next: &t.x_next - shift * ds.dt,
            u: t.u.clone(),
        })?;
    }
    Ok(out)
}

/// CSV with header `xk_1..xk_n,xn_1..xn_n,dt,u_1..u_m`, 17 significant digits.
pub fn write_dataset<W: Write>(ds: &TransitionDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header(ds.n, ds.m).join(","))?;
    for t in &ds.transitions {
        let row: Vec<String> = t
            .x
            .iter()
            .chain(t.x_next.iter())
            .chain(std::iter::once(&ds.dt))
            .chain(t.u.iter())
            .map(|v| fmt_f64(*v))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_dataset(ds: &TransitionDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(ds, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset<R: Read>(input: R, source: &str) -> Result<TransitionDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let head = rdr
        .headers()
        .map_err(|e| Error::parse(source, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = head.iter().map(str::trim).collect();
    let dt_col = names
        .iter()
        .position(|c| *c == "dt")
        .ok_or_else(|| Error::parse(source, 1, "header lacks a `dt` column"))?;
    if dt_col % 2 != 0 {
        return Err(Error::parse(source, 1, "header needs equally many xk_ and xn_ columns"));
    }
    let n = dt_col / 2;
    let m = names.len() - dt_col - 1;
    let expected = header(n, m);
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(Error::parse(source, 1, format!("expected header `{}`", expected.join(","))));
    }

    let mut ds = TransitionDataset::new(n, m, 0.0);
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != names.len() {
            return Err(Error::parse(source, line, format!("expected {} fields, got {}", names.len(), record.len())));
        }
        let values = record
            .iter()
            .map(|f| {
                let v: f64 = f
                    .trim()
                    .parse()
                    .map_err(|e| Error::parse(source, line, format!("bad number `{f}`: {e}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::parse(source, line, format!("non-finite value `{f}`")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let dt = values[dt_col];
        if ds.is_empty() {
            if !(dt > 0.0) {
                return Err(Error::parse(source, line, format!("dt must be positive, got {dt}")));
            }
            ds.dt = dt;
        } else if dt != ds.dt {
            return Err(Error::parse(source, line, format!("non-uniform dt: {dt} vs {}", ds.dt)));
        }
        ds.push(Transition {
            x: DVector::from_column_slice(&values[..n]),
            x_next: DVector::from_column_slice(&values[n..2 * n]),
            u: DVector::from_column_slice(&values[dt_col + 1..]),
        })
        .map_err(|e| Error::parse(source, line, e.to_string()))?;
    }
    Ok(ds)
}

pub fn load_dataset(path: &Path) -> Result<TransitionDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, &path.display().to_string())
}
