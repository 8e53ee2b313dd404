//! Port-Hamiltonian coefficient bundles.
//!
//! A [`CoefficientSet`] holds the Hamiltonian with its first two
//! derivatives, the interconnection `J`, the dissipation `R`, the diffusion
//! `σ` and the input map `g`. Dissipation is always supplied through a
//! factor `D` with `R = DᵀD`, so every set is PSD by construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{ensure_dim, Error, Result};

pub type ScalarMap = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixMap = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Learned,
}

/// `A − Aᵀ`.
pub fn skew_from(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::dim("skew_from: square matrix rows", a.ncols(), a.nrows()));
    }
    Ok(a - a.transpose())
}

/// `DᵀD`.
pub fn gram_from(d: &DMatrix<f64>) -> DMatrix<f64> {
    d.transpose() * d
}

/// Canonical symplectic matrix `[[0, I], [−I, 0]]` for even `n`.
pub fn canonical_j(n: usize) -> Result<DMatrix<f64>> {
    if n == 0 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("canonical J needs even n, got {n}")));
    }
    let h = n / 2;
    let mut j = DMatrix::zeros(n, n);
    for i in 0..h {
        j[(i, h + i)] = 1.0;
        j[(h + i, i)] = -1.0;
    }
    Ok(j)
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Axis-aligned closed box standing in for a compact state region, with a
/// uniform grid used for sup-norm estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactBox {
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub grid_points_per_axis: usize,
}

impl CompactBox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>, grid_points_per_axis: usize) -> Result<Self> {
        ensure_dim("box upper bound", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidParameter("box must have at least one axis".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidParameter(format!(
                "box needs lower < upper componentwise, got {:?} / {:?}",
                lower.as_slice(),
                upper.as_slice()
            )));
        }
        if grid_points_per_axis < 2 {
            return Err(Error::InvalidParameter("box grid needs >= 2 points per axis".into()));
        }
        Ok(CompactBox {
            lower,
            upper,
            grid_points_per_axis,
        })
    }

    /// `[−half_width, half_width]ⁿ`.
    pub fn symmetric(n: usize, half_width: f64, grid_points_per_axis: usize) -> Result<Self> {
        Self::new(
            DVector::from_element(n, -half_width),
            DVector::from_element(n, half_width),
            grid_points_per_axis,
        )
    }

    /// `[−2, 2]ⁿ` with 41 points per axis.
    pub fn default_for(n: usize) -> Self {
        Self::symmetric(n, 2.0, 41).expect("default box is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn step(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.grid_points_per_axis - 1) as f64
    }

    /// Grid coordinates along one axis; endpoints are exact.
    pub fn axis_points(&self, axis: usize) -> Vec<f64> {
        let k = self.grid_points_per_axis;
        (0..k)
            .map(|i| {
                if i + 1 == k {
                    self.upper[axis]
                } else {
                    self.lower[axis] + i as f64 * self.step(axis)
                }
            })
            .collect()
    }

    /// All grid points, last axis varying fastest.
    pub fn grid(&self) -> Vec<DVector<f64>> {
        let n = self.dim();
        let axes: Vec<Vec<f64>> = (0..n).map(|a| self.axis_points(a)).collect();
        let k = self.grid_points_per_axis;
        let total = k.pow(n as u32);
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            points.push(DVector::from_iterator(n, (0..n).map(|a| axes[a][idx[a]])));
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < k {
                    break;
                }
                idx[a] = 0;
            }
        }
        points
    }
}

/// Hamiltonian `H`, its gradient and Hessian, `J`, `R = DᵀD`, `σ` and `g`.
#[derive(Clone)]
pub struct CoefficientSet {
    n: usize,
    d: usize,
    m: usize,
    hamiltonian: ScalarMap,
    grad_h: VectorMap,
    hess_h: MatrixMap,
    interconnection: MatrixMap,
    dissipation_factor: Option<MatrixMap>,
    diffusion: MatrixMap,
    input_map: MatrixMap,
    provenance: Provenance,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("m", &self.m)
            .field("has_dissipation", &self.dissipation_factor.is_some())
            .field("provenance", &self.provenance)
            .finish()
    }
}

pub struct CoefficientSetBuilder {
    n: usize,
    d: usize,
    m: usize,
    hamiltonian: Option<(ScalarMap, VectorMap, MatrixMap)>,
    interconnection: Option<MatrixMap>,
    dissipation_factor: Option<MatrixMap>,
    diffusion: Option<MatrixMap>,
    input_map: Option<MatrixMap>,
    provenance: Provenance,
}

impl CoefficientSetBuilder {
    pub fn hamiltonian(mut self, h: ScalarMap, grad: VectorMap, hess: MatrixMap) -> Self {
        self.hamiltonian = Some((h, grad, hess));
        self
    }

    pub fn interconnection(mut self, j: MatrixMap) -> Self {
        self.interconnection = Some(j);
        self
    }

    pub fn constant_interconnection(self, j: DMatrix<f64>) -> Self {
        self.interconnection(Arc::new(move |_| j.clone()))
    }

    /// Sets `R(x) = D(x)ᵀD(x)`.
    pub fn dissipation_factor(mut self, d: MatrixMap) -> Self {
        self.dissipation_factor = Some(d);
        self
    }

    pub fn diffusion(mut self, sigma: MatrixMap) -> Self {
        self.diffusion = Some(sigma);
        self
    }

    pub fn input_map(mut self, g: MatrixMap) -> Self {
        self.input_map = Some(g);
        self
    }

    pub fn constant_input_map(self, g: DMatrix<f64>) -> Self {
        self.input_map(Arc::new(move |_| g.clone()))
    }

    pub fn provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn build(self) -> Result<CoefficientSet> {
        let (n, d, m) = (self.n, self.d, self.m);
        if n == 0 {
            return Err(Error::InvalidParameter("state dimension must be >= 1".into()));
        }
        let (hamiltonian, grad_h, hess_h) = self
            .hamiltonian
            .ok_or_else(|| Error::InvalidParameter("coefficient set needs a Hamiltonian".into()))?;
        let set = CoefficientSet {
            n,
            d,
            m,
            hamiltonian,
            grad_h,
            hess_h,
            interconnection: self
                .interconnection
                .unwrap_or_else(|| Arc::new(move |_| DMatrix::zeros(n, n))),
            dissipation_factor: self.dissipation_factor,
            diffusion: self
                .diffusion
                .unwrap_or_else(|| Arc::new(move |_| DMatrix::zeros(n, d))),
            input_map: self
                .input_map
                .unwrap_or_else(|| Arc::new(move |_| DMatrix::zeros(n, m))),
            provenance: self.provenance,
        };
        // Probe shapes once so later evaluations can trust them.
        let x = DVector::zeros(n);
        ensure_dim("grad_H length", n, (set.grad_h)(&x).len())?;
        let shape = |name: &str, mat: DMatrix<f64>, r: usize, c: usize| -> Result<()> {
            ensure_dim(&format!("{name} rows"), r, mat.nrows())?;
            ensure_dim(&format!("{name} cols"), c, mat.ncols())
        };
        shape("hess_H", (set.hess_h)(&x), n, n)?;
        shape("J", (set.interconnection)(&x), n, n)?;
        if let Some(df) = &set.dissipation_factor {
            ensure_dim("D cols", n, df(&x).ncols())?;
        }
        shape("sigma", (set.diffusion)(&x), n, d)?;
        shape("g", (set.input_map)(&x), n, m)?;
        Ok(set)
    }
}

impl CoefficientSet {
    pub fn builder(n: usize, d: usize, m: usize) -> CoefficientSetBuilder {
        CoefficientSetBuilder {
            n,
            d,
            m,
            hamiltonian: None,
            interconnection: None,
            dissipation_factor: None,
            diffusion: None,
            input_map: None,
            provenance: Provenance::Analytic,
        }
    }

    /// Copy with the Hamiltonian replaced; every other map is shared.
    pub fn with_hamiltonian(&self, h: ScalarMap, grad: VectorMap, hess: MatrixMap) -> Self {
        CoefficientSet {
            hamiltonian: h,
            grad_h: grad,
            hess_h: hess,
            ..self.clone()
        }
    }

    /// Copy with the interconnection replaced.
    pub fn with_interconnection(&self, j: MatrixMap) -> Self {
        CoefficientSet {
            interconnection: j,
            ..self.clone()
        }
    }

    pub fn with_provenance(&self, p: Provenance) -> Self {
        CoefficientSet {
            provenance: p,
            ..self.clone()
        }
    }

    /// Copy with the dissipation factor replaced.
    pub fn with_dissipation_factor(&self, d: Option<MatrixMap>) -> Self {
        CoefficientSet {
            dissipation_factor: d,
            ..self.clone()
        }
    }

    /// Copy with the diffusion replaced; the noise dimension follows the new map.
    pub fn with_diffusion(&self, d: usize, sigma: MatrixMap) -> Self {
        CoefficientSet {
            d,
            diffusion: sigma,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    fn check_x(&self, x: &DVector<f64>) -> Result<()> {
        ensure_dim("state", self.n, x.len())
    }

    pub fn h(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_x(x)?;
        Ok((self.hamiltonian)(x))
    }

    pub fn grad_h(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_x(x)?;
        Ok((self.grad_h)(x))
    }

    pub fn hess_h(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok((self.hess_h)(x))
    }

    pub fn j(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok((self.interconnection)(x))
    }

    pub fn r(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok(match &self.dissipation_factor {
            Some(d) => gram_from(&d(x)),
            None => DMatrix::zeros(self.n, self.n),
        })
    }

    pub fn has_dissipation(&self) -> bool {
        self.dissipation_factor.is_some()
    }

    pub fn sigma(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok((self.diffusion)(x))
    }

    pub fn g(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok((self.input_map)(x))
    }

    /// Largest `|J + Jᵀ|` entry and smallest eigenvalue of `R` at `x`.
    pub fn structure_residuals(&self, x: &DVector<f64>) -> Result<(f64, f64)> {
        let j = self.j(x)?;
        let skew = (&j + j.transpose()).amax();
        let r = self.r(x)?;
        Ok((skew, min_eigenvalue(&r)))
    }
}

/// `(J(x) − R(x)) ∇H(x) + g(x) u`.
pub fn drift(c: &CoefficientSet, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_dim("input", c.m, u.len())?;
    let grad = c.grad_h(x)?;
    let mut f = (c.j(x)? - c.r(x)?) * grad;
    if c.m > 0 {
        f += c.g(x)? * u;
    }
    Ok(f)
}

/// Port output `g(x)ᵀ ∇H(x)`.
pub fn output(c: &CoefficientSet, x: &DVector<f64>) -> Result<DVector<f64>> {
    let grad = c.grad_h(x)?;
    Ok(c.g(x)?.transpose() * grad)
}

/// Sup-norm gaps between two coefficient sets over a box grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientDistance {
    pub sup_j: f64,
    pub sup_r: f64,
    pub sup_sigma: f64,
    /// `sup|ΔH| + sup‖∇ΔH‖ + sup‖∇²ΔH‖`.
    pub c2_h: f64,
}

impl CoefficientDistance {
    pub fn total(&self) -> f64 {
        self.sup_j + self.sup_r + self.sup_sigma + self.c2_h
    }
}

pub fn coefficient_distance(a: &CoefficientSet, b: &CoefficientSet, bx: &CompactBox) -> Result<CoefficientDistance> {
    ensure_dim("coefficient_distance: state dims", a.n, b.n)?;
    ensure_dim("coefficient_distance: noise dims", a.d, b.d)?;
    ensure_dim("coefficient_distance: box dims", a.n, bx.dim())?;
    let mut out = CoefficientDistance {
        sup_j: 0.0,
        sup_r: 0.0,
        sup_sigma: 0.0,
        c2_h: 0.0,
    };
    let (mut sup_v, mut sup_g, mut sup_h) = (0.0f64, 0.0f64, 0.0f64);
    for x in bx.grid() {
        out.sup_j = out.sup_j.max(operator_norm(&(a.j(&x)? - b.j(&x)?)));
        out.sup_r = out.sup_r.max(operator_norm(&(a.r(&x)? - b.r(&x)?)));
        out.sup_sigma = out.sup_sigma.max(operator_norm(&(a.sigma(&x)? - b.sigma(&x)?)));
        sup_v = sup_v.max((a.h(&x)? - b.h(&x)?).abs());
        sup_g = sup_g.max((a.grad_h(&x)? - b.grad_h(&x)?).norm());
        sup_h = sup_h.max(operator_norm(&(a.hess_h(&x)? - b.hess_h(&x)?)));
    }
    out.c2_h = sup_v + sup_g + sup_h;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn quadratic_canonical() -> CoefficientSet {
        CoefficientSet::builder(2, 1, 1)
            .hamiltonian(
                Arc::new(|x| 0.5 * x.norm_squared()),
                Arc::new(|x| x.clone()),
                Arc::new(|_| DMatrix::identity(2, 2)),
            )
            .constant_interconnection(canonical_j(2).unwrap())
            .build()
            .unwrap()
    }

    #[test]
    fn skew_examples() {
        assert_eq!(skew_from(&DMatrix::zeros(2, 2)).unwrap(), DMatrix::zeros(2, 2));
        assert_eq!(skew_from(&DMatrix::identity(3, 3)).unwrap(), DMatrix::zeros(3, 3));
        assert_eq!(
            skew_from(&dmatrix![1.0, 2.0; 3.0, 4.0]).unwrap(),
            dmatrix![0.0, -1.0; 1.0, 0.0]
        );
        assert!(skew_from(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn gram_examples() {
        assert_eq!(gram_from(&DMatrix::zeros(2, 2)), DMatrix::zeros(2, 2));
        assert_eq!(gram_from(&DMatrix::identity(2, 2)), DMatrix::identity(2, 2));
        let r = gram_from(&dmatrix![1.0, 1.0]);
        assert_eq!(r, dmatrix![1.0, 1.0; 1.0, 1.0]);
        let mut eig: Vec<f64> = r.symmetric_eigenvalues().iter().cloned().collect();
        eig.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(eig[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn drift_examples() {
        let zero = CoefficientSet::builder(2, 1, 1)
            .hamiltonian(Arc::new(|_| 0.0), Arc::new(|_| DVector::zeros(2)), Arc::new(|_| DMatrix::zeros(2, 2)))
            .constant_interconnection(canonical_j(2).unwrap())
            .build()
            .unwrap();
        assert_eq!(drift(&zero, &dvector![0.3, -1.0], &dvector![0.0]).unwrap(), dvector![0.0, 0.0]);

        let c = quadratic_canonical();
        assert_eq!(drift(&c, &dvector![1.0, 0.0], &dvector![0.0]).unwrap(), dvector![0.0, -1.0]);
        assert!(drift(&c, &dvector![1.0, 0.0, 0.0], &dvector![0.0]).is_err());
        assert!(drift(&c, &dvector![1.0, 0.0], &dvector![0.0, 1.0]).is_err());
    }

    #[test]
    fn output_examples() {
        let c = quadratic_canonical();
        assert_eq!(output(&c, &dvector![2.0, 3.0]).unwrap(), dvector![0.0]);

        let ms = CoefficientSet::builder(2, 1, 1)
            .hamiltonian(
                Arc::new(|x| 0.5 * x[0] * x[0] + 0.5 * x[1] * x[1]),
                Arc::new(|x| dvector![x[0], x[1]]),
                Arc::new(|_| DMatrix::identity(2, 2)),
            )
            .constant_input_map(dmatrix![0.0; 1.0])
            .build()
            .unwrap();
        assert_eq!(output(&ms, &dvector![2.0, 3.0]).unwrap(), dvector![3.0]);

        let selector = CoefficientSet::builder(2, 1, 2)
            .hamiltonian(
                Arc::new(|x| x[0] * x[1]),
                Arc::new(|x| dvector![x[1], x[0]]),
                Arc::new(|_| dmatrix![0.0, 1.0; 1.0, 0.0]),
            )
            .constant_input_map(DMatrix::identity(2, 2))
            .build()
            .unwrap();
        let x = dvector![2.0, -5.0];
        assert_eq!(output(&selector, &x).unwrap(), selector.grad_h(&x).unwrap());
    }

    #[test]
    fn distance_of_identical_sets_is_zero() {
        let c = quadratic_canonical();
        let d = coefficient_distance(&c, &c, &CompactBox::symmetric(2, 1.0, 11).unwrap()).unwrap();
        assert_eq!(d.total(), 0.0);
    }

    #[test]
    fn constant_shift_only_hits_value_term() {
        let c = quadratic_canonical();
        let shifted = c.with_hamiltonian(
            Arc::new(|x| 0.5 * x.norm_squared() - 0.25),
            Arc::new(|x| x.clone()),
            Arc::new(|_| DMatrix::identity(2, 2)),
        );
        let d = coefficient_distance(&c, &shifted, &CompactBox::symmetric(2, 1.0, 11).unwrap()).unwrap();
        assert_abs_diff_eq!(d.c2_h, 0.25, epsilon = 1e-15);
        assert_eq!((d.sup_j, d.sup_r, d.sup_sigma), (0.0, 0.0, 0.0));
    }

    #[test]
    fn linear_tilt_hits_value_and_gradient_terms() {
        let eps = 1e-2;
        let c = quadratic_canonical();
        let tilted = c.with_hamiltonian(
            Arc::new(move |x| 0.5 * x.norm_squared() + eps * x[0]),
            Arc::new(move |x| dvector![x[0] + eps, x[1]]),
            Arc::new(|_| DMatrix::identity(2, 2)),
        );
        let d = coefficient_distance(&c, &tilted, &CompactBox::symmetric(2, 1.0, 21).unwrap()).unwrap();
        assert_abs_diff_eq!(d.c2_h, 2.0 * eps, epsilon = 1e-15);
    }

    #[test]
    fn box_grid_and_containment() {
        let b = CompactBox::symmetric(2, 2.0, 41).unwrap();
        let grid = b.grid();
        assert_eq!(grid.len(), 41 * 41);
        assert_eq!(grid[0], dvector![-2.0, -2.0]);
        assert_eq!(grid[grid.len() - 1], dvector![2.0, 2.0]);
        assert!(grid.iter().all(|p| b.contains(p)));
        assert!(b.contains(&dvector![2.0, -2.0]));
        assert!(!b.contains(&dvector![2.0 + 1e-12, 0.0]));
        assert!(CompactBox::new(dvector![0.0], dvector![0.0], 5).is_err());
    }

    #[test]
    fn energy_conservation_without_dissipation() {
        let j = dmatrix![0.0, 1.3; -1.3, 0.0];
        let c = CoefficientSet::builder(2, 1, 0)
            .hamiltonian(
                Arc::new(|x| x[0].powi(4) / 4.0 + x[0] * x[1] + x[1].powi(2)),
                Arc::new(|x| dvector![x[0].powi(3) + x[1], x[0] + 2.0 * x[1]]),
                Arc::new(|x| dmatrix![3.0 * x[0] * x[0], 1.0; 1.0, 2.0]),
            )
            .constant_interconnection(j)
            .build()
            .unwrap();
        for x in CompactBox::symmetric(2, 3.0, 13).unwrap().grid() {
            let f = drift(&c, &x, &DVector::zeros(0)).unwrap();
            assert!(c.grad_h(&x).unwrap().dot(&f).abs() < 1e-10);
        }
    }

    proptest! {
        #[test]
        fn skew_from_is_exactly_antisymmetric(entries in proptest::collection::vec(-1e3f64..1e3, 9)) {
            let a = DMatrix::from_row_slice(3, 3, &entries);
            let s = skew_from(&a).unwrap();
            prop_assert_eq!(&s + s.transpose(), DMatrix::zeros(3, 3));
        }

        #[test]
        fn gram_from_is_psd(entries in proptest::collection::vec(-10f64..10.0, 6)) {
            let d = DMatrix::from_row_slice(3, 2, &entries);
            prop_assert!(min_eigenvalue(&gram_from(&d)) >= -1e-10);
        }

        #[test]
        fn drift_is_linear_in_input(u1 in -5f64..5.0, u2 in -5f64..5.0, s in -3f64..3.0) {
            let c = CoefficientSet::builder(2, 1, 1)
                .hamiltonian(
                    Arc::new(|x| 0.5 * x.norm_squared()),
                    Arc::new(|x| x.clone()),
                    Arc::new(|_| DMatrix::identity(2, 2)),
                )
                .constant_interconnection(canonical_j(2).unwrap())
                .input_map(Arc::new(|x| dmatrix![x[0]; 1.0]))
                .build()
                .unwrap();
            let x = dvector![0.4, -0.9];
            let f0 = drift(&c, &x, &dvector![0.0]).unwrap();
            let f1 = drift(&c, &x, &dvector![u1]).unwrap();
            let f2 = drift(&c, &x, &dvector![u2]).unwrap();
            let f12 = drift(&c, &x, &dvector![u1 + s * u2]).unwrap();
            let lin = &f1 + (&f2 - &f0) * s;
            prop_assert!((f12 - lin).amax() < 1e-12);
        }
    }
}
