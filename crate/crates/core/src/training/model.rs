use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::diffnet::{MatrixField, MlpParams, ScalarField, Trace, VectorField};
use crate::error::{ensure_dim, Error, Result};
use crate::structure::{gram_from, skew_from, CoefficientSet, Provenance};

macro_rules! source_enum {
    ($(#[$doc:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidParameter(format!(
                        concat!("unknown ", stringify!($name), " `{}`"),
                        other
                    ))),
                }
            }
        }
    };
}

source_enum!(
    /// Where the Hamiltonian comes from.
    HSource { Learned => "learned", Analytic => "analytic" }
);
source_enum!(
    /// `J` either analytic or `Â − Âᵀ` from a network.
    JSource { Analytic => "analytic", Learned => "learned" }
);
source_enum!(
    /// `R` absent, analytic, or `D̂ᵀD̂` from a network.
    RSource { Zero => "zero", Analytic => "analytic", Learned => "learned" }
);
source_enum!(
    /// Diffusion either analytic or a learned `n × sigma_cols` network.
    SigmaSource { Analytic => "analytic", Learned => "learned" }
);

/// Which coefficients are learned, and the network shapes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub h: HSource,
    pub j: JSource,
    pub r: RSource,
    pub sigma: SigmaSource,
    /// Columns of the learned diffusion; the NLL covariance is `σ̂σ̂ᵀΔt`.
    pub sigma_cols: usize,
    pub hidden: Vec<usize>,
}

impl ModelSpec {
    /// Learned `H`, analytic `J`, no dissipation, analytic diffusion.
    pub fn conservative(n: usize) -> Self {
        ModelSpec {
            h: HSource::Learned,
            j: JSource::Analytic,
            r: RSource::Zero,
            sigma: SigmaSource::Analytic,
            sigma_cols: n,
            hidden: vec![64, 64],
        }
    }

    /// Fixed storage function, analytic `J`, learned dissipation.
    pub fn dissipative(n: usize) -> Self {
        ModelSpec {
            h: HSource::Analytic,
            j: JSource::Analytic,
            r: RSource::Learned,
            ..Self::conservative(n)
        }
    }

    pub fn with_learned_sigma(mut self) -> Self {
        self.sigma = SigmaSource::Learned;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldId {
    H,
    A,
    D,
    Sigma,
}

impl FieldId {
    pub fn name(self) -> &'static str {
        match self {
            FieldId::H => "h",
            FieldId::A => "a",
            FieldId::D => "d",
            FieldId::Sigma => "sigma",
        }
    }
}

/// A stochastic port-Hamiltonian model whose coefficients are partly
/// analytic (taken from a template) and partly neural.
///
/// Learned `J` is always `Â − Âᵀ` and learned `R` is always `D̂ᵀD̂`, so
/// skew-symmetry and positive semidefiniteness hold for every parameter value.
#[derive(Clone)]
pub struct SphnnModel {
    spec: ModelSpec,
    template: CoefficientSet,
    h: Option<ScalarField>,
    a: Option<MatrixField>,
    d: Option<MatrixField>,
    sigma: Option<MatrixField>,
}

impl fmt::Debug for SphnnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphnnModel").field("spec", &self.spec).finish()
    }
}

/// Everything one state contributes to a loss, kept for the backward pass.
pub(crate) struct Eval {
    pub h_trace: Option<Trace>,
    pub grad_h: DVector<f64>,
    pub a_trace: Option<Trace>,
    pub j: DMatrix<f64>,
    pub d: Option<(Trace, DMatrix<f64>)>,
    pub r: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl Eval {
    pub fn drift(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut f = (&self.j - &self.r) * &self.grad_h;
        if !u.is_empty() {
            f += &self.g * u;
        }
        f
    }
}

impl SphnnModel {
    /// Glorot-initialized networks for every learned coefficient; field `i`
    /// (in `H, A, D, σ` order) uses seed `seed + i`.
    pub fn new(spec: ModelSpec, template: CoefficientSet, seed: u64) -> Result<Self> {
        let n = template.n();
        if spec.sigma_cols == 0 {
            return Err(Error::InvalidParameter("sigma_cols must be >= 1".into()));
        }
        let hidden = &spec.hidden;
        let h = match spec.h {
            HSource::Learned => Some(ScalarField::glorot(n, hidden, seed)?),
            HSource::Analytic => None,
        };
        let a = match spec.j {
            JSource::Learned => Some(MatrixField::glorot(n, hidden, n, n, seed.wrapping_add(1))?),
            JSource::Analytic => None,
        };
        let d = match spec.r {
            RSource::Learned => Some(MatrixField::glorot(n, hidden, n, n, seed.wrapping_add(2))?),
            _ => None,
        };
        let sigma = match spec.sigma {
            SigmaSource::Learned => Some(MatrixField::glorot(n, hidden, n, spec.sigma_cols, seed.wrapping_add(3))?),
            SigmaSource::Analytic => None,
        };
        Ok(SphnnModel {
            spec,
            template,
            h,
            a,
            d,
            sigma,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn template(&self) -> &CoefficientSet {
        &self.template
    }

    pub fn n(&self) -> usize {
        self.template.n()
    }

    pub fn m(&self) -> usize {
        self.template.m()
    }

    pub fn field_ids(&self) -> Vec<FieldId> {
        let mut ids = Vec::new();
        if self.h.is_some() {
            ids.push(FieldId::H);
        }
        if self.a.is_some() {
            ids.push(FieldId::A);
        }
        if self.d.is_some() {
            ids.push(FieldId::D);
        }
        if self.sigma.is_some() {
            ids.push(FieldId::Sigma);
        }
        ids
    }

    pub fn field_index(&self, id: FieldId) -> Option<usize> {
        self.field_ids().iter().position(|&f| f == id)
    }

    pub fn params(&self, id: FieldId) -> Option<&MlpParams> {
        match id {
            FieldId::H => self.h.as_ref().map(ScalarField::params),
            FieldId::A => self.a.as_ref().map(MatrixField::params),
            FieldId::D => self.d.as_ref().map(MatrixField::params),
            FieldId::Sigma => self.sigma.as_ref().map(MatrixField::params),
        }
    }

    pub fn params_mut(&mut self, id: FieldId) -> Option<&mut MlpParams> {
        match id {
            FieldId::H => self.h.as_mut().map(ScalarField::params_mut),
            FieldId::A => self.a.as_mut().map(MatrixField::params_mut),
            FieldId::D => self.d.as_mut().map(MatrixField::params_mut),
            FieldId::Sigma => self.sigma.as_mut().map(MatrixField::params_mut),
        }
    }

    /// Parameters of every learned field, in [`SphnnModel::field_ids`] order.
    pub fn all_params(&self) -> Vec<&MlpParams> {
        self.field_ids().into_iter().filter_map(|id| self.params(id)).collect()
    }

    /// Replaces one field's parameters; the architecture must match.
    pub fn set_params(&mut self, id: FieldId, params: MlpParams) -> Result<()> {
        let slot = self
            .params_mut(id)
            .ok_or_else(|| Error::InvalidParameter(format!("model has no learned `{}` field", id.name())))?;
        if !slot.same_shape(&params) {
            return Err(Error::InvalidParameter(format!("architecture mismatch for field `{}`", id.name())));
        }
        *slot = params;
        Ok(())
    }

    pub fn zero_grads(&self) -> Vec<MlpParams> {
        self.all_params().into_iter().map(MlpParams::zeros_like).collect()
    }

    pub(crate) fn eval(&self, x: &DVector<f64>) -> Result<Eval> {
        ensure_dim("model state", self.n(), x.len())?;
        let xs = x.as_slice();
        let (h_trace, grad_h) = match &self.h {
            Some(h) => {
                let (trace, grad) = h.value_and_gradient(xs)?;
                (Some(trace), DVector::from_vec(grad))
            }
            None => (None, self.template.grad_h(x)?),
        };
        let (a_trace, j) = match &self.a {
            Some(a) => {
                let (trace, am) = a.eval_traced(xs)?;
                (Some(trace), skew_from(&am)?)
            }
            None => (None, self.template.j(x)?),
        };
        let (d, r) = match (&self.d, self.spec.r) {
            (Some(df), _) => {
                let (trace, dm) = df.eval_traced(xs)?;
                let r = gram_from(&dm);
                (Some((trace, dm)), r)
            }
            (None, RSource::Analytic) => (None, self.template.r(x)?),
            (None, _) => (None, DMatrix::zeros(self.n(), self.n())),
        };
        let g = self.template.g(x)?;
        Ok(Eval {
            h_trace,
            grad_h,
            a_trace,
            j,
            d,
            r,
            g,
        })
    }

    /// `(J − R)∇H + g u` with the model's coefficients.
    pub fn drift(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        ensure_dim("model input", self.m(), u.len())?;
        Ok(self.eval(x)?.drift(u))
    }

    pub fn diffusion(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match &self.sigma {
            Some(s) => s.eval(x.as_slice()),
            None => self.template.sigma(x),
        }
    }

    pub(crate) fn sigma_traced(&self, x: &DVector<f64>) -> Result<(Option<Trace>, DMatrix<f64>)> {
        match &self.sigma {
            Some(s) => {
                let (trace, m) = s.eval_traced(x.as_slice())?;
                Ok((Some(trace), m))
            }
            None => Ok((None, self.template.sigma(x)?)),
        }
    }

    /// Adds `∂/∂θ` of a loss whose sensitivity to the drift at this state is
    /// `c_f` into `grads`.
    pub(crate) fn backprop_drift(&self, ev: &Eval, c_f: &DVector<f64>, grads: &mut [MlpParams]) -> Result<()> {
        let m = &ev.j - &ev.r;
        if let (Some(h), Some(trace)) = (&self.h, &ev.h_trace) {
            let grad_adj = m.transpose() * c_f;
            let idx = self.field_index(FieldId::H).expect("h field present");
            h.accumulate_param_grad(trace, 0.0, grad_adj.as_slice(), &mut grads[idx])?;
        }
        if self.a.is_none() && self.d.is_none() {
            return Ok(());
        }
        // ∂L/∂(J − R) = c_f ∇Hᵀ
        let gm = c_f * ev.grad_h.transpose();
        if let (Some(a), Some(trace)) = (&self.a, &ev.a_trace) {
            let adj = &gm - gm.transpose();
            let idx = self.field_index(FieldId::A).expect("a field present");
            a.accumulate_param_grad(trace, &adj, &mut grads[idx])?;
        }
        if let (Some(df), Some((trace, dm))) = (&self.d, &ev.d) {
            // R = DᵀD enters with a minus sign: ∂L/∂D = −D(G + Gᵀ).
            let adj = -(dm * (&gm + gm.transpose()));
            let idx = self.field_index(FieldId::D).expect("d field present");
            df.accumulate_param_grad(trace, &adj, &mut grads[idx])?;
        }
        Ok(())
    }

    pub(crate) fn backprop_sigma(&self, trace: &Trace, adj: &DMatrix<f64>, grads: &mut [MlpParams]) -> Result<()> {
        if let Some(s) = &self.sigma {
            let idx = self.field_index(FieldId::Sigma).expect("sigma field present");
            s.accumulate_param_grad(trace, adj, &mut grads[idx])?;
        }
        Ok(())
    }

    /// The model as a coefficient bundle; analytic parts are shared with the template.
    pub fn coefficient_set(&self) -> CoefficientSet {
        let mut c = self.template.with_provenance(Provenance::Learned);
        if let Some(h) = &self.h {
            let (hv, hg, hh) = (Arc::new(h.clone()), Arc::new(h.clone()), Arc::new(h.clone()));
            c = c.with_hamiltonian(
                Arc::new(move |x| hv.value(x.as_slice()).expect("state dimension checked by caller")),
                Arc::new(move |x| DVector::from_vec(hg.input_gradient(x.as_slice()).expect("state dimension checked by caller"))),
                Arc::new(move |x| hh.input_hessian(x.as_slice()).expect("state dimension checked by caller")),
            );
        }
        if let Some(a) = &self.a {
            let a = Arc::new(a.clone());
            c = c.with_interconnection(Arc::new(move |x| {
                let am = a.eval(x.as_slice()).expect("state dimension checked by caller");
                &am - am.transpose()
            }));
        }
        match (&self.d, self.spec.r) {
            (Some(df), _) => {
                let df = Arc::new(df.clone());
                c = c.with_dissipation_factor(Some(Arc::new(move |x| {
                    df.eval(x.as_slice()).expect("state dimension checked by caller")
                })));
            }
            (None, RSource::Zero) => c = c.with_dissipation_factor(None),
            (None, _) => {}
        }
        if let Some(s) = &self.sigma {
            let cols = s.cols();
            let s = Arc::new(s.clone());
            c = c.with_diffusion(
                cols,
                Arc::new(move |x| s.eval(x.as_slice()).expect("state dimension checked by caller")),
            );
        }
        c
    }
}

/// Unstructured vector-field regression `ẋ ≈ f_θ(x)`; inputs are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    field: VectorField,
}

impl BaselineModel {
    pub fn new(n: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let arch = crate::diffnet::Architecture::new(n, hidden.to_vec(), n)?;
        Ok(BaselineModel {
            field: VectorField::new(MlpParams::glorot(&arch, seed)),
        })
    }

    pub fn from_params(params: MlpParams) -> Result<Self> {
        let arch = params.arch();
        if arch.input_dim != arch.output_dim {
            return Err(Error::InvalidParameter(format!(
                "baseline needs input_dim == output_dim, got {} and {}",
                arch.input_dim, arch.output_dim
            )));
        }
        Ok(BaselineModel {
            field: VectorField::new(params),
        })
    }

    pub fn n(&self) -> usize {
        self.field.params().arch().input_dim
    }

    pub fn params(&self) -> &MlpParams {
        self.field.params()
    }

    pub fn params_mut(&mut self) -> &mut MlpParams {
        self.field.params_mut()
    }

    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.field.eval(x.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{mass_spring_coefficients, van_der_pol_coefficients, NoiseAmplitude};
    use crate::structure::{drift, min_eigenvalue};
    use nalgebra::dvector;

    #[test]
    fn analytic_model_reproduces_template_drift() {
        let c = mass_spring_coefficients(1.0, 1.0).unwrap();
        let spec = ModelSpec {
            h: HSource::Analytic,
            ..ModelSpec::conservative(2)
        };
        let model = SphnnModel::new(spec, c.clone(), 0).unwrap();
        let x = dvector![0.4, -1.2];
        let u = dvector![0.3];
        assert_eq!(model.drift(&x, &u).unwrap(), drift(&c, &x, &u).unwrap());
        assert!(model.field_ids().is_empty());
    }

    #[test]
    fn learned_coefficients_agree_with_direct_evaluation() {
        let c = van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1)).unwrap();
        let spec = ModelSpec {
            h: HSource::Learned,
            j: JSource::Learned,
            r: RSource::Learned,
            sigma: SigmaSource::Learned,
            sigma_cols: 2,
            hidden: vec![8, 8],
        };
        let model = SphnnModel::new(spec, c, 5).unwrap();
        assert_eq!(model.field_ids(), vec![FieldId::H, FieldId::A, FieldId::D, FieldId::Sigma]);
        let set = model.coefficient_set();
        assert_eq!(set.provenance(), Provenance::Learned);
        let x = dvector![0.3, -0.8];
        let u = dvector![0.5];
        let direct = model.drift(&x, &u).unwrap();
        let via_set = drift(&set, &x, &u).unwrap();
        assert!((direct - via_set).amax() < 1e-14);
        assert_eq!(set.sigma(&x).unwrap(), model.diffusion(&x).unwrap());
        let (skew, min_eig) = set.structure_residuals(&x).unwrap();
        assert!(skew <= 1e-12);
        assert!(min_eig >= -1e-10);
        assert!(min_eigenvalue(&set.r(&x).unwrap()) >= -1e-10);
    }

    #[test]
    fn zero_r_spec_drops_template_dissipation() {
        let c = van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1)).unwrap();
        let model = SphnnModel::new(ModelSpec::conservative(2), c, 0).unwrap();
        let set = model.coefficient_set();
        assert!(!set.has_dissipation());
    }

    #[test]
    fn set_params_checks_shape() {
        let c = mass_spring_coefficients(1.0, 1.0).unwrap();
        let mut model = SphnnModel::new(ModelSpec::conservative(2), c, 0).unwrap();
        let other = ScalarField::glorot(2, &[3], 0).unwrap();
        assert!(model.set_params(FieldId::H, other.params().clone()).is_err());
        assert!(model.set_params(FieldId::A, other.params().clone()).is_err());
        let fresh = ScalarField::glorot(2, &[64, 64], 9).unwrap();
        model.set_params(FieldId::H, fresh.params().clone()).unwrap();
        assert_eq!(model.params(FieldId::H).unwrap(), fresh.params());
    }

    #[test]
    fn source_names_round_trip() {
        for s in [RSource::Zero, RSource::Analytic, RSource::Learned] {
            assert_eq!(s.as_str().parse::<RSource>().unwrap(), s);
        }
        assert!("sometimes".parse::<HSource>().is_err());
    }
}
