use nalgebra::{DMatrix, DVector};

use super::mlp::{Architecture, MlpParams, Trace};
use crate::error::{Error, Result};

/// A network `ℝⁿ → ℝ` with exact first and second input derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    params: MlpParams,
}

impl ScalarField {
    pub fn new(params: MlpParams) -> Result<Self> {
        if params.arch().output_dim != 1 {
            return Err(Error::InvalidParameter(format!(
                "scalar field needs output_dim 1, got {}",
                params.arch().output_dim
            )));
        }
        Ok(ScalarField { params })
    }

    pub fn glorot(input_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let arch = Architecture::new(input_dim, hidden.to_vec(), 1)?;
        Ok(ScalarField {
            params: MlpParams::glorot(&arch, seed),
        })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.params
    }

    pub fn into_params(self) -> MlpParams {
        self.params
    }

    pub fn input_dim(&self) -> usize {
        self.params.arch().input_dim
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.params.forward(x)?[0])
    }

    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let trace = self.params.trace(x)?;
        self.params.input_vjp(&trace, &[1.0])
    }

    /// Value and input gradient from one recorded pass; the trace is returned
    /// so parameter gradients can reuse it.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(Trace, Vec<f64>)> {
        let trace = self.params.trace(x)?;
        let grad = self.params.input_vjp(&trace, &[1.0])?;
        Ok((trace, grad))
    }

    /// Symmetrized input Hessian built column by column from Hessian-vector products.
    pub fn input_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.input_dim();
        let trace = self.params.trace(x)?;
        let mut hess = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let tangent = self.params.tangent(&trace, &e)?;
            let col = self.params.input_hvp(&trace, &tangent, &[1.0])?;
            for i in 0..n {
                hess[(i, j)] = col[i];
            }
        }
        let sym = (&hess + hess.transpose()) * 0.5;
        Ok(sym)
    }

    /// Accumulates `∂/∂θ [value_adj · H(x) + grad_adjᵀ ∇H(x)]` into `grad`.
    pub fn accumulate_param_grad(
        &self,
        trace: &Trace,
        value_adj: f64,
        grad_adj: &[f64],
        grad: &mut MlpParams,
    ) -> Result<()> {
        let tangent = self.params.tangent(trace, grad_adj)?;
        self.params
            .second_order_param_vjp(trace, &tangent, &[value_adj], &[1.0], grad)
    }
}

/// A network whose output is reshaped row-major into a `rows × cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    params: MlpParams,
    rows: usize,
    cols: usize,
}

impl MatrixField {
    pub fn new(params: MlpParams, rows: usize, cols: usize) -> Result<Self> {
        if params.arch().output_dim != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix field {rows}x{cols} needs output_dim {}, got {}",
                rows * cols,
                params.arch().output_dim
            )));
        }
        Ok(MatrixField { params, rows, cols })
    }

    pub fn glorot(input_dim: usize, hidden: &[usize], rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let arch = Architecture::new(input_dim, hidden.to_vec(), rows * cols)?;
        Self::new(MlpParams::glorot(&arch, seed), rows, cols)
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.params
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn eval(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let out = self.params.forward(x)?;
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &out))
    }

    /// Evaluates and keeps the trace for a later [`MatrixField::accumulate_param_grad`].
    pub fn eval_traced(&self, x: &[f64]) -> Result<(Trace, DMatrix<f64>)> {
        let trace = self.params.trace(x)?;
        let m = DMatrix::from_row_slice(self.rows, self.cols, trace.output());
        Ok((trace, m))
    }

    /// Accumulates `∂/∂θ ⟨adj, M(x)⟩_F` into `grad`.
    pub fn accumulate_param_grad(&self, trace: &Trace, adj: &DMatrix<f64>, grad: &mut MlpParams) -> Result<()> {
        let flat: Vec<f64> = (0..self.rows)
            .flat_map(|i| (0..self.cols).map(move |j| (i, j)))
            .map(|(i, j)| adj[(i, j)])
            .collect();
        self.params.param_vjp(trace, &flat, grad)
    }
}

/// A network `ℝⁿ → ℝⁿ`, used for the unstructured baseline vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    params: MlpParams,
}

impl VectorField {
    pub fn new(params: MlpParams) -> Self {
        VectorField { params }
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut MlpParams {
        &mut self.params
    }

    pub fn eval(&self, x: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.params.forward(x)?))
    }
}
