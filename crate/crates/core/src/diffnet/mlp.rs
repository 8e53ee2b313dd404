use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure_dim, Error, Result};

/// Hidden-layer nonlinearity. Output layers are always affine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// First derivative expressed through the activation value `a = φ(z)`.
    #[inline]
    fn d1(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }

    /// Second derivative expressed through the activation value `a = φ(z)`.
    #[inline]
    fn d2(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => -2.0 * a * (1.0 - a * a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize) -> Result<Self> {
        let arch = Architecture {
            input_dim,
            hidden_widths,
            output_dim,
            activation: Activation::Tanh,
        };
        arch.validate()?;
        Ok(arch)
    }

    /// Two tanh layers of 64 units.
    pub fn default_for(input_dim: usize, output_dim: usize) -> Self {
        Architecture {
            input_dim,
            hidden_widths: vec![64, 64],
            output_dim,
            activation: Activation::Tanh,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.contains(&0) {
            return Err(Error::InvalidParameter(format!(
                "architecture dims must be >= 1 (input {}, hidden {:?}, output {})",
                self.input_dim, self.hidden_widths, self.output_dim
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` of every affine layer, input to output.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_widths.len() + 1);
        let mut fan_in = self.input_dim;
        for &w in &self.hidden_widths {
            shapes.push((w, fan_in));
            fan_in = w;
        }
        shapes.push((self.output_dim, fan_in));
        shapes
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().iter().map(|(r, c)| r * c + r).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerSpan {
    rows: usize,
    cols: usize,
    /// Start of the row-major weight block; the bias follows immediately.
    offset: usize,
}

impl LayerSpan {
    fn weights(self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.rows * self.cols
    }

    fn bias(self) -> std::ops::Range<usize> {
        let start = self.offset + self.rows * self.cols;
        start..start + self.rows
    }
}

/// Weights and biases of a multilayer perceptron, stored as one flat buffer:
/// for each layer the row-major weight matrix followed by its bias vector.
///
/// The same type doubles as the container for parameter gradients and
/// optimizer moments, so shapes always line up.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: Architecture,
    spans: Vec<LayerSpan>,
    data: Vec<f64>,
}

/// Intermediate activations of one forward pass, kept for the backward passes.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `acts[0]` is the input, `acts[i]` the output of hidden layer `i`.
    acts: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

/// Forward-mode tangents along one input direction.
#[derive(Debug, Clone)]
pub struct Tangent {
    /// `dacts[0]` is the direction itself.
    dacts: Vec<Vec<f64>>,
    /// Pre-activation tangents of each hidden layer.
    dpre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl Tangent {
    /// Directional derivative of the network output.
    pub fn output(&self) -> &[f64] {
        &self.output
    }
}

fn spans_for(arch: &Architecture) -> Vec<LayerSpan> {
    let mut offset = 0;
    arch.layer_shapes()
        .into_iter()
        .map(|(rows, cols)| {
            let span = LayerSpan { rows, cols, offset };
            offset += rows * cols + rows;
            span
        })
        .collect()
}

#[inline]
fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate().take(rows) {
        let row = &w[i * cols..(i + 1) * cols];
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

#[inline]
fn matvec_t(w: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for (i, &yi) in y.iter().enumerate().take(rows) {
        if yi == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += wij * yi;
        }
    }
}

#[inline]
fn outer_acc(g: &mut [f64], cols: usize, u: &[f64], v: &[f64]) {
    for (i, &ui) in u.iter().enumerate() {
        if ui == 0.0 {
            continue;
        }
        let row = &mut g[i * cols..(i + 1) * cols];
        for (gij, &vj) in row.iter_mut().zip(v) {
            *gij += ui * vj;
        }
    }
}

impl MlpParams {
    pub fn zeros(arch: &Architecture) -> Self {
        let spans = spans_for(arch);
        MlpParams {
            arch: arch.clone(),
            spans,
            data: vec![0.0; arch.num_params()],
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(arch: &Architecture, seed: u64) -> Self {
        let mut params = Self::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for span in params.spans.clone() {
            let limit = (6.0 / (span.rows + span.cols) as f64).sqrt();
            for w in &mut params.data[span.weights()] {
                *w = rng.random_range(-limit..limit);
            }
        }
        params
    }

    pub fn from_flat(arch: &Architecture, data: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        ensure_dim("MlpParams::from_flat", arch.num_params(), data.len())?;
        let params = MlpParams {
            arch: arch.clone(),
            spans: spans_for(arch),
            data,
        };
        params.check_finite("parameters")?;
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.arch)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn num_layers(&self) -> usize {
        self.spans.len()
    }

    /// Row-major weights of layer `layer`.
    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.data[self.spans[layer].weights()]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let range = self.spans[layer].weights();
        &mut self.data[range]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.data[self.spans[layer].bias()]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let range = self.spans[layer].bias();
        &mut self.data[range]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) -> Result<()> {
        ensure_dim("MlpParams::add_scaled", self.len(), other.len())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
        Ok(())
    }

    /// Errors naming the first layer that holds a NaN or infinity.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        for (l, span) in self.spans.iter().enumerate() {
            let block = &self.data[span.offset..span.offset + span.rows * span.cols + span.rows];
            if block.iter().any(|v| !v.is_finite()) {
                return Err(Error::non_finite(format!("{what}, layer {l}")));
            }
        }
        Ok(())
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.arch == other.arch
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(x)?.output)
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        ensure_dim("network input", self.arch.input_dim, x.len())?;
        let act = self.arch.activation;
        let last = self.spans.len() - 1;
        let mut acts = Vec::with_capacity(self.spans.len());
        acts.push(x.to_vec());
        for span in &self.spans[..last] {
            let mut z = vec![0.0; span.rows];
            matvec(&self.data[span.weights()], span.rows, span.cols, acts.last().unwrap(), &mut z);
            for (zi, bi) in z.iter_mut().zip(&self.data[span.bias()]) {
                *zi = act.apply(*zi + bi);
            }
            acts.push(z);
        }
        let span = self.spans[last];
        let mut output = vec![0.0; span.rows];
        matvec(&self.data[span.weights()], span.rows, span.cols, acts.last().unwrap(), &mut output);
        for (o, b) in output.iter_mut().zip(&self.data[span.bias()]) {
            *o += b;
        }
        Ok(Trace { acts, output })
    }

    /// Propagates an input direction forward through a recorded pass.
    pub fn tangent(&self, trace: &Trace, direction: &[f64]) -> Result<Tangent> {
        ensure_dim("tangent direction", self.arch.input_dim, direction.len())?;
        let act = self.arch.activation;
        let last = self.spans.len() - 1;
        let mut dacts = Vec::with_capacity(self.spans.len());
        let mut dpre = Vec::with_capacity(last);
        dacts.push(direction.to_vec());
        for (i, span) in self.spans[..last].iter().enumerate() {
            let mut dz = vec![0.0; span.rows];
            matvec(&self.data[span.weights()], span.rows, span.cols, &dacts[i], &mut dz);
            let da = dz
                .iter()
                .zip(&trace.acts[i + 1])
                .map(|(d, &a)| act.d1(a) * d)
                .collect();
            dpre.push(dz);
            dacts.push(da);
        }
        let span = self.spans[last];
        let mut output = vec![0.0; span.rows];
        matvec(&self.data[span.weights()], span.rows, span.cols, &dacts[last], &mut output);
        Ok(Tangent {
            dacts,
            dpre,
            output,
        })
    }

    /// Gradient of `out_adjᵀ y(x)` with respect to the input `x`.
    pub fn input_vjp(&self, trace: &Trace, out_adj: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("output adjoint", self.arch.output_dim, out_adj.len())?;
        let act = self.arch.activation;
        let last = self.spans.len() - 1;
        let span = self.spans[last];
        let mut g = vec![0.0; span.cols];
        matvec_t(&self.data[span.weights()], span.rows, span.cols, out_adj, &mut g);
        for i in (0..last).rev() {
            let span = self.spans[i];
            let delta: Vec<f64> = g
                .iter()
                .zip(&trace.acts[i + 1])
                .map(|(gi, &a)| gi * act.d1(a))
                .collect();
            g = vec![0.0; span.cols];
            matvec_t(&self.data[span.weights()], span.rows, span.cols, &delta, &mut g);
        }
        Ok(g)
    }

    /// Directional derivative of `∂(out_adjᵀ y)/∂x` along the tangent's direction,
    /// i.e. a Hessian-vector product of the weighted output.
    pub fn input_hvp(&self, trace: &Trace, tangent: &Tangent, out_adj: &[f64]) -> Result<Vec<f64>> {
        ensure_dim("output adjoint", self.arch.output_dim, out_adj.len())?;
        let act = self.arch.activation;
        let last = self.spans.len() - 1;
        let span = self.spans[last];
        let mut g = vec![0.0; span.cols];
        matvec_t(&self.data[span.weights()], span.rows, span.cols, out_adj, &mut g);
        let mut dg = vec![0.0; span.cols];
        for i in (0..last).rev() {
            let span = self.spans[i];
            let mut delta = vec![0.0; span.rows];
            let mut ddelta = vec![0.0; span.rows];
            for j in 0..span.rows {
                let a = trace.acts[i + 1][j];
                delta[j] = g[j] * act.d1(a);
                ddelta[j] = dg[j] * act.d1(a) + g[j] * act.d2(a) * tangent.dpre[i][j];
            }
            g = vec![0.0; span.cols];
            dg = vec![0.0; span.cols];
            let w = &self.data[span.weights()];
            matvec_t(w, span.rows, span.cols, &delta, &mut g);
            matvec_t(w, span.rows, span.cols, &ddelta, &mut dg);
        }
        Ok(dg)
    }

    /// Accumulates `∂(out_adjᵀ y)/∂θ` into `grad`.
    pub fn param_vjp(&self, trace: &Trace, out_adj: &[f64], grad: &mut MlpParams) -> Result<()> {
        ensure_dim("output adjoint", self.arch.output_dim, out_adj.len())?;
        if !self.same_shape(grad) {
            return Err(Error::InvalidParameter("gradient buffer shape differs from parameters".into()));
        }
        let act = self.arch.activation;
        let last = self.spans.len() - 1;
        let mut adj = out_adj.to_vec();
        for i in (0..=last).rev() {
            let span = self.spans[i];
            if i < last {
                for (aj, &a) in adj.iter_mut().zip(&trace.acts[i + 1]) {
                    *aj *= act.d1(a);
                }
            }
            outer_acc(&mut grad.data[span.weights()], span.cols, &adj, &trace.acts[i]);
            for (gb, a) in grad.data[span.bias()].iter_mut().zip(&adj) {
                *gb += a;
            }
            if i > 0 {
                let mut next = vec![0.0; span.cols];
                matvec_t(&self.data[span.weights()], span.rows, span.cols, &adj, &mut next);
                adj = next;
            }
        }
        Ok(())
    }

    /// Accumulates `∂/∂θ [value_adjᵀ y(x) + tangent_adjᵀ (∂y/∂x · v)]` into `grad`,
    /// where `v` is the direction the tangent was built from.
    ///
    /// Objectives that depend on input gradients of a scalar field reduce to
    /// this with `tangent_adj = [1]` and `v` set to the adjoint of that gradient.
    pub fn second_order_param_vjp(
        &self,
        trace: &Trace,
        tangent: &Tangent,
        value_adj: &[f64],
        tangent_adj: &[f64],
        grad: &mut MlpParams,
    ) -> Result<()> {
        ensure_dim("value adjoint", self.arch.output_dim, value_adj.len())?;
        ensure_dim("tangent adjoint", self.arch.output_dim, tangent_adj.len())?;
        if !self.same_shape(grad) {
            return Err(Error::InvalidParameter("gradient buffer shape differs from parameters".into()));
        }
        let act = self.arch.activation;
        let last = self.spans.len() - 1;
        let mut abar = value_adj.to_vec();
        let mut dabar = tangent_adj.to_vec();
        for i in (0..=last).rev() {
            let span = self.spans[i];
            // Turn post-activation adjoints into pre-activation adjoints.
            if i < last {
                for j in 0..span.rows {
                    let a = trace.acts[i + 1][j];
                    let s = act.d1(a);
                    let zbar = s * abar[j] + act.d2(a) * tangent.dpre[i][j] * dabar[j];
                    dabar[j] *= s;
                    abar[j] = zbar;
                }
            }
            let gw = &mut grad.data[span.weights()];
            outer_acc(gw, span.cols, &abar, &trace.acts[i]);
            outer_acc(gw, span.cols, &dabar, &tangent.dacts[i]);
            for (gb, a) in grad.data[span.bias()].iter_mut().zip(&abar) {
                *gb += a;
            }
            if i > 0 {
                let w = &self.data[span.weights()];
                let mut next = vec![0.0; span.cols];
                let mut dnext = vec![0.0; span.cols];
                matvec_t(w, span.rows, span.cols, &abar, &mut next);
                matvec_t(w, span.rows, span.cols, &dabar, &mut dnext);
                abar = next;
                dabar = dnext;
            }
        }
        Ok(())
    }
}
