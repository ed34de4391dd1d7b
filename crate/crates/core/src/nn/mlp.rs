//! Dense multi-layer perceptron with exact reverse-mode gradients.
//!
//! Each layer computes `y = act(W x + b)` with `W` stored row-major as
//! `n_out × n_in`. A layer's output units may be split into spans that use
//! different activations, which is how the low-level actor gets a sigmoid
//! unit for linear velocity next to a tanh unit for angular velocity.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::matrix::{accumulate_dzt_x, matmul_dz_w, matmul_xwt, Matrix};
use super::NnError;

/// Element-wise activation applied after the affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation's output `y`.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }
}

/// A contiguous run of output units sharing one activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActSpan {
    pub len: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    n_in: usize,
    n_out: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    spans: Vec<ActSpan>,
}

impl Layer {
    /// Builds a layer from raw parameters. `spans` must cover exactly `n_out` units.
    pub fn new(
        n_in: usize,
        n_out: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        spans: Vec<ActSpan>,
    ) -> Result<Self, NnError> {
        if n_in == 0 || n_out == 0 {
            return Err(NnError::InvalidShape(format!(
                "layer dims must be positive, got {n_in}x{n_out}"
            )));
        }
        if weights.len() != n_in * n_out || biases.len() != n_out {
            return Err(NnError::InvalidShape(format!(
                "layer {n_out}x{n_in} got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        let covered: usize = spans.iter().map(|s| s.len).sum();
        if covered != n_out || spans.iter().any(|s| s.len == 0) {
            return Err(NnError::InvalidShape(format!(
                "activation spans cover {covered} of {n_out} units"
            )));
        }
        Ok(Self {
            n_in,
            n_out,
            weights,
            biases,
            spans,
        })
    }

    /// Layer with a single activation over all outputs.
    pub fn uniform(
        n_in: usize,
        n_out: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self, NnError> {
        Self::new(
            n_in,
            n_out,
            weights,
            biases,
            vec![ActSpan {
                len: n_out,
                activation,
            }],
        )
    }

    pub fn zeros(n_in: usize, n_out: usize, spans: Vec<ActSpan>) -> Result<Self, NnError> {
        Self::new(
            n_in,
            n_out,
            vec![0.0; n_in * n_out],
            vec![0.0; n_out],
            spans,
        )
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Row-major `n_out × n_in`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn biases_mut(&mut self) -> &mut [f64] {
        &mut self.biases
    }

    pub fn spans(&self) -> &[ActSpan] {
        &self.spans
    }

    fn activate(&self, z: &mut Matrix) {
        for r in 0..z.rows() {
            let row = z.row_mut(r);
            let mut start = 0;
            for span in &self.spans {
                for v in &mut row[start..start + span.len] {
                    *v = span.activation.apply(*v);
                }
                start += span.len;
            }
        }
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut z = self.affine(x);
        self.activate(&mut z);
        z
    }

    fn affine(&self, x: &Matrix) -> Matrix {
        let mut z = Matrix::zeros(x.rows(), self.n_out);
        matmul_xwt(x, &self.weights, self.n_out, &mut z);
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.biases) {
                *v += b;
            }
        }
        z
    }
}

/// Per-layer parameter gradients, shaped like the owning [`MlpNet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn global_norm(&self) -> f64 {
        self.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|g| g.is_finite())
    }

    pub fn scale(&mut self, factor: f64) {
        for g in self.iter_mut() {
            *g *= factor;
        }
    }

    /// Rescales in place so the global norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn is_congruent(&self, net: &MlpNet) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            })
    }
}

/// Activations recorded during a batched forward pass; `acts[0]` is the input
/// and `acts[k + 1]` the output of layer `k`.
#[derive(Debug, Clone)]
pub struct Trace {
    acts: Vec<Matrix>,
}

impl Trace {
    pub fn output(&self) -> &Matrix {
        self.acts.last().expect("trace always holds the input")
    }

    pub fn input(&self) -> &Matrix {
        &self.acts[0]
    }
}

/// A dense feed-forward network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNet {
    layers: Vec<Layer>,
}

impl MlpNet {
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::InvalidShape(
                "network needs at least one layer".into(),
            ));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out != pair[1].n_in {
                return Err(NnError::InvalidShape(format!(
                    "layer {k} outputs {} but layer {} expects {}",
                    pair[0].n_out,
                    k + 1,
                    pair[1].n_in
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    /// Same layer dimensions and activation layout.
    pub fn is_congruent(&self, other: &MlpNet) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.n_in == b.n_in && a.n_out == b.n_out && a.spans == b.spans)
    }

    /// Evaluates the network on one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_batch(&Matrix::row_vector(input))?.into_vec())
    }

    /// Evaluates the network on each row of `inputs`.
    pub fn forward_batch(&self, inputs: &Matrix) -> Result<Matrix, NnError> {
        self.check_input(inputs)?;
        let mut x = self.layers[0].forward(inputs);
        for layer in &self.layers[1..] {
            x = layer.forward(&x);
        }
        Ok(x)
    }

    /// Forward pass that keeps every intermediate activation for [`MlpNet::backward_batch`].
    pub fn forward_trace(&self, inputs: &Matrix) -> Result<Trace, NnError> {
        self.check_input(inputs)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(inputs.clone());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap());
            acts.push(next);
        }
        Ok(Trace { acts })
    }

    /// Reverse-mode pass for a single sample. Returns parameter gradients of
    /// `output_grad · f(input)` and the gradient with respect to the input.
    pub fn backward(
        &self,
        input: &[f64],
        output_grad: &[f64],
    ) -> Result<(Gradients, Vec<f64>), NnError> {
        let trace = self.forward_trace(&Matrix::row_vector(input))?;
        let (grads, dx) = self.backward_batch(&trace, &Matrix::row_vector(output_grad))?;
        Ok((grads, dx.into_vec()))
    }

    /// Reverse-mode pass over a recorded batch. Parameter gradients are summed
    /// over rows; the returned matrix holds one input gradient per row.
    pub fn backward_batch(
        &self,
        trace: &Trace,
        output_grad: &Matrix,
    ) -> Result<(Gradients, Matrix), NnError> {
        self.backward_inner(trace, output_grad, None)
    }

    /// Pre-activation values of the output layer for a recorded batch.
    pub fn head_preactivations(&self, trace: &Trace) -> Result<Matrix, NnError> {
        let n = self.layers.len();
        if trace.acts.len() != n + 1 {
            return Err(NnError::InvalidShape(
                "trace does not belong to this network".into(),
            ));
        }
        Ok(self.layers[n - 1].affine(&trace.acts[n - 1]))
    }

    /// [`MlpNet::backward_batch`] with an extra gradient `head_grad` added
    /// directly to the output layer's pre-activations.
    pub fn backward_batch_with_head(
        &self,
        trace: &Trace,
        output_grad: &Matrix,
        head_grad: &Matrix,
    ) -> Result<(Gradients, Matrix), NnError> {
        if head_grad.rows() != output_grad.rows() || head_grad.cols() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.output_dim(),
                got: head_grad.cols(),
            });
        }
        self.backward_inner(trace, output_grad, Some(head_grad))
    }

    fn backward_inner(
        &self,
        trace: &Trace,
        output_grad: &Matrix,
        head_grad: Option<&Matrix>,
    ) -> Result<(Gradients, Matrix), NnError> {
        let out = trace.output();
        if trace.acts.len() != self.layers.len() + 1 {
            return Err(NnError::InvalidShape(
                "trace does not belong to this network".into(),
            ));
        }
        if output_grad.rows() != out.rows() || output_grad.cols() != self.output_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.output_dim(),
                got: output_grad.cols(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let mut delta = output_grad.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let y = &trace.acts[k + 1];
            // delta <- dL/dz
            for r in 0..delta.rows() {
                let yr = y.row(r);
                let dr = delta.row_mut(r);
                let mut start = 0;
                for span in &layer.spans {
                    for j in start..start + span.len {
                        dr[j] *= span.activation.derivative_from_output(yr[j]);
                    }
                    start += span.len;
                }
            }
            if let (Some(extra), true) = (head_grad, k + 1 == self.layers.len()) {
                for (d, e) in delta.as_mut_slice().iter_mut().zip(extra.as_slice()) {
                    *d += e;
                }
            }
            let g = &mut grads.layers[k];
            accumulate_dzt_x(&delta, &trace.acts[k], &mut g.weights);
            for r in 0..delta.rows() {
                for (b, d) in g.biases.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            delta = matmul_dz_w(&delta, &layer.weights, layer.n_in);
        }
        Ok((grads, delta))
    }

    /// `θ' ← (1 − τ) θ' + τ θ` for every parameter, with `self` as the target.
    pub fn soft_update_from(&mut self, online: &MlpNet, tau: f64) -> Result<(), NnError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(NnError::InvalidArgument(format!(
                "tau must lie in [0, 1], got {tau}"
            )));
        }
        if !self.is_congruent(online) {
            return Err(NnError::InvalidShape(
                "soft update between incongruent networks".into(),
            ));
        }
        if tau == 1.0 {
            self.clone_from(online);
            return Ok(());
        }
        for (t, o) in self.params_mut().zip(online.params()) {
            *t = (1.0 - tau) * *t + tau * o;
        }
        Ok(())
    }

    /// Copy of the network with i.i.d. `N(0, σ²)` noise added to every weight and bias.
    pub fn perturbed<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> Result<MlpNet, NnError> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(NnError::InvalidArgument(format!(
                "perturbation scale must be finite and non-negative, got {sigma}"
            )));
        }
        let mut copy = self.clone();
        if sigma > 0.0 {
            for p in copy.params_mut() {
                let eps: f64 = StandardNormal.sample(rng);
                *p += sigma * eps;
            }
        }
        Ok(copy)
    }

    fn check_input(&self, inputs: &Matrix) -> Result<(), NnError> {
        if inputs.cols() != self.input_dim() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.cols(),
            });
        }
        Ok(())
    }
}

/// Half-width of the Xavier/Glorot uniform distribution for one layer.
pub fn xavier_bound(n_in: usize, n_out: usize) -> f64 {
    (6.0 / (n_in + n_out) as f64).sqrt()
}

/// Xavier-uniform network with ReLU hidden layers, zero biases, and an output
/// layer partitioned by `output_spec` into `(size, activation)` spans.
pub fn xavier_init<R: Rng + ?Sized>(
    input_dim: usize,
    hidden_dims: &[usize],
    output_spec: &[(usize, Activation)],
    rng: &mut R,
) -> Result<MlpNet, NnError> {
    xavier_init_with(input_dim, hidden_dims, Activation::Relu, output_spec, rng)
}

/// [`xavier_init`] with a caller-chosen hidden activation.
pub fn xavier_init_with<R: Rng + ?Sized>(
    input_dim: usize,
    hidden_dims: &[usize],
    hidden_activation: Activation,
    output_spec: &[(usize, Activation)],
    rng: &mut R,
) -> Result<MlpNet, NnError> {
    if input_dim == 0 || hidden_dims.contains(&0) || output_spec.iter().any(|(n, _)| *n == 0) {
        return Err(NnError::InvalidShape(
            "all dimensions must be positive".into(),
        ));
    }
    if output_spec.is_empty() {
        return Err(NnError::InvalidShape("output spec is empty".into()));
    }
    let mut layers = Vec::with_capacity(hidden_dims.len() + 1);
    let mut n_in = input_dim;
    let mut push = |n_in: usize, n_out: usize, spans: Vec<ActSpan>, rng: &mut R| {
        let bound = xavier_bound(n_in, n_out);
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
        let weights = (0..n_in * n_out).map(|_| dist.sample(rng)).collect();
        layers.push(Layer::new(n_in, n_out, weights, vec![0.0; n_out], spans));
    };
    for &h in hidden_dims {
        push(
            n_in,
            h,
            vec![ActSpan {
                len: h,
                activation: hidden_activation,
            }],
            rng,
        );
        n_in = h;
    }
    let spans: Vec<ActSpan> = output_spec
        .iter()
        .map(|&(len, activation)| ActSpan { len, activation })
        .collect();
    let n_out = spans.iter().map(|s| s.len).sum();
    push(n_in, n_out, spans, rng);
    let layers = layers.into_iter().collect::<Result<Vec<_>, _>>()?;
    MlpNet::from_layers(layers)
}
