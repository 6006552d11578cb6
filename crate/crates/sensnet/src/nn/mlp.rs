//! The bias-free MLP, its forward evaluation, activation-region codes, and
//! analytic input-output Jacobians.
//!
//! A network with widths `(d, h₁, …, h_L, n)` computes
//! `f(x) = W_{L+1} φ(W_L ⋯ φ(W_1 x))` with no bias terms. For piecewise-linear
//! activations the input-output Jacobian of the logits is the chain product
//! `W_{L+1} D_L W_L ⋯ D_1 W_1`, where `D_ℓ` holds the activation derivatives
//! at layer `ℓ`'s preactivations; it is constant on each linear region. The
//! class-probability Jacobian additionally applies the softmax derivative:
//! row `i` equals `σᵢ (eᵢ − σ)ᵀ (∂f/∂xᵀ)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::activation::Activation;

/// Fully-connected classifier without biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    widths: Vec<usize>,
    weights: Vec<Array2<F>>,
    activation: Activation,
}

/// Intermediate values of one forward evaluation.
#[derive(Debug, Clone)]
pub struct ForwardTrace<F> {
    /// Per hidden layer, the preactivation vector `W_ℓ a_{ℓ-1}`.
    pub preactivations: Vec<Array1<F>>,
    /// Per hidden layer, the activated vector `φ(z_ℓ)`.
    pub activations: Vec<Array1<F>>,
    /// Unnormalized class logits.
    pub logits: Array1<F>,
}

/// Per-hidden-neuron linear-piece indices in layer-major order; two inputs
/// with equal codes lie in the same linear region of the network.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegionCode {
    codes: Vec<u8>,
}

impl RegionCode {
    /// The flat code sequence, layer-major.
    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    /// Total number of hidden neurons encoded.
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    /// True for a network without hidden neurons.
    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// L1 distance between two codes of the same network.
    pub fn l1_distance(&self, other: &RegionCode) -> Result<u64> {
        if self.codes.len() != other.codes.len() {
            return Err(Error::Shape(format!(
                "codes of length {} and {} are not comparable",
                self.codes.len(),
                other.codes.len()
            )));
        }
        Ok(self
            .codes
            .iter()
            .zip(&other.codes)
            .map(|(&a, &b)| u64::from(a.abs_diff(b)))
            .sum())
    }

    #[cfg(test)]
    pub(crate) fn from_raw(codes: Vec<u8>) -> Self {
        Self { codes }
    }
}

/// The `n×d` Jacobian of softmax class probabilities with respect to the
/// input; its columns sum to zero because the probabilities sum to one.
#[derive(Debug, Clone)]
pub struct SoftmaxJacobian<F> {
    matrix: Array2<F>,
}

impl<F: Scalar> SoftmaxJacobian<F> {
    /// The raw `n×d` matrix.
    pub fn matrix(&self) -> ArrayView2<'_, F> {
        self.matrix.view()
    }

    /// Frobenius norm `√(Σ Jᵢⱼ²)` — the headline sensitivity metric.
    pub fn frobenius_norm(&self) -> F {
        self.matrix.iter().map(|&v| v * v).sum::<F>().sqrt()
    }

    /// Euclidean norm of row `y` (the target-class row).
    pub fn row_norm(&self, y: usize) -> Result<F> {
        if y >= self.matrix.nrows() {
            return Err(Error::Label(format!(
                "class {y} out of range for {} rows",
                self.matrix.nrows()
            )));
        }
        Ok(self.matrix.row(y).iter().map(|&v| v * v).sum::<F>().sqrt())
    }
}

/// Numerically stable softmax via max subtraction.
pub fn softmax<F: Scalar>(logits: ArrayView1<'_, F>) -> Array1<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps = logits.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    exps / sum
}

impl<F: Scalar> Mlp<F> {
    /// Initializes a network with i.i.d. zero-mean normal weights whose
    /// standard deviation follows the fan-in rule of
    /// [`Activation::init_std`], scaled by `std_multiplier`. Deterministic in
    /// `seed`.
    pub fn init(
        widths: &[usize],
        activation: Activation,
        std_multiplier: f64,
        seed: u64,
    ) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Parameter(
                "a network needs at least input and output widths".into(),
            ));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Parameter("zero-width layer".into()));
        }
        if !(std_multiplier > 0.0) {
            return Err(Error::Parameter("std_multiplier must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(widths.len() - 1);
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let std = activation.init_std(fan_in, std_multiplier);
            let normal = Normal::new(0.0f64, std).expect("positive std");
            let w = Array2::from_shape_fn((fan_out, fan_in), |_| F::of(normal.sample(&mut rng)));
            weights.push(w);
        }
        Ok(Self { widths: widths.to_vec(), weights, activation })
    }

    /// Builds a network from explicit per-layer weight matrices with shapes
    /// `(h₁×d), …, (n×h_L)`.
    pub fn from_weights(weights: Vec<Array2<F>>, activation: Activation) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Parameter("a network needs at least one layer".into()));
        }
        let mut widths = Vec::with_capacity(weights.len() + 1);
        widths.push(weights[0].ncols());
        for (l, w) in weights.iter().enumerate() {
            if w.nrows() == 0 || w.ncols() == 0 {
                return Err(Error::Shape("zero-sized weight matrix".into()));
            }
            if w.ncols() != *widths.last().expect("non-empty") {
                return Err(Error::Shape(format!(
                    "layer {l} expects fan-in {} but previous width is {}",
                    w.ncols(),
                    widths.last().expect("non-empty")
                )));
            }
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("layer {l} contains non-finite weights")));
            }
            widths.push(w.nrows());
        }
        Ok(Self { widths, weights, activation })
    }

    /// Layer widths `(d, h₁, …, h_L, n)`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Input dimensionality `d`.
    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// Number of classes `n`.
    pub fn n_classes(&self) -> usize {
        *self.widths.last().expect("validated")
    }

    /// Number of affine layers (weight matrices).
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Widths of the hidden layers only.
    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    /// Total hidden neuron count — the length of a [`RegionCode`].
    pub fn hidden_neuron_count(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    /// The activation applied to every hidden layer.
    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Per-layer weight matrices.
    pub fn weights(&self) -> &[Array2<F>] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Array2<F>] {
        &mut self.weights
    }

    fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {len} fed to a d = {} network",
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Full forward evaluation keeping all intermediate vectors.
    pub fn forward_trace(&self, x: ArrayView1<'_, F>) -> Result<ForwardTrace<F>> {
        self.check_input(x.len())?;
        let hidden = self.depth() - 1;
        let mut preactivations = Vec::with_capacity(hidden);
        let mut activations = Vec::with_capacity(hidden);
        let mut current = x.to_owned();
        for w in &self.weights[..hidden] {
            let z = w.dot(&current);
            let a = z.mapv(|v| self.activation.eval(v));
            preactivations.push(z);
            activations.push(a.clone());
            current = a;
        }
        let logits = self.weights[hidden].dot(&current);
        Ok(ForwardTrace { preactivations, activations, logits })
    }

    /// Unnormalized logits `f(x)`.
    pub fn forward(&self, x: ArrayView1<'_, F>) -> Result<Array1<F>> {
        Ok(self.forward_trace(x)?.logits)
    }

    /// Logits for a batch of inputs (rows of `x`), returned as `B×n`.
    pub fn forward_batch(&self, x: ArrayView2<'_, F>) -> Result<Array2<F>> {
        self.check_input(x.ncols())?;
        let hidden = self.depth() - 1;
        let mut current = x.to_owned();
        for w in &self.weights[..hidden] {
            current = current.dot(&w.t());
            current.mapv_inplace(|v| self.activation.eval(v));
        }
        Ok(current.dot(&self.weights[hidden].t()))
    }

    /// Appends the region code of `x` (layer-major) to `out`.
    ///
    /// Streaming building block: callers counting transitions along long
    /// trajectories keep two code buffers alive instead of `k`.
    pub(crate) fn region_code_into(&self, x: ArrayView1<'_, F>, out: &mut Vec<u8>) -> Result<()> {
        self.check_input(x.len())?;
        let hidden = self.depth() - 1;
        let mut current = x.to_owned();
        for w in &self.weights[..hidden] {
            let z = w.dot(&current);
            for &v in z.iter() {
                out.push(self.activation.code(v)?);
            }
            current = z.mapv_into(|v| self.activation.eval(v));
        }
        Ok(())
    }

    /// Region code of `x`: one linear-piece index per hidden neuron.
    pub fn region_code(&self, x: ArrayView1<'_, F>) -> Result<RegionCode> {
        let mut codes = Vec::with_capacity(self.hidden_neuron_count());
        self.region_code_into(x, &mut codes)?;
        Ok(RegionCode { codes })
    }

    /// Jacobian of the logits with respect to the input: the exact chain
    /// product `W_{L+1} D_L W_L ⋯ D_1 W_1`, shaped `n×d`.
    pub fn logit_input_jacobian(&self, x: ArrayView1<'_, F>) -> Result<Array2<F>> {
        let trace = self.forward_trace(x)?;
        Ok(self.logit_jacobian_from_trace(&trace))
    }

    /// Chain product evaluated at a known trace (avoids re-running forward).
    pub(crate) fn logit_jacobian_from_trace(&self, trace: &ForwardTrace<F>) -> Array2<F> {
        let hidden = self.depth() - 1;
        // Accumulate from the output side: cheap because n is small.
        let mut jac = self.weights[hidden].clone();
        for l in (0..hidden).rev() {
            let derivs = trace.preactivations[l].mapv(|v| self.activation.derivative(v));
            jac = jac * &derivs; // scale column j by φ'(z_j), broadcast over rows
            jac = jac.dot(&self.weights[l]);
        }
        jac
    }

    /// Jacobian of softmax class probabilities with respect to the input.
    pub fn softmax_input_jacobian(&self, x: ArrayView1<'_, F>) -> Result<SoftmaxJacobian<F>> {
        let trace = self.forward_trace(x)?;
        let logit_jac = self.logit_jacobian_from_trace(&trace);
        let sigma = softmax(trace.logits.view());
        // Row i of the result is σᵢ (eᵢ − σ)ᵀ (∂f/∂xᵀ) = σᵢ (Jᵢ − σᵀJ).
        let weighted_sum = sigma.dot(&logit_jac); // d-vector σᵀJ
        let mut matrix = logit_jac;
        for (i, mut row) in matrix.axis_iter_mut(Axis(0)).enumerate() {
            let s = sigma[i];
            row.zip_mut_with(&weighted_sum.view(), |r, &w| *r = s * (*r - w));
        }
        Ok(SoftmaxJacobian { matrix })
    }
}
