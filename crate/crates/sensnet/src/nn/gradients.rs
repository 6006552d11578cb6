//! Reverse-mode weight gradients for a batch, shared by every optimizer.

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::train::LossKind;

use super::mlp::Mlp;

/// Mean-over-batch weight gradients plus the mean loss they differentiate.
#[derive(Debug, Clone)]
pub struct ParamGradients<F> {
    /// One gradient matrix per affine layer, shaped like the weights.
    pub layers: Vec<Array2<F>>,
    /// Mean loss over the batch at the current weights.
    pub mean_loss: F,
}

/// Computes mean-over-batch gradients of the loss with respect to every
/// weight matrix by reverse accumulation.
///
/// For cross-entropy the output-layer error per sample is `σ − e_y`; for the
/// squared-distance loss it is `2(f − e_y)/n` on the raw logits.
pub fn param_gradients<F: Scalar>(
    m: &Mlp<F>,
    inputs: ArrayView2<'_, F>,
    labels: &[usize],
    loss_kind: LossKind,
) -> Result<ParamGradients<F>> {
    let batch = inputs.nrows();
    if batch == 0 {
        return Err(Error::Parameter("gradient batch is empty".into()));
    }
    if labels.len() != batch {
        return Err(Error::Shape(format!(
            "{batch} inputs but {} labels",
            labels.len()
        )));
    }
    let n = m.n_classes();
    if let Some(&bad) = labels.iter().find(|&&y| y >= n) {
        return Err(Error::Label(format!("label {bad} out of range for {n} classes")));
    }

    let hidden = m.depth() - 1;
    let activation = m.activation();

    // Forward pass, keeping batched preactivations and activations.
    let mut preacts: Vec<Array2<F>> = Vec::with_capacity(hidden);
    let mut acts: Vec<Array2<F>> = Vec::with_capacity(hidden);
    let mut current = inputs.to_owned();
    for w in &m.weights()[..hidden] {
        let z = current.dot(&w.t());
        let a = z.mapv(|v| activation.eval(v));
        preacts.push(z);
        acts.push(a.clone());
        current = a;
    }
    let logits = current.dot(&m.weights()[hidden].t());

    let inv_batch = F::of(1.0 / batch as f64);
    let mut mean_loss = F::zero();
    // Output-layer error, already carrying the 1/batch factor of the mean.
    let mut delta = Array2::<F>::zeros((batch, n));
    match loss_kind {
        LossKind::CrossEntropy => {
            for (b, row) in logits.axis_iter(Axis(0)).enumerate() {
                let max = row.iter().copied().fold(F::neg_infinity(), F::max);
                let sum_exp = row.iter().map(|&v| (v - max).exp()).sum::<F>();
                mean_loss += (max + sum_exp.ln() - row[labels[b]]) * inv_batch;
                for (j, &v) in row.iter().enumerate() {
                    let sigma = (v - max).exp() / sum_exp;
                    let target = if j == labels[b] { F::one() } else { F::zero() };
                    delta[[b, j]] = (sigma - target) * inv_batch;
                }
            }
        }
        LossKind::L2 => {
            let inv_n = F::of(1.0 / n as f64);
            let two = F::of(2.0);
            for (b, row) in logits.axis_iter(Axis(0)).enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    let target = if j == labels[b] { F::one() } else { F::zero() };
                    let diff = v - target;
                    mean_loss += diff * diff * inv_n * inv_batch;
                    delta[[b, j]] = two * diff * inv_n * inv_batch;
                }
            }
        }
    }

    // Backward pass: grad W_ℓ = δ_ℓᵀ · a_{ℓ-1}.
    let mut grads: Vec<Array2<F>> = vec![Array2::zeros((0, 0)); m.depth()];
    let below = if hidden == 0 { inputs.view() } else { acts[hidden - 1].view() };
    grads[hidden] = delta.t().dot(&below);
    for l in (0..hidden).rev() {
        let mut back = delta.dot(&m.weights()[l + 1]);
        back.zip_mut_with(&preacts[l], |g, &z| *g *= activation.derivative(z));
        delta = back;
        let below = if l == 0 { inputs.view() } else { acts[l - 1].view() };
        grads[l] = delta.t().dot(&below);
    }

    Ok(ParamGradients { layers: grads, mean_loss })
}
