//! Analytic relationships between a point's cross-entropy loss and its
//! Jacobian norms, with the measured values they are compared against.
//!
//! The scale constant is `M = E‖∂f/∂xᵀ‖_F²/n`, the per-class mean squared
//! logit-Jacobian norm over an evaluation set. Writing `q = e^{−l} = σ_y` for
//! a point with cross-entropy loss `l`, the target-row norm is enveloped by
//!
//! ```text
//! √(nM/(n−1)) · q(1−q)  ≤ᵃ  ‖J_y‖₂  ≤ᵃ  √(2M) · q(1−q)
//! ```
//!
//! and the full Frobenius norm is approximated by
//! `(√M/(n−1)) · (1−q) · √(n²q² + n − 2)`. The superscript `a` marks that
//! these rest on an approximate constancy assumption about logit-derivative
//! magnitudes: they are reported and compared, never enforced.

use ndarray::{ArrayView1, ArrayView2};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{softmax, Mlp};
use crate::scalar::Scalar;
use crate::train::{loss_eval, LossKind};

/// The shared scale constant of all bound evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsContext {
    /// Mean over the evaluation set of `‖∂f/∂xᵀ‖_F² / n`.
    pub m_constant: f64,
    /// Class count `n ≥ 2`.
    pub n_classes: usize,
}

impl BoundsContext {
    /// Validates `M ≥ 0` (finite) and `n ≥ 2`.
    pub fn new(m_constant: f64, n_classes: usize) -> Result<Self> {
        if !m_constant.is_finite() {
            return Err(Error::NonFinite(format!("M must be finite, got {m_constant}")));
        }
        if m_constant < 0.0 {
            return Err(Error::Parameter(format!("M must be ≥ 0, got {m_constant}")));
        }
        if n_classes < 2 {
            return Err(Error::Parameter(format!(
                "bounds need n ≥ 2 classes, got {n_classes}"
            )));
        }
        Ok(Self { m_constant, n_classes })
    }
}

/// Estimates `M` over a point set: the mean of `‖∂f/∂xᵀ‖_F²/n`.
///
/// Accumulation is compensated (Kahan) so the reduction is reproducible and
/// accurate independent of point count.
pub fn estimate_m<F: Scalar>(m: &Mlp<F>, points: ArrayView2<'_, F>) -> Result<BoundsContext> {
    if points.nrows() == 0 {
        return Err(Error::Parameter("cannot estimate M over an empty set".into()));
    }
    let n = m.n_classes();
    if n < 2 {
        return Err(Error::Parameter(format!("bounds need n ≥ 2 classes, got {n}")));
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for row in points.rows() {
        let jac = m.logit_input_jacobian(row)?;
        let sq: f64 = jac
            .iter()
            .map(|&v| {
                let x = v.as_f64();
                x * x
            })
            .sum();
        let y = sq - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    BoundsContext::new(sum / (points.nrows() * n) as f64, n)
}

/// Evaluates the squared target-row norm along two independent routes.
///
/// The left value is `‖row y of the softmax Jacobian‖₂²` taken from the
/// assembled matrix. The right value evaluates the same quantity from the
/// logit Jacobian directly: row `y` equals `σ_y (e_y − σ)ᵀ (∂f/∂xᵀ)`, so its
/// squared norm is `σ_y² ‖(e_y − σ)ᵀ (∂f/∂xᵀ)‖₂²`. The two must agree to
/// rounding error; the pair is returned for comparison.
pub fn target_row_identity<F: Scalar>(
    m: &Mlp<F>,
    x: ArrayView1<'_, F>,
    y: usize,
) -> Result<(F, F)> {
    let n = m.n_classes();
    if y >= n {
        return Err(Error::Label(format!("class {y} out of range for {n} classes")));
    }
    let jac = m.softmax_input_jacobian(x)?;
    let lhs = jac.row_norm(y)?.powi(2);

    let logit_jac = m.logit_input_jacobian(x)?;
    let sigma = softmax(m.forward(x)?.view());
    // (e_y − σ)ᵀ (∂f/∂xᵀ) as a d-vector, accumulated per input coordinate.
    let mut rhs = F::zero();
    for col in logit_jac.columns() {
        let mut entry = F::zero();
        for (j, (&jv, &s)) in col.iter().zip(sigma.iter()).enumerate() {
            let e = if j == y { F::one() } else { F::zero() };
            entry += (e - s) * jv;
        }
        rhs += entry * entry;
    }
    rhs = sigma[y] * sigma[y] * rhs;
    Ok((lhs, rhs))
}

/// The loss-parametrized envelope of the target-row norm:
/// `(√(nM/(n−1)), √(2M))`, each scaled by `e^{−l}(1−e^{−l})`.
pub fn jy_bounds(l: f64, ctx: &BoundsContext) -> Result<(f64, f64)> {
    if !(l >= 0.0) {
        return Err(Error::Parameter(format!("loss must be ≥ 0, got {l}")));
    }
    if ctx.n_classes < 2 {
        return Err(Error::Parameter(format!(
            "bounds need n ≥ 2 classes, got {}",
            ctx.n_classes
        )));
    }
    let (m_c, n) = (ctx.m_constant, ctx.n_classes as f64);
    let q = (-l).exp();
    let shape = q * (1.0 - q);
    let lower = (n * m_c / (n - 1.0)).sqrt() * shape;
    let upper = (2.0 * m_c).sqrt() * shape;
    Ok((lower, upper))
}

/// The loss-parametrized approximation of the full Frobenius norm:
/// `(√M/(n−1)) · (1−e^{−l}) · √(n²e^{−2l} + n − 2)`.
pub fn full_norm_approx(l: f64, ctx: &BoundsContext) -> Result<f64> {
    if !(l >= 0.0) {
        return Err(Error::Parameter(format!("loss must be ≥ 0, got {l}")));
    }
    let (m_c, n) = (ctx.m_constant, ctx.n_classes as f64);
    let q = (-l).exp();
    // (n − 2) is grouped so the n²q² term survives intact when q is tiny —
    // summing left to right would cancel it against the constant.
    Ok(m_c.sqrt() / (n - 1.0) * (1.0 - q) * (n * n * q * q + (n - 2.0)).sqrt())
}

/// One test point's measured norms next to its loss-parametrized bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PointBounds {
    /// Index of the point in the evaluated set.
    pub point_id: usize,
    /// The point's loss under the requested loss kind.
    pub loss: f64,
    /// Measured `‖row y of the softmax Jacobian‖₂`.
    pub jy_actual: f64,
    /// Measured `‖softmax Jacobian‖_F`.
    pub full_actual: f64,
    /// Envelope floor for `jy_actual`.
    pub jy_lower: f64,
    /// Envelope ceiling for `jy_actual`.
    pub jy_upper: f64,
    /// Floor for `full_actual`; equals `jy_lower`, which transfers because
    /// the row norm never exceeds the Frobenius norm.
    pub full_lower: f64,
    /// Approximation of `full_actual`.
    pub full_approx: f64,
}

/// A per-point bounds report plus the context it was computed under.
#[derive(Debug, Clone)]
pub struct PerPointReport {
    pub rows: Vec<PointBounds>,
    pub context: BoundsContext,
}

/// Evaluates every test point's loss, measured Jacobian norms, and bound
/// values under a shared `M` estimated over the same set.
///
/// The envelope formulas are parametrized by the cross-entropy loss; their
/// argument here is `l_eff = −ln σ_y` at each point, which coincides with the
/// reported loss for the cross-entropy kind and keeps the report meaningful
/// for the squared-distance kind (whose own loss column is still reported).
pub fn per_point_report<F: Scalar>(
    m: &Mlp<F>,
    testset: &Dataset<F>,
    loss_kind: LossKind,
) -> Result<PerPointReport> {
    if testset.dim() != m.input_dim() {
        return Err(Error::Shape(format!(
            "dataset has d = {} but the network expects {}",
            testset.dim(),
            m.input_dim()
        )));
    }
    if testset.n_classes() > m.n_classes() {
        return Err(Error::Shape(format!(
            "dataset has {} classes but the network outputs {}",
            testset.n_classes(),
            m.n_classes()
        )));
    }
    let context = estimate_m(m, testset.inputs())?;
    let mut rows = Vec::with_capacity(testset.len());
    for i in 0..testset.len() {
        let x = testset.input(i);
        let y = testset.labels()[i];
        let logits = m.forward(x)?;
        let sigma = softmax(logits.view());
        let loss = loss_eval(logits.view(), y, loss_kind)?.as_f64();
        let l_eff = (-sigma[y].as_f64().ln()).max(0.0);
        let jac = m.softmax_input_jacobian(x)?;
        let (jy_lower, jy_upper) = jy_bounds(l_eff, &context)?;
        rows.push(PointBounds {
            point_id: i,
            loss,
            jy_actual: jac.row_norm(y)?.as_f64(),
            full_actual: jac.frobenius_norm().as_f64(),
            jy_lower,
            jy_upper,
            full_lower: jy_lower,
            full_approx: full_norm_approx(l_eff, &context)?,
        });
    }
    Ok(PerPointReport { rows, context })
}
