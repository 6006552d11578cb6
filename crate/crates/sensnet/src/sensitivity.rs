//! The two sensitivity metrics — Jacobian-norm statistics at points and
//! linear-region transition counts along closed trajectories — together with
//! a trajectory curvature estimate and region-boundary sampling on planes.
//!
//! Transition counting uses integer code arithmetic: the count along a loop
//! is `Σᵢ ‖c(zᵢ) − c(z₍ᵢ₊₁₎ mod k)‖₁` over per-neuron linear-piece indices.
//! Codes are streamed two samples at a time, so memory stays proportional to
//! the neuron count rather than to `k` and `k = 2^20` loops are feasible.

use std::collections::HashMap;

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::scalar::Scalar;
use crate::trajectory::{PlaneGrid, Trajectory};

/// Frobenius norm of the class-probability Jacobian at one input.
pub fn jacobian_norm<F: Scalar>(m: &Mlp<F>, x: ArrayView1<'_, F>) -> Result<F> {
    Ok(m.softmax_input_jacobian(x)?.frobenius_norm())
}

/// Jacobian-norm statistics over a point set.
#[derive(Debug, Clone)]
pub struct SensitivityReport<F> {
    /// One norm per input row, in input order.
    pub per_point_norms: Vec<F>,
    /// Arithmetic mean of `per_point_norms`.
    pub mean_norm: F,
    /// Number of points measured.
    pub point_count: usize,
}

/// Evaluates [`jacobian_norm`] at every row of `points` and averages.
/// Labels are never consumed — the metric is defined on inputs alone.
pub fn mean_jacobian_norm<F: Scalar>(
    m: &Mlp<F>,
    points: ArrayView2<'_, F>,
) -> Result<SensitivityReport<F>> {
    if points.nrows() == 0 {
        return Err(Error::Parameter("no points to measure".into()));
    }
    let mut per_point_norms = Vec::with_capacity(points.nrows());
    for row in points.rows() {
        per_point_norms.push(jacobian_norm(m, row)?);
    }
    let mean_norm = per_point_norms.iter().copied().sum::<F>() / F::of(points.nrows() as f64);
    Ok(SensitivityReport { per_point_norms, mean_norm, point_count: points.nrows() })
}

/// Transition-count breakdown along one closed trajectory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCount {
    /// `t = Σᵢ ‖c(zᵢ) − c(z₍ᵢ₊₁₎ mod k)‖₁`.
    pub total: u64,
    /// Per hidden neuron (layer-major), its share of `total`. Every entry is
    /// even on a closed loop: each code walks back to its start in ±1 steps.
    pub per_neuron: Vec<u64>,
    /// Per arc `(i, i+1 mod k)`, the code distance across that arc.
    pub per_arc: Vec<u64>,
    /// Number of samples the count was taken over.
    pub k_used: usize,
}

/// Counts linear-region transitions along the closed trajectory.
pub fn count_transitions<F: Scalar>(m: &Mlp<F>, t: &Trajectory<F>) -> Result<TransitionCount> {
    let k = t.k();
    if k < 3 {
        return Err(Error::Sampling(format!("transition counting needs k ≥ 3, got {k}")));
    }
    let neurons = m.hidden_neuron_count();
    let mut per_neuron = vec![0u64; neurons];
    let mut per_arc = vec![0u64; k];
    let mut first = Vec::with_capacity(neurons);
    m.region_code_into(t.point(0), &mut first)?;
    let mut prev = first.clone();
    let mut cur = Vec::with_capacity(neurons);
    for i in 1..=k {
        let code: &[u8] = if i == k {
            &first
        } else {
            cur.clear();
            m.region_code_into(t.point(i), &mut cur)?;
            &cur
        };
        let mut arc = 0u64;
        for (j, (&a, &b)) in prev.iter().zip(code).enumerate() {
            let d = u64::from(a.abs_diff(b));
            per_neuron[j] += d;
            arc += d;
        }
        per_arc[i - 1] = arc;
        if i < k {
            std::mem::swap(&mut prev, &mut cur);
        }
    }
    let total = per_arc.iter().sum();
    Ok(TransitionCount { total, per_neuron, per_arc, k_used: k })
}

/// Mean of [`count_transitions`] totals over several trajectories.
pub fn mean_transitions<F: Scalar>(m: &Mlp<F>, trajectories: &[Trajectory<F>]) -> Result<f64> {
    if trajectories.is_empty() {
        return Err(Error::Parameter("no trajectories to measure".into()));
    }
    let mut acc = 0.0;
    for t in trajectories {
        acc += count_transitions(m, t)?.total as f64;
    }
    Ok(acc / trajectories.len() as f64)
}

/// Per-sample norms and windowed transition counts along one trajectory.
#[derive(Debug, Clone)]
pub struct SensitivityProfile<F> {
    /// `‖J‖_F` at every sample, in trajectory order.
    pub jacobian_norms: Vec<F>,
    /// Transition counts bucketed into `k/window` equal index arcs; bucket
    /// `b` covers the arcs leaving samples `[b·window, (b+1)·window)`.
    pub window_transitions: Vec<u64>,
    /// Arc width used for bucketing.
    pub window: usize,
}

/// Profiles both metrics along the trajectory: the Jacobian norm at every
/// sample and transition counts aggregated into equal index windows.
pub fn sensitivity_profile<F: Scalar>(
    m: &Mlp<F>,
    t: &Trajectory<F>,
    window: usize,
) -> Result<SensitivityProfile<F>> {
    let k = t.k();
    if window == 0 || k % window != 0 {
        return Err(Error::Parameter(format!(
            "window {window} does not evenly divide k = {k}"
        )));
    }
    let counts = count_transitions(m, t)?;
    let mut window_transitions = vec![0u64; k / window];
    for (i, &c) in counts.per_arc.iter().enumerate() {
        window_transitions[i / window] += c;
    }
    let mut jacobian_norms = Vec::with_capacity(k);
    for i in 0..k {
        jacobian_norms.push(jacobian_norm(m, t.point(i))?);
    }
    Ok(SensitivityProfile { jacobian_norms, window_transitions, window })
}

/// Accumulated logit-Jacobian change along the loop:
/// `½ Σᵢ ‖f′(zᵢ) − f′(z₍ᵢ₊₁₎ mod k)‖_F`.
///
/// Meaningful as a curvature measure for piecewise-linear activations, where
/// `f′` is constant inside a region and the sum collects jumps across region
/// boundaries; the same formula is computed for any activation.
pub fn curvature_estimate<F: Scalar>(m: &Mlp<F>, t: &Trajectory<F>) -> Result<F> {
    let k = t.k();
    let first = m.logit_input_jacobian(t.point(0))?;
    let mut prev = first.clone();
    let mut acc = F::zero();
    for i in 1..=k {
        let cur = if i == k { first.clone() } else { m.logit_input_jacobian(t.point(i))? };
        let mut sq = F::zero();
        for (&a, &b) in prev.iter().zip(cur.iter()) {
            let d = a - b;
            sq += d * d;
        }
        acc += sq.sqrt();
        prev = cur;
    }
    Ok(acc * F::of(0.5))
}

/// Which layers' codes distinguish regions in a boundary map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSelector {
    /// Only the last hidden (pre-logits) layer.
    LastHidden,
    /// All hidden layers.
    All,
}

/// Region labels and boundary mask over a planar probe grid.
#[derive(Debug, Clone)]
pub struct BoundaryMap {
    /// Region id per grid cell (row-major, vertical coordinate outermost);
    /// ids are assigned in first-seen scan order starting from 0.
    pub labels: Vec<u32>,
    /// True for cells with at least one 4-neighbor in a different region;
    /// both cells of a differing pair are marked.
    pub mask: Vec<bool>,
    /// Grid side length.
    pub resolution: usize,
    /// Number of distinct regions seen on the grid.
    pub region_count: usize,
}

/// Samples region codes over the grid and marks cells adjacent to a region
/// change.
pub fn boundary_map<F: Scalar>(
    m: &Mlp<F>,
    grid: &PlaneGrid<F>,
    selector: LayerSelector,
) -> Result<BoundaryMap> {
    let res = grid.resolution();
    let last_width = *m.hidden_widths().last().unwrap_or(&0);
    let mut ids: HashMap<Vec<u8>, u32> = HashMap::new();
    let mut labels = Vec::with_capacity(res * res);
    let mut code = Vec::with_capacity(m.hidden_neuron_count());
    for row in grid.points().rows() {
        code.clear();
        m.region_code_into(row, &mut code)?;
        let restricted = match selector {
            LayerSelector::All => &code[..],
            LayerSelector::LastHidden => &code[code.len() - last_width..],
        };
        let next = ids.len() as u32;
        let id = *ids.entry(restricted.to_vec()).or_insert(next);
        labels.push(id);
    }
    let mut mask = vec![false; res * res];
    for gy in 0..res {
        for gx in 0..res {
            let here = gy * res + gx;
            if gx + 1 < res {
                let right = here + 1;
                if labels[here] != labels[right] {
                    mask[here] = true;
                    mask[right] = true;
                }
            }
            if gy + 1 < res {
                let below = here + res;
                if labels[here] != labels[below] {
                    mask[here] = true;
                    mask[below] = true;
                }
            }
        }
    }
    Ok(BoundaryMap { labels, mask, resolution: res, region_count: ids.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{softmax, Activation};
    use crate::trajectory::{data_fitted_ellipse, plane_grid, random_ellipse, translation_trajectory};
    use ndarray::{array, Array1, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_class_identity_norm_is_half() {
        let m =
            Mlp::<f64>::from_weights(vec![array![[1.0, 0.0], [0.0, 1.0]]], Activation::Relu)
                .unwrap();
        let norm = jacobian_norm(&m, array![0.0, 0.0].view()).unwrap();
        assert!((norm - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturated_softmax_kills_the_norm() {
        // One logit dominates by 60; σ_y(1−σ_y) ≈ e^{−60} wipes out the matrix.
        let m = Mlp::from_weights(vec![array![[60.0, 0.0], [0.0, 1.0]]], Activation::Relu).unwrap();
        let norm = jacobian_norm(&m, array![1.0, 0.0].view()).unwrap();
        assert!(norm < 1e-15, "norm {norm}");
    }

    #[test]
    fn norm_matches_monte_carlo_perturbation_response() {
        let m = Mlp::<f64>::init(&[6, 10, 4], Activation::Tanh, 1.0, 12).unwrap();
        let x = array![0.4, -0.9, 1.2, 0.0, -0.4, 0.7];
        let norm = jacobian_norm(&m, x.view()).unwrap();

        let eps = 1e-8f64;
        let draws = 10_000;
        let base = softmax(m.forward(x.view()).unwrap().view());
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut acc = 0.0;
        for _ in 0..draws {
            let delta = Array1::from_iter(
                (0..6).map(|_| eps.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)),
            );
            let moved = softmax(m.forward((&x + &delta).view()).unwrap().view());
            acc += (&moved - &base).iter().map(|v| v * v).sum::<f64>();
        }
        let mc_norm = (acc / draws as f64 / eps).sqrt();
        let rel = (mc_norm - norm).abs() / norm;
        assert!(rel < 0.05, "Monte-Carlo {mc_norm} vs analytic {norm} ({rel:.3} rel)");
    }

    #[test]
    fn mean_norm_over_points() {
        let m = Mlp::<f64>::init(&[4, 7, 3], Activation::Relu, 1.0, 5).unwrap();
        let p = array![[0.3, -0.2, 0.8, -1.1]];
        let single = mean_jacobian_norm(&m, p.view()).unwrap();
        assert_eq!(single.point_count, 1);
        assert_eq!(single.mean_norm, single.per_point_norms[0]);

        let doubled = array![[0.3, -0.2, 0.8, -1.1], [0.3, -0.2, 0.8, -1.1]];
        let dup = mean_jacobian_norm(&m, doubled.view()).unwrap();
        assert_eq!(dup.mean_norm, single.mean_norm);

        let empty = Array2::<f64>::zeros((0, 4));
        assert!(matches!(mean_jacobian_norm(&m, empty.view()), Err(Error::Parameter(_))));
    }

    #[test]
    fn mean_norm_matches_a_naive_loop_bit_for_bit() {
        let m = Mlp::<f64>::init(&[5, 9, 6, 4], Activation::HardSigmoid, 1.0, 8).unwrap();
        let t = random_ellipse::<f64>(5, 40, 4).unwrap();
        let report = mean_jacobian_norm(&m, t.points()).unwrap();
        let mut acc = 0.0;
        for i in 0..t.k() {
            let n = jacobian_norm(&m, t.point(i)).unwrap();
            assert_eq!(n.to_bits(), report.per_point_norms[i].to_bits());
            acc += n;
        }
        assert_eq!((acc / 40.0).to_bits(), report.mean_norm.to_bits());
    }

    #[test]
    fn constant_trajectory_has_no_transitions() {
        let m = Mlp::<f64>::init(&[6, 8, 5, 3], Activation::Relu, 1.0, 2).unwrap();
        let img = Array1::from_elem(6, 0.4);
        let t = translation_trajectory(img.view(), 3, 2, 12).unwrap();
        let counts = count_transitions(&m, &t).unwrap();
        assert_eq!(counts.total, 0);
        assert!(counts.per_neuron.iter().all(|&c| c == 0));
        assert!(counts.per_arc.iter().all(|&c| c == 0));
        assert_eq!(counts.k_used, 12);
    }

    fn single_relu_net() -> Mlp<f64> {
        // One hidden ReLU: f(x) = w2 · relu(w1 · x).
        let w1 = array![[0.8, -0.5, 0.3]];
        let w2 = array![[1.5], [-0.7]];
        Mlp::from_weights(vec![w1, w2], Activation::Relu).unwrap()
    }

    #[test]
    fn single_relu_crossing_ellipse_transitions_twice() {
        let m = single_relu_net();
        let t = random_ellipse::<f64>(3, 64, 7).unwrap();
        let counts = count_transitions(&m, &t).unwrap();
        // w·z(θ) is a sinusoid through zero: exactly two sign changes.
        assert_eq!(counts.total, 2);
        assert_eq!(counts.per_neuron, vec![2]);
        assert_eq!(counts.per_arc.iter().sum::<u64>(), 2);
    }

    #[test]
    fn doubling_k_never_loses_transitions() {
        for seed in 0..4 {
            let m = Mlp::<f64>::init(&[4, 12, 8, 3], Activation::HardTanh, 1.0, seed).unwrap();
            for k in [16usize, 64, 256] {
                let coarse = random_ellipse::<f64>(4, k, seed + 50).unwrap();
                let fine = random_ellipse::<f64>(4, 2 * k, seed + 50).unwrap();
                let tc = count_transitions(&m, &coarse).unwrap().total;
                let tf = count_transitions(&m, &fine).unwrap().total;
                assert!(tf >= tc, "k {k}: fine {tf} < coarse {tc}");
            }
        }
    }

    #[test]
    fn transitions_are_invariant_under_index_rotation() {
        let m = Mlp::<f64>::init(&[6, 10, 4], Activation::Relu6, 1.2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let img = Array1::from_iter((0..6).map(|_| rng.gen_range(-1.0..1.0)));
        let base = translation_trajectory(img.view(), 3, 2, 6).unwrap();
        // Starting from a cyclic shift rotates the identical sample set.
        let shifted = base.point(2).to_owned();
        let rotated = translation_trajectory(shifted.view(), 3, 2, 6).unwrap();
        let a = count_transitions(&m, &base).unwrap();
        let b = count_transitions(&m, &rotated).unwrap();
        assert_eq!(a.total, b.total);
        assert_eq!(a.per_neuron, b.per_neuron);
        let mut rotated_arcs = b.per_arc.clone();
        rotated_arcs.rotate_right(2);
        assert_eq!(a.per_arc, rotated_arcs);
    }

    #[test]
    fn mean_transitions_over_trajectories() {
        let m = Mlp::<f64>::init(&[4, 8, 3], Activation::Relu, 1.0, 1).unwrap();
        let t1 = random_ellipse::<f64>(4, 32, 1).unwrap();
        let t2 = random_ellipse::<f64>(4, 32, 2).unwrap();
        let single = mean_transitions(&m, std::slice::from_ref(&t1)).unwrap();
        assert_eq!(single, count_transitions(&m, &t1).unwrap().total as f64);
        let dup = mean_transitions(&m, &[t1.clone(), t1.clone()]).unwrap();
        assert_eq!(dup, single);
        let both = mean_transitions(&m, &[t1.clone(), t2.clone()]).unwrap();
        let manual = (count_transitions(&m, &t1).unwrap().total as f64
            + count_transitions(&m, &t2).unwrap().total as f64)
            / 2.0;
        assert_eq!(both, manual);
        assert!(matches!(mean_transitions(&m, &[]), Err(Error::Parameter(_))));
    }

    #[test]
    fn profile_windows_partition_the_total() {
        let m = Mlp::<f64>::init(&[5, 12, 4], Activation::Relu, 1.0, 6).unwrap();
        let t = random_ellipse::<f64>(5, 48, 9).unwrap();
        let counts = count_transitions(&m, &t).unwrap();
        for window in [1usize, 4, 12, 48] {
            let profile = sensitivity_profile(&m, &t, window).unwrap();
            assert_eq!(profile.window_transitions.len(), 48 / window);
            assert_eq!(profile.window_transitions.iter().sum::<u64>(), counts.total);
            assert_eq!(profile.jacobian_norms.len(), 48);
        }
        let one = sensitivity_profile(&m, &t, 48).unwrap();
        assert_eq!(one.window_transitions, vec![counts.total]);
        // Per-sample norms agree with the pointwise metric bit-for-bit.
        let full = sensitivity_profile(&m, &t, 48).unwrap();
        for i in 0..48 {
            let want = jacobian_norm(&m, t.point(i)).unwrap();
            assert_eq!(full.jacobian_norms[i].to_bits(), want.to_bits());
        }
        assert!(matches!(sensitivity_profile(&m, &t, 5), Err(Error::Parameter(_))));
        assert!(matches!(sensitivity_profile(&m, &t, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn linear_network_has_zero_curvature() {
        let m = Mlp::from_weights(vec![array![[1.0, 2.0, 0.5], [0.3, -1.0, 0.8]]], Activation::Relu)
            .unwrap();
        let t = random_ellipse::<f64>(3, 24, 5).unwrap();
        assert_eq!(curvature_estimate(&m, &t).unwrap(), 0.0);
    }

    #[test]
    fn one_region_trajectory_has_zero_curvature_and_transitions() {
        // Positive weights and an all-positive neighborhood keep every
        // preactivation strictly positive: a single linear region.
        let w1: Array2<f64> = array![[0.6, 0.9, 0.7], [1.1, 0.5, 0.8]];
        let w2 = array![[0.9, 0.4], [0.2, 1.0]];
        let m = Mlp::from_weights(vec![w1, w2], Activation::Relu).unwrap();
        let base = array![5.0, 6.0, 7.0];
        let x1 = &base + &array![0.2, 0.0, -0.1];
        let x2 = &base + &array![-0.15, 0.1, 0.05];
        let x3 = &base + &array![0.0, -0.2, 0.1];
        let t = data_fitted_ellipse(x1.view(), x2.view(), x3.view(), 24, 0).unwrap();
        assert_eq!(count_transitions(&m, &t).unwrap().total, 0);
        let curvature = curvature_estimate(&m, &t).unwrap();
        assert!(curvature.abs() < 1e-9);
    }

    #[test]
    fn single_relu_curvature_matches_the_two_region_closed_form() {
        let m = single_relu_net();
        let t = random_ellipse::<f64>(3, 256, 7).unwrap();
        // Two region crossings, each contributing ½‖J_active − 0‖_F, where
        // J_active = w2 w1 is the active piece's Jacobian.
        let jac = array![[1.5], [-0.7]].dot(&array![[0.8, -0.5, 0.3]]);
        let want = jac.iter().map(|v| v * v).sum::<f64>().sqrt();
        let got = curvature_estimate(&m, &t).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn boundary_map_matches_a_brute_force_neighbor_scan() {
        let m = Mlp::<f64>::init(&[5, 7, 6, 3], Activation::Relu, 1.0, 14).unwrap();
        let t = random_ellipse::<f64>(5, 4, 77).unwrap();
        let grid = plane_grid(t.point(0), t.point(1), t.point(2), 17).unwrap();
        for selector in [LayerSelector::LastHidden, LayerSelector::All] {
            let map = boundary_map(&m, &grid, selector).unwrap();
            assert_eq!(map.labels.len(), 17 * 17);
            // Independent oracle: recompute codes pointwise and compare every
            // 4-neighbor pair.
            let last = *m.hidden_widths().last().unwrap();
            let codes: Vec<Vec<u8>> = grid
                .points()
                .rows()
                .into_iter()
                .map(|r| {
                    let full = m.region_code(r).unwrap().codes().to_vec();
                    match selector {
                        LayerSelector::All => full,
                        LayerSelector::LastHidden => full[full.len() - last..].to_vec(),
                    }
                })
                .collect();
            let mut want_mask = vec![false; 17 * 17];
            for gy in 0..17 {
                for gx in 0..17 {
                    let here = gy * 17 + gx;
                    let mut differs = false;
                    if gx > 0 && codes[here] != codes[here - 1] {
                        differs = true;
                    }
                    if gx + 1 < 17 && codes[here] != codes[here + 1] {
                        differs = true;
                    }
                    if gy > 0 && codes[here] != codes[here - 17] {
                        differs = true;
                    }
                    if gy + 1 < 17 && codes[here] != codes[here + 17] {
                        differs = true;
                    }
                    want_mask[here] = differs;
                }
            }
            assert_eq!(map.mask, want_mask);
            // Labels refine codes: equal labels ⇔ equal codes.
            for i in 0..codes.len() {
                for j in i + 1..codes.len() {
                    assert_eq!(map.labels[i] == map.labels[j], codes[i] == codes[j]);
                }
            }
        }
    }

    #[test]
    fn zero_network_yields_one_region_and_no_boundaries() {
        let m = Mlp::from_weights(
            vec![Array2::<f64>::zeros((4, 3)), Array2::<f64>::zeros((2, 4))],
            Activation::Relu,
        )
        .unwrap();
        let grid = plane_grid(
            array![1.0, 0.0, 0.0].view(),
            array![0.0, 1.0, 0.0].view(),
            array![0.0, 0.0, 1.0].view(),
            9,
        )
        .unwrap();
        let map = boundary_map(&m, &grid, LayerSelector::All).unwrap();
        assert_eq!(map.region_count, 1);
        assert!(map.mask.iter().all(|&b| !b));
        assert!(map.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn different_weights_produce_different_masks() {
        let a = Mlp::<f64>::init(&[4, 16, 3], Activation::Relu, 1.0, 100).unwrap();
        let b = Mlp::<f64>::init(&[4, 16, 3], Activation::Relu, 1.0, 101).unwrap();
        let grid = plane_grid(
            array![2.0, 0.0, 0.0, 0.0].view(),
            array![0.0, 2.0, 0.0, 0.0].view(),
            array![0.0, 0.0, 2.0, 0.0].view(),
            25,
        )
        .unwrap();
        let map_a = boundary_map(&a, &grid, LayerSelector::All).unwrap();
        let map_b = boundary_map(&b, &grid, LayerSelector::All).unwrap();
        assert_ne!(map_a.mask, map_b.mask);
    }

    proptest! {
        #[test]
        fn per_neuron_counts_are_even_and_consistent(
            seed in 0u64..200,
            d in 3usize..6,
            hidden in 2usize..8,
            k in 4usize..40,
            act_idx in 0usize..5,
        ) {
            let activation = Activation::ALL[act_idx];
            let m = Mlp::<f64>::init(&[d, hidden, hidden, 3], activation, 1.0, seed).unwrap();
            let t = random_ellipse::<f64>(d, k, seed ^ 0xabcd).unwrap();
            let counts = count_transitions(&m, &t).unwrap();
            for &c in &counts.per_neuron {
                prop_assert_eq!(c % 2, 0);
            }
            prop_assert_eq!(counts.per_neuron.iter().sum::<u64>(), counts.total);
            prop_assert_eq!(counts.per_arc.iter().sum::<u64>(), counts.total);
            prop_assert_eq!(counts.per_arc.len(), k);
        }
    }
}
