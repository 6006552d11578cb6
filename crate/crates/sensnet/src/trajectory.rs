//! Closed input-space trajectories and planar probe grids.
//!
//! All trajectories are closed loops of `k ≥ 3` equidistant-in-parameter
//! samples; metric code is expected to treat index arithmetic modulo `k`.
//! Three generators are provided — a random origin-centered ellipse whose
//! expected squared point norm matches standardized data, an ellipse fitted
//! through three given data points, and an interpolated loop of cyclic
//! horizontal image translations — plus a planar grid spanned by three data
//! points for region-boundary visualization.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::translate_wrap;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Anchor phases of the fitted ellipse, in sampling order.
const ANCHOR_PHASES: [f64; 3] = [PI / 3.0, PI, 5.0 * PI / 3.0];

/// Plane coordinates of the probe-grid triangle: circumradius 0.8 at angles
/// π/2, 7π/6, 11π/6.
const TRIANGLE_ANGLES: [f64; 3] = [PI / 2.0, 7.0 * PI / 6.0, 11.0 * PI / 6.0];
const TRIANGLE_RADIUS: f64 = 0.8;

/// A closed loop of `k` samples in input space.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<F> {
    points: Array2<F>,
    closed: bool,
    anchor_indices: Option<Vec<usize>>,
    k: usize,
}

impl<F: Scalar> Trajectory<F> {
    fn new(points: Array2<F>, anchor_indices: Option<Vec<usize>>) -> Result<Self> {
        let k = points.nrows();
        if k < 3 {
            return Err(Error::Sampling(format!("a closed trajectory needs k ≥ 3, got {k}")));
        }
        Ok(Self { points, closed: true, anchor_indices, k })
    }

    /// Sample count `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Input dimensionality of every sample.
    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Always true: every generator here produces closed loops.
    pub fn closed(&self) -> bool {
        self.closed
    }

    /// All samples as a `k×d` view.
    pub fn points(&self) -> ArrayView2<'_, F> {
        self.points.view()
    }

    /// Sample `i`.
    pub fn point(&self, i: usize) -> ArrayView1<'_, F> {
        self.points.row(i)
    }

    /// Indices of samples that coincide with supplied data points, when the
    /// generator placed any.
    pub fn anchor_indices(&self) -> Option<&[usize]> {
        self.anchor_indices.as_deref()
    }
}

/// Random origin-centered ellipse `z(θ) = a cos θ + b sin θ` with `a`, `b`
/// standard-normal `d`-vectors, sampled at `k` equidistant angles.
///
/// `E‖z(θ)‖² = d`, matching per-example standardized data. For even `k` the
/// antipodal sample is stored as the exact negation, so the central symmetry
/// `z(θ) + z(θ+π) = 0` holds bitwise.
pub fn random_ellipse<F: Scalar>(d: usize, k: usize, seed: u64) -> Result<Trajectory<F>> {
    if d < 2 {
        return Err(Error::Parameter(format!("random ellipse needs d ≥ 2, got {d}")));
    }
    if k < 3 {
        return Err(Error::Sampling(format!("a closed trajectory needs k ≥ 3, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let b: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut points = Array2::<F>::zeros((k, d));
    let direct = if k % 2 == 0 { k / 2 } else { k };
    for i in 0..direct {
        let theta = 2.0 * PI * i as f64 / k as f64;
        let (sin, cos) = theta.sin_cos();
        for j in 0..d {
            points[(i, j)] = F::of(a[j] * cos + b[j] * sin);
        }
    }
    if k % 2 == 0 {
        for i in direct..k {
            for j in 0..d {
                points[(i, j)] = -points[(i - direct, j)];
            }
        }
    }
    Trajectory::new(points, None)
}

/// Solves a 3×3 linear system by Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let mut piv = col;
        for r in col + 1..3 {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let factor = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let mut acc = b[r];
        for c in r + 1..3 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    x
}

fn check_distinct_anchors<F: Scalar>(
    x1: ArrayView1<'_, F>,
    x2: ArrayView1<'_, F>,
    x3: ArrayView1<'_, F>,
) -> Result<()> {
    for (i, j, equal) in [(1, 2, x1 == x2), (1, 3, x1 == x3), (2, 3, x2 == x3)] {
        if equal {
            return Err(Error::Anchor(format!("anchors {i} and {j} are identical")));
        }
    }
    Ok(())
}

/// Ellipse `z(θ) = c + u cos θ + v sin θ` passing through `x1`, `x2`, `x3` at
/// phases π/3, π, 5π/3, sampled at `k` equidistant angles.
///
/// The coefficients solve a 3×3 linear system per coordinate. When `k` is
/// divisible by 6 the anchor phases land on sample indices `k/6`, `k/2`,
/// `5k/6`, which are reported as `anchor_indices`. The `seed` parameter is
/// accepted for signature uniformity with the other generators and unused:
/// the construction is fully determined by the anchors.
pub fn data_fitted_ellipse<F: Scalar>(
    x1: ArrayView1<'_, F>,
    x2: ArrayView1<'_, F>,
    x3: ArrayView1<'_, F>,
    k: usize,
    seed: u64,
) -> Result<Trajectory<F>> {
    let _ = seed;
    let d = x1.len();
    if x2.len() != d || x3.len() != d {
        return Err(Error::Shape(format!(
            "anchor lengths differ: {d}, {}, {}",
            x2.len(),
            x3.len()
        )));
    }
    check_distinct_anchors(x1, x2, x3)?;
    if k < 3 {
        return Err(Error::Sampling(format!("a closed trajectory needs k ≥ 3, got {k}")));
    }
    let matrix = ANCHOR_PHASES.map(|phase| [1.0, phase.cos(), phase.sin()]);
    // Solve for (c_j, u_j, v_j) per coordinate.
    let mut c = vec![0.0f64; d];
    let mut u = vec![0.0f64; d];
    let mut v = vec![0.0f64; d];
    for j in 0..d {
        let rhs = [x1[j].as_f64(), x2[j].as_f64(), x3[j].as_f64()];
        let [cj, uj, vj] = solve3(matrix, rhs);
        c[j] = cj;
        u[j] = uj;
        v[j] = vj;
    }
    let mut points = Array2::<F>::zeros((k, d));
    for i in 0..k {
        let theta = 2.0 * PI * i as f64 / k as f64;
        let (sin, cos) = theta.sin_cos();
        for j in 0..d {
            points[(i, j)] = F::of(c[j] + u[j] * cos + v[j] * sin);
        }
    }
    let anchors = if k % 6 == 0 {
        Some(vec![k / 6, k / 2, 5 * k / 6])
    } else {
        None
    };
    Trajectory::new(points, anchors)
}

/// Closed loop through all `width` cyclic horizontal translations of `image`,
/// with linear interpolation between consecutive shifts.
///
/// Shift `j` sits at parameter `j/width` of the loop; the loop closes from
/// shift `width−1` back to shift 0. Sample `i` interpolates between the two
/// shifts bracketing parameter `i·width/k`. Every sample is a convex
/// combination of two translations, so its entry sum equals the image's.
pub fn translation_trajectory<F: Scalar>(
    image: ArrayView1<'_, F>,
    width: usize,
    height: usize,
    k: usize,
) -> Result<Trajectory<F>> {
    let d = image.len();
    if width == 0 || height == 0 || width * height != d {
        return Err(Error::Shape(format!(
            "image of length {d} is not {width}×{height}"
        )));
    }
    if k < width {
        return Err(Error::Sampling(format!(
            "k = {k} cannot visit all {width} horizontal shifts"
        )));
    }
    if k < 3 {
        return Err(Error::Sampling(format!("a closed trajectory needs k ≥ 3, got {k}")));
    }
    let img = image.as_standard_layout();
    let img = img.as_slice().expect("standard layout");
    let mut shifts = Vec::with_capacity(width);
    for dx in 0..width {
        let mut out = vec![F::zero(); d];
        translate_wrap(img, width, height, dx as i64, 0, &mut out);
        shifts.push(out);
    }
    let mut points = Array2::<F>::zeros((k, d));
    let mut anchors = Vec::new();
    for i in 0..k {
        // Parameter in shift units: u ∈ [0, width).
        let numer = i * width;
        let j = numer / k;
        let frac = F::of((numer % k) as f64 / k as f64);
        if numer % k == 0 {
            anchors.push(i);
        }
        let (lo, hi) = (&shifts[j], &shifts[(j + 1) % width]);
        for col in 0..d {
            points[(i, col)] = (F::one() - frac) * lo[col] + frac * hi[col];
        }
    }
    Trajectory::new(points, Some(anchors))
}

/// A planar probe grid through three data points, for boundary visualization.
#[derive(Debug, Clone)]
pub struct PlaneGrid<F> {
    points: Array2<F>,
    coords: Vec<(f64, f64)>,
    resolution: usize,
    origin: Vec<f64>,
    e_x: Vec<f64>,
    e_y: Vec<f64>,
}

impl<F: Scalar> PlaneGrid<F> {
    /// All grid points as a `resolution²×d` view, row-major with the vertical
    /// plane coordinate outermost.
    pub fn points(&self) -> ArrayView2<'_, F> {
        self.points.view()
    }

    /// Plane coordinates `(u, v) ∈ [−1,1]²` of each grid row.
    pub fn coords(&self) -> &[(f64, f64)] {
        &self.coords
    }

    /// Grid side length; the grid holds `resolution²` points.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Flat row index of grid cell `(gx, gy)`.
    pub fn index_of(&self, gx: usize, gy: usize) -> usize {
        gy * self.resolution + gx
    }

    /// Image of an arbitrary plane point under the affine embedding.
    pub fn map(&self, u: f64, v: f64) -> Array1<F> {
        Array1::from_iter(
            self.origin
                .iter()
                .zip(&self.e_x)
                .zip(&self.e_y)
                .map(|((&o, &ex), &ey)| F::of(o + u * ex + v * ey)),
        )
    }
}

/// Builds the affine map sending an origin-centered equilateral triangle with
/// circumradius 0.8 (vertices at plane angles π/2, 7π/6, 11π/6) to
/// `(x1, x2, x3)`, and returns the image of the uniform
/// `resolution × resolution` grid on `[−1,1]²`.
///
/// The plane origin is the triangle's circumcenter, so it maps to the anchor
/// centroid.
pub fn plane_grid<F: Scalar>(
    x1: ArrayView1<'_, F>,
    x2: ArrayView1<'_, F>,
    x3: ArrayView1<'_, F>,
    resolution: usize,
) -> Result<PlaneGrid<F>> {
    let d = x1.len();
    if x2.len() != d || x3.len() != d {
        return Err(Error::Shape(format!(
            "anchor lengths differ: {d}, {}, {}",
            x2.len(),
            x3.len()
        )));
    }
    check_distinct_anchors(x1, x2, x3)?;
    if resolution < 2 {
        return Err(Error::Parameter(format!(
            "grid resolution must be ≥ 2, got {resolution}"
        )));
    }
    let triangle = TRIANGLE_ANGLES.map(|a| (TRIANGLE_RADIUS * a.cos(), TRIANGLE_RADIUS * a.sin()));
    let matrix = triangle.map(|(px, py)| [1.0, px, py]);
    let mut origin = vec![0.0f64; d];
    let mut e_x = vec![0.0f64; d];
    let mut e_y = vec![0.0f64; d];
    for j in 0..d {
        let rhs = [x1[j].as_f64(), x2[j].as_f64(), x3[j].as_f64()];
        let [o, ex, ey] = solve3(matrix, rhs);
        origin[j] = o;
        e_x[j] = ex;
        e_y[j] = ey;
    }
    let mut points = Array2::<F>::zeros((resolution * resolution, d));
    let mut coords = Vec::with_capacity(resolution * resolution);
    let step = 2.0 / (resolution - 1) as f64;
    for gy in 0..resolution {
        let v = -1.0 + step * gy as f64;
        for gx in 0..resolution {
            let u = -1.0 + step * gx as f64;
            let row = gy * resolution + gx;
            for j in 0..d {
                points[(row, j)] = F::of(origin[j] + u * e_x[j] + v * e_y[j]);
            }
            coords.push((u, v));
        }
    }
    Ok(PlaneGrid { points, coords, resolution, origin, e_x, e_y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn random_ellipse_is_centrally_symmetric() {
        let t = random_ellipse::<f64>(7, 10, 3).unwrap();
        for i in 0..5 {
            for j in 0..7 {
                assert_eq!(t.point(i)[j], -t.point(i + 5)[j]);
            }
        }
    }

    #[test]
    fn random_ellipse_matches_expected_squared_norm() {
        let (d, k, ellipses) = (20, 12, 1000);
        let mut total = 0.0;
        for seed in 0..ellipses {
            let t = random_ellipse::<f64>(d, k, seed).unwrap();
            for i in 0..k {
                total += t.point(i).iter().map(|v| v * v).sum::<f64>();
            }
        }
        let mean = total / (ellipses as usize * k) as f64;
        let d = d as f64;
        assert!((mean - d).abs() < 0.05 * d, "mean squared norm {mean}, expected ≈ {d}");
    }

    #[test]
    fn random_ellipse_is_deterministic_in_seed() {
        let a = random_ellipse::<f64>(5, 9, 42).unwrap();
        let b = random_ellipse::<f64>(5, 9, 42).unwrap();
        let c = random_ellipse::<f64>(5, 9, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn random_ellipse_rejects_degenerate_parameters() {
        assert!(matches!(random_ellipse::<f64>(1, 10, 0), Err(Error::Parameter(_))));
        assert!(matches!(random_ellipse::<f64>(4, 2, 0), Err(Error::Sampling(_))));
    }

    fn anchors3() -> (Array1<f64>, Array1<f64>, Array1<f64>) {
        (
            array![1.0, -2.0, 0.5, 3.0],
            array![-1.5, 0.7, 2.2, -0.3],
            array![0.4, 1.1, -1.8, 0.9],
        )
    }

    #[test]
    fn fitted_ellipse_recovers_anchors_at_their_indices() {
        let (x1, x2, x3) = anchors3();
        let t = data_fitted_ellipse(x1.view(), x2.view(), x3.view(), 12, 0).unwrap();
        assert_eq!(t.anchor_indices(), Some(&[2usize, 6, 10][..]));
        for (idx, anchor) in [(2, &x1), (6, &x2), (10, &x3)] {
            for j in 0..4 {
                assert!(
                    (t.point(idx)[j] - anchor[j]).abs() < 1e-9,
                    "anchor at index {idx}, coord {j}"
                );
            }
        }
        // Non-multiple-of-6 sampling still works but reports no anchors.
        let t = data_fitted_ellipse(x1.view(), x2.view(), x3.view(), 10, 0).unwrap();
        assert_eq!(t.anchor_indices(), None);
    }

    #[test]
    fn fitted_ellipse_handles_collinear_anchors() {
        let x1: Array1<f64> = array![0.0, 0.0, 0.0];
        let x2 = array![1.0, 2.0, -1.0];
        let x3 = array![2.0, 4.0, -2.0];
        let t = data_fitted_ellipse(x1.view(), x2.view(), x3.view(), 12, 0).unwrap();
        for (idx, anchor) in [(2, &x1), (6, &x2), (10, &x3)] {
            for j in 0..3 {
                assert!((t.point(idx)[j] - anchor[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cyclic_anchor_permutation_shifts_the_phase() {
        let (x1, x2, x3) = anchors3();
        let k = 12;
        let base = data_fitted_ellipse(x1.view(), x2.view(), x3.view(), k, 0).unwrap();
        let rotated = data_fitted_ellipse(x2.view(), x3.view(), x1.view(), k, 0).unwrap();
        // The permuted ellipse is the same curve advanced by 2π/3 = k/3 samples.
        for i in 0..k {
            let shifted = base.point((i + k / 3) % k);
            for j in 0..4 {
                assert!((rotated.point(i)[j] - shifted[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn duplicate_anchors_are_rejected() {
        let (x1, _, x3) = anchors3();
        assert!(matches!(
            data_fitted_ellipse(x1.view(), x1.view(), x3.view(), 12, 0),
            Err(Error::Anchor(_))
        ));
        assert!(matches!(
            plane_grid(x1.view(), x3.view(), x3.view(), 8),
            Err(Error::Anchor(_))
        ));
    }

    #[test]
    fn translation_with_k_equal_width_gives_exact_shifts() {
        // 3×2 image with distinct entries.
        let img = array![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = translation_trajectory(img.view(), 3, 2, 3).unwrap();
        assert_eq!(t.point(0).to_vec(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        // dx = 1 moves each pixel one column right, cyclically.
        assert_eq!(t.point(1).to_vec(), vec![3.0, 1.0, 2.0, 6.0, 4.0, 5.0]);
        assert_eq!(t.point(2).to_vec(), vec![2.0, 3.0, 1.0, 5.0, 6.0, 4.0]);
        assert_eq!(t.anchor_indices(), Some(&[0usize, 1, 2][..]));
    }

    #[test]
    fn translation_from_a_pre_shifted_image_rotates_the_point_set() {
        let img = array![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let base = translation_trajectory(img.view(), 3, 2, 3).unwrap();
        let shifted_img = base.point(1).to_owned();
        let rotated = translation_trajectory(shifted_img.view(), 3, 2, 3).unwrap();
        for i in 0..3 {
            assert_eq!(rotated.point(i), base.point((i + 1) % 3));
        }
    }

    #[test]
    fn constant_image_gives_a_constant_loop() {
        let img = Array1::from_elem(8, 0.7);
        let t = translation_trajectory(img.view(), 4, 2, 16).unwrap();
        for i in 0..16 {
            assert!(t.point(i).iter().all(|&v| v == 0.7));
        }
    }

    #[test]
    fn translation_interpolates_midpoints() {
        let img: Array1<f64> = array![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let t = translation_trajectory(img.view(), 3, 2, 6).unwrap();
        assert_eq!(t.anchor_indices(), Some(&[0usize, 2, 4][..]));
        // Odd samples are midpoints of consecutive shifts.
        let base = translation_trajectory(img.view(), 3, 2, 3).unwrap();
        for (mid, (a, b)) in [(1, (0, 1)), (3, (1, 2)), (5, (2, 0))] {
            for j in 0..6 {
                let want = 0.5 * (base.point(a)[j] + base.point(b)[j]);
                assert!((t.point(mid)[j] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn translation_rejects_too_few_samples() {
        let img = Array1::from_elem(12, 1.0);
        assert!(matches!(
            translation_trajectory(img.view(), 4, 3, 3),
            Err(Error::Sampling(_))
        ));
        assert!(matches!(
            translation_trajectory(img.view(), 5, 2, 10),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn plane_grid_maps_triangle_vertices_to_anchors() {
        let (x1, x2, x3) = anchors3();
        let grid = plane_grid(x1.view(), x2.view(), x3.view(), 9).unwrap();
        assert_eq!(grid.points().nrows(), 81);
        assert_eq!(grid.coords().len(), 81);
        for (angle, anchor) in TRIANGLE_ANGLES.iter().zip([&x1, &x2, &x3]) {
            let mapped = grid.map(TRIANGLE_RADIUS * angle.cos(), TRIANGLE_RADIUS * angle.sin());
            for j in 0..4 {
                assert!((mapped[j] - anchor[j]).abs() < 1e-9);
            }
        }
        // The plane origin is the circumcenter, which maps to the centroid.
        let center = grid.map(0.0, 0.0);
        for j in 0..4 {
            let centroid = (x1[j] + x2[j] + x3[j]) / 3.0;
            assert!((center[j] - centroid).abs() < 1e-9);
        }
        // Corner rows carry the expected plane coordinates.
        assert_eq!(grid.coords()[0], (-1.0, -1.0));
        assert_eq!(grid.coords()[grid.index_of(8, 0)], (1.0, -1.0));
        assert_eq!(grid.coords()[grid.index_of(0, 8)], (-1.0, 1.0));
        assert_eq!(grid.coords()[80], (1.0, 1.0));
    }

    proptest! {
        #[test]
        fn translation_preserves_entry_sums(
            w in 2usize..5,
            h in 2usize..4,
            mult in 1usize..4,
            seed in 0u64..50,
        ) {
            let d = w * h;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = Array1::from_iter((0..d).map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                v
            }));
            let k = (w * mult).max(3);
            let t = translation_trajectory(img.view(), w, h, k).unwrap();
            let want: f64 = img.sum();
            for i in 0..k {
                let got: f64 = t.point(i).sum();
                prop_assert!((got - want).abs() < 1e-12);
            }
        }

        #[test]
        fn even_ellipses_negate_antipodes(d in 2usize..6, half_k in 2usize..8, seed in 0u64..20) {
            let k = 2 * half_k;
            let t = random_ellipse::<f64>(d, k, seed).unwrap();
            for i in 0..half_k {
                for j in 0..d {
                    prop_assert_eq!(t.point(i)[j], -t.point(i + half_k)[j]);
                }
            }
        }
    }
}
