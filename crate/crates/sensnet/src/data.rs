//! Dataset ingestion, per-example standardization, augmentation, label
//! randomization, and synthetic data for tests.
//!
//! Images arrive as IDX files (the big-endian binary layout MNIST ships in),
//! are scaled to `[0, 1]`, and are then standardized per example to zero mean
//! and unit population variance, which places every input on the sphere of
//! radius `√d`. Augmentation operates on the image layout (row-major
//! `height × width`) with cyclic translations and horizontal flips.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A labeled classification dataset with inputs as rows of an `N×d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<F> {
    name: String,
    inputs: Array2<F>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl<F: Scalar> Dataset<F> {
    /// Builds a dataset, validating that inputs are finite and non-empty and
    /// that every label lies in `[0, n_classes)`.
    pub fn new(
        name: impl Into<String>,
        inputs: Array2<F>,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(Error::Shape("dataset must have N ≥ 1 and d ≥ 1".into()));
        }
        if inputs.nrows() != labels.len() {
            return Err(Error::Consistency(format!(
                "{} input rows but {} labels",
                inputs.nrows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Label(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset inputs contain a non-finite entry".into()));
        }
        Ok(Self { name: name.into(), inputs, labels, n_classes })
    }

    /// Dataset identifier (file stem for IDX loads, generator name otherwise).
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of examples `N`.
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    /// True when the dataset holds no examples (unreachable for constructed sets).
    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Input dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    /// Number of classes `n`.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// All inputs as an `N×d` view.
    pub fn inputs(&self) -> ArrayView2<'_, F> {
        self.inputs.view()
    }

    /// Input row `i`.
    pub fn input(&self, i: usize) -> ArrayView1<'_, F> {
        self.inputs.row(i)
    }

    /// All labels.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Returns the dataset with every example standardized; fails if any
    /// example is constant.
    pub fn standardized(&self) -> Result<Self> {
        let mut out = self.inputs.clone();
        for mut row in out.rows_mut() {
            let std = standardize_in_place(row.view_mut())?;
            debug_assert!(std.is_finite());
        }
        Ok(Self {
            name: self.name.clone(),
            inputs: out,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        })
    }

    /// The first `n` examples as a new dataset (class counts may differ from
    /// the parent; `n_classes` is preserved).
    pub fn take(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::Parameter(format!(
                "cannot take {n} examples from a dataset of {}",
                self.len()
            )));
        }
        Ok(Self {
            name: self.name.clone(),
            inputs: self.inputs.slice(ndarray::s![..n, ..]).to_owned(),
            labels: self.labels[..n].to_vec(),
            n_classes: self.n_classes,
        })
    }

    /// The examples at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Parameter("empty index selection".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::Parameter(format!(
                "index {bad} out of range for {} examples",
                self.len()
            )));
        }
        let inputs = ndarray::stack(
            ndarray::Axis(0),
            &indices.iter().map(|&i| self.inputs.row(i)).collect::<Vec<_>>(),
        )
        .expect("rows share a width");
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Self { name: self.name.clone(), inputs, labels, n_classes: self.n_classes })
    }
}

/// Augmentation settings: cyclic translation up to `max_translate_px` per axis
/// followed by a horizontal flip with probability `hflip_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub max_translate_px: usize,
    pub wrap: bool,
    pub hflip_prob: f64,
    pub image_width: usize,
    pub image_height: usize,
}

impl AugmentConfig {
    /// Validates internal consistency and the match against dimensionality `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Parameter("image dimensions must be positive".into()));
        }
        if self.image_width * self.image_height != d {
            return Err(Error::Shape(format!(
                "image {}×{} does not match input dimension {d}",
                self.image_width, self.image_height
            )));
        }
        if self.max_translate_px > self.image_width || self.max_translate_px > self.image_height {
            return Err(Error::Parameter(
                "max_translate_px exceeds an image dimension".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.hflip_prob) {
            return Err(Error::Parameter("hflip_prob must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let slice = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| Error::IdxFormat(format!("file truncated reading {what}")))?;
    Ok(u32::from_be_bytes(slice.try_into().expect("4-byte slice")))
}

/// Loads an image/label IDX file pair into a dataset with pixels scaled to
/// `[0, 1]` (standardization is a separate step).
///
/// The image file must carry magic `0x00000803` (rank-3 unsigned bytes:
/// count × rows × cols) and the label file magic `0x00000801`; both counts
/// must agree. `n_classes` is the largest label plus one.
pub fn load_idx<F: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<F>> {
    let img_bytes = fs::read(images_path)?;
    let lbl_bytes = fs::read(labels_path)?;

    let magic = read_u32_be(&img_bytes, 0, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxFormat(format!(
            "image file magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"
        )));
    }
    let n = read_u32_be(&img_bytes, 4, "image count")? as usize;
    let rows = read_u32_be(&img_bytes, 8, "image rows")? as usize;
    let cols = read_u32_be(&img_bytes, 12, "image cols")? as usize;
    let d = rows * cols;
    let payload = &img_bytes[16..];
    if payload.len() != n * d {
        return Err(Error::IdxFormat(format!(
            "image payload holds {} bytes, header implies {}",
            payload.len(),
            n * d
        )));
    }

    let magic = read_u32_be(&lbl_bytes, 0, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxFormat(format!(
            "label file magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"
        )));
    }
    let n_labels = read_u32_be(&lbl_bytes, 4, "label count")? as usize;
    let label_payload = &lbl_bytes[8..];
    if label_payload.len() != n_labels {
        return Err(Error::IdxFormat(format!(
            "label payload holds {} bytes, header implies {n_labels}",
            label_payload.len()
        )));
    }
    if n != n_labels {
        return Err(Error::Consistency(format!(
            "{n} images but {n_labels} labels"
        )));
    }

    let inputs = Array2::from_shape_fn((n, d), |(i, j)| {
        F::of(f64::from(payload[i * d + j]) / 255.0)
    });
    let labels: Vec<usize> = label_payload.iter().map(|&b| usize::from(b)).collect();
    let n_classes = labels.iter().copied().max().unwrap_or(0) + 1;
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "idx".into());
    Dataset::new(name, inputs, labels, n_classes)
}

/// Standardizes one example to mean 0 and population variance 1, in place.
/// Returns the standard deviation that was divided out.
fn standardize_in_place<F: Scalar>(mut x: ndarray::ArrayViewMut1<'_, F>) -> Result<F> {
    let d = x.len();
    if d < 2 {
        return Err(Error::Shape("standardization needs d ≥ 2".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cannot standardize a non-finite vector".into()));
    }
    let len = F::of(d as f64);
    let mean = x.sum() / len;
    let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<F>() / len;
    let std = var.sqrt();
    if std < F::of(1e-12) * (F::one() + mean.abs()) {
        return Err(Error::DegenerateInput(
            "constant example has zero variance".into(),
        ));
    }
    x.mapv_inplace(|v| (v - mean) / std);
    Ok(std)
}

/// Standardizes one example to mean 0 and population variance 1, which puts
/// its Euclidean norm at exactly `√d` (up to rounding).
pub fn standardize_per_example<F: Scalar>(x: ArrayView1<'_, F>) -> Result<Array1<F>> {
    let mut out = x.to_owned();
    standardize_in_place(out.view_mut())?;
    Ok(out)
}

/// Cyclic translation: pixel `(r, c)` moves to `((r+dy) mod h, (c+dx) mod w)`.
pub(crate) fn translate_wrap<F: Scalar>(img: &[F], w: usize, h: usize, dx: i64, dy: i64, out: &mut [F]) {
    for r in 0..h {
        let tr = (r as i64 + dy).rem_euclid(h as i64) as usize;
        for c in 0..w {
            let tc = (c as i64 + dx).rem_euclid(w as i64) as usize;
            out[tr * w + tc] = img[r * w + c];
        }
    }
}

/// Zero-fill translation: pixels shifted past an edge are dropped and vacated
/// cells become 0.
fn translate_fill<F: Scalar>(img: &[F], w: usize, h: usize, dx: i64, dy: i64, out: &mut [F]) {
    for v in out.iter_mut() {
        *v = F::zero();
    }
    for r in 0..h {
        let tr = r as i64 + dy;
        if tr < 0 || tr >= h as i64 {
            continue;
        }
        for c in 0..w {
            let tc = c as i64 + dx;
            if tc < 0 || tc >= w as i64 {
                continue;
            }
            out[tr as usize * w + tc as usize] = img[r * w + c];
        }
    }
}

/// Augments one image: translation offsets are drawn uniformly from
/// `[−max, +max]` per axis (horizontal first, then vertical), then the image
/// is flipped horizontally with probability `hflip_prob`.
///
/// With `wrap = true` the translation is cyclic and preserves the pixel
/// multiset exactly; with `wrap = false` vacated pixels are zero-filled.
pub fn augment<F: Scalar>(
    x: ArrayView1<'_, F>,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<Array1<F>> {
    cfg.validate(x.len())?;
    let (w, h) = (cfg.image_width, cfg.image_height);
    let m = cfg.max_translate_px as i64;
    let dx = rng.gen_range(-m..=m);
    let dy = rng.gen_range(-m..=m);
    let flip = cfg.hflip_prob > 0.0 && rng.gen_bool(cfg.hflip_prob);

    let img = x.as_standard_layout();
    let img = img.as_slice().expect("standard layout");
    let mut out = vec![F::zero(); w * h];
    if cfg.wrap {
        translate_wrap(img, w, h, dx, dy, &mut out);
    } else {
        translate_fill(img, w, h, dx, dy, &mut out);
    }
    if flip {
        for r in 0..h {
            out[r * w..(r + 1) * w].reverse();
        }
    }
    Ok(Array1::from_vec(out))
}

/// Replaces the labels with i.i.d. uniform draws over `[0, n_classes)`;
/// inputs are untouched and the result is deterministic in `seed`.
pub fn randomize_labels<F: Scalar>(ds: &Dataset<F>, seed: u64) -> Dataset<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..ds.len()).map(|_| rng.gen_range(0..ds.n_classes)).collect();
    Dataset {
        name: format!("{}-random-labels", ds.name),
        inputs: ds.inputs.clone(),
        labels,
        n_classes: ds.n_classes,
    }
}

/// Class centers for [`synthetic_blobs`]: spaced around a circle of radius
/// `separation` in the first two coordinates, zero elsewhere.
fn blob_centers(n_classes: usize, dim: usize, separation: f64) -> Vec<Vec<f64>> {
    (0..n_classes)
        .map(|c| {
            let angle = 2.0 * std::f64::consts::PI * c as f64 / n_classes as f64;
            let mut center = vec![0.0; dim];
            center[0] = separation * angle.cos();
            center[1] = separation * angle.sin();
            center
        })
        .collect()
}

/// Deterministic Gaussian clusters: `n_per_class` unit-variance points around
/// each of `n_classes` mutually distant centers.
pub fn synthetic_blobs<F: Scalar>(
    n_per_class: usize,
    dim: usize,
    n_classes: usize,
    separation: f64,
    seed: u64,
) -> Result<Dataset<F>> {
    if n_per_class == 0 {
        return Err(Error::Parameter("n_per_class must be positive".into()));
    }
    if dim < 2 {
        return Err(Error::Parameter("synthetic blobs need d ≥ 2".into()));
    }
    if n_classes < 2 {
        return Err(Error::Parameter("synthetic blobs need n_classes ≥ 2".into()));
    }
    let centers = blob_centers(n_classes, dim, separation);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_per_class * n_classes;
    let mut inputs = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for i in 0..n_per_class {
            let row = class * n_per_class + i;
            for j in 0..dim {
                let noise: f64 = rng.sample(StandardNormal);
                inputs[(row, j)] = F::of(center[j] + noise);
            }
            labels.push(class);
        }
    }
    Dataset::new("synthetic-blobs", inputs, labels, n_classes)
}
