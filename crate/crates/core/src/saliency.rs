//! Patch-distinctness saliency and the region contrast built on top of it.
//!
//! The default estimator extracts every overlapping `patch_size x patch_size`
//! Lab patch, centers the set on its mean patch, and scores each patch by the
//! L1 norm of its coordinates in the principal-component basis. Distinct
//! patches sit far from the mean along the dominant directions of variation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{LabImage, Mask};
use crate::par;

/// Per-pixel saliency, every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height || width == 0 || height == 0 {
            return Err(Error::InvalidParameter("saliency buffer does not match its dimensions".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("saliency values must lie in [0, 1]".into()));
        }
        Ok(Self { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Self { width, height, values }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// 8-bit quantization, `round(255 * s)`.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.values.iter().map(|v| (v * 255.0).round() as u8).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaliencyConfig {
    pub patch_size: usize,
    pub use_center_prior: bool,
    /// Fraction of patch variance the retained components must explain.
    pub variance_kept: f64,
    /// Upper bound on retained components; `None` means `3 * patch_size^2`.
    pub max_components: Option<usize>,
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            patch_size: 5,
            use_center_prior: false,
            variance_kept: 0.97,
            max_components: None,
        }
    }
}

impl SaliencyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter("saliency patch size must be odd and >= 3".into()));
        }
        if self.use_center_prior {
            return Err(Error::InvalidParameter("the center prior is not supported".into()));
        }
        if !(self.variance_kept > 0.0 && self.variance_kept <= 1.0) {
            return Err(Error::InvalidParameter("variance_kept must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Anything that can turn an image into a saliency map.
pub trait SaliencyEstimator: Send + Sync {
    fn estimate(&self, img: &LabImage) -> Result<SaliencyMap>;
}

/// The built-in PCA patch-distinctness estimator.
#[derive(Debug, Clone, Copy, Default)]
pub struct PatchDistinctness {
    pub cfg: SaliencyConfig,
}

impl SaliencyEstimator for PatchDistinctness {
    fn estimate(&self, img: &LabImage) -> Result<SaliencyMap> {
        compute_saliency(img, &self.cfg)
    }
}

fn patch_vector(img: &LabImage, cx: usize, cy: usize, r: usize, out: &mut [f64]) {
    let w = img.width();
    let mut k = 0;
    for c in 0..3 {
        let plane = img.channel(c);
        for y in cy - r..=cy + r {
            let row = &plane[y * w + cx - r..=y * w + cx + r];
            out[k..k + row.len()].copy_from_slice(row);
            k += row.len();
        }
    }
}

/// Raw (unnormalized) distinctness of every patch center, row-major over the
/// `(w - 2r) x (h - 2r)` grid of valid centers.
pub fn patch_distinctness(img: &LabImage, cfg: &SaliencyConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (w, h) = img.dimensions();
    let p = cfg.patch_size;
    if w < p || h < p {
        return Err(Error::ImageTooSmall { width: w, height: h, patch: p });
    }
    let r = p / 2;
    let (gw, gh) = (w - 2 * r, h - 2 * r);
    let n = gw * gh;
    let d = 3 * p * p;

    // Per-row partial sums, reduced in row order for determinism.
    let partials = par::map_range(gh, |gy| {
        let mut sum = vec![0.0; d];
        let mut outer = vec![0.0; d * d];
        let mut v = vec![0.0; d];
        for gx in 0..gw {
            patch_vector(img, gx + r, gy + r, r, &mut v);
            for i in 0..d {
                sum[i] += v[i];
                let vi = v[i];
                let row = &mut outer[i * d..i * d + d];
                for j in i..d {
                    row[j] += vi * v[j];
                }
            }
        }
        (sum, outer)
    });
    let mut mean = vec![0.0; d];
    let mut second = vec![0.0; d * d];
    for (s, o) in &partials {
        for i in 0..d {
            mean[i] += s[i];
        }
        for (a, b) in second.iter_mut().zip(o) {
            *a += b;
        }
    }
    let nf = n as f64;
    mean.iter_mut().for_each(|m| *m /= nf);
    let cov = DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        second[a * d + b] / nf - mean[a] * mean[b]
    });

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    if total < 1e-12 {
        return Ok(vec![0.0; n]);
    }
    let cap = cfg.max_components.unwrap_or(d).min(d);
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for &i in &order {
        if kept.len() >= cap || acc >= cfg.variance_kept * total {
            break;
        }
        acc += eig.eigenvalues[i].max(0.0);
        kept.push(i);
    }
    // Basis as contiguous rows: basis[k * d + j].
    let basis: Vec<f64> = kept
        .iter()
        .flat_map(|&i| eig.eigenvectors.column(i).iter().copied().collect::<Vec<_>>())
        .collect();
    let k = kept.len();

    let rows = par::map_range(gh, |gy| {
        let mut v = vec![0.0; d];
        (0..gw)
            .map(|gx| {
                patch_vector(img, gx + r, gy + r, r, &mut v);
                for (x, m) in v.iter_mut().zip(&mean) {
                    *x -= m;
                }
                (0..k)
                    .map(|c| {
                        basis[c * d..(c + 1) * d]
                            .iter()
                            .zip(&v)
                            .map(|(a, b)| a * b)
                            .sum::<f64>()
                            .abs()
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Expands center scores to the full grid (border pixels take the nearest
/// center) and min-max normalizes to `[0, 1]`.
pub(crate) fn scores_to_map(scores: &[f64], w: usize, h: usize, r: usize) -> SaliencyMap {
    let (gw, gh) = (w - 2 * r, h - 2 * r);
    debug_assert_eq!(scores.len(), gw * gh);
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let values = if !(span >= 1e-12) {
        vec![0.0; w * h]
    } else {
        let mut values = Vec::with_capacity(w * h);
        for y in 0..h {
            let gy = y.clamp(r, h - 1 - r) - r;
            for x in 0..w {
                let gx = x.clamp(r, w - 1 - r) - r;
                values.push(((scores[gy * gw + gx] - lo) / span).clamp(0.0, 1.0));
            }
        }
        values
    };
    SaliencyMap { width: w, height: h, values }
}

pub fn compute_saliency(img: &LabImage, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    let scores = patch_distinctness(img, cfg)?;
    Ok(scores_to_map(&scores, img.width(), img.height(), cfg.patch_size / 2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContrastParams {
    pub beta_top: f64,
}

impl Default for ContrastParams {
    fn default() -> Self {
        Self { beta_top: 0.2 }
    }
}

/// Mean of the top `ceil(beta * n)` values.
pub(crate) fn top_mean(mut values: Vec<f64>, beta: f64) -> f64 {
    let n = values.len();
    let k = ((beta * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    // Stable sort keeps pixel order among ties.
    values.sort_by(|a, b| b.total_cmp(a));
    values[..k].iter().sum::<f64>() / k as f64
}

/// Top-`beta` mean saliency inside `region` minus the same statistic outside.
pub fn contrast_psi(s: &SaliencyMap, region: &Mask, params: &ContrastParams) -> Result<f64> {
    if region.dimensions() != s.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: s.dimensions(),
            actual: region.dimensions(),
        });
    }
    if !region.is_proper() {
        return Err(Error::DegenerateRegion);
    }
    if !(params.beta_top > 0.0 && params.beta_top <= 1.0) {
        return Err(Error::InvalidParameter("beta_top must be in (0, 1]".into()));
    }
    let (mut inside, mut outside) = (Vec::new(), Vec::new());
    for (&v, &m) in s.values.iter().zip(region.data()) {
        if m {
            inside.push(v);
        } else {
            outside.push(v);
        }
    }
    Ok(top_mean(inside, params.beta_top) - top_mean(outside, params.beta_top))
}

/// `|psi - delta_s|`.
pub fn saliency_energy(s: &SaliencyMap, region: &Mask, delta_s: f64, params: &ContrastParams) -> Result<f64> {
    Ok((contrast_psi(s, region, params)? - delta_s).abs())
}
