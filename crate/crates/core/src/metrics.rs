//! Agreement between a saliency map and a binary ground-truth mask:
//! Pearson correlation and the weighted F-beta measure for continuous
//! foreground maps.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{io, Mask};
use crate::saliency::SaliencyMap;

#[derive(Debug, Clone)]
pub struct EvalPair {
    pub predicted: SaliencyMap,
    pub ground_truth: Mask,
}

impl EvalPair {
    pub fn new(predicted: SaliencyMap, ground_truth: Mask) -> Result<Self> {
        if predicted.dimensions() != ground_truth.dimensions() {
            return Err(Error::DimensionMismatch {
                expected: ground_truth.dimensions(),
                actual: predicted.dimensions(),
            });
        }
        Ok(Self { predicted, ground_truth })
    }
}

/// Sample Pearson correlation of two equally long samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn pearson_cc(pair: &EvalPair) -> Result<f64> {
    let gt: Vec<f64> = pair.ground_truth.data().iter().map(|&b| b as u8 as f64).collect();
    pearson(pair.predicted.values(), &gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WfbParams {
    pub sigma: f64,
    pub kernel_size: usize,
    /// Decay rate of the importance weight with distance to the foreground.
    pub importance_decay: f64,
    pub beta_sq: f64,
}

impl Default for WfbParams {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            kernel_size: 7,
            importance_decay: 0.5f64.ln() / 5.0,
            beta_sq: 1.0,
        }
    }
}

/// Exact Euclidean distance to the nearest foreground pixel, with the index
/// of that pixel. Separable lower-envelope transform over squared distances.
pub fn distance_transform(mask: &Mask) -> (Vec<f64>, Vec<usize>) {
    let (w, h) = mask.dimensions();
    const INF: f64 = 1e20;
    // Columns first: per pixel, squared vertical distance and nearest row.
    let mut col_d = vec![INF; w * h];
    let mut col_row = vec![usize::MAX; w * h];
    for x in 0..w {
        let f: Vec<f64> = (0..h).map(|y| if mask.get(x, y) { 0.0 } else { INF }).collect();
        let (d, arg) = envelope_1d(&f);
        for y in 0..h {
            col_d[y * w + x] = d[y];
            col_row[y * w + x] = arg[y];
        }
    }
    let mut dist = vec![0.0; w * h];
    let mut idx = vec![0; w * h];
    for y in 0..h {
        let f = &col_d[y * w..(y + 1) * w];
        let (d, arg) = envelope_1d(f);
        for x in 0..w {
            dist[y * w + x] = d[x].sqrt();
            let sx = arg[x];
            idx[y * w + x] = col_row[y * w + sx] * w + sx;
        }
    }
    (dist, idx)
}

/// 1-D squared distance transform of sampled function `f`; returns the
/// transform and, per sample, the minimizing position.
fn envelope_1d(f: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = f.len();
    let finite: Vec<usize> = (0..n).filter(|&q| f[q] < 1e19).collect();
    if finite.is_empty() {
        return (vec![1e20; n], vec![0; n]);
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0;
    v[0] = finite[0];
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let inter = |q: usize, p: usize| {
        ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * q as f64 - 2.0 * p as f64)
    };
    for &q in &finite[1..] {
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut d = vec![0.0; n];
    let mut arg = vec![0; n];
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let dq = q as f64 - v[k] as f64;
        d[q] = dq * dq + f[v[k]];
        arg[q] = v[k];
    }
    (d, arg)
}

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as isize;
    let mut k = Vec::with_capacity(size * size);
    for dy in -r..=r {
        for dx in -r..=r {
            k.push((-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp());
        }
    }
    let s: f64 = k.iter().sum();
    k.iter().map(|v| v / s).collect()
}

/// Weighted F-beta of a continuous foreground map against a binary mask.
pub fn weighted_fbeta_with(pair: &EvalPair, params: &WfbParams) -> Result<f64> {
    let gt = &pair.ground_truth;
    let (w, h) = gt.dimensions();
    let fg = gt.data();
    if !fg.iter().any(|&b| b) {
        return Err(Error::EmptyForeground);
    }
    let e: Vec<f64> = pair
        .predicted
        .values()
        .iter()
        .zip(fg)
        .map(|(&p, &g)| (p - g as u8 as f64).abs())
        .collect();
    let (dist, nearest) = distance_transform(gt);

    // Background errors are replaced by the error at the nearest foreground
    // pixel before smoothing so the foreground edge is not diluted.
    let et: Vec<f64> = (0..w * h).map(|i| if fg[i] { e[i] } else { e[nearest[i]] }).collect();
    let kernel = gaussian_kernel(params.kernel_size, params.sigma);
    let r = (params.kernel_size / 2) as isize;
    let side = params.kernel_size;
    let mut ea = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for dy in -r..=r {
                let yy = (y + dy).clamp(0, h as isize - 1) as usize;
                for dx in -r..=r {
                    let xx = (x + dx).clamp(0, w as isize - 1) as usize;
                    acc += kernel[((dy + r) as usize) * side + (dx + r) as usize] * et[yy * w + xx];
                }
            }
            ea[y as usize * w + x as usize] = acc;
        }
    }

    let mut tp_loss = 0.0;
    let mut fp = 0.0;
    let mut n_fg = 0.0;
    for i in 0..w * h {
        let err = if fg[i] && ea[i] < e[i] { ea[i] } else { e[i] };
        if fg[i] {
            tp_loss += err;
            n_fg += 1.0;
        } else {
            let importance = 2.0 - (params.importance_decay * dist[i]).exp();
            fp += err * importance;
        }
    }
    let tp = n_fg - tp_loss;
    let recall = 1.0 - tp_loss / n_fg;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let denom = params.beta_sq * precision + recall;
    let q = if denom > 0.0 {
        (1.0 + params.beta_sq) * precision * recall / denom
    } else {
        0.0
    };
    Ok(q.clamp(0.0, 1.0))
}

pub fn weighted_fbeta(pair: &EvalPair) -> Result<f64> {
    weighted_fbeta_with(pair, &WfbParams::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cc,
    Wfb,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Cc => "cc",
            Metric::Wfb => "wfb",
        }
    }

    pub fn evaluate(self, pair: &EvalPair) -> Result<f64> {
        match self {
            Metric::Cc => pearson_cc(pair),
            Metric::Wfb => weighted_fbeta(pair),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cc" => Ok(Metric::Cc),
            "wfb" => Ok(Metric::Wfb),
            other => Err(Error::InvalidParameter(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusReport {
    pub metric: Metric,
    pub scores: Vec<(String, f64)>,
    /// Files without a counterpart or that failed to evaluate, with reason.
    pub skipped: Vec<(String, String)>,
}

impl CorpusReport {
    pub fn mean(&self) -> Option<f64> {
        if self.scores.is_empty() {
            None
        } else {
            Some(self.scores.iter().map(|(_, s)| s).sum::<f64>() / self.scores.len() as f64)
        }
    }

    /// `image_id,metric,score` rows, then a `mean` row when non-empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("image_id,metric,score\n");
        for (id, s) in &self.scores {
            out.push_str(&format!("{},{},{}\n", csv_field(id), self.metric.name(), s));
        }
        if let Some(m) = self.mean() {
            out.push_str(&format!("mean,{},{}\n", self.metric.name(), m));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn png_files(dir: &Path) -> Result<BTreeMap<String, std::path::PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

/// Scores every prediction in `pred_dir` against the same-named mask in
/// `gt_dir`. Prediction PNGs are read as gray levels / 255, masks at `>= 128`.
pub fn evaluate_corpus(pred_dir: &Path, gt_dir: &Path, metric: Metric) -> Result<CorpusReport> {
    let preds = png_files(pred_dir)?;
    let gts = png_files(gt_dir)?;
    let mut report = CorpusReport { metric, scores: Vec::new(), skipped: Vec::new() };
    for (id, pred_path) in &preds {
        let Some(gt_path) = gts.get(id) else {
            log::warn!("no ground truth for {id}; skipped");
            report.skipped.push((id.clone(), "no ground truth".into()));
            continue;
        };
        let score = (|| {
            let (w, h, gray) = io::decode_gray_png(&std::fs::read(pred_path)?)?;
            let predicted = SaliencyMap::new(w, h, gray.iter().map(|&v| v as f64 / 255.0).collect())?;
            let gt = io::read_mask_png(gt_path)?;
            metric.evaluate(&EvalPair::new(predicted, gt)?)
        })();
        match score {
            Ok(s) => report.scores.push((id.clone(), s)),
            Err(e) => {
                log::warn!("{id}: {e}; skipped");
                report.skipped.push((id.clone(), e.to_string()));
            }
        }
    }
    for id in gts.keys().filter(|k| !preds.contains_key(*k)) {
        log::warn!("no prediction for {id}; skipped");
        report.skipped.push((id.clone(), "no prediction".into()));
    }
    Ok(report)
}
