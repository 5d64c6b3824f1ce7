//! Salient / non-salient patch databases and the greedy threshold search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{LabImage, Mask};
use crate::saliency::{contrast_psi, ContrastParams, SaliencyMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub tau_plus: f64,
    pub tau_minus: f64,
}

impl Thresholds {
    pub fn new(tau_plus: f64, tau_minus: f64) -> Self {
        Self {
            tau_plus: tau_plus.clamp(0.0, 1.0),
            tau_minus: tau_minus.clamp(0.0, 1.0),
        }
    }
}

/// Start of the search: every patch belongs to both databases.
pub fn init_thresholds() -> Thresholds {
    Thresholds::new(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Plus,
    Minus,
}

#[derive(Debug, Clone)]
pub struct PatchDatabase {
    pub source: LabImage,
    pub valid: Mask,
    pub polarity: Polarity,
    /// Threshold actually applied; differs from the requested one when the
    /// minimum-size guard relaxed it.
    pub threshold: f64,
    pub relaxed: bool,
}

impl PatchDatabase {
    pub fn valid_count(&self) -> usize {
        self.valid.count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSchedule {
    pub eta: f64,
    pub epsilon: f64,
    pub stall_tol: f64,
    pub max_iterations: usize,
    /// Lower bound on the fraction of pixels each database must hold.
    pub min_db_fraction: f64,
}

impl Default for SearchSchedule {
    fn default() -> Self {
        Self {
            eta: 0.1,
            epsilon: 0.05,
            stall_tol: 1e-4,
            max_iterations: 30,
            min_db_fraction: 0.01,
        }
    }
}

impl SearchSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !(self.epsilon > 0.0) || !(self.stall_tol >= 0.0) {
            return Err(Error::InvalidParameter("eta and epsilon must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_db_fraction) {
            return Err(Error::InvalidParameter("min_db_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }
}

fn build_one(
    img: &LabImage,
    s: &SaliencyMap,
    threshold: f64,
    polarity: Polarity,
    min_count: usize,
    margin: usize,
) -> PatchDatabase {
    let member = |v: f64, t: f64| match polarity {
        Polarity::Plus => v >= t,
        Polarity::Minus => v <= t,
    };
    let (w, h) = s.dimensions();
    let interior = |i: usize| {
        let (x, y) = (i % w, i / w);
        x >= margin && y >= margin && x + margin < w && y + margin < h
    };
    let count = s.values().iter().filter(|&&v| member(v, threshold)).count();
    let interior_count = s
        .values()
        .iter()
        .enumerate()
        .filter(|&(i, &v)| interior(i) && member(v, threshold))
        .count();

    let mut applied = threshold;
    let mut relaxed = false;
    if count < min_count || interior_count == 0 {
        // Quantile over interior pixels so the relaxed set always contains
        // admissible patch centers.
        let mut candidates: Vec<f64> = s
            .values()
            .iter()
            .enumerate()
            .filter(|&(i, _)| interior(i))
            .map(|(_, &v)| v)
            .collect();
        if candidates.is_empty() {
            candidates = s.values().to_vec();
        }
        match polarity {
            Polarity::Plus => candidates.sort_by(|a, b| b.total_cmp(a)),
            Polarity::Minus => candidates.sort_by(|a, b| a.total_cmp(b)),
        }
        let k = min_count.clamp(1, candidates.len());
        applied = candidates[k - 1];
        relaxed = true;
        log::info!(
            "{polarity:?} database below minimum size ({count} < {min_count}); threshold relaxed {threshold:.4} -> {applied:.4}"
        );
    }
    let valid = Mask::new(w, h, s.values().iter().map(|&v| member(v, applied)).collect())
        .expect("mask matches saliency dimensions");
    PatchDatabase {
        source: img.clone(),
        valid,
        polarity,
        threshold: applied,
        relaxed,
    }
}

/// Builds the Plus (`S >= tau_plus`) and Minus (`S <= tau_minus`) databases.
///
/// `patch_margin` is half the synthesis patch size; relaxation guarantees at
/// least one valid pixel at that distance from the border.
pub fn build_databases(
    img: &LabImage,
    s_i: &SaliencyMap,
    t: Thresholds,
    sched: &SearchSchedule,
    patch_margin: usize,
) -> Result<(PatchDatabase, PatchDatabase)> {
    if img.dimensions() != s_i.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: img.dimensions(),
            actual: s_i.dimensions(),
        });
    }
    let n = s_i.values().len();
    let min_count = ((sched.min_db_fraction * n as f64).ceil() as usize).max(1);
    let plus = build_one(img, s_i, t.tau_plus, Polarity::Plus, min_count, patch_margin);
    let minus = build_one(img, s_i, t.tau_minus, Polarity::Minus, min_count, patch_margin);
    Ok((plus, minus))
}

/// One greedy step: raise `tau_plus` by `eta * |psi(S_J, R) - dS|` and lower
/// `tau_minus` by `eta * |psi(S_J, !R) - dS|`, trimming both to `[0, 1]`.
pub fn update_thresholds(
    t: Thresholds,
    s_j: &SaliencyMap,
    region: &Mask,
    delta_s: f64,
    sched: &SearchSchedule,
    params: &ContrastParams,
) -> Result<Thresholds> {
    let psi_in = contrast_psi(s_j, region, params)?;
    let psi_out = contrast_psi(s_j, &region.complement(), params)?;
    Ok(step_thresholds(t, psi_in, psi_out, delta_s, sched.eta))
}

pub(crate) fn step_thresholds(t: Thresholds, psi_in: f64, psi_out: f64, delta_s: f64, eta: f64) -> Thresholds {
    Thresholds::new(
        t.tau_plus + eta * (psi_in - delta_s).abs(),
        t.tau_minus - eta * (psi_out - delta_s).abs(),
    )
}

/// `|psi - dS| < epsilon`, or both thresholds moved less than `stall_tol` in
/// the last update (`previous` is the pair before that update).
pub fn converged(
    s_j: &SaliencyMap,
    region: &Mask,
    delta_s: f64,
    sched: &SearchSchedule,
    params: &ContrastParams,
    previous: Option<Thresholds>,
    current: Thresholds,
) -> Result<bool> {
    let psi = contrast_psi(s_j, region, params)?;
    Ok(reached_target(psi, delta_s, sched) || stalled(previous, current, sched))
}

pub(crate) fn reached_target(psi: f64, delta_s: f64, sched: &SearchSchedule) -> bool {
    (psi - delta_s).abs() < sched.epsilon
}

pub(crate) fn stalled(previous: Option<Thresholds>, current: Thresholds, sched: &SearchSchedule) -> bool {
    previous.is_some_and(|p| {
        (p.tau_plus - current.tau_plus).abs() < sched.stall_tol
            && (p.tau_minus - current.tau_minus).abs() < sched.stall_tol
    })
}
