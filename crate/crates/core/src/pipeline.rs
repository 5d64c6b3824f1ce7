//! The full manipulation loop.
//!
//! At the coarsest pyramid level the image update (search, vote, screened
//! Poisson) alternates with the database update (threshold step on the
//! saliency of the current result) until the region contrast reaches the
//! requested value or the thresholds stop moving. Finer levels then run
//! image updates only, with databases rebuilt from the scaled input under
//! the frozen thresholds.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{build_pyramid, gradients, lab_to_rgb, resample_to, rgb_to_lab, LabImage, Mask, RgbImage};
use crate::par;
use crate::patchdb::{
    build_databases, init_thresholds, reached_target, stalled, step_thresholds, PatchDatabase, SearchSchedule,
    Thresholds,
};
use crate::poisson::{solve_screened_poisson, ScreenedPoissonProblem};
use crate::saliency::{compute_saliency, contrast_psi, ContrastParams, SaliencyConfig, SaliencyMap};
use crate::setup::{build_setup, contrast_region, Label, Mode, SetupMask};
use crate::synthesis::{nn_search, vote, NNField, SynthesisConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManipulationConfig {
    pub delta_s: f64,
    pub lambda: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub beta_top: f64,
    pub synth: SynthesisConfig,
    pub sal: SaliencyConfig,
    pub coarse_width: usize,
    pub iters_coarse: usize,
    pub iters_fine: usize,
    pub seed: u64,
    /// Extra image updates allowed after a threshold stall, while the
    /// contrast keeps improving under the final databases.
    pub settle_updates: usize,
    /// Safety cap on coarse-level database updates.
    pub max_db_iterations: usize,
    pub stall_tol: f64,
    pub min_db_fraction: f64,
    pub poisson_tol: f64,
    /// Debug: hold the thresholds at this pair and skip the search.
    pub pinned_thresholds: Option<Thresholds>,
}

impl Default for ManipulationConfig {
    fn default() -> Self {
        Self {
            delta_s: 0.6,
            lambda: 5.0,
            eta: 0.1,
            epsilon: 0.05,
            beta_top: 0.2,
            synth: SynthesisConfig::default(),
            sal: SaliencyConfig::default(),
            coarse_width: 150,
            iters_coarse: 20,
            iters_fine: 5,
            seed: 0,
            settle_updates: 15,
            max_db_iterations: 30,
            stall_tol: 1e-4,
            min_db_fraction: 0.01,
            poisson_tol: 1e-8,
            pinned_thresholds: None,
        }
    }
}

impl ManipulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(0.0..=1.0).contains(&self.delta_s) {
            return bad("delta-s must be in [0,1]");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be >= 0");
        }
        if !(self.beta_top > 0.0 && self.beta_top <= 1.0) {
            return bad("beta-top must be in (0,1]");
        }
        if self.coarse_width == 0 || self.iters_coarse == 0 || self.iters_fine == 0 || self.max_db_iterations == 0 {
            return bad("iteration counts and coarse width must be >= 1");
        }
        if !(self.poisson_tol > 0.0) {
            return bad("poisson tolerance must be positive");
        }
        self.schedule().validate()?;
        self.synth.validate()?;
        self.sal.validate()
    }

    pub fn schedule(&self) -> SearchSchedule {
        SearchSchedule {
            eta: self.eta,
            epsilon: self.epsilon,
            stall_tol: self.stall_tol,
            max_iterations: self.max_db_iterations,
            min_db_fraction: self.min_db_fraction,
        }
    }

    pub fn contrast(&self) -> ContrastParams {
        ContrastParams { beta_top: self.beta_top }
    }

    /// Image-update passes at `level` of a `levels`-deep pyramid (0 = coarsest):
    /// linear from `iters_coarse` down to `iters_fine`.
    pub fn iterations_at(&self, level: usize, levels: usize) -> usize {
        if levels <= 1 {
            return self.iters_coarse;
        }
        let t = level as f64 / (levels - 1) as f64;
        let v = self.iters_coarse as f64 + t * (self.iters_fine as f64 - self.iters_coarse as f64);
        (v.round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub tau_plus: f64,
    pub tau_minus: f64,
    pub psi: f64,
    pub e_sal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    ThresholdStall,
    IterationCap,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::ThresholdStall => "threshold_stall",
            Termination::IterationCap => "iteration_cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub width: usize,
    pub height: usize,
    pub image_updates: usize,
}

/// Mean absolute Lab deviation from the input, split by Keep label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeepDeviation {
    pub keep: f64,
    pub non_keep: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub trace: Vec<TraceEntry>,
    pub termination: Termination,
    pub final_psi: f64,
    pub initial_psi: f64,
    pub levels: Vec<LevelReport>,
    pub database_relaxations: usize,
    pub keep_deviation: Option<KeepDeviation>,
    pub wall_time_ms: u64,
}

impl RunReport {
    /// Equality on everything except wall time.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        let mut a = self.clone();
        a.wall_time_ms = other.wall_time_ms;
        a == *other
    }

    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,tau_plus,tau_minus,psi,e_sal\n");
        for t in &self.trace {
            out.push_str(&format!("{},{},{},{},{}\n", t.iteration, t.tau_plus, t.tau_minus, t.psi, t.e_sal));
        }
        out
    }
}

/// Everything a run produces besides the image.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub image: RgbImage,
    pub lab: LabImage,
    pub report: RunReport,
}

/// Settle updates stop after this many passes without an improvement of at
/// least `SETTLE_MIN_GAIN` in `|psi - delta_s|`.
const SETTLE_PATIENCE: usize = 3;
const SETTLE_MIN_GAIN: f64 = 1e-3;

fn mix_seed(seed: u64, level: usize, iteration: usize, field: usize) -> u64 {
    let tag = ((level as u64) << 40) ^ ((iteration as u64) << 8) ^ field as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(tag.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

struct Level {
    input: LabImage,
    grad: crate::image::GradientField,
    setup: SetupMask,
    increase: Mask,
    decrease: Mask,
}

impl Level {
    fn new(input: LabImage, setup: SetupMask) -> Self {
        let grad = gradients(&input);
        let increase = setup.mask_of(Label::Increase);
        let decrease = setup.mask_of(Label::Decrease);
        Self { input, grad, setup, increase, decrease }
    }
}

/// One image update: search both databases, vote, blend with input gradients.
fn image_update(
    j: &LabImage,
    level: &Level,
    plus: &PatchDatabase,
    minus: &PatchDatabase,
    cfg: &ManipulationConfig,
    seeds: (u64, u64),
) -> Result<LabImage> {
    let search = |mask: &Mask, db: &PatchDatabase, seed: u64| -> Result<Option<NNField>> {
        if mask.count() == 0 {
            return Ok(None);
        }
        match nn_search(j, mask, db, &cfg.synth, seed) {
            Ok(f) => Ok(Some(f)),
            Err(Error::NoTargetPatch) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let (fp, fm) = par::join(
        || search(&level.increase, plus, seeds.0),
        || search(&level.decrease, minus, seeds.1),
    );
    let (fp, fm) = (fp?, fm?);
    let mut fields: Vec<(&NNField, &PatchDatabase)> = Vec::new();
    if let Some(f) = &fp {
        fields.push((f, plus));
    }
    if let Some(f) = &fm {
        fields.push((f, minus));
    }
    let voted = vote(&fields, &level.setup, &level.input, &cfg.synth)?;
    let problem = ScreenedPoissonProblem::new(voted, level.grad.clone(), cfg.lambda)?;
    solve_screened_poisson(&problem, cfg.poisson_tol)
}

fn keep_deviation(j: &LabImage, i: &LabImage, setup: &SetupMask) -> Option<KeepDeviation> {
    let (mut keep, mut nk, mut other, mut no) = (0.0, 0usize, 0.0, 0usize);
    for (idx, &label) in setup.labels().iter().enumerate() {
        let d: f64 = (0..3).map(|c| (j.channel(c)[idx] - i.channel(c)[idx]).abs()).sum::<f64>() / 3.0;
        if label == Label::Keep {
            keep += d;
            nk += 1;
        } else {
            other += d;
            no += 1;
        }
    }
    (nk > 0 && no > 0).then(|| KeepDeviation { keep: keep / nk as f64, non_keep: other / no as f64 })
}

/// Runs the manipulation on a labeling and the region whose contrast is
/// driven towards `cfg.delta_s`. `observer` sees every coarse trace entry as
/// it is produced.
pub fn run_with_setup(
    input: &RgbImage,
    setup: &SetupMask,
    region: &Mask,
    cfg: &ManipulationConfig,
    observer: &mut dyn FnMut(&TraceEntry),
) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let dims = input.dimensions();
    for d in [setup.dimensions(), region.dimensions()] {
        if d != dims {
            return Err(Error::DimensionMismatch { expected: dims, actual: d });
        }
    }
    if !region.is_proper() {
        return Err(Error::DegenerateRegion);
    }

    let lab = rgb_to_lab(input);
    let pyramid = build_pyramid(&lab, cfg.coarse_width);
    let n_levels = pyramid.len();
    let sched = cfg.schedule();
    let contrast = cfg.contrast();
    let margin = cfg.synth.patch_size / 2;

    // Coarse level.
    let coarse_in = pyramid.coarsest().clone();
    let (cw, ch) = coarse_in.dimensions();
    let coarse_region = region.resample(cw, ch);
    if !coarse_region.is_proper() {
        return Err(Error::DegenerateRegion);
    }
    let coarse = Level::new(coarse_in, setup.resample(cw, ch));
    let s_i = compute_saliency(&coarse.input, &cfg.sal)?;
    let psi_of = |s: &SaliencyMap| contrast_psi(s, &coarse_region, &contrast);
    let initial_psi = psi_of(&s_i)?;

    let mut t = cfg.pinned_thresholds.unwrap_or_else(init_thresholds);
    let entry = |iteration, t: Thresholds, psi: f64| TraceEntry {
        iteration,
        tau_plus: t.tau_plus,
        tau_minus: t.tau_minus,
        psi,
        e_sal: (psi - cfg.delta_s).abs(),
    };
    let mut trace = vec![entry(0, t, initial_psi)];
    observer(&trace[0]);

    if cfg.pinned_thresholds.is_none() && reached_target(initial_psi, cfg.delta_s, &sched) {
        let report = RunReport {
            trace,
            termination: Termination::Converged,
            final_psi: initial_psi,
            initial_psi,
            levels: vec![LevelReport { width: dims.0, height: dims.1, image_updates: 0 }],
            database_relaxations: 0,
            keep_deviation: None,
            wall_time_ms: started.elapsed().as_millis() as u64,
        };
        return Ok(RunOutput { image: input.clone(), lab, report });
    }

    let mut j = coarse.input.clone();
    let mut s_j = s_i.clone();
    let mut psi = initial_psi;
    let mut relaxations = 0;
    let mut termination = Termination::IterationCap;
    let mut coarse_updates = 0;
    let mut last_dbs = None;
    for iteration in 1..=cfg.max_db_iterations {
        let previous = t;
        if cfg.pinned_thresholds.is_none() {
            let psi_out = contrast_psi(&s_j, &coarse_region.complement(), &contrast)?;
            t = step_thresholds(t, psi, psi_out, cfg.delta_s, cfg.eta);
        }
        let (plus, minus) = build_databases(&coarse.input, &s_i, t, &sched, margin)?;
        relaxations += plus.relaxed as usize + minus.relaxed as usize;
        let seeds = (mix_seed(cfg.seed, 0, iteration, 0), mix_seed(cfg.seed, 0, iteration, 1));
        j = image_update(&j, &coarse, &plus, &minus, cfg, seeds)?;
        coarse_updates += 1;
        s_j = compute_saliency(&j, &cfg.sal)?;
        psi = psi_of(&s_j)?;
        trace.push(entry(iteration, t, psi));
        observer(trace.last().unwrap());
        log::debug!("coarse iteration {iteration}: tau=({:.4}, {:.4}) psi={psi:.4}", t.tau_plus, t.tau_minus);
        if reached_target(psi, cfg.delta_s, &sched) {
            termination = Termination::Converged;
            break;
        }
        if stalled(Some(previous), t, &sched) {
            termination = Termination::ThresholdStall;
            last_dbs = Some((plus, minus));
            break;
        }
    }

    // A stall fixes the databases but not J: keep minimizing over J while
    // the contrast still improves, and keep the best iterate.
    if let (Some((plus, minus)), None) = (&last_dbs, cfg.pinned_thresholds) {
        let mut best = (j.clone(), psi);
        let mut idle = 0;
        for _ in 0..cfg.settle_updates {
            let iteration = trace.len();
            let seeds = (mix_seed(cfg.seed, 0, iteration, 0), mix_seed(cfg.seed, 0, iteration, 1));
            j = image_update(&j, &coarse, plus, minus, cfg, seeds)?;
            coarse_updates += 1;
            psi = psi_of(&compute_saliency(&j, &cfg.sal)?)?;
            trace.push(entry(iteration, t, psi));
            observer(trace.last().unwrap());
            log::debug!("settle update {iteration}: psi={psi:.4}");
            if (psi - cfg.delta_s).abs() < (best.1 - cfg.delta_s).abs() - SETTLE_MIN_GAIN {
                best = (j.clone(), psi);
                idle = 0;
            } else {
                idle += 1;
            }
            if reached_target(psi, cfg.delta_s, &sched) {
                termination = Termination::Converged;
                best = (j.clone(), psi);
                break;
            }
            if idle >= SETTLE_PATIENCE {
                break;
            }
        }
        (j, psi) = best;
    }
    let mut levels = vec![LevelReport { width: cw, height: ch, image_updates: coarse_updates }];

    // Fine-scale refinement with frozen thresholds. The change made at the
    // previous level is carried up, so an unchanged image stays unchanged.
    let mut prev_in = coarse.input;
    for (k, fine_in) in pyramid.levels.iter().enumerate().skip(1) {
        let (w, h) = fine_in.dimensions();
        let delta = j.linear_combination(1.0, &prev_in, -1.0);
        j = fine_in.linear_combination(1.0, &resample_to(&delta, w, h), 1.0);
        let level = Level::new(fine_in.clone(), setup.resample(w, h));
        let s_level = compute_saliency(&level.input, &cfg.sal)?;
        let (plus, minus) = build_databases(&level.input, &s_level, t, &sched, margin)?;
        relaxations += plus.relaxed as usize + minus.relaxed as usize;
        let n = cfg.iterations_at(k, n_levels);
        for it in 0..n {
            let seeds = (mix_seed(cfg.seed, k, it, 0), mix_seed(cfg.seed, k, it, 1));
            j = image_update(&j, &level, &plus, &minus, cfg, seeds)?;
        }
        levels.push(LevelReport { width: w, height: h, image_updates: n });
        prev_in = level.input;
    }

    let keep_dev = keep_deviation(&j, &lab, setup);
    let report = RunReport {
        trace,
        termination,
        final_psi: psi,
        initial_psi,
        levels,
        database_relaxations: relaxations,
        keep_deviation: keep_dev,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok(RunOutput { image: lab_to_rgb(&j), lab: j, report })
}

/// Applies one of the three named setups to `mask` and runs the loop.
pub fn run_manipulation(
    input: &RgbImage,
    mask: &Mask,
    mode: Mode,
    cfg: &ManipulationConfig,
) -> Result<(RgbImage, RunReport)> {
    run_manipulation_observed(input, mask, mode, cfg, &mut |_| {}).map(|o| (o.image, o.report))
}

pub fn run_manipulation_observed(
    input: &RgbImage,
    mask: &Mask,
    mode: Mode,
    cfg: &ManipulationConfig,
    observer: &mut dyn FnMut(&TraceEntry),
) -> Result<RunOutput> {
    if mask.dimensions() != input.dimensions() {
        return Err(Error::DimensionMismatch { expected: input.dimensions(), actual: mask.dimensions() });
    }
    let setup = build_setup(mask, mode)?;
    run_with_setup(input, &setup, &contrast_region(mask, mode), cfg, observer)
}

/// Saliency of an sRGB image at full resolution.
pub fn compute_saliency_file(input: &RgbImage, cfg: &SaliencyConfig) -> Result<SaliencyMap> {
    compute_saliency(&rgb_to_lab(input), cfg)
}
