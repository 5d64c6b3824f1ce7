//! Image update: PatchMatch search into a patch database, then voting.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{LabImage, Mask};
use crate::par;
use crate::patchdb::PatchDatabase;
use crate::setup::{Label, SetupMask};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub patch_size: usize,
    pub pm_iterations: usize,
    pub random_search_decay: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            patch_size: 7,
            pm_iterations: 5,
            random_search_decay: 0.5,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.patch_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter("patch size must be odd".into()));
        }
        if self.pm_iterations == 0 {
            return Err(Error::InvalidParameter("pm_iterations must be >= 1".into()));
        }
        if !(self.random_search_decay > 0.0 && self.random_search_decay < 1.0) {
            return Err(Error::InvalidParameter("random_search_decay must be in (0, 1)".into()));
        }
        Ok(())
    }

    fn radius(&self) -> usize {
        self.patch_size / 2
    }
}

/// Best source patch found for one target patch center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub sx: usize,
    pub sy: usize,
    pub distance: f64,
}

/// Nearest-neighbor field indexed by target patch center. Entries are
/// `None` for pixels that are not searched centers.
#[derive(Debug, Clone, PartialEq)]
pub struct NNField {
    width: usize,
    height: usize,
    patch_size: usize,
    entries: Vec<Option<Match>>,
}

impl NNField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn get(&self, x: usize, y: usize) -> Option<Match> {
        self.entries[y * self.width + x]
    }

    pub fn entries(&self) -> &[Option<Match>] {
        &self.entries
    }

    pub fn matches(&self) -> impl Iterator<Item = (usize, usize, Match)> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.map(|m| (i % self.width, i / self.width, m)))
    }

    pub fn total_distance(&self) -> f64 {
        self.entries.iter().flatten().map(|m| m.distance).sum()
    }

    pub fn mean_distance(&self) -> f64 {
        let n = self.entries.iter().flatten().count();
        if n == 0 {
            0.0
        } else {
            self.total_distance() / n as f64
        }
    }

    /// The field that maps every center of `valid` onto itself at distance 0.
    pub fn identity(valid: &Mask, patch_size: usize) -> NNField {
        let (w, h) = valid.dimensions();
        let r = patch_size / 2;
        let entries = (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                (valid.data()[i] && is_interior(x, y, w, h, r)).then_some(Match { sx: x, sy: y, distance: 0.0 })
            })
            .collect();
        NNField { width: w, height: h, patch_size, entries }
    }
}

fn is_interior(x: usize, y: usize, w: usize, h: usize, r: usize) -> bool {
    x >= r && y >= r && x + r < w && y + r < h
}

/// Sum of squared differences over all pixels and all three channels.
pub fn patch_ssd(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    assert_eq!(a.len(), b.len(), "patch sizes differ");
    let mut acc = 0.0;
    for (p, q) in a.iter().zip(b) {
        for c in 0..3 {
            let d = p[c] - q[c];
            acc += d * d;
        }
    }
    acc
}

/// Copies the patch centered on `(cx, cy)` out of `img`.
pub fn extract_patch(img: &LabImage, cx: usize, cy: usize, patch_size: usize) -> Vec<[f64; 3]> {
    let r = patch_size / 2;
    let mut out = Vec::with_capacity(patch_size * patch_size);
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            out.push(img.pixel(x, y));
        }
    }
    out
}

struct Searcher<'a> {
    tgt: &'a [[f64; 3]],
    tw: usize,
    src: &'a [[f64; 3]],
    sw: usize,
    sh: usize,
    r: usize,
    admissible: Vec<bool>,
}

impl Searcher<'_> {
    /// SSD between target patch at `(tx, ty)` and source patch at `(sx, sy)`,
    /// abandoning once the partial sum reaches `bound`.
    #[inline]
    fn distance(&self, tx: usize, ty: usize, sx: usize, sy: usize, bound: f64) -> f64 {
        let r = self.r;
        let side = 2 * r + 1;
        let mut acc = 0.0;
        for dy in 0..side {
            let trow = (ty + dy - r) * self.tw + tx - r;
            let srow = (sy + dy - r) * self.sw + sx - r;
            let t = &self.tgt[trow..trow + side];
            let s = &self.src[srow..srow + side];
            for (p, q) in t.iter().zip(s) {
                let d0 = p[0] - q[0];
                let d1 = p[1] - q[1];
                let d2 = p[2] - q[2];
                acc += d0 * d0 + d1 * d1 + d2 * d2;
            }
            if acc >= bound {
                return acc;
            }
        }
        acc
    }

    fn admissible(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.sw
            && (y as usize) < self.sh
            && self.admissible[y as usize * self.sw + x as usize]
    }

    fn try_candidate(&self, tx: usize, ty: usize, sx: usize, sy: usize, best: &mut Match) {
        if sx == best.sx && sy == best.sy {
            return;
        }
        let d = self.distance(tx, ty, sx, sy, best.distance);
        if d < best.distance {
            *best = Match { sx, sy, distance: d };
        }
    }
}

/// PatchMatch over translations, restricted to admissible database patches.
///
/// Returns the field together with the total field distance after
/// initialization and after each iteration (non-increasing).
pub fn nn_search_traced(
    target: &LabImage,
    target_valid: &Mask,
    db: &PatchDatabase,
    cfg: &SynthesisConfig,
    seed: u64,
) -> Result<(NNField, Vec<f64>)> {
    cfg.validate()?;
    if target_valid.dimensions() != target.dimensions() {
        return Err(Error::DimensionMismatch {
            expected: target.dimensions(),
            actual: target_valid.dimensions(),
        });
    }
    let r = cfg.radius();
    let (tw, th) = target.dimensions();
    let (sw, sh) = db.source.dimensions();

    let admissible: Vec<bool> = (0..sw * sh)
        .map(|i| db.valid.data()[i] && is_interior(i % sw, i / sw, sw, sh, r))
        .collect();
    let pool: Vec<(usize, usize)> = admissible
        .iter()
        .enumerate()
        .filter(|(_, &a)| a)
        .map(|(i, _)| (i % sw, i / sw))
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let centers: Vec<(usize, usize)> = (0..tw * th)
        .map(|i| (i % tw, i / tw))
        .filter(|&(x, y)| target_valid.get(x, y) && is_interior(x, y, tw, th, r))
        .collect();
    if centers.is_empty() {
        return Err(Error::NoTargetPatch);
    }

    let tgt = target.to_interleaved();
    let src = db.source.to_interleaved();
    let s = Searcher { tgt: &tgt, tw, src: &src, sw, sh, r, admissible };
    let same_geometry = (tw, th) == (sw, sh);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<Option<Match>> = vec![None; tw * th];

    // Random admissible start; the co-located patch competes when the
    // target and source share a grid.
    for &(x, y) in &centers {
        let (sx, sy) = pool[rng.random_range(0..pool.len())];
        let mut best = Match { sx, sy, distance: s.distance(x, y, sx, sy, f64::INFINITY) };
        if same_geometry && s.admissible[y * sw + x] {
            s.try_candidate(x, y, x, y, &mut best);
        }
        entries[y * tw + x] = Some(best);
    }
    let mut history = vec![entries.iter().flatten().map(|m| m.distance).sum::<f64>()];

    let max_radius = sw.max(sh) as f64;
    for iter in 0..cfg.pm_iterations {
        let forward = iter % 2 == 0;
        let step: isize = if forward { -1 } else { 1 };
        let order: Box<dyn Iterator<Item = &(usize, usize)>> = if forward {
            Box::new(centers.iter())
        } else {
            Box::new(centers.iter().rev())
        };
        for &(x, y) in order {
            let mut best = entries[y * tw + x].expect("center initialized");

            // Propagation from the already-visited horizontal and vertical neighbor.
            for (nx, ny) in [(x as isize + step, y as isize), (x as isize, y as isize + step)] {
                if nx < 0 || ny < 0 || nx as usize >= tw || ny as usize >= th {
                    continue;
                }
                if let Some(n) = entries[ny as usize * tw + nx as usize] {
                    let cx = n.sx as isize - (nx - x as isize);
                    let cy = n.sy as isize - (ny - y as isize);
                    if s.admissible(cx, cy) {
                        s.try_candidate(x, y, cx as usize, cy as usize, &mut best);
                    }
                }
            }

            // Random search in a shrinking window around the current best.
            let mut radius = max_radius;
            while radius >= 1.0 {
                let rad = radius as isize;
                for _ in 0..4 {
                    let cx = best.sx as isize + rng.random_range(-rad as i64..=rad as i64) as isize;
                    let cy = best.sy as isize + rng.random_range(-rad as i64..=rad as i64) as isize;
                    if s.admissible(cx, cy) {
                        s.try_candidate(x, y, cx as usize, cy as usize, &mut best);
                        break;
                    }
                }
                radius *= cfg.random_search_decay;
            }
            entries[y * tw + x] = Some(best);
        }
        history.push(entries.iter().flatten().map(|m| m.distance).sum());
    }

    Ok((
        NNField { width: tw, height: th, patch_size: cfg.patch_size, entries },
        history,
    ))
}

pub fn nn_search(
    target: &LabImage,
    target_valid: &Mask,
    db: &PatchDatabase,
    cfg: &SynthesisConfig,
    seed: u64,
) -> Result<NNField> {
    nn_search_traced(target, target_valid, db, cfg, seed).map(|(f, _)| f)
}

/// Overlap-averaged reconstruction.
///
/// Each non-Keep pixel takes the mean of the source colors that every
/// overlapping matched target patch places on it; patches from all fields
/// contribute, each field drawing from its own database. Keep pixels, and
/// non-Keep pixels no matched patch covers, copy `original`.
pub fn vote(
    fields: &[(&NNField, &PatchDatabase)],
    setup: &SetupMask,
    original: &LabImage,
    cfg: &SynthesisConfig,
) -> Result<LabImage> {
    let (w, h) = original.dimensions();
    if setup.dimensions() != (w, h) {
        return Err(Error::DimensionMismatch { expected: (w, h), actual: setup.dimensions() });
    }
    for (f, db) in fields {
        if (f.width, f.height) != (w, h) {
            return Err(Error::DimensionMismatch { expected: (w, h), actual: (f.width, f.height) });
        }
        if f.patch_size != cfg.patch_size {
            return Err(Error::InvalidParameter("field patch size differs from config".into()));
        }
        let _ = db;
    }
    let r = cfg.radius() as isize;
    let sources: Vec<Vec<[f64; 3]>> = fields.iter().map(|(_, db)| db.source.to_interleaved()).collect();
    let orig = original.to_interleaved();

    let rows = par::map_range(h, |y| {
        let mut uncovered = 0usize;
        let row: Vec<[f64; 3]> = (0..w)
            .map(|x| {
                let i = y * w + x;
                if setup.labels()[i] == Label::Keep {
                    return orig[i];
                }
                let mut acc = [0.0; 3];
                let mut n = 0usize;
                for dy in -r..=r {
                    let cy = y as isize - dy;
                    if cy < 0 || cy >= h as isize {
                        continue;
                    }
                    for dx in -r..=r {
                        let cx = x as isize - dx;
                        if cx < 0 || cx >= w as isize {
                            continue;
                        }
                        let ci = cy as usize * w + cx as usize;
                        for ((field, db), src) in fields.iter().zip(&sources) {
                            if let Some(m) = field.entries[ci] {
                                let sw = db.source.width();
                                let sx = (m.sx as isize + dx) as usize;
                                let sy = (m.sy as isize + dy) as usize;
                                let p = src[sy * sw + sx];
                                acc[0] += p[0];
                                acc[1] += p[1];
                                acc[2] += p[2];
                                n += 1;
                            }
                        }
                    }
                }
                if n == 0 {
                    uncovered += 1;
                    orig[i]
                } else {
                    let k = n as f64;
                    [acc[0] / k, acc[1] / k, acc[2] / k]
                }
            })
            .collect();
        (row, uncovered)
    });

    let uncovered: usize = rows.iter().map(|(_, u)| u).sum();
    if uncovered > 0 {
        log::warn!("vote: {uncovered} non-Keep pixels not covered by any matched patch; copied from original");
    }
    let mut channels = [Vec::with_capacity(w * h), Vec::with_capacity(w * h), Vec::with_capacity(w * h)];
    for (row, _) in rows {
        for p in row {
            for c in 0..3 {
                channels[c].push(p[c]);
            }
        }
    }
    LabImage::new(w, h, channels)
}
