//! Procedural test scenes: a flat background carrying a few small saturated
//! distractors, and a low-contrast foreground shape that is the target
//! region. The target is deliberately not the most distinct thing in the
//! scene, so raising its saliency is a meaningful request.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::{Mask, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Square,
    Disc,
    Diamond,
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub image: RgbImage,
    pub region: Mask,
    pub shape: Shape,
}

fn inside(shape: Shape, dx: f64, dy: f64, half: f64) -> bool {
    match shape {
        Shape::Square => dx.abs() <= half && dy.abs() <= half,
        Shape::Disc => dx * dx + dy * dy <= half * half,
        Shape::Diamond => dx.abs() + dy.abs() <= half * 1.3,
    }
}

const DISTRACTOR_COLORS: [[u8; 3]; 5] = [[210, 40, 40], [40, 70, 200], [220, 190, 30], [30, 160, 60], [190, 50, 170]];

/// Deterministic scene of `size x size` pixels for `seed`.
pub fn scene(seed: u64, size: usize) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let shape = [Shape::Square, Shape::Disc, Shape::Diamond][(seed % 3) as usize];
    let gray: u8 = rng.random_range(105..=135);
    let bg = [gray, gray, gray];
    // Low contrast: a few levels of lightness and a faint tint.
    let tint: [i16; 3] = [
        rng.random_range(6..=14),
        rng.random_range(-4..=4),
        rng.random_range(-12..=-4),
    ];
    let fg: [u8; 3] = std::array::from_fn(|c| (bg[c] as i16 + tint[c]).clamp(0, 255) as u8);

    let half = s * rng.random_range(0.09..0.12);
    let cx = s * rng.random_range(0.35..0.65);
    let cy = s * rng.random_range(0.35..0.65);

    let n_distractors = rng.random_range(3..=5);
    let mut blobs = Vec::new();
    while blobs.len() < n_distractors {
        let r = s * rng.random_range(0.025..0.04);
        let bx = s * rng.random_range(0.08..0.92);
        let by = s * rng.random_range(0.08..0.92);
        // Keep distractors clear of the target and of each other.
        let clear_target = ((bx - cx).powi(2) + (by - cy).powi(2)).sqrt() > half * 1.5 + r + 6.0;
        let clear_others = blobs
            .iter()
            .all(|&(ox, oy, or, _): &(f64, f64, f64, [u8; 3])| ((bx - ox).powi(2) + (by - oy).powi(2)).sqrt() > r + or + 4.0);
        if clear_target && clear_others {
            let color = DISTRACTOR_COLORS[rng.random_range(0..DISTRACTOR_COLORS.len())];
            blobs.push((bx, by, r, color));
        }
    }

    let region = Mask::from_fn(size, size, |x, y| inside(shape, x as f64 + 0.5 - cx, y as f64 + 0.5 - cy, half));
    let image = RgbImage::from_fn(size, size, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        for &(bx, by, r, color) in &blobs {
            if (px - bx).powi(2) + (py - by).powi(2) <= r * r {
                return color;
            }
        }
        if region.get(x, y) {
            fg
        } else {
            bg
        }
    });
    Scene { image, region, shape }
}

/// The ten-scene suite used for efficacy checks.
pub fn suite(size: usize) -> Vec<Scene> {
    (0..10).map(|seed| scene(seed, size)).collect()
}
