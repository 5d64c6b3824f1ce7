use super::LabImage;

pub const SCALE_GAP: f64 = 0.5;
pub const DEFAULT_COARSEST_WIDTH: usize = 150;

/// Gaussian pyramid ordered coarse to fine; the last level is the input.
#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<LabImage>,
}

impl Pyramid {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn coarsest(&self) -> &LabImage {
        &self.levels[0]
    }

    pub fn finest(&self) -> &LabImage {
        self.levels.last().expect("pyramid has at least one level")
    }
}

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn blur_decimate(plane: &[f64], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f64> {
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    // Horizontal pass only at the retained columns.
    let mut horiz = vec![0.0; nw * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..nw {
            let cx = 2 * x as isize;
            horiz[y * nw + x] = BINOMIAL
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * row[clamp(cx + k as isize - 2, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; nw * nh];
    for y in 0..nh {
        let cy = 2 * y as isize;
        for x in 0..nw {
            out[y * nw + x] = BINOMIAL
                .iter()
                .enumerate()
                .map(|(k, wt)| wt * horiz[clamp(cy + k as isize - 2, h) * nw + x])
                .sum();
        }
    }
    out
}

fn downsample(img: &LabImage) -> LabImage {
    let (w, h) = img.dimensions();
    let (nw, nh) = ((w / 2).max(1), (h / 2).max(1));
    let channels = std::array::from_fn(|c| blur_decimate(img.channel(c), w, h, nw, nh));
    LabImage::from_planes_unchecked(nw, nh, channels)
}

/// Halves the image (binomial pre-blur, floor of half size) until the next
/// level would fall below `coarsest_width`.
pub fn build_pyramid(img: &LabImage, coarsest_width: usize) -> Pyramid {
    let mut levels = vec![img.clone()];
    loop {
        let top = levels.last().unwrap();
        if top.width() / 2 < coarsest_width.max(1) || top.height() < 2 {
            break;
        }
        let next = downsample(top);
        levels.push(next);
    }
    levels.reverse();
    Pyramid { levels }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_of_1200() {
        let p = build_pyramid(&LabImage::filled(1200, 40, [1.0, 0.0, 0.0]), 150);
        let widths: Vec<_> = p.levels.iter().map(|l| l.width()).collect();
        assert_eq!(widths, vec![150, 300, 600, 1200]);
    }

    #[test]
    fn narrow_image_is_single_level() {
        assert_eq!(build_pyramid(&LabImage::filled(160, 20, [0.0; 3]), 150).len(), 1);
        assert_eq!(build_pyramid(&LabImage::filled(90, 20, [0.0; 3]), 150).len(), 1);
    }

    #[test]
    fn level_count_formula() {
        for w in (150..2000).step_by(37).chain([299, 300, 599, 600, 601, 1199]) {
            let p = build_pyramid(&LabImage::filled(w, 8, [0.0; 3]), 150);
            let expected = ((w as f64 / 150.0).log2().floor() as usize) + 1;
            assert_eq!(p.len(), expected, "width {w}");
            assert!(p.coarsest().width() >= 150 && p.coarsest().width() < 300);
            for pair in p.levels.windows(2) {
                assert_eq!(pair[0].width(), pair[1].width() / 2);
            }
        }
    }

    #[test]
    fn constant_levels_stay_constant() {
        let p = build_pyramid(&LabImage::filled(600, 400, [55.0, 10.0, -20.0]), 150);
        for level in &p.levels {
            for (c, v) in [55.0, 10.0, -20.0].into_iter().enumerate() {
                assert!(level.channel(c).iter().all(|&x| (x - v).abs() < 1e-12));
            }
        }
    }
}
