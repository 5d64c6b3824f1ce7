use super::LabImage;

/// Forward differences per channel. `dx` is zero in the last column and
/// `dy` is zero in the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    pub dx: [Vec<f64>; 3],
    pub dy: [Vec<f64>; 3],
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn scaled(&self, s: f64) -> GradientField {
        let scale = |p: &[Vec<f64>; 3]| std::array::from_fn(|c| p[c].iter().map(|v| v * s).collect());
        GradientField {
            width: self.width,
            height: self.height,
            dx: scale(&self.dx),
            dy: scale(&self.dy),
        }
    }
}

pub(crate) fn forward_dx(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        let o = &mut out[y * width..(y + 1) * width];
        for x in 0..width.saturating_sub(1) {
            o[x] = row[x + 1] - row[x];
        }
    }
    out
}

pub(crate) fn forward_dy(plane: &[f64], width: usize, height: usize) -> Vec<f64> {
    let mut out = vec![0.0; width * height];
    for y in 0..height.saturating_sub(1) {
        for x in 0..width {
            out[y * width + x] = plane[(y + 1) * width + x] - plane[y * width + x];
        }
    }
    out
}

/// Adjoint of the forward-difference operator applied to `(gx, gy)`,
/// i.e. the negative divergence with zero-flux boundaries. Entries of `gx`
/// in the last column and `gy` in the last row are ignored.
pub(crate) fn adjoint_plane(gx: &[f64], gy: &[f64], width: usize, height: usize, out: &mut [f64]) {
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let mut v = 0.0;
            if x + 1 < width {
                v -= gx[i];
            }
            if x > 0 {
                v += gx[i - 1];
            }
            if y + 1 < height {
                v -= gy[i];
            }
            if y > 0 {
                v += gy[i - width];
            }
            out[i] = v;
        }
    }
}

pub fn gradients(img: &LabImage) -> GradientField {
    let (w, h) = img.dimensions();
    GradientField {
        width: w,
        height: h,
        dx: std::array::from_fn(|c| forward_dx(img.channel(c), w, h)),
        dy: std::array::from_fn(|c| forward_dy(img.channel(c), w, h)),
    }
}

/// Per-channel adjoint of [`gradients`], returned as an image.
pub fn gradient_adjoint(g: &GradientField) -> LabImage {
    let (w, h) = g.dimensions();
    let channels = std::array::from_fn(|c| {
        let mut out = vec![0.0; w * h];
        adjoint_plane(&g.dx[c], &g.dy[c], w, h, &mut out);
        out
    });
    LabImage::from_planes_unchecked(w, h, channels)
}
