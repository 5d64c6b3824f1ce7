//! Pixel containers and the image-space primitives the rest of the engine
//! is built on: color conversion, finite differences, resampling, pyramids.

mod color;
pub(crate) mod gradient;
pub mod io;
mod pyramid;
mod resample;

pub use color::{lab_to_rgb, rgb_to_lab, srgb_to_lab_pixel, lab_to_srgb_pixel};
pub use gradient::{gradients, gradient_adjoint, GradientField};
pub use pyramid::{build_pyramid, Pyramid, DEFAULT_COARSEST_WIDTH, SCALE_GAP};
pub use resample::{resample_plane, resample_to};

use crate::error::{Error, Result};

/// 8-bit sRGB image, row-major interleaved RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        if data.len() != 3 * width * height {
            return Err(Error::InvalidParameter(format!(
                "rgb buffer length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(3 * width * height);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self { width, height, data }
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

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Planar CIELAB image. Channel 0 is L, 1 is a, 2 is b.
#[derive(Debug, Clone, PartialEq)]
pub struct LabImage {
    width: usize,
    height: usize,
    channels: [Vec<f64>; 3],
}

impl LabImage {
    pub fn new(width: usize, height: usize, channels: [Vec<f64>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("image dimensions must be positive".into()));
        }
        let n = width * height;
        if channels.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidParameter("lab plane length mismatch".into()));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("lab image contains non-finite values".into()));
        }
        Ok(Self { width, height, channels })
    }

    /// Every pixel set to `lab`.
    pub fn filled(width: usize, height: usize, lab: [f64; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let n = width * height;
        Self {
            width,
            height,
            channels: [vec![lab[0]; n], vec![lab[1]; n], vec![lab[2]; n]],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let n = width * height;
        let mut channels = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for y in 0..height {
            for x in 0..width {
                let p = f(x, y);
                for c in 0..3 {
                    channels[c].push(p[c]);
                }
            }
        }
        Self { width, height, channels }
    }

    pub(crate) fn from_planes_unchecked(width: usize, height: usize, channels: [Vec<f64>; 3]) -> Self {
        debug_assert!(channels.iter().all(|c| c.len() == width * height));
        Self { width, height, channels }
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

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>; 3] {
        &self.channels
    }

    pub fn into_channels(self) -> [Vec<f64>; 3] {
        self.channels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = y * self.width + x;
        [self.channels[0][i], self.channels[1][i], self.channels[2][i]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, lab: [f64; 3]) {
        let i = y * self.width + x;
        for (plane, v) in self.channels.iter_mut().zip(lab) {
            plane[i] = v;
        }
    }

    /// Interleaved `[L, a, b]` copy, row-major.
    pub fn to_interleaved(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|i| [self.channels[0][i], self.channels[1][i], self.channels[2][i]])
            .collect()
    }

    /// `alpha * self + beta * other`, channel-wise.
    pub fn linear_combination(&self, alpha: f64, other: &LabImage, beta: f64) -> LabImage {
        assert_eq!(self.dimensions(), other.dimensions());
        let channels = std::array::from_fn(|c| {
            self.channels[c]
                .iter()
                .zip(&other.channels[c])
                .map(|(a, b)| alpha * a + beta * b)
                .collect()
        });
        LabImage::from_planes_unchecked(self.width, self.height, channels)
    }

    /// Largest absolute per-channel difference to `other`.
    pub fn max_abs_diff(&self, other: &LabImage) -> f64 {
        assert_eq!(self.dimensions(), other.dimensions());
        self.channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Binary pixel mask. `true` marks membership in the region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::InvalidParameter("mask buffer does not match its dimensions".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// True when the mask is neither empty nor covers every pixel.
    pub fn is_proper(&self) -> bool {
        let n = self.count();
        n > 0 && n < self.data.len()
    }

    pub fn complement(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    /// Area-averaged resample followed by a 0.5 threshold.
    pub fn resample(&self, width: usize, height: usize) -> Mask {
        if (width, height) == self.dimensions() {
            return self.clone();
        }
        let plane: Vec<f64> = self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let out = resample_plane(&plane, self.width, self.height, width, height);
        Mask {
            width,
            height,
            data: out.into_iter().map(|v| v >= 0.5).collect(),
        }
    }
}
