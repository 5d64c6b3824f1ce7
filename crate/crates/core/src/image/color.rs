//! sRGB <-> CIELAB under the D65 white point.

use super::{LabImage, RgbImage};

const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

const XYZ_TO_RGB: [[f64; 3]; 3] = [
    [3.2404542, -1.5371385, -0.4985314],
    [-0.9692660, 1.8760108, 0.0415560],
    [0.0556434, -0.2040259, 1.0572252],
];

// (6/29)^3 and its companions from the CIE definition.
const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    std::array::from_fn(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
}

pub fn srgb_to_lab_pixel(rgb: [u8; 3]) -> [f64; 3] {
    let lin = rgb.map(|c| srgb_to_linear(c as f64 / 255.0));
    let xyz = mat_mul(&RGB_TO_XYZ, lin);
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse conversion; out-of-gamut values clamp to `[0, 255]`.
pub fn lab_to_srgb_pixel(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [
        WHITE[0] * lab_f_inv(fx),
        WHITE[1] * lab_f_inv(fy),
        WHITE[2] * lab_f_inv(fz),
    ];
    mat_mul(&XYZ_TO_RGB, xyz).map(|c| {
        let s = linear_to_srgb(c.clamp(0.0, 1.0));
        (s * 255.0).round().clamp(0.0, 255.0) as u8
    })
}

pub fn rgb_to_lab(img: &RgbImage) -> LabImage {
    LabImage::from_fn(img.width(), img.height(), |x, y| srgb_to_lab_pixel(img.pixel(x, y)))
}

pub fn lab_to_rgb(img: &LabImage) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| lab_to_srgb_pixel(img.pixel(x, y)))
}
