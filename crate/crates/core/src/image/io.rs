//! PNG reading and writing. 8-bit RGB and 8-bit grayscale only.

use std::io::Cursor;
use std::path::Path;

use image::{ImageFormat, ImageReader};

use super::{Mask, RgbImage};
use crate::error::{Error, Result};

fn decode(bytes: &[u8]) -> Result<image::DynamicImage> {
    let mut reader = ImageReader::new(Cursor::new(bytes));
    reader.set_format(ImageFormat::Png);
    Ok(reader.decode()?)
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<RgbImage> {
    let img = decode(bytes)?.to_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(w as usize, h as usize, img.into_raw())
}

/// Grayscale values `>= 128` are inside the region.
pub fn decode_mask_png(bytes: &[u8]) -> Result<Mask> {
    let img = decode(bytes)?.to_luma8();
    let (w, h) = img.dimensions();
    Mask::new(w as usize, h as usize, img.into_raw().into_iter().map(|v| v >= 128).collect())
}

pub fn decode_gray_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let img = decode(bytes)?.to_luma8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

fn encode(w: usize, h: usize, data: &[u8], color: image::ExtendedColorType) -> Result<Vec<u8>> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out).write_image(data, w as u32, h as u32, color)?;
    Ok(out)
}

pub fn encode_rgb_png(img: &RgbImage) -> Result<Vec<u8>> {
    encode(img.width(), img.height(), img.data(), image::ExtendedColorType::Rgb8)
}

pub fn encode_gray_png(w: usize, h: usize, data: &[u8]) -> Result<Vec<u8>> {
    if data.len() != w * h {
        return Err(Error::InvalidParameter("gray buffer does not match its dimensions".into()));
    }
    encode(w, h, data, image::ExtendedColorType::L8)
}

pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    let data: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_gray_png(mask.width(), mask.height(), &data)
}

pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode_rgb_png(&std::fs::read(path)?)
}

pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    decode_mask_png(&std::fs::read(path)?)
}

pub fn write_rgb_png(path: impl AsRef<Path>, img: &RgbImage) -> Result<()> {
    std::fs::write(path, encode_rgb_png(img)?)?;
    Ok(())
}
