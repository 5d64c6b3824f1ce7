//! Ternary Increase / Decrease / Keep labelings for the three applications.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Increase,
    Decrease,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Raise the region, demote everything else.
    Enhance,
    /// Demote the region, leave the rest alone.
    Attenuate,
    /// Leave the region alone, demote the surround.
    Declutter,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "enhance" => Ok(Mode::Enhance),
            "attenuate" => Ok(Mode::Attenuate),
            "declutter" => Ok(Mode::Declutter),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetupMask {
    width: usize,
    height: usize,
    labels: Vec<Label>,
}

impl SetupMask {
    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != width * height || width == 0 || height == 0 {
            return Err(Error::InvalidParameter("setup mask does not match its dimensions".into()));
        }
        if labels.iter().all(|&l| l == Label::Keep) {
            return Err(Error::InvalidParameter("setup mask needs at least one non-Keep pixel".into()));
        }
        Ok(Self { width, height, labels })
    }

    /// Ternary gray encoding: 0 = Decrease, 128 = Keep, 255 = Increase.
    /// Values snap to the nearest of the three levels.
    pub fn from_gray(width: usize, height: usize, gray: &[u8]) -> Result<Self> {
        let labels = gray
            .iter()
            .map(|&v| match v {
                0..=63 => Label::Decrease,
                64..=191 => Label::Keep,
                _ => Label::Increase,
            })
            .collect();
        Self::new(width, height, labels)
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

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn mask_of(&self, label: Label) -> Mask {
        Mask::new(self.width, self.height, self.labels.iter().map(|&l| l == label).collect())
            .expect("dimensions match")
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    /// Nearest-label resample: each label plane is area-averaged and the
    /// pixel takes the label with the largest coverage.
    pub fn resample(&self, width: usize, height: usize) -> SetupMask {
        if (width, height) == self.dimensions() {
            return self.clone();
        }
        let planes: Vec<Vec<f64>> = [Label::Increase, Label::Decrease, Label::Keep]
            .iter()
            .map(|&l| {
                let p: Vec<f64> = self.labels.iter().map(|&x| if x == l { 1.0 } else { 0.0 }).collect();
                crate::image::resample_plane(&p, self.width, self.height, width, height)
            })
            .collect();
        let labels = (0..width * height)
            .map(|i| {
                let (inc, dec, keep) = (planes[0][i], planes[1][i], planes[2][i]);
                if inc >= dec && inc >= keep {
                    Label::Increase
                } else if dec >= keep {
                    Label::Decrease
                } else {
                    Label::Keep
                }
            })
            .collect();
        SetupMask { width, height, labels }
    }

    pub fn to_gray(&self) -> Vec<u8> {
        self.labels
            .iter()
            .map(|l| match l {
                Label::Decrease => 0,
                Label::Keep => 128,
                Label::Increase => 255,
            })
            .collect()
    }
}

/// Maps a region and a mode onto a labeling.
pub fn build_setup(mask: &Mask, mode: Mode) -> Result<SetupMask> {
    if !mask.is_proper() {
        return Err(Error::DegenerateRegion);
    }
    let (inside, outside) = match mode {
        Mode::Enhance => (Label::Increase, Label::Decrease),
        Mode::Attenuate => (Label::Decrease, Label::Keep),
        Mode::Declutter => (Label::Keep, Label::Decrease),
    };
    let labels = mask.data().iter().map(|&m| if m { inside } else { outside }).collect();
    SetupMask::new(mask.width(), mask.height(), labels)
}

/// The region whose contrast against the rest drives the threshold search:
/// the region itself for Enhance and Declutter, its complement for Attenuate.
pub fn contrast_region(mask: &Mask, mode: Mode) -> Mask {
    match mode {
        Mode::Enhance | Mode::Declutter => mask.clone(),
        Mode::Attenuate => mask.complement(),
    }
}

/// Contrast region for an arbitrary labeling: Increase pixels when present,
/// otherwise everything not labeled Decrease.
pub fn contrast_region_of(setup: &SetupMask) -> Mask {
    if setup.count(Label::Increase) > 0 {
        setup.mask_of(Label::Increase)
    } else {
        setup.mask_of(Label::Decrease).complement()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enhance_top_half() {
        let m = Mask::from_fn(4, 4, |_, y| y < 2);
        let s = build_setup(&m, Mode::Enhance).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                let want = if y < 2 { Label::Increase } else { Label::Decrease };
                assert_eq!(s.get(x, y), want);
            }
        }
    }

    #[test]
    fn attenuate_blob() {
        let m = Mask::from_fn(8, 8, |x, y| (3..5).contains(&x) && (3..5).contains(&y));
        let s = build_setup(&m, Mode::Attenuate).unwrap();
        assert_eq!(s.count(Label::Decrease), 4);
        assert_eq!(s.count(Label::Keep), 60);
        assert_eq!(s.count(Label::Increase), 0);
        assert_eq!(contrast_region_of(&s), contrast_region(&m, Mode::Attenuate));
    }

    #[test]
    fn declutter_center() {
        let m = Mask::from_fn(8, 8, |x, y| (2..6).contains(&x) && (2..6).contains(&y));
        let s = build_setup(&m, Mode::Declutter).unwrap();
        assert_eq!(s.get(4, 4), Label::Keep);
        assert_eq!(s.get(0, 0), Label::Decrease);
        assert_eq!(contrast_region_of(&s), m);
    }

    #[test]
    fn degenerate_masks_rejected() {
        for m in [Mask::from_fn(3, 3, |_, _| false), Mask::from_fn(3, 3, |_, _| true)] {
            assert!(matches!(build_setup(&m, Mode::Enhance), Err(Error::DegenerateRegion)));
        }
    }

    #[test]
    fn gray_encoding_round_trip() {
        let s = SetupMask::from_gray(3, 1, &[0, 128, 255]).unwrap();
        assert_eq!(s.labels(), &[Label::Decrease, Label::Keep, Label::Increase]);
        assert_eq!(s.to_gray(), vec![0, 128, 255]);
    }
}
