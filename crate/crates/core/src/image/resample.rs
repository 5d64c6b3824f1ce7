use super::LabImage;

/// Per-output-sample list of `(source index, weight)`.
type Taps = Vec<Vec<(usize, f64)>>;

fn axis_taps(src: usize, dst: usize) -> Taps {
    if dst < src {
        // Area weighting: output i covers [i*s, (i+1)*s) in source units.
        let s = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let lo = i as f64 * s;
                let hi = lo + s;
                let first = lo.floor() as usize;
                let last = (hi.ceil() as usize).min(src);
                (first..last)
                    .filter_map(|k| {
                        let overlap = (hi.min(k as f64 + 1.0) - lo.max(k as f64)).max(0.0);
                        (overlap > 0.0).then_some((k, overlap / s))
                    })
                    .collect()
            })
            .collect()
    } else {
        // Bilinear with pixel centers aligned.
        let s = src as f64 / dst as f64;
        (0..dst)
            .map(|i| {
                let x = ((i as f64 + 0.5) * s - 0.5).clamp(0.0, (src - 1) as f64);
                let x0 = x.floor() as usize;
                let x1 = (x0 + 1).min(src - 1);
                let t = x - x0 as f64;
                if x1 == x0 || t == 0.0 {
                    vec![(x0, 1.0)]
                } else {
                    vec![(x0, 1.0 - t), (x1, t)]
                }
            })
            .collect()
    }
}

/// Resamples one plane: area-weighted along shrinking axes, bilinear along
/// growing ones.
pub fn resample_plane(plane: &[f64], w: usize, h: usize, nw: usize, nh: usize) -> Vec<f64> {
    assert_eq!(plane.len(), w * h);
    assert!(nw > 0 && nh > 0);
    if (w, h) == (nw, nh) {
        return plane.to_vec();
    }
    let tx = axis_taps(w, nw);
    let ty = axis_taps(h, nh);

    let mut horiz = vec![0.0; nw * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for (x, taps) in tx.iter().enumerate() {
            horiz[y * nw + x] = taps.iter().map(|&(k, wt)| wt * row[k]).sum();
        }
    }
    let mut out = vec![0.0; nw * nh];
    for (y, taps) in ty.iter().enumerate() {
        for x in 0..nw {
            out[y * nw + x] = taps.iter().map(|&(k, wt)| wt * horiz[k * nw + x]).sum();
        }
    }
    out
}

pub fn resample_to(img: &LabImage, w: usize, h: usize) -> LabImage {
    if img.dimensions() == (w, h) {
        return img.clone();
    }
    let (sw, sh) = img.dimensions();
    let channels = std::array::from_fn(|c| resample_plane(img.channel(c), sw, sh, w, h));
    LabImage::from_planes_unchecked(w, h, channels)
}
