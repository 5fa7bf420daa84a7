use image::RgbImage;
use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use super::slic::SuperpixelMap;

/// How the superpixel intensity cut is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Otsu,
    /// Superpixels with mean intensity strictly below the value are foreground.
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct ForegroundMask {
    pub mask: BinaryMask,
    /// Foreground iff superpixel mean intensity `< cut`.
    pub cut: f64,
    /// All superpixels shared one intensity, so no threshold exists.
    pub degenerate: bool,
}

pub fn luminance(rgb: [u8; 3]) -> f64 {
    0.299 * f64::from(rgb[0]) + 0.587 * f64::from(rgb[1]) + 0.114 * f64::from(rgb[2])
}

/// Otsu threshold over a 256-bin histogram. Returns the bin `t` such that
/// bins `<= t` form the dark class; when several cuts share the maximal
/// between-class variance the middle one is taken. `None` when fewer than two
/// bins are occupied.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Option<u8> {
    let occupied = histogram.iter().filter(|&&n| n > 0).count();
    if occupied < 2 {
        return None;
    }
    let total: u64 = histogram.iter().sum();
    let total_mass: u64 = histogram.iter().enumerate().map(|(v, &n)| v as u64 * n).sum();

    let mut best = f64::NEG_INFINITY;
    let (mut first, mut last) = (0usize, 0usize);
    let (mut w0, mut mass0) = (0u64, 0u64);
    for t in 0..255 {
        w0 += histogram[t];
        mass0 += t as u64 * histogram[t];
        if w0 == 0 || w0 == total {
            continue;
        }
        let w1 = total - w0;
        let mu0 = mass0 as f64 / w0 as f64;
        let mu1 = (total_mass - mass0) as f64 / w1 as f64;
        let between = w0 as f64 * w1 as f64 * (mu0 - mu1) * (mu0 - mu1);
        if between > best {
            best = between;
            first = t;
            last = t;
        } else if between == best {
            last = t;
        }
    }
    Some(((first + last) / 2) as u8)
}

/// Mean luminance of each superpixel.
pub fn superpixel_intensities<T>(sp: &SuperpixelMap<T>, img: &RgbImage) -> Vec<f64> {
    let mut sums = vec![(0.0f64, 0usize); sp.len()];
    for (idx, &l) in sp.labels.iter().enumerate() {
        let (x, y) = ((idx % sp.width as usize) as u32, (idx / sp.width as usize) as u32);
        let s = &mut sums[l as usize];
        s.0 += luminance(img.get_pixel(x, y).0);
        s.1 += 1;
    }
    sums.into_iter()
        .map(|(s, n)| if n > 0 { s / n as f64 } else { 0.0 })
        .collect()
}

/// Darker-than-threshold superpixels become foreground.
pub fn foreground_mask<T>(sp: &SuperpixelMap<T>, img: &RgbImage, mode: ThresholdMode) -> ForegroundMask {
    let means = superpixel_intensities(sp, img);
    let (cut, degenerate) = match mode {
        ThresholdMode::Fixed(v) => (v, false),
        ThresholdMode::Otsu => {
            let mut hist = [0u64; 256];
            for &m in &means {
                hist[m.round().clamp(0.0, 255.0) as usize] += 1;
            }
            match otsu_threshold(&hist) {
                Some(t) => (f64::from(t) + 0.5, false),
                None => (f64::NEG_INFINITY, true),
            }
        }
    };
    let fg: Vec<bool> = means.iter().map(|&m| m < cut).collect();
    let bits = sp.labels.iter().map(|&l| fg[l as usize]).collect();
    ForegroundMask {
        mask: BinaryMask::from_bits(sp.width, sp.height, bits),
        cut,
        degenerate,
    }
}
