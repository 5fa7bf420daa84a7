use image::RgbImage;

use crate::error::{Error, Result};

/// Per-channel median over a `window × window` neighbourhood with edge
/// replication. Uses a sliding 256-bin histogram along each row.
pub fn median_filter(img: &RgbImage, window: u32) -> Result<RgbImage> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "median window must be odd and >= 3, got {window}"
        )));
    }
    let (w, h) = img.dimensions();
    let mut out = RgbImage::new(w, h);
    if w == 0 || h == 0 {
        return Ok(out);
    }
    let half = (window / 2) as i64;
    let rank = window * window / 2;
    let clamp_x = |x: i64| x.clamp(0, i64::from(w) - 1) as u32;
    let clamp_y = |y: i64| y.clamp(0, i64::from(h) - 1) as u32;

    for y in 0..h {
        let rows: Vec<u32> = (-half..=half).map(|dy| clamp_y(i64::from(y) + dy)).collect();
        let mut hist = [[0u32; 256]; 3];
        for dx in -half..=half {
            let sx = clamp_x(dx);
            for &sy in &rows {
                let p = img.get_pixel(sx, sy).0;
                for c in 0..3 {
                    hist[c][p[c] as usize] += 1;
                }
            }
        }
        for x in 0..w {
            if x > 0 {
                let leaving = clamp_x(i64::from(x) - half - 1);
                let entering = clamp_x(i64::from(x) + half);
                for &sy in &rows {
                    let p = img.get_pixel(leaving, sy).0;
                    let q = img.get_pixel(entering, sy).0;
                    for c in 0..3 {
                        hist[c][p[c] as usize] -= 1;
                        hist[c][q[c] as usize] += 1;
                    }
                }
            }
            let mut px = [0u8; 3];
            for c in 0..3 {
                px[c] = histogram_rank(&hist[c], rank);
            }
            out.put_pixel(x, y, image::Rgb(px));
        }
    }
    Ok(out)
}

fn histogram_rank(hist: &[u32; 256], rank: u32) -> u8 {
    let mut seen = 0;
    for (v, &n) in hist.iter().enumerate() {
        seen += n;
        if seen > rank {
            return v as u8;
        }
    }
    255
}
