use crate::scalar::Real;
use crate::segmentation::BinaryMask;

/// Euclidean distance from every pixel to the nearest background pixel.
///
/// Pixels outside the image count as background, so a foreground pixel on
/// the image border has distance 1. Squared distances are kept as exact
/// integers; `values` holds their square roots.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField<T> {
    width: u32,
    height: u32,
    squared: Vec<u64>,
    values: Vec<T>,
}

impl<T: Real> DistanceField<T> {
    pub fn from_squared(width: u32, height: u32, squared: Vec<u64>) -> Self {
        assert_eq!(squared.len(), width as usize * height as usize);
        let values = squared.iter().map(|&s| T::lit(s as f64).sqrt()).collect();
        Self {
            width,
            height,
            squared,
            values,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn squared(&self) -> &[u64] {
        &self.squared
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.values[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn get_squared(&self, x: u32, y: u32) -> u64 {
        self.squared[y as usize * self.width as usize + x as usize]
    }
}

/// Exact Euclidean distance transform (separable lower-envelope method).
pub fn distance_transform<T: Real>(mask: &BinaryMask) -> DistanceField<T> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    // one-pixel ring of background stands in for everything outside the image
    let (pw, ph) = (w + 2, h + 2);
    let mut grid = vec![f64::INFINITY; pw * ph];
    for py in 0..ph {
        for px in 0..pw {
            let inside = px >= 1 && py >= 1 && px <= w && py <= h;
            if !inside || !mask.get(px as u32 - 1, py as u32 - 1) {
                grid[py * pw + px] = 0.0;
            }
        }
    }

    let mut line = vec![0.0; pw.max(ph)];
    let mut out = vec![0.0; pw.max(ph)];
    let mut scratch = Envelope::with_capacity(pw.max(ph));
    for px in 0..pw {
        for py in 0..ph {
            line[py] = grid[py * pw + px];
        }
        scratch.transform(&line[..ph], &mut out[..ph]);
        for py in 0..ph {
            grid[py * pw + px] = out[py];
        }
    }
    for py in 0..ph {
        let row = &mut grid[py * pw..(py + 1) * pw];
        line[..pw].copy_from_slice(row);
        scratch.transform(&line[..pw], &mut out[..pw]);
        row.copy_from_slice(&out[..pw]);
    }

    let mut squared = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            squared.push(grid[(y + 1) * pw + x + 1] as u64);
        }
    }
    DistanceField::from_squared(mask.width(), mask.height(), squared)
}

/// Lower envelope of parabolas for the 1-D squared distance transform.
struct Envelope {
    vertex: Vec<usize>,
    bound: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            vertex: Vec::with_capacity(n),
            bound: Vec::with_capacity(n + 1),
        }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64]) {
        self.vertex.clear();
        self.bound.clear();
        let parabola = |q: usize| f[q] + (q * q) as f64;
        for q in 0..f.len() {
            if !f[q].is_finite() {
                continue;
            }
            loop {
                let Some(&v) = self.vertex.last() else {
                    self.vertex.push(q);
                    self.bound.push(f64::NEG_INFINITY);
                    break;
                };
                let s = (parabola(q) - parabola(v)) / (2.0 * (q as f64 - v as f64));
                if s <= *self.bound.last().expect("bound per vertex") {
                    self.vertex.pop();
                    self.bound.pop();
                } else {
                    self.vertex.push(q);
                    self.bound.push(s);
                    break;
                }
            }
        }
        if self.vertex.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut j = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            while j + 1 < self.vertex.len() && self.bound[j + 1] < q as f64 {
                j += 1;
            }
            let v = self.vertex[j];
            let d = q as f64 - v as f64;
            *slot = d * d + f[v];
        }
    }
}
