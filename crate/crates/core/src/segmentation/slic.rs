//! Simple linear iterative clustering in RGB space.

use std::collections::VecDeque;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rule combining colour distance and spatial distance into one clustering
/// distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlicDistance {
    /// `d_rgb + (m / N) · d_xy`
    #[default]
    Standard,
    /// `d_rgb + m / (N · d_xy)`, with `d_xy` clamped to at least one pixel.
    InverseSpatial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlicParams {
    pub k: usize,
    pub compactness: f64,
    pub distance: SlicDistance,
    pub max_iter: usize,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            k: 3000,
            compactness: 10.0,
            distance: SlicDistance::Standard,
            max_iter: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpixelCenter<T> {
    pub rgb: [T; 3],
    pub x: T,
    pub y: T,
    pub size: usize,
}

#[derive(Debug, Clone)]
pub struct SuperpixelMap<T> {
    pub width: u32,
    pub height: u32,
    /// Row-major superpixel id per pixel, in `0..centers.len()`.
    pub labels: Vec<u32>,
    /// Requested superpixel count.
    pub k: usize,
    pub centers: Vec<SuperpixelCenter<T>>,
    pub iterations: usize,
}

impl<T> SuperpixelMap<T> {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn label(&self, x: u32, y: u32) -> u32 {
        self.labels[y as usize * self.width as usize + x as usize]
    }
}

/// Grid interval `N = sqrt(w·h / k)`.
pub fn grid_interval<T: Real>(width: u32, height: u32, k: usize) -> T {
    (T::from_count(width as usize * height as usize) / T::from_count(k)).sqrt()
}

pub fn rgb_distance<T: Real>(a: [T; 3], b: [T; 3]) -> T {
    let (dr, dg, db) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dr * dr + dg * dg + db * db).sqrt()
}

pub fn xy_distance<T: Real>(ax: T, ay: T, bx: T, by: T) -> T {
    let (dx, dy) = (ax - bx, ay - by);
    (dx * dx + dy * dy).sqrt()
}

pub fn combined_distance<T: Real>(d_rgb: T, d_xy: T, grid: T, m: T, rule: SlicDistance) -> T {
    match rule {
        SlicDistance::Standard => d_rgb + m / grid * d_xy,
        SlicDistance::InverseSpatial => d_rgb + m / (grid * d_xy.max(T::one())),
    }
}

fn pixel_rgb<T: Real>(img: &RgbImage, x: u32, y: u32) -> [T; 3] {
    let p = img.get_pixel(x, y).0;
    [T::lit(p[0].into()), T::lit(p[1].into()), T::lit(p[2].into())]
}

pub fn slic_superpixels<T: Real>(img: &RgbImage, params: &SlicParams) -> Result<SuperpixelMap<T>> {
    let (w, h) = img.dimensions();
    let n_px = w as usize * h as usize;
    let k = params.k;
    if k == 0 || k > n_px {
        return Err(Error::InvalidParameter(format!(
            "superpixel count {k} outside 1..={n_px}"
        )));
    }
    let grid: T = grid_interval(w, h, k);
    let m = T::lit(params.compactness);

    let grid_f = grid.to_f64_lossy();
    let mut nx = ((f64::from(w) / grid_f).floor() as usize).clamp(1, w as usize);
    let mut ny = ((f64::from(h) / grid_f).floor() as usize).clamp(1, h as usize);
    while nx * ny > k {
        if nx >= ny {
            nx -= 1;
        } else {
            ny -= 1;
        }
    }
    let (step_x, step_y) = (f64::from(w) / nx as f64, f64::from(h) / ny as f64);

    let mut centers: Vec<SuperpixelCenter<T>> = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let cx = (((i as f64 + 0.5) * step_x).floor() as u32).min(w - 1);
            let cy = (((j as f64 + 0.5) * step_y).floor() as u32).min(h - 1);
            centers.push(SuperpixelCenter {
                rgb: pixel_rgb(img, cx, cy),
                x: T::lit(cx.into()),
                y: T::lit(cy.into()),
                size: 0,
            });
        }
    }

    let mut labels = vec![u32::MAX; n_px];
    let mut best = vec![T::infinity(); n_px];
    let mut iterations = 0;
    for _ in 0..params.max_iter.max(1) {
        iterations += 1;
        labels.fill(u32::MAX);
        best.fill(T::infinity());
        for (ci, c) in centers.iter().enumerate() {
            let x0 = (c.x - grid).ceil().max(T::zero()).to_f64_lossy() as u32;
            let y0 = (c.y - grid).ceil().max(T::zero()).to_f64_lossy() as u32;
            let x1 = ((c.x + grid).floor().to_f64_lossy() as i64).min(i64::from(w) - 1);
            let y1 = ((c.y + grid).floor().to_f64_lossy() as i64).min(i64::from(h) - 1);
            if x1 < 0 || y1 < 0 {
                continue;
            }
            for y in y0..=y1 as u32 {
                for x in x0..=x1 as u32 {
                    let d_rgb = rgb_distance(pixel_rgb(img, x, y), c.rgb);
                    let d_xy = xy_distance(T::lit(x.into()), T::lit(y.into()), c.x, c.y);
                    let d = combined_distance(d_rgb, d_xy, grid, m, params.distance);
                    let idx = y as usize * w as usize + x as usize;
                    if d < best[idx] {
                        best[idx] = d;
                        labels[idx] = ci as u32;
                    }
                }
            }
        }

        let updated = accumulate_centers(img, &labels, centers.len());
        let mut movement = T::zero();
        for (c, u) in centers.iter_mut().zip(updated) {
            if u.size > 0 {
                movement = movement.max(xy_distance(c.x, c.y, u.x, u.y));
                *c = u;
            }
        }
        if movement < T::one() {
            break;
        }
    }

    let labels = enforce_connectivity(&labels, w, h, centers.len());
    let count = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let centers = accumulate_centers(img, &labels, count);
    Ok(SuperpixelMap {
        width: w,
        height: h,
        labels,
        k,
        centers,
        iterations,
    })
}

fn accumulate_centers<T: Real>(img: &RgbImage, labels: &[u32], count: usize) -> Vec<SuperpixelCenter<T>> {
    let w = img.width() as usize;
    let mut sums = vec![([0u64; 3], 0u64, 0u64, 0usize); count];
    for (idx, &l) in labels.iter().enumerate() {
        if l == u32::MAX {
            continue;
        }
        let (x, y) = ((idx % w) as u32, (idx / w) as u32);
        let p = img.get_pixel(x, y).0;
        let s = &mut sums[l as usize];
        for c in 0..3 {
            s.0[c] += u64::from(p[c]);
        }
        s.1 += u64::from(x);
        s.2 += u64::from(y);
        s.3 += 1;
    }
    sums.into_iter()
        .map(|(rgb, sx, sy, n)| {
            if n == 0 {
                return SuperpixelCenter {
                    rgb: [T::zero(); 3],
                    x: T::zero(),
                    y: T::zero(),
                    size: 0,
                };
            }
            let nt = T::from_count(n);
            let c = |v: u64| T::lit(v as f64) / nt;
            SuperpixelCenter {
                rgb: [c(rgb[0]), c(rgb[1]), c(rgb[2])],
                x: c(sx),
                y: c(sy),
                size: n,
            }
        })
        .collect()
}

/// Keeps the largest 4-connected fragment of every cluster and merges every
/// other fragment (and any unassigned pixels) into the adjacent superpixel
/// sharing the longest border. Output ids are compact, in raster order of
/// first appearance.
fn enforce_connectivity(labels: &[u32], w: u32, h: u32, n_clusters: usize) -> Vec<u32> {
    let (w, h) = (w as usize, h as usize);
    let n = w * h;
    let mut frag = vec![usize::MAX; n];
    let mut frag_label = Vec::new();
    let mut frag_size = Vec::new();
    let mut queue = VecDeque::new();

    for start in 0..n {
        if frag[start] != usize::MAX {
            continue;
        }
        let id = frag_label.len();
        let label = labels[start];
        frag[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            for q in neighbors4(p, w, h) {
                if frag[q] == usize::MAX && labels[q] == label {
                    frag[q] = id;
                    queue.push_back(q);
                }
            }
        }
        frag_label.push(label);
        frag_size.push(size);
    }

    let mut largest: Vec<Option<usize>> = vec![None; n_clusters];
    for (f, (&l, &s)) in frag_label.iter().zip(&frag_size).enumerate() {
        if l == u32::MAX {
            continue;
        }
        let slot = &mut largest[l as usize];
        if slot.is_none_or(|b| frag_size[b] < s) {
            *slot = Some(f);
        }
    }

    // resolved[f] = final cluster of fragment f
    let mut resolved: Vec<Option<u32>> = frag_label
        .iter()
        .enumerate()
        .map(|(f, &l)| (l != u32::MAX && largest[l as usize] == Some(f)).then_some(l))
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); frag_label.len()];
    for (p, &f) in frag.iter().enumerate() {
        if resolved[f].is_none() {
            members[f].push(p);
        }
    }
    let mut pending: Vec<usize> = (0..frag_label.len()).filter(|&f| resolved[f].is_none()).collect();
    while !pending.is_empty() {
        let mut progressed = false;
        let mut still = Vec::new();
        for &f in &pending {
            let mut border: Vec<(u32, usize)> = Vec::new();
            for &p in &members[f] {
                for q in neighbors4(p, w, h) {
                    if let Some(l) = resolved[frag[q]] {
                        match border.iter_mut().find(|(bl, _)| *bl == l) {
                            Some(entry) => entry.1 += 1,
                            None => border.push((l, 1)),
                        }
                    }
                }
            }
            let choice = border
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(l, _)| l);
            match choice {
                Some(l) => {
                    resolved[f] = Some(l);
                    progressed = true;
                }
                None => still.push(f),
            }
        }
        if !progressed {
            // unreachable for non-empty images: every image has a kept fragment
            for f in still.drain(..) {
                resolved[f] = Some(0);
            }
        }
        pending = still;
    }

    let mut remap = vec![u32::MAX; n_clusters.max(1)];
    let mut next = 0u32;
    frag.iter()
        .map(|&f| {
            let l = resolved[f].expect("all fragments resolved") as usize;
            if remap[l] == u32::MAX {
                remap[l] = next;
                next += 1;
            }
            remap[l]
        })
        .collect()
}

fn neighbors4(p: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (p % w, p / w);
    let left = (x > 0).then(|| p - 1);
    let right = (x + 1 < w).then(|| p + 1);
    let up = (y > 0).then(|| p - w);
    let down = (y + 1 < h).then(|| p + w);
    [left, right, up, down].into_iter().flatten()
}
