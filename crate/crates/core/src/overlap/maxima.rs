use super::distance::DistanceField;
use crate::scalar::Real;
use crate::segmentation::disk_offsets;

/// Centre candidates of the distance field.
///
/// A foreground pixel is a candidate when its value is at least every value
/// in the disk of radius `r` around it. Candidates of equal value that are
/// 8-adjacent or within `r` of each other form one plateau, reported once by
/// its row-major-first pixel. Output is in row-major order as `(x, y)`.
pub fn find_local_maxima<T: Real>(d: &DistanceField<T>, r: u32) -> Vec<(u32, u32)> {
    let (w, h) = (d.width(), d.height());
    let disk = disk_offsets(r.max(1));
    let r2 = i64::from(r.max(1)).pow(2);

    let mut candidates = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let v = d.get_squared(x, y);
            if v == 0 {
                continue;
            }
            let dominated = disk.iter().any(|&(dx, dy)| {
                let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
                nx >= 0
                    && ny >= 0
                    && nx < i64::from(w)
                    && ny < i64::from(h)
                    && d.get_squared(nx as u32, ny as u32) > v
            });
            if !dominated {
                candidates.push((x, y, v));
            }
        }
    }

    // union-find over plateau links; roots stay at the smallest index, which
    // is the row-major-first member because candidates are in raster order
    let mut parent: Vec<usize> = (0..candidates.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..candidates.len() {
        let (xi, yi, vi) = candidates[i];
        for j in (i + 1)..candidates.len() {
            let (xj, yj, vj) = candidates[j];
            let dy = i64::from(yj) - i64::from(yi);
            if dy * dy > r2.max(1) {
                break;
            }
            if vi != vj {
                continue;
            }
            let dx = i64::from(xj) - i64::from(xi);
            let linked = (dx.abs() <= 1 && dy.abs() <= 1) || dx * dx + dy * dy <= r2;
            if linked {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                let (lo, hi) = (ri.min(rj), ri.max(rj));
                parent[hi] = lo;
            }
        }
    }
    (0..candidates.len())
        .filter(|&i| find(&mut parent, i) == i)
        .map(|i| (candidates[i].0, candidates[i].1))
        .collect()
}
