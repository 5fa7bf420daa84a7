use super::distance::DistanceField;
use super::gmm::Multiset;
use crate::scalar::Real;
use crate::segmentation::Component;

/// Default cap on how often one coordinate may be repeated.
pub const DEFAULT_ALPHA_CAP: u32 = 32;

/// Repeats every component pixel `min(round(d), cap)` times.
///
/// Coordinates are stored relative to `origin` so that downstream fitting
/// does not depend on where the component sits in the image.
pub fn multiplex_coordinates<T: Real>(
    d: &DistanceField<T>,
    component: &Component,
    origin: (u32, u32),
    cap: u32,
) -> Multiset<T> {
    let mut out = Multiset::default();
    for &(x, y) in &component.pixels {
        // sqrt of an integer rounds at half-integers only when 4s = (2n+1)^2,
        // which is impossible, so comparing squares is exact
        let s = d.get_squared(x, y);
        let alpha = rounded_sqrt(s).min(u64::from(cap)) as u32;
        let p = [T::from_count((x - origin.0) as usize), T::from_count((y - origin.1) as usize)];
        out.push(p, alpha);
    }
    out
}

/// `round(sqrt(s))` in integers.
fn rounded_sqrt(s: u64) -> u64 {
    let mut n = (s as f64).sqrt() as u64;
    while n * n > s {
        n -= 1;
    }
    while (n + 1) * (n + 1) <= s {
        n += 1;
    }
    // round up iff s > (n + 1/2)^2, i.e. 4s > (2n+1)^2
    if 4 * s > (2 * n + 1) * (2 * n + 1) {
        n + 1
    } else {
        n
    }
}
