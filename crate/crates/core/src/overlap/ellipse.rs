use serde::{Deserialize, Serialize};

use super::gmm::{Cov2, Gaussian2};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default Mahalanobis radius of the reported ellipse.
pub const DEFAULT_SCALE: f64 = 2.0;

/// A resolved nucleus: its ellipse and the pixels assigned to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEllipse<T> {
    pub cx: T,
    pub cy: T,
    pub semi_major: T,
    pub semi_minor: T,
    /// Radians in `[0, π)` from the image x-axis to the major axis.
    pub orientation: T,
    /// Mixture weight within the cell's connected component.
    pub weight: T,
    pub pixel_count: usize,
    /// Assigned pixels `(x, y)` in row-major order.
    #[serde(default)]
    pub pixels: Vec<(u32, u32)>,
}

/// Semi-axes and orientation of the `scale`-sigma contour of `cov`.
pub fn ellipse_axes<T: Real>(cov: &Cov2<T>, scale: T) -> Option<(T, T, T)> {
    let (hi, lo) = cov.eigenvalues();
    if !(cov.xx > T::zero() && cov.det() > T::zero() && lo > T::zero()) {
        return None;
    }
    let theta = if cov.xy == T::zero() && cov.xx >= cov.yy {
        T::zero()
    } else {
        T::lit(0.5) * (T::lit(2.0) * cov.xy).atan2(cov.xx - cov.yy)
    };
    Some((scale * hi.sqrt(), scale * lo.sqrt(), normalize_angle(theta)))
}

/// Maps an axis direction onto `[0, π)`.
pub fn normalize_angle<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let mut t = theta % pi;
    if t < T::zero() {
        t += pi;
    }
    if t >= pi {
        t -= pi;
    }
    t
}

/// One ellipse per mixture component, in input order.
pub fn extract_ellipses<T: Real>(mixture: &[Gaussian2<T>], scale: T) -> Result<Vec<CellEllipse<T>>> {
    mixture
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let (a, b, theta) = ellipse_axes(&g.cov, scale).ok_or(Error::NotPositiveDefinite { component: i })?;
            Ok(CellEllipse {
                cx: g.mean[0],
                cy: g.mean[1],
                semi_major: a,
                semi_minor: b,
                orientation: theta,
                weight: g.weight,
                pixel_count: 0,
                pixels: Vec::new(),
            })
        })
        .collect()
}

/// Exact first and second moments of a pixel set.
///
/// Sums are accumulated in integers relative to the first pixel so the
/// result is identical wherever the set is placed. Each pixel is treated as
/// a unit square, which adds 1/12 to both variances and keeps one-pixel-wide
/// sets non-degenerate.
pub fn pixel_moments<T: Real>(pixels: &[(u32, u32)]) -> Option<([T; 2], Cov2<T>)> {
    let &(ox, oy) = pixels.first()?;
    let (mut sx, mut sy, mut sxx, mut sxy, mut syy) = (0i128, 0i128, 0i128, 0i128, 0i128);
    for &(x, y) in pixels {
        let (dx, dy) = (i128::from(x) - i128::from(ox), i128::from(y) - i128::from(oy));
        sx += dx;
        sy += dy;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let n = pixels.len() as i128;
    // n² · covariance, still exact
    let cxx = n * sxx - sx * sx;
    let cxy = n * sxy - sx * sy;
    let cyy = n * syy - sy * sy;
    let nf = T::lit(n as f64);
    let n2 = nf * nf;
    let twelfth = T::one() / T::lit(12.0);
    let mean = [
        T::lit(f64::from(ox)) + T::lit(sx as f64) / nf,
        T::lit(f64::from(oy)) + T::lit(sy as f64) / nf,
    ];
    let cov = Cov2 {
        xx: T::lit(cxx as f64) / n2 + twelfth,
        xy: T::lit(cxy as f64) / n2,
        yy: T::lit(cyy as f64) / n2 + twelfth,
    };
    Some((mean, cov))
}
