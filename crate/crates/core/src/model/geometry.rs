use super::{EpithelialRegion, MembraneAnnotation, Point};

const ON_EDGE_EPS: f64 = 1e-9;

/// Exact Euclidean distance from `p` to the segment `a`–`b`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let (px, py) = (p.x - a.x, p.y - a.y);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (px - t * dx, py - t * dy);
    (ex * ex + ey * ey).sqrt()
}

/// Index of the segment nearest to `p` and its distance. Ties go to the
/// lower index.
pub fn nearest_segment(p: Point, polyline: &[Point]) -> Option<(usize, f64)> {
    polyline
        .windows(2)
        .enumerate()
        .map(|(i, w)| (i, point_segment_distance(p, w[0], w[1])))
        .fold(None, |best, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        })
}

pub fn polyline_distance(p: Point, polyline: &[Point]) -> f64 {
    nearest_segment(p, polyline).map_or(f64::INFINITY, |(_, d)| d)
}

/// Even-odd crossing test against the closed polygon basal → reversed upper.
/// Points on any polygon edge count as inside.
pub fn in_epithelium(p: Point, a: &MembraneAnnotation) -> bool {
    let (Some(&b0), Some(&bn)) = (a.basal.first(), a.basal.last()) else {
        return false;
    };
    let (Some(&u0), Some(&un)) = (a.upper.first(), a.upper.last()) else {
        return false;
    };

    let edges = a
        .basal
        .windows(2)
        .map(|w| (w[0], w[1]))
        .chain(std::iter::once((bn, un)))
        .chain(a.upper.windows(2).rev().map(|w| (w[1], w[0])))
        .chain(std::iter::once((u0, b0)));

    let mut inside = false;
    for (s, e) in edges {
        if point_segment_distance(p, s, e) <= ON_EDGE_EPS {
            return true;
        }
        if (s.y > p.y) != (e.y > p.y) {
            // offsets from the edge start keep the test translation-exact
            let x_offset = (p.y - s.y) * (e.x - s.x) / (e.y - s.y);
            if p.x - s.x < x_offset {
                inside = !inside;
            }
        }
    }
    inside
}

/// Relative depth `d_b / (d_b + d_u)` of `p` between the membranes, in `[0, 1]`.
pub fn relative_depth(p: Point, a: &MembraneAnnotation) -> f64 {
    let db = polyline_distance(p, &a.basal);
    let du = polyline_distance(p, &a.upper);
    let total = db + du;
    if total > 0.0 {
        db / total
    } else {
        0.0
    }
}

/// Depth band containing `p`, or `None` when `p` lies outside the
/// epithelium. Bands split relative depth at 1/3 and 2/3, lower-closed.
pub fn region_of_point(p: Point, a: &MembraneAnnotation) -> Option<EpithelialRegion> {
    if !in_epithelium(p, a) {
        return None;
    }
    // compare 3·d_b against multiples of d_b + d_u to avoid rounding in t
    let db = polyline_distance(p, &a.basal);
    let total = db + polyline_distance(p, &a.upper);
    Some(if 3.0 * db < total || total == 0.0 {
        EpithelialRegion::Lower
    } else if 3.0 * db < 2.0 * total {
        EpithelialRegion::Middle
    } else {
        EpithelialRegion::Upper
    })
}

/// Closed-disk membership in any papilla.
pub fn in_papilla(p: Point, a: &MembraneAnnotation) -> bool {
    a.papillae.iter().any(|c| {
        let (dx, dy) = (p.x - c.center.x, p.y - c.center.y);
        dx * dx + dy * dy <= c.radius * c.radius
    })
}
