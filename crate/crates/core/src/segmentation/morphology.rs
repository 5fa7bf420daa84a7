//! 8-connected component labeling and binary morphology with disk
//! structuring elements.

use super::mask::BinaryMask;

/// Offsets of the 8-neighbourhood.
pub const NEIGHBORS8: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// One 8-connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Pixel coordinates `(x, y)` in row-major order.
    pub pixels: Vec<(u32, u32)>,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)`.
    pub fn bbox(&self) -> (u32, u32, u32, u32) {
        self.pixels.iter().fold((u32::MAX, u32::MAX, 0, 0), |(x0, y0, x1, y1), &(x, y)| {
            (x0.min(x), y0.min(y), x1.max(x), y1.max(y))
        })
    }
}

/// Components ordered by their row-major first pixel.
pub fn connected_components(mask: &BinaryMask) -> Vec<Component> {
    let (w, h) = mask.dims();
    let mut seen = vec![false; mask.bits().len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let idx = mask.index(x, y);
            if !mask.bits()[idx] || seen[idx] {
                continue;
            }
            seen[idx] = true;
            stack.push((x, y));
            let mut pixels = Vec::new();
            while let Some((px, py)) = stack.pop() {
                pixels.push((px, py));
                for (dx, dy) in NEIGHBORS8 {
                    let (nx, ny) = (i64::from(px) + dx, i64::from(py) + dy);
                    if mask.get_signed(nx, ny) {
                        let ni = mask.index(nx as u32, ny as u32);
                        if !seen[ni] {
                            seen[ni] = true;
                            stack.push((nx as u32, ny as u32));
                        }
                    }
                }
            }
            pixels.sort_unstable_by_key(|&(x, y)| (y, x));
            out.push(Component { pixels });
        }
    }
    out
}

/// Component label per pixel: `0` for background, `i + 1` for component `i`
/// of [`connected_components`].
pub fn label_map(mask: &BinaryMask, components: &[Component]) -> Vec<u32> {
    let mut labels = vec![0u32; mask.bits().len()];
    for (i, c) in components.iter().enumerate() {
        for &(x, y) in &c.pixels {
            labels[mask.index(x, y)] = i as u32 + 1;
        }
    }
    labels
}

/// Removes 8-connected components of fewer than `min_area` pixels.
pub fn remove_small_components(mask: &BinaryMask, min_area: usize) -> BinaryMask {
    let mut out = BinaryMask::new(mask.width(), mask.height());
    for c in connected_components(mask).into_iter().filter(|c| c.area() >= min_area) {
        for (x, y) in c.pixels {
            out.set(x, y, true);
        }
    }
    out
}

pub fn disk_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = i64::from(radius);
    (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect()
}

/// Dilation with a disk; pixels outside the image count as background.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let se = disk_offsets(radius);
    let (w, h) = mask.dims();
    let mut out = BinaryMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                for &(dx, dy) in &se {
                    let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
                    if nx >= 0 && ny >= 0 && nx < i64::from(w) && ny < i64::from(h) {
                        out.set(nx as u32, ny as u32, true);
                    }
                }
            }
        }
    }
    out
}

/// Erosion with a disk; pixels outside the image count as foreground.
pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    let se = disk_offsets(radius);
    let (w, h) = mask.dims();
    BinaryMask::from_fn(w, h, |x, y| {
        se.iter().all(|&(dx, dy)| {
            let (nx, ny) = (i64::from(x) + dx, i64::from(y) + dy);
            nx < 0 || ny < 0 || nx >= i64::from(w) || ny >= i64::from(h) || mask.get(nx as u32, ny as u32)
        })
    })
}

/// Closing on the unbounded plane (the image padded with background),
/// cropped back to the image. The result always contains the input.
pub fn close(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let pad = radius;
    let padded = BinaryMask::from_fn(w + 2 * pad, h + 2 * pad, |x, y| {
        x >= pad && y >= pad && x < w + pad && y < h + pad && mask.get(x - pad, y - pad)
    });
    let closed = erode(&dilate(&padded, radius), radius);
    BinaryMask::from_fn(w, h, |x, y| closed.get(x + pad, y + pad))
}

/// Drops components smaller than `min_area`, then closes with a disk of
/// `close_radius`.
pub fn cleanup_mask(mask: &BinaryMask, min_area: usize, close_radius: u32) -> BinaryMask {
    close(&remove_small_components(mask, min_area), close_radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn from_rows(rows: &[&str]) -> BinaryMask {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        BinaryMask::from_fn(w, h, |x, y| rows[y as usize].as_bytes()[x as usize] == b'#')
    }

    #[test]
    fn diagonal_pixels_connect() {
        let m = from_rows(&["#..", ".#.", "..#", "#.."]);
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].pixels, vec![(0, 0), (1, 1), (2, 2)]);
    }

    fn block(area: usize) -> BinaryMask {
        // area pixels laid out in rows of 10 inside a 30x30 canvas
        BinaryMask::from_fn(30, 30, |x, y| {
            (5..15).contains(&x) && y >= 5 && ((y - 5) * 10 + (x - 5)) < area as u32
        })
    }

    #[test]
    fn min_area_is_strict() {
        assert!(remove_small_components(&block(49), 50).is_empty());
        assert_eq!(remove_small_components(&block(50), 50).count(), 50);
    }

    /// Closing evaluated pointwise on the unbounded plane.
    fn closing_oracle(mask: &BinaryMask, r: u32) -> BinaryMask {
        let se = disk_offsets(r);
        let dilated = |x: i64, y: i64| se.iter().any(|&(dx, dy)| mask.get_signed(x - dx, y - dy));
        BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            se.iter().all(|&(dx, dy)| dilated(i64::from(x) + dx, i64::from(y) + dy))
        })
    }

    #[test]
    fn closing_bridges_one_pixel_gap() {
        let m = BinaryMask::from_fn(20, 20, |x, y| (4..16).contains(&y) && ((3..9).contains(&x) || (10..16).contains(&x)));
        assert_eq!(connected_components(&m).len(), 2);
        let closed = close(&m, 3);
        assert_eq!(closed, closing_oracle(&m, 3));
        assert_eq!(connected_components(&closed).len(), 1);
    }

    #[test]
    fn cleanup_removes_specks_then_closes() {
        let mut m = BinaryMask::from_fn(40, 40, |x, y| (5..20).contains(&x) && (5..20).contains(&y));
        m.set(35, 35, true);
        let out = cleanup_mask(&m, 50, 3);
        assert!(!out.get(35, 35));
        assert!(out.get(10, 10));
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (4u32..24, 4u32..24).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.45), (w * h) as usize)
                .prop_map(move |bits| BinaryMask::from_bits(w, h, bits))
        })
    }

    proptest! {
        #[test]
        fn closing_matches_oracle_and_is_extensive(m in arb_mask(), r in 0u32..4) {
            let closed = close(&m, r);
            prop_assert_eq!(&closed, &closing_oracle(&m, r));
            for (a, b) in m.bits().iter().zip(closed.bits()) {
                prop_assert!(!a || *b);
            }
        }

        #[test]
        fn cleanup_never_adds_components(m in arb_mask(), min_area in 0usize..6, r in 0u32..4) {
            let before = connected_components(&m).len();
            let after = connected_components(&cleanup_mask(&m, min_area, r)).len();
            prop_assert!(after <= before);
        }
    }
}
