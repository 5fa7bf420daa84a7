use std::f64::consts::SQRT_2;

/// Clockwise (with `y` downward) neighbour ring starting west.
const RING: [(i64, i64); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Length of the outer 8-connected boundary of each component of `pixels`,
/// summed. Axis steps count 1 and diagonal steps √2, so the value is the
/// length of the contour through boundary pixel centres.
pub fn traced_perimeter(pixels: &[(u32, u32)]) -> f64 {
    if pixels.is_empty() {
        return 0.0;
    }
    let (x0, y0, x1, y1) = pixels.iter().fold((u32::MAX, u32::MAX, 0, 0), |(a, b, c, d), &(x, y)| {
        (a.min(x), b.min(y), c.max(x), d.max(y))
    });
    // one background pixel of padding on every side
    let w = (x1 - x0 + 3) as usize;
    let h = (y1 - y0 + 3) as usize;
    let mut grid = vec![false; w * h];
    for &(x, y) in pixels {
        grid[(y - y0 + 1) as usize * w + (x - x0 + 1) as usize] = true;
    }

    let mut visited = vec![false; w * h];
    let mut total = 0.0;
    for start in 0..grid.len() {
        if !grid[start] || visited[start] {
            continue;
        }
        flood(&grid, &mut visited, w, start);
        total += trace(&grid, w, start);
    }
    total
}

fn flood(grid: &[bool], visited: &mut [bool], w: usize, start: usize) {
    let mut stack = vec![start];
    visited[start] = true;
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as i64, (i / w) as i64);
        for (dx, dy) in RING {
            let j = ((y + dy) as usize) * w + (x + dx) as usize;
            if grid[j] && !visited[j] {
                visited[j] = true;
                stack.push(j);
            }
        }
    }
}

/// Moore-neighbour tracing from the raster-first pixel of a component,
/// ending when the first move is about to repeat.
fn trace(grid: &[bool], w: usize, start: usize) -> f64 {
    let at = |x: i64, y: i64| grid[y as usize * w + x as usize];
    let s = ((start % w) as i64, (start / w) as i64);

    let next = |c: (i64, i64), back: usize| -> Option<(usize, (i64, i64))> {
        (1..=8).map(|k| (back + k) % 8).find_map(|d| {
            let n = (c.0 + RING[d].0, c.1 + RING[d].1);
            at(n.0, n.1).then_some((d, n))
        })
    };

    // arrived from the west, which is background for the raster-first pixel
    let Some(first) = next(s, 0) else {
        return 0.0;
    };
    let mut c = s;
    let mut back = 0usize;
    let mut length = 0.0;
    let limit = 4 * grid.len() + 8;
    for _ in 0..limit {
        let (d, n) = next(c, back).expect("component has a neighbour");
        if c == s && length > 0.0 && (d, n) == first {
            break;
        }
        length += if d % 2 == 1 { SQRT_2 } else { 1.0 };
        // the ring cell inspected just before `n`, expressed from `n`
        let b = (c.0 + RING[(d + 7) % 8].0, c.1 + RING[(d + 7) % 8].1);
        back = RING
            .iter()
            .position(|&o| o == (b.0 - n.0, b.1 - n.1))
            .expect("backtrack cell is adjacent");
        c = n;
    }
    length
}

/// Ramanujan's first approximation of an ellipse circumference.
pub fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    std::f64::consts::PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt())
}
