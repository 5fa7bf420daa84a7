//! Membrane annotation files.
//!
//! ```json
//! {
//!   "basal": [[x, y], ...],
//!   "upper": [[x, y], ...],
//!   "papillae": [{"cx": x, "cy": y, "r": radius}, ...]
//! }
//! ```
//!
//! Errors carry the 1-based line of the offending element.

use std::fmt::Write as _;

use serde_json::Value;

use super::{MembraneAnnotation, Papilla, Point};
use crate::error::{Error, Result};

/// Parses and validates an annotation. When `bounds` is given as
/// `(width, height)` every point must satisfy `0 <= x <= width - 1` and
/// `0 <= y <= height - 1`.
pub fn parse_annotation(text: &str, bounds: Option<(u32, u32)>) -> Result<MembraneAnnotation> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::AnnotationSyntax {
        line: e.line(),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or_else(|| Error::AnnotationSyntax {
        line: 1,
        message: "top level must be an object".into(),
    })?;

    let basal = read_polyline(text, obj, "basal")?;
    let upper = read_polyline(text, obj, "upper")?;
    let papillae = match obj.get("papillae") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| read_papilla(text, i, v))
            .collect::<Result<_>>()?,
        Some(_) => {
            return Err(Error::AnnotationSyntax {
                line: key_line(text, "papillae"),
                message: "\"papillae\" must be an array".into(),
            })
        }
    };

    let ann = MembraneAnnotation { basal, upper, papillae };
    validate(text, &ann, bounds)?;
    Ok(ann)
}

/// Renders an annotation in the file format, one element per line.
pub fn serialize_annotation(a: &MembraneAnnotation) -> String {
    let num = |x: f64| serde_json::to_string(&x).expect("finite coordinate");
    let mut out = String::from("{\n");
    for (key, line) in [("basal", &a.basal), ("upper", &a.upper)] {
        let _ = writeln!(out, "  \"{key}\": [");
        for (i, p) in line.iter().enumerate() {
            let sep = if i + 1 < line.len() { "," } else { "" };
            let _ = writeln!(out, "    [{}, {}]{sep}", num(p.x), num(p.y));
        }
        out.push_str("  ],\n");
    }
    out.push_str("  \"papillae\": [");
    if a.papillae.is_empty() {
        out.push_str("]\n");
    } else {
        out.push('\n');
        for (i, c) in a.papillae.iter().enumerate() {
            let sep = if i + 1 < a.papillae.len() { "," } else { "" };
            let _ = writeln!(
                out,
                "    {{\"cx\": {}, \"cy\": {}, \"r\": {}}}{sep}",
                num(c.center.x),
                num(c.center.y),
                num(c.radius)
            );
        }
        out.push_str("  ]\n");
    }
    out.push_str("}\n");
    out
}

fn read_polyline(text: &str, obj: &serde_json::Map<String, Value>, key: &str) -> Result<Vec<Point>> {
    let items = match obj.get(key) {
        Some(Value::Array(items)) => items,
        Some(_) => {
            return Err(Error::AnnotationSyntax {
                line: key_line(text, key),
                message: format!("\"{key}\" must be an array of [x, y] pairs"),
            })
        }
        None => {
            return Err(Error::AnnotationSyntax {
                line: 1,
                message: format!("missing \"{key}\""),
            })
        }
    };
    items
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let pair = v.as_array().filter(|p| p.len() == 2);
            let coords = pair.and_then(|p| Some((finite(&p[0])?, finite(&p[1])?)));
            coords.map(|(x, y)| Point::new(x, y)).ok_or_else(|| Error::AnnotationSyntax {
                line: element_line(text, key, i),
                message: format!("{key}[{i}] must be a pair of finite numbers"),
            })
        })
        .collect()
}

fn read_papilla(text: &str, i: usize, v: &Value) -> Result<Papilla> {
    let field = |name: &str| v.get(name).and_then(finite);
    match (field("cx"), field("cy"), field("r")) {
        (Some(cx), Some(cy), Some(r)) => Ok(Papilla {
            center: Point::new(cx, cy),
            radius: r,
        }),
        _ => Err(Error::AnnotationSyntax {
            line: element_line(text, "papillae", i),
            message: format!("papillae[{i}] needs numeric \"cx\", \"cy\" and \"r\""),
        }),
    }
}

fn finite(v: &Value) -> Option<f64> {
    v.as_f64().filter(|x| x.is_finite())
}

fn validate(text: &str, a: &MembraneAnnotation, bounds: Option<(u32, u32)>) -> Result<()> {
    let geom = |line: usize, message: String| Error::AnnotationGeometry { line, message };

    for (key, line) in [("basal", &a.basal), ("upper", &a.upper)] {
        if line.len() < 2 {
            return Err(geom(
                key_line(text, key),
                format!("\"{key}\" needs at least 2 points, found {}", line.len()),
            ));
        }
    }

    if let Some((w, h)) = bounds {
        let (max_x, max_y) = (f64::from(w) - 1.0, f64::from(h) - 1.0);
        let inside = |p: &Point| (0.0..=max_x).contains(&p.x) && (0.0..=max_y).contains(&p.y);
        for (key, line) in [("basal", &a.basal), ("upper", &a.upper)] {
            if let Some(i) = line.iter().position(|p| !inside(p)) {
                return Err(geom(
                    element_line(text, key, i),
                    format!("{key}[{i}] lies outside the {w}x{h} image"),
                ));
            }
        }
        if let Some(i) = a.papillae.iter().position(|c| !inside(&c.center)) {
            return Err(geom(
                element_line(text, "papillae", i),
                format!("papillae[{i}] center lies outside the {w}x{h} image"),
            ));
        }
    }

    if let Some(i) = a.papillae.iter().position(|c| c.radius <= 0.0) {
        return Err(geom(
            element_line(text, "papillae", i),
            format!("papillae[{i}] radius must be positive"),
        ));
    }

    for (i, b) in a.basal.windows(2).enumerate() {
        for u in a.upper.windows(2) {
            if segments_intersect(b[0], b[1], u[0], u[1]) {
                return Err(geom(
                    element_line(text, "basal", i),
                    format!("basal segment {i} crosses the upper membrane"),
                ));
            }
        }
    }
    Ok(())
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: Point, b: Point, p: Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection, touching included.
fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    1 + text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&b| b == b'\n')
        .count()
}

/// Byte offset just after the `"key"` token followed by a colon.
fn key_offset(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let end = from + pos + needle.len();
        if text[end..].trim_start().starts_with(':') {
            return Some(end);
        }
        from = end;
    }
    None
}

fn key_line(text: &str, key: &str) -> usize {
    key_offset(text, key).map_or(1, |o| line_of_offset(text, o))
}

/// Line on which element `index` of the array stored under `key` starts.
fn element_line(text: &str, key: &str, index: usize) -> usize {
    let Some(start) = key_offset(text, key) else {
        return 1;
    };
    let bytes = text.as_bytes();
    let Some(open) = text[start..].find('[').map(|p| start + p) else {
        return line_of_offset(text, start);
    };

    let mut depth = 0usize;
    let mut seen = 0usize;
    let mut expecting = true;
    let mut in_string = false;
    let mut i = open;
    while i < bytes.len() {
        let c = bytes[i];
        if in_string {
            match c {
                b'\\' => i += 1,
                b'"' => in_string = false,
                _ => {}
            }
        } else {
            match c {
                b'[' | b'{' => {
                    if depth == 1 && expecting {
                        if seen == index {
                            return line_of_offset(text, i);
                        }
                        seen += 1;
                        expecting = false;
                    }
                    depth += 1;
                }
                b']' | b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                b',' if depth == 1 => expecting = true,
                b'"' => in_string = true,
                c if depth == 1 && expecting && !c.is_ascii_whitespace() => {
                    if seen == index {
                        return line_of_offset(text, i);
                    }
                    seen += 1;
                    expecting = false;
                }
                _ => {}
            }
        }
        i += 1;
    }
    line_of_offset(text, open)
}
