//! Synthetic SEP generator with exact ground truth.
//!
//! Membranes are horizontal: the upper membrane near the top edge, the basal
//! membrane near the bottom (y grows downward). Nuclei whose relative depth
//! from the basal membrane is below the grade's dysplasia band are drawn
//! enlarged, darker, noisier and randomly oriented; the rest are small and
//! aligned with the membrane.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, EpithelialRegion, Grade, MembraneAnnotation, Papilla, Point, SepImage};
use crate::numfmt::sig6;
use crate::overlap::{ellipse_axes, normalize_angle, pixel_moments, CellEllipse, DEFAULT_SCALE};

const EPITHELIUM: [f64; 3] = [226.0, 186.0, 206.0];
const STROMA: [f64; 3] = [242.0, 218.0, 228.0];
const NUCLEUS: [f64; 3] = [112.0, 72.0, 152.0];
const DYSPLASTIC_NUCLEUS: [f64; 3] = [84.0, 46.0, 124.0];
/// Nuclear area enlargement inside the dysplasia band.
pub const DYSPLASTIC_AREA_FACTOR: f64 = 1.6;
const MAX_ATTEMPTS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub grade: Grade,
    pub width: u32,
    pub height: u32,
    pub cell_count: usize,
    /// Share of cells placed as overlapping pairs, in `[0, 1)`.
    pub overlap_fraction: f64,
    /// Relative depth below which nuclei are dysplastic; `None` uses the
    /// grade default (0, 1/3, 2/3, 1).
    pub dysplasia_band: Option<f64>,
    pub papilla_count: usize,
    /// Orientation spread of non-dysplastic nuclei around the membrane
    /// direction, degrees either side.
    pub orientation_jitter_deg: f64,
    /// Minimum boundary clearance between non-overlapping nuclei.
    pub min_gap: f64,
    /// Membrane distance from the top and bottom image edges.
    pub margin: u32,
    /// Length multiplier for nuclei and papillae; at 1 a normal nucleus has
    /// semi-axes of about 8.5 x 6 px. The default 3 keeps nuclei well above
    /// the 9 px median window, which otherwise erodes their ends.
    pub length_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            grade: Grade::Normal,
            width: 1152,
            height: 768,
            cell_count: 60,
            overlap_fraction: 0.1,
            dysplasia_band: None,
            papilla_count: 1,
            orientation_jitter_deg: 10.0,
            min_gap: 21.0,
            margin: 48,
            length_scale: 3.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn new(grade: Grade, seed: u64) -> Self {
        Self {
            grade,
            seed,
            ..Self::default()
        }
    }

    pub fn band(&self) -> f64 {
        self.dysplasia_band.unwrap_or(match self.grade {
            Grade::Normal => 0.0,
            Grade::Cin1 => 1.0 / 3.0,
            Grade::Cin2 => 2.0 / 3.0,
            Grade::Cin3 => 1.0,
        })
    }

    fn upper_y(&self) -> u32 {
        self.margin
    }

    fn basal_y(&self) -> u32 {
        self.height - 1 - self.margin
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("synth spec: {m}")));
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return bad("overlap_fraction must be in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.band()) {
            return bad("dysplasia_band must be in [0, 1]");
        }
        if self.width < 64 || self.height < 2 * self.margin + 48 {
            return bad("image too small for the membranes");
        }
        if self.min_gap < 0.0 || self.orientation_jitter_deg < 0.0 {
            return bad("min_gap and orientation_jitter_deg must be non-negative");
        }
        if !(self.length_scale > 0.0) {
            return bad("length_scale must be positive");
        }
        Ok(())
    }
}

/// One drawn nucleus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCell {
    pub cx: f64,
    pub cy: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub orientation: f64,
    pub dysplastic: bool,
    /// Band of the drawn centre.
    pub region: EpithelialRegion,
    /// Pixels inside the drawn ellipse.
    pub footprint: usize,
    /// Pixels this cell owns after later cells were painted over it.
    pub pixels: Vec<(u32, u32)>,
    /// Index of the cell it was placed to overlap, if any.
    pub partner: Option<usize>,
}

impl TruthCell {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.semi_major * self.semi_minor
    }

    /// The cell as a perfect segmentation and split would report it.
    pub fn as_resolved(&self) -> CellEllipse<f64> {
        let (mean, cov) = pixel_moments::<f64>(&self.pixels).expect("every truth cell owns pixels");
        let (a, b, t) = ellipse_axes(&cov, DEFAULT_SCALE).expect("pixel covariance is positive definite");
        CellEllipse {
            cx: mean[0],
            cy: mean[1],
            semi_major: a,
            semi_minor: b,
            orientation: t,
            weight: 1.0,
            pixel_count: self.pixels.len(),
            pixels: self.pixels.clone(),
        }
    }
}

/// Band quantities derived from the drawing parameters alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandExpectation {
    /// Lattice pixels of the band inside the epithelium, papillae excluded.
    pub area: f64,
    pub cells: usize,
    /// Σ πab over cells whose centre lies in the band.
    pub nucleus_area: f64,
    pub ana: f64,
    pub aca: f64,
    pub ncr: f64,
    /// Mean acute angle to the membrane, degrees.
    pub pli: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSep {
    pub spec: SynthSpec,
    pub sep: SepImage,
    pub annotation: MembraneAnnotation,
    pub cells: Vec<TruthCell>,
    pub expected: [BandExpectation; 3],
}

impl SynthSep {
    pub fn resolved_cells(&self) -> Vec<CellEllipse<f64>> {
        self.cells.iter().map(TruthCell::as_resolved).collect()
    }

    /// `cell_index,cx,cy,a,b,theta,dysplastic,region,footprint,pixel_count`.
    pub fn truth_csv(&self) -> String {
        let mut out = String::from("cell_index,cx,cy,a,b,theta,dysplastic,region,footprint,pixel_count\n");
        for (i, c) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "{i},{},{},{},{},{},{},{},{},{}\n",
                sig6(c.cx),
                sig6(c.cy),
                sig6(c.semi_major),
                sig6(c.semi_minor),
                sig6(c.orientation),
                u8::from(c.dysplastic),
                c.region.name(),
                c.footprint,
                c.pixels.len()
            ));
        }
        out
    }
}

/// Band of a point between horizontal membranes, by exact row arithmetic.
fn band_of(spec: &SynthSpec, y: f64) -> EpithelialRegion {
    let t = f64::from(spec.basal_y() - spec.upper_y());
    let db = f64::from(spec.basal_y()) - y;
    if 3.0 * db < t {
        EpithelialRegion::Lower
    } else if 3.0 * db < 2.0 * t {
        EpithelialRegion::Middle
    } else {
        EpithelialRegion::Upper
    }
}

fn band_areas(spec: &SynthSpec, papillae: &[Papilla]) -> [f64; 3] {
    let mut areas = [0.0; 3];
    for y in spec.upper_y()..=spec.basal_y() {
        let band = band_of(spec, f64::from(y)).index();
        let mut row = f64::from(spec.width);
        for p in papillae {
            // integer centre and radius: lattice points of the disk on this row
            let (cx, cy, r) = (p.center.x as i64, p.center.y as i64, p.radius as i64);
            let dy = i64::from(y) - cy;
            if dy.abs() <= r {
                let half = ((r * r - dy * dy) as f64).sqrt().floor() as i64;
                let lo = (cx - half).max(0);
                let hi = (cx + half).min(i64::from(spec.width) - 1);
                row -= (hi - lo + 1).max(0) as f64;
            }
        }
        areas[band] += row;
    }
    areas
}

struct Draft {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    theta: f64,
    dysplastic: bool,
    partner: Option<usize>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthSep> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);
    let (yu, yb) = (f64::from(spec.upper_y()), f64::from(spec.basal_y()));
    let thickness = yb - yu;

    let annotation_base = |papillae: Vec<Papilla>| MembraneAnnotation {
        basal: vec![Point::new(0.0, yb), Point::new(f64::from(w - 1), yb)],
        upper: vec![Point::new(0.0, yu), Point::new(f64::from(w - 1), yu)],
        papillae,
    };

    let mut papillae: Vec<Papilla> = Vec::new();
    for _ in 0..spec.papilla_count {
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            let r = (rng.random_range(10.0..=16.0) * spec.length_scale).round();
            let cx = rng.random_range((r as u32 + 4)..(w - r as u32 - 4)) as f64;
            let lo = (yu + r + 4.0) as u32;
            let hi = (yb - r - 4.0) as u32;
            if lo >= hi {
                break;
            }
            let cy = rng.random_range(lo..hi) as f64;
            let clear = papillae
                .iter()
                .all(|p| ((p.center.x - cx).powi(2) + (p.center.y - cy).powi(2)).sqrt() > p.radius + r + 20.0 * spec.length_scale);
            if clear {
                papillae.push(Papilla {
                    center: Point::new(cx, cy),
                    radius: r,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Placement(format!("could not place papilla {}", papillae.len())));
        }
    }

    let band = spec.band();
    let jitter = spec.orientation_jitter_deg.to_radians();
    let grow = DYSPLASTIC_AREA_FACTOR.sqrt();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut paired = Vec::<bool>::new();
    for i in 0..spec.cell_count {
        let want_pair = !drafts.is_empty() && rng.random_bool(spec.overlap_fraction);
        let mut placed = false;
        for _ in 0..MAX_ATTEMPTS {
            // common scale plus a mild stretch keeps aspect in [1.42, 1.56]:
            // rounder nuclei have no lattice-stable orientation
            let scale = rng.random_range(0.9..1.1);
            let stretch = rng.random_range(1.0..1.05);
            let scale = scale * spec.length_scale;
            let (mut a, mut b) = (8.5 * scale * stretch, 6.0 * scale / stretch);
            let partner = if want_pair {
                let j = rng.random_range(0..drafts.len());
                (!paired[j]).then_some(j)
            } else {
                None
            };
            let (cx, cy) = match partner {
                Some(j) => {
                    let p = &drafts[j];
                    let reach = rng.random_range(0.85..1.0) * (a * if p.dysplastic { grow } else { 1.0 } + p.a);
                    let phi = rng.random_range(0.0..std::f64::consts::TAU);
                    (p.cx + reach * phi.cos(), p.cy + reach * phi.sin())
                }
                None => (rng.random_range(0.0..f64::from(w)), rng.random_range(yu..yb)),
            };
            let depth = (yb - cy) / thickness;
            let dysplastic = depth < band;
            if dysplastic {
                a *= grow;
                b *= grow;
            }
            let theta = if dysplastic {
                rng.random_range(0.0..std::f64::consts::PI)
            } else {
                normalize_angle(rng.random_range(-jitter..=jitter))
            };
            if partner.is_some_and(|j| drafts[j].dysplastic != dysplastic) {
                continue;
            }
            // whole footprint inside the image and the epithelium
            if cx < a + 2.0 || cx > f64::from(w) - a - 3.0 || cy < yu + a + 2.0 || cy > yb - a - 2.0 {
                continue;
            }
            if papillae.iter().any(|p| ((p.center.x - cx).powi(2) + (p.center.y - cy).powi(2)).sqrt() < p.radius + a + 3.0) {
                continue;
            }
            let clear = drafts.iter().enumerate().all(|(k, d)| {
                let dist = ((d.cx - cx).powi(2) + (d.cy - cy).powi(2)).sqrt();
                if Some(k) == partner {
                    true
                } else {
                    dist >= d.a + a + spec.min_gap
                }
            });
            if !clear {
                continue;
            }
            if let Some(j) = partner {
                paired[j] = true;
            }
            paired.push(partner.is_some());
            drafts.push(Draft {
                cx,
                cy,
                a,
                b,
                theta,
                dysplastic,
                partner,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::Placement(format!(
                "could not place cell {i} of {} in {w}x{h}",
                spec.cell_count
            )));
        }
    }

    // paint
    let pixel_noise = Normal::new(0.0, 4.0).expect("valid sigma");
    let mut img = RgbImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (f64::from(x), f64::from(y));
            let inside = fy >= yu && fy <= yb;
            let in_pap = papillae
                .iter()
                .any(|p| (fx - p.center.x).powi(2) + (fy - p.center.y).powi(2) <= p.radius * p.radius);
            let base = if inside && !in_pap { EPITHELIUM } else { STROMA };
            let n = pixel_noise.sample(&mut rng);
            img.put_pixel(x, y, Rgb(base.map(|c| (c + n).round().clamp(0.0, 255.0) as u8)));
        }
    }
    let mut owner = vec![usize::MAX; (w * h) as usize];
    let mut footprints = vec![0usize; drafts.len()];
    for (i, d) in drafts.iter().enumerate() {
        let (tone, sigma, lo, hi) = if d.dysplastic {
            (DYSPLASTIC_NUCLEUS, 14.0, 0.75, 0.95)
        } else {
            (NUCLEUS, 5.0, 0.92, 1.08)
        };
        let gain = rng.random_range(lo..hi);
        let noise = Normal::new(0.0, sigma).expect("valid sigma");
        let (c, s) = (d.theta.cos(), d.theta.sin());
        let (x0, x1) = ((d.cx - d.a).floor().max(0.0) as u32, ((d.cx + d.a).ceil() as u32).min(w - 1));
        let (y0, y1) = ((d.cy - d.a).floor().max(0.0) as u32, ((d.cy + d.a).ceil() as u32).min(h - 1));
        for y in y0..=y1 {
            for x in x0..=x1 {
                let (dx, dy) = (f64::from(x) - d.cx, f64::from(y) - d.cy);
                let (u, v) = (dx * c + dy * s, -dx * s + dy * c);
                if (u / d.a).powi(2) + (v / d.b).powi(2) <= 1.0 {
                    footprints[i] += 1;
                    owner[(y * w + x) as usize] = i;
                    let n = noise.sample(&mut rng);
                    img.put_pixel(x, y, Rgb(tone.map(|t| (t * gain + n).round().clamp(0.0, 255.0) as u8)));
                }
            }
        }
    }
    let mut owned: Vec<Vec<(u32, u32)>> = vec![Vec::new(); drafts.len()];
    for y in 0..h {
        for x in 0..w {
            let o = owner[(y * w + x) as usize];
            if o != usize::MAX {
                owned[o].push((x, y));
            }
        }
    }

    let cells: Vec<TruthCell> = drafts
        .iter()
        .zip(owned)
        .zip(&footprints)
        .map(|((d, pixels), &footprint)| TruthCell {
            cx: d.cx,
            cy: d.cy,
            semi_major: d.a,
            semi_minor: d.b,
            orientation: d.theta,
            dysplastic: d.dysplastic,
            region: band_of(spec, d.cy),
            footprint,
            pixels,
            partner: d.partner,
        })
        .collect();
    if let Some(i) = cells.iter().position(|c| c.pixels.is_empty()) {
        return Err(Error::Placement(format!("cell {i} was painted over completely")));
    }

    let areas = band_areas(spec, &papillae);
    let expected = EpithelialRegion::ALL.map(|r| {
        let members: Vec<&TruthCell> = cells.iter().filter(|c| c.region == r).collect();
        let n = members.len();
        let nucleus: f64 = members.iter().map(|c| c.area()).sum();
        let pli: f64 = members
            .iter()
            .map(|c| {
                let d = c.orientation.rem_euclid(std::f64::consts::PI);
                d.min(std::f64::consts::PI - d).to_degrees()
            })
            .sum();
        let area = areas[r.index()];
        BandExpectation {
            area,
            cells: n,
            nucleus_area: nucleus,
            ana: if n > 0 { nucleus / n as f64 } else { 0.0 },
            aca: if n > 0 { area - nucleus } else { 0.0 },
            ncr: if n > 0 { nucleus / (area - nucleus) } else { 0.0 },
            pli: if n > 0 { pli / n as f64 } else { 0.0 },
        }
    });

    let id = format!("synth-{}-{}", spec.grade.name().to_lowercase(), spec.seed);
    Ok(SynthSep {
        spec: spec.clone(),
        sep: SepImage::new(id, img)?,
        annotation: annotation_base(papillae),
        cells,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{in_papilla, region_of_point};
    use crate::morphometrics::region_areas;

    #[test]
    fn normal_is_aligned() {
        let s = generate(&SynthSpec::new(Grade::Normal, 11)).unwrap();
        assert_eq!(s.spec.band(), 0.0);
        for c in &s.cells {
            assert!(!c.dysplastic);
            let d = c.orientation.min(std::f64::consts::PI - c.orientation).to_degrees();
            assert!(d <= 15.0);
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&SynthSpec::new(Grade::Cin2, 5)).unwrap();
        let b = generate(&SynthSpec::new(Grade::Cin2, 5)).unwrap();
        assert_eq!(a.sep.image().as_raw(), b.sep.image().as_raw());
        assert_eq!(a.cells, b.cells);
        assert_ne!(
            a.sep.image().as_raw(),
            generate(&SynthSpec::new(Grade::Cin2, 6)).unwrap().sep.image().as_raw()
        );
    }

    #[test]
    fn centres_lie_in_the_epithelium_and_outside_papillae() {
        let s = generate(&SynthSpec::new(Grade::Cin3, 2)).unwrap();
        for c in &s.cells {
            let p = Point::new(c.cx, c.cy);
            assert_eq!(region_of_point(p, &s.annotation), Some(c.region));
            assert!(!in_papilla(p, &s.annotation));
        }
    }

    #[test]
    fn rendered_area_matches_ellipse() {
        for g in Grade::ALL {
            let s = generate(&SynthSpec::new(g, 3)).unwrap();
            for c in &s.cells {
                let rel = (c.footprint as f64 - c.area()).abs() / c.area();
                assert!(rel < 0.10, "{g}: footprint {} vs {}", c.footprint, c.area());
            }
        }
    }

    #[test]
    fn band_areas_agree_with_polygon_counting() {
        let s = generate(&SynthSpec::new(Grade::Cin1, 8)).unwrap();
        let counted = region_areas(s.sep.width(), s.sep.height(), &s.annotation);
        for r in EpithelialRegion::ALL {
            assert_eq!(counted[r.index()] as f64, s.expected[r.index()].area);
        }
    }

    #[test]
    fn dense_cin3_enlarges_upper_nuclei() {
        let dense = |g| SynthSpec {
            width: 2304,
            height: 1152,
            cell_count: 200,
            ..SynthSpec::new(g, 21)
        };
        let cin3 = generate(&dense(Grade::Cin3)).unwrap();
        let normal = generate(&dense(Grade::Normal)).unwrap();
        let up = EpithelialRegion::Upper.index();
        assert!(cin3.expected[up].ana >= 1.5 * normal.expected[up].ana);
    }

    #[test]
    fn infeasible_density_fails() {
        let spec = SynthSpec {
            cell_count: 2000,
            ..SynthSpec::new(Grade::Normal, 1)
        };
        assert!(matches!(generate(&spec), Err(Error::Placement(_))));
    }
}
