//! The seven per-band morphological features and the 21-slot SEP vector.

mod boundary;
mod table;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    in_epithelium, in_papilla, nearest_segment, region_of_point, EpithelialRegion, Grade, MembraneAnnotation, Point,
    SepImage,
};
use crate::overlap::CellEllipse;
use crate::scalar::Real;
use crate::segmentation::BinaryMask;

pub use boundary::{ellipse_perimeter, traced_perimeter};
pub use table::{feature_columns, read_features_csv, write_features_csv};

/// Slot order inside each band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feature {
    /// Average nucleus area.
    Ana,
    /// Cytoplasm area: band area minus nucleus area.
    Aca,
    /// Nucleus-to-cytoplasm ratio.
    Ncr,
    /// Average nucleus perimeter.
    Np,
    /// Border irregularity.
    Bi,
    /// Hyperchromasia.
    Hi,
    /// Polarity angle to the basal membrane, degrees.
    Pli,
}

impl Feature {
    pub const ALL: [Feature; 7] = [Self::Ana, Self::Aca, Self::Ncr, Self::Np, Self::Bi, Self::Hi, Self::Pli];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["ana", "aca", "ncr", "np", "bi", "hi", "pli"][self as usize]
    }
}

pub const FEATURES_PER_REGION: usize = 7;
pub const FEATURE_LEN: usize = 3 * FEATURES_PER_REGION;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MorphometricsParams {
    /// NCR reported when nuclei cover the whole band.
    pub ncr_cap: f64,
}

impl Default for MorphometricsParams {
    fn default() -> Self {
        Self { ncr_cap: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics<T> {
    pub area: T,
    pub perimeter: T,
    pub border_irregularity: T,
    pub hyperchromasia: T,
    /// Degrees in `[0, 90]`.
    pub polarity_angle: T,
    /// `None` when the centre is outside the epithelium.
    pub region: Option<EpithelialRegion>,
    /// Centre inside a papilla or outside the epithelium.
    pub excluded: bool,
}

/// Metrics of one resolved cell.
///
/// The traced perimeter is clamped to at least one pixel so isolated
/// single-pixel cells keep a finite irregularity.
pub fn compute_cell_metrics<T: Real>(
    cell: &CellEllipse<T>,
    sep: &SepImage,
    a: &MembraneAnnotation,
) -> Result<CellMetrics<T>> {
    if cell.pixels.is_empty() || cell.pixel_count != cell.pixels.len() {
        return Err(Error::EmptyCell(cell.pixel_count));
    }
    let img = sep.image();
    let area = cell.pixels.len();
    let perimeter = traced_perimeter(&cell.pixels).max(1.0);
    let (sa, sb) = (cell.semi_major.to_f64_lossy(), cell.semi_minor.to_f64_lossy());
    let bi = ellipse_perimeter(sa, sb) / perimeter;

    // luminance in thousandths keeps the variance an exact integer
    let (mut s, mut s2) = (0i128, 0i128);
    for &(x, y) in &cell.pixels {
        if x >= img.width() || y >= img.height() {
            return Err(Error::InvalidParameter(format!("cell pixel ({x}, {y}) outside the image")));
        }
        let [r, g, b] = img.get_pixel(x, y).0;
        let v = 299 * i128::from(r) + 587 * i128::from(g) + 114 * i128::from(b);
        s += v;
        s2 += v * v;
    }
    let n = area as i128;
    let var_scaled = (n * s2 - s * s) as f64;
    let hi = var_scaled.max(0.0).sqrt() / (n as f64 * 1000.0);

    let centre = Point::new(cell.cx.to_f64_lossy(), cell.cy.to_f64_lossy());
    let pli = match nearest_segment(centre, &a.basal) {
        Some((i, _)) => {
            let (p, q) = (a.basal[i], a.basal[i + 1]);
            acute_angle_deg(cell.orientation.to_f64_lossy(), (q.y - p.y).atan2(q.x - p.x))
        }
        None => 0.0,
    };
    let region = region_of_point(centre, a);
    Ok(CellMetrics {
        area: T::from_count(area),
        perimeter: T::lit(perimeter),
        border_irregularity: T::lit(bi),
        hyperchromasia: T::lit(hi),
        polarity_angle: T::lit(pli),
        region,
        excluded: region.is_none() || in_papilla(centre, a),
    })
}

/// Acute angle between two undirected lines, in degrees.
pub fn acute_angle_deg(a: f64, b: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let d = (a - b).rem_euclid(pi);
    d.min(pi - d).to_degrees().clamp(0.0, 90.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionFeatures<T> {
    pub values: [T; FEATURES_PER_REGION],
    pub valid: bool,
    pub ncr_saturated: bool,
    pub cells: usize,
}

/// The seven features of one band. Cells outside `region` or excluded are
/// ignored; with no remaining cell the result is all zeros and invalid.
pub fn aggregate_region<T: Real>(
    cells: &[CellMetrics<T>],
    region: EpithelialRegion,
    region_area: T,
    params: &MorphometricsParams,
) -> Result<RegionFeatures<T>> {
    if !(region_area > T::zero()) {
        return Err(Error::InvalidParameter(format!("{} band has no area", region.name())));
    }
    let members: Vec<_> = cells.iter().filter(|c| c.region == Some(region) && !c.excluded).collect();
    if members.is_empty() {
        return Ok(RegionFeatures {
            values: [T::zero(); FEATURES_PER_REGION],
            valid: false,
            ncr_saturated: false,
            cells: 0,
        });
    }
    let n = T::from_count(members.len());
    let mean = |f: fn(&CellMetrics<T>) -> T| members.iter().map(|c| f(c)).sum::<T>() / n;
    let nucleus: T = members.iter().map(|c| c.area).sum();
    let aca = region_area - nucleus;
    let (ncr, saturated) = if aca > T::zero() {
        (nucleus / aca, false)
    } else {
        (T::lit(params.ncr_cap), true)
    };
    let mut values = [T::zero(); FEATURES_PER_REGION];
    values[Feature::Ana.index()] = nucleus / n;
    values[Feature::Aca.index()] = aca;
    values[Feature::Ncr.index()] = ncr;
    values[Feature::Np.index()] = mean(|c| c.perimeter);
    values[Feature::Bi.index()] = mean(|c| c.border_irregularity);
    values[Feature::Hi.index()] = mean(|c| c.hyperchromasia);
    values[Feature::Pli.index()] = mean(|c| c.polarity_angle);
    Ok(RegionFeatures {
        values,
        valid: true,
        ncr_saturated: saturated,
        cells: members.len(),
    })
}

/// The 21-slot morphometric description of one SEP: for each band in
/// Lower, Middle, Upper order, the features in [`Feature::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub sep_id: String,
    pub label: Option<Grade>,
    pub values: [T; FEATURE_LEN],
    pub region_valid: [bool; 3],
    #[serde(default)]
    pub ncr_saturated: [bool; 3],
}

impl<T: Real> FeatureVector<T> {
    pub fn get(&self, region: EpithelialRegion, feature: Feature) -> T {
        self.values[region.index() * FEATURES_PER_REGION + feature.index()]
    }

    pub fn convert<U: Real>(&self) -> FeatureVector<U> {
        FeatureVector {
            sep_id: self.sep_id.clone(),
            label: self.label,
            values: self.values.map(|v| U::lit(v.to_f64_lossy())),
            region_valid: self.region_valid,
            ncr_saturated: self.ncr_saturated,
        }
    }
}

/// Pixel count of each band inside the epithelium, papilla disks excluded.
pub fn region_areas(width: u32, height: u32, a: &MembraneAnnotation) -> [usize; 3] {
    let mut areas = [0usize; 3];
    for y in 0..height {
        for x in 0..width {
            let p = Point::new(f64::from(x), f64::from(y));
            if !in_epithelium(p, a) || in_papilla(p, a) {
                continue;
            }
            if let Some(r) = region_of_point(p, a) {
                areas[r.index()] += 1;
            }
        }
    }
    areas
}

/// Features of one SEP from its resolved cells. The mask only has to match
/// the image size; geometry comes from the cells' own pixels.
pub fn build_feature_vector<T: Real>(
    sep: &SepImage,
    a: &MembraneAnnotation,
    cells: &[CellEllipse<T>],
    mask: &BinaryMask,
    params: &MorphometricsParams,
) -> Result<FeatureVector<T>> {
    if mask.dims() != (sep.width(), sep.height()) {
        return Err(Error::InvalidParameter(format!(
            "mask is {}x{} but image is {}x{}",
            mask.width(),
            mask.height(),
            sep.width(),
            sep.height()
        )));
    }
    let areas = region_areas(sep.width(), sep.height(), a);
    if areas.iter().all(|&n| n == 0) {
        return Err(Error::DegenerateAnnotation);
    }

    // canonical order (by first pixel) so float sums ignore input order
    let mut order: Vec<&CellEllipse<T>> = cells.iter().collect();
    order.sort_by_key(|c| c.pixels.first().map(|&(x, y)| (y, x)));
    let metrics = order
        .into_iter()
        .map(|c| compute_cell_metrics(c, sep, a))
        .collect::<Result<Vec<_>>>()?;

    let mut values = [T::zero(); FEATURE_LEN];
    let mut region_valid = [false; 3];
    let mut ncr_saturated = [false; 3];
    for region in EpithelialRegion::ALL {
        let i = region.index();
        if areas[i] == 0 {
            continue;
        }
        let f = aggregate_region(&metrics, region, T::from_count(areas[i]), params)?;
        values[i * FEATURES_PER_REGION..(i + 1) * FEATURES_PER_REGION].copy_from_slice(&f.values);
        region_valid[i] = f.valid;
        ncr_saturated[i] = f.ncr_saturated;
    }
    Ok(FeatureVector {
        sep_id: sep.id().to_string(),
        label: None,
        values,
        region_valid,
        ncr_saturated,
    })
}
