//! Domain types shared by every stage: the epithelium image patch, its
//! membrane annotation, epithelial depth bands and lesion grades.

mod annotation;
mod geometry;

use std::fmt;
use std::str::FromStr;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use annotation::{parse_annotation, serialize_annotation};
pub use geometry::{
    in_epithelium, in_papilla, nearest_segment, point_segment_distance, polyline_distance,
    region_of_point, relative_depth,
};

/// Smallest accepted patch edge, in pixels.
pub const MIN_SEP_EDGE: u32 = 32;

/// Pixel-coordinate point; `x` grows rightward and `y` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// One small epithelial piece (SEP): an 8-bit RGB raster plus its identifier.
#[derive(Debug, Clone)]
pub struct SepImage {
    id: String,
    image: RgbImage,
}

impl SepImage {
    pub fn new(id: impl Into<String>, image: RgbImage) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidImage("empty SEP id".into()));
        }
        if image.width() < MIN_SEP_EDGE || image.height() < MIN_SEP_EDGE {
            return Err(Error::InvalidImage(format!(
                "{id}: {}x{} is below the {MIN_SEP_EDGE}x{MIN_SEP_EDGE} minimum",
                image.width(),
                image.height()
            )));
        }
        Ok(Self { id, image })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn image(&self) -> &RgbImage {
        &self.image
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn into_image(self) -> RgbImage {
        self.image
    }
}

/// Papilla annotated as a closed disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Papilla {
    pub center: Point,
    pub radius: f64,
}

/// Basal membrane, upper membrane and papillae of one SEP.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MembraneAnnotation {
    pub basal: Vec<Point>,
    pub upper: Vec<Point>,
    pub papillae: Vec<Papilla>,
}

impl MembraneAnnotation {
    /// Same annotation moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let mv = |p: &Point| Point::new(p.x + dx, p.y + dy);
        Self {
            basal: self.basal.iter().map(mv).collect(),
            upper: self.upper.iter().map(mv).collect(),
            papillae: self
                .papillae
                .iter()
                .map(|c| Papilla {
                    center: mv(&c.center),
                    radius: c.radius,
                })
                .collect(),
        }
    }
}

/// Depth band of the epithelium, ordered from the basal membrane upward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EpithelialRegion {
    Lower,
    Middle,
    Upper,
}

impl EpithelialRegion {
    pub const ALL: [EpithelialRegion; 3] = [Self::Lower, Self::Middle, Self::Upper];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Lower => "lower",
            Self::Middle => "middle",
            Self::Upper => "upper",
        }
    }
}

/// CIN-based lesion grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    Normal,
    Cin1,
    Cin2,
    Cin3,
}

/// SIL-based lesion grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SilGrade {
    Normal,
    Lsil,
    Hsil,
}

/// Closed set of class labels with a fixed display order.
pub trait ClassLabel: Copy + Eq + Ord + fmt::Debug + 'static {
    const ALL: &'static [Self];
    /// Whether label order reflects lesion severity.
    const ORDERED: bool;

    fn index(self) -> usize;
    fn name(self) -> &'static str;
}

impl Grade {
    pub const ALL: [Grade; 4] = [Self::Normal, Self::Cin1, Self::Cin2, Self::Cin3];

    pub fn sil(self) -> SilGrade {
        crate::grading::cin_to_sil(self)
    }
}

impl SilGrade {
    pub const ALL: [SilGrade; 3] = [Self::Normal, Self::Lsil, Self::Hsil];
}

impl ClassLabel for Grade {
    const ALL: &'static [Self] = &Grade::ALL;
    const ORDERED: bool = true;

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Normal => "Normal",
            Self::Cin1 => "CIN1",
            Self::Cin2 => "CIN2",
            Self::Cin3 => "CIN3",
        }
    }
}

impl ClassLabel for SilGrade {
    const ALL: &'static [Self] = &SilGrade::ALL;
    const ORDERED: bool = true;

    fn index(self) -> usize {
        self as usize
    }

    fn name(self) -> &'static str {
        match self {
            Self::Normal => "Normal",
            Self::Lsil => "LSIL",
            Self::Hsil => "HSIL",
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for SilGrade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Grade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NORMAL" | "N" => Ok(Self::Normal),
            "CIN1" | "C1" => Ok(Self::Cin1),
            "CIN2" | "C2" => Ok(Self::Cin2),
            "CIN3" | "C3" => Ok(Self::Cin3),
            other => Err(Error::InvalidParameter(format!("unknown grade {other:?}"))),
        }
    }
}

impl FromStr for SilGrade {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NORMAL" | "N" => Ok(Self::Normal),
            "LSIL" => Ok(Self::Lsil),
            "HSIL" => Ok(Self::Hsil),
            other => Err(Error::InvalidParameter(format!("unknown SIL grade {other:?}"))),
        }
    }
}
