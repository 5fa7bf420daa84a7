//! Morphometric grading of cervical intraepithelial lesions from annotated
//! epithelium patches: nuclei segmentation, overlap splitting, per-band
//! features, weighted-kNN grading and evaluation.
//!
//! Numeric stages are generic over [`scalar::Real`]; the aliases below fix
//! the common instantiations.

pub mod error;
pub mod evaluation;
pub mod grading;
pub mod model;
pub mod morphometrics;
pub mod numfmt;
pub mod overlap;
pub mod pipeline;
pub mod scalar;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use model::{ClassLabel, EpithelialRegion, Grade, MembraneAnnotation, SepImage, SilGrade};
pub use scalar::Real;

pub type Features = morphometrics::FeatureVector<f64>;
pub type Features32 = morphometrics::FeatureVector<f32>;
pub type Cell = overlap::CellEllipse<f64>;
pub type Cell32 = overlap::CellEllipse<f32>;
pub type Training = grading::TrainingSet<f64>;
pub type Training32 = grading::TrainingSet<f32>;
/// Exact metric arithmetic over confusion counts.
pub type ExactRatio = num_rational::Ratio<i64>;
