//! Splitting merged nucleus blobs into elliptical cells: distance field,
//! seed maxima, distance-weighted coordinate multiset, and a Gaussian
//! mixture fitted per connected component.

mod distance;
mod ellipse;
mod gmm;
mod maxima;
mod multiplex;
mod resolve;

pub use distance::{distance_transform, DistanceField};
pub use ellipse::{ellipse_axes, extract_ellipses, normalize_angle, pixel_moments, CellEllipse, DEFAULT_SCALE};
pub use gmm::{fit_gmm, Cov2, EmParams, Gaussian2, GmmFit, Multiset};
pub use maxima::find_local_maxima;
pub use multiplex::{multiplex_coordinates, DEFAULT_ALPHA_CAP};
pub use resolve::{resolve_cells, ComponentReport, EllipseGeometry, OverlapParams, Resolution};
