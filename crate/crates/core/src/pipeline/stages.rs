use serde::Serialize;

use super::config::{Config, SegmentationConfig};
use crate::error::Result;
use crate::model::{MembraneAnnotation, SepImage};
use crate::morphometrics::{build_feature_vector, FeatureVector};
use crate::overlap::{resolve_cells, Resolution};
use crate::segmentation::{cleanup_mask, foreground_mask, median_filter, slic_superpixels, BinaryMask};

#[derive(Debug, Clone, Serialize)]
pub struct SegmentSummary {
    pub superpixels: usize,
    pub slic_iterations: usize,
    pub cut: f64,
    pub degenerate: bool,
    pub foreground: usize,
}

/// Median filter → superpixels → intensity cut → cleanup.
pub fn segment(sep: &SepImage, cfg: &SegmentationConfig) -> Result<(BinaryMask, SegmentSummary)> {
    let filtered = median_filter(sep.image(), cfg.median_window)?;
    let sp = slic_superpixels::<f64>(&filtered, &cfg.slic)?;
    let fg = foreground_mask(&sp, &filtered, cfg.threshold);
    let mask = cleanup_mask(&fg.mask, cfg.min_area, cfg.close_radius);
    let summary = SegmentSummary {
        superpixels: sp.len(),
        slic_iterations: sp.iterations,
        cut: fg.cut,
        degenerate: fg.degenerate,
        foreground: mask.count(),
    };
    Ok((mask, summary))
}

pub struct SepAnalysis {
    pub mask: BinaryMask,
    pub segment: SegmentSummary,
    pub resolution: Resolution<f64>,
    pub features: FeatureVector<f64>,
}

/// The full per-SEP chain, ending in its feature vector.
pub fn analyze(sep: &SepImage, annotation: &MembraneAnnotation, cfg: &Config) -> Result<SepAnalysis> {
    let (mask, segment) = segment(sep, &cfg.segmentation)?;
    let resolution = resolve_cells::<f64>(&mask, &cfg.overlap)?;
    let features = build_feature_vector(sep, annotation, &resolution.cells, &mask, &cfg.morphometrics)?;
    Ok(SepAnalysis {
        mask,
        segment,
        resolution,
        features,
    })
}
