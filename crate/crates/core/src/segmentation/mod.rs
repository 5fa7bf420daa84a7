//! Nucleus mask extraction: median filtering, SLIC superpixels, superpixel
//! intensity thresholding and morphological cleanup.

mod mask;
mod median;
mod morphology;
mod slic;
mod threshold;

pub use mask::BinaryMask;
pub use median::median_filter;
pub use morphology::{
    cleanup_mask, close, connected_components, dilate, disk_offsets, erode, label_map,
    remove_small_components, Component, NEIGHBORS8,
};
pub use slic::{
    combined_distance, grid_interval, rgb_distance, slic_superpixels, xy_distance, SlicDistance,
    SlicParams, SuperpixelCenter, SuperpixelMap,
};
pub use threshold::{
    foreground_mask, luminance, otsu_threshold, superpixel_intensities, ForegroundMask, ThresholdMode,
};
