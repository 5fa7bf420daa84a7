//! Raster and table files exchanged between stages.

use std::io::BufWriter;
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::model::SepImage;
use crate::overlap::{pixel_moments, CellEllipse};
use crate::segmentation::BinaryMask;

/// Reads a PNG or TIFF patch as 8-bit RGB.
pub fn load_sep(path: &Path, id: &str) -> Result<SepImage> {
    let img = image::open(path).map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))?;
    SepImage::new(id, img.to_rgb8())
}

pub fn save_rgb_png(img: &image::RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// 1-bit grayscale PNG, foreground white.
pub fn save_mask_png(mask: &BinaryMask, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), mask.width(), mask.height());
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let stride = mask.width().div_ceil(8) as usize;
    let mut data = vec![0u8; stride * mask.height() as usize];
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                data[y as usize * stride + (x / 8) as usize] |= 0x80 >> (x % 8);
            }
        }
    }
    let mut w = enc.write_header().map_err(|e| Error::InvalidImage(e.to_string()))?;
    w.write_image_data(&data).map_err(|e| Error::InvalidImage(e.to_string()))?;
    w.finish().map_err(|e| Error::InvalidImage(e.to_string()))?;
    Ok(())
}

/// Any grayscale-convertible image; pixels brighter than mid-grey are set.
pub fn load_mask_png(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)?.to_luma8();
    let (w, h) = img.dimensions();
    let bits = img.pixels().map(|p| p.0[0] > 127).collect();
    Ok(BinaryMask::from_bits(w, h, bits))
}

/// 16-bit label image: 0 background, `i + 1` for cell `i`.
pub fn save_label_png(width: u32, height: u32, cells: &[CellEllipse<f64>], path: &Path) -> Result<()> {
    if cells.len() > usize::from(u16::MAX) {
        return Err(Error::InvalidParameter(format!("{} cells exceed the 16-bit label range", cells.len())));
    }
    let mut img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::new(width, height);
    for (i, c) in cells.iter().enumerate() {
        for &(x, y) in &c.pixels {
            img.put_pixel(x, y, Luma([i as u16 + 1]));
        }
    }
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

/// Pixel lists per label, in label order; empty labels are kept so indices
/// line up with a cell table.
pub fn load_label_png(path: &Path) -> Result<(u32, u32, Vec<Vec<(u32, u32)>>)> {
    let img = image::open(path)?.to_luma16();
    let (w, h) = img.dimensions();
    let mut cells: Vec<Vec<(u32, u32)>> = Vec::new();
    for (x, y, p) in img.enumerate_pixels() {
        let l = p.0[0] as usize;
        if l == 0 {
            continue;
        }
        if cells.len() < l {
            cells.resize(l, Vec::new());
        }
        cells[l - 1].push((x, y));
    }
    for c in &mut cells {
        c.sort_unstable_by_key(|&(x, y)| (y, x));
    }
    Ok((w, h, cells))
}

pub const CELL_COLUMNS: &str = "sep_id,cell_index,cx,cy,a,b,theta,weight,pixel_count";

pub fn cells_csv(sep_id: &str, cells: &[CellEllipse<f64>], header: bool) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    if header {
        w.write_record(CELL_COLUMNS.split(','))?;
    }
    for (i, c) in cells.iter().enumerate() {
        w.write_record([
            sep_id.to_string(),
            i.to_string(),
            c.cx.to_string(),
            c.cy.to_string(),
            c.semi_major.to_string(),
            c.semi_minor.to_string(),
            c.orientation.to_string(),
            c.weight.to_string(),
            c.pixel_count.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Table(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Table(e.to_string()))
}

/// Rebuilds cells from a label image and, when given, the matching cell
/// table (for ellipse geometry and weights). Without a table the geometry
/// comes from the label pixels.
pub fn cells_from_labels(labels: Vec<Vec<(u32, u32)>>, table: Option<&str>) -> Result<Vec<CellEllipse<f64>>> {
    #[derive(serde::Deserialize)]
    struct Row {
        cell_index: usize,
        cx: f64,
        cy: f64,
        a: f64,
        b: f64,
        theta: f64,
        weight: f64,
    }
    let rows: Option<Vec<Row>> = match table {
        Some(t) => Some(csv::Reader::from_reader(t.as_bytes()).deserialize().collect::<std::result::Result<_, _>>()?),
        None => None,
    };
    let mut out = Vec::new();
    for (i, pixels) in labels.into_iter().enumerate() {
        if pixels.is_empty() {
            continue;
        }
        let cell = match rows.as_ref().and_then(|r| r.iter().find(|row| row.cell_index == i)) {
            Some(r) => CellEllipse {
                cx: r.cx,
                cy: r.cy,
                semi_major: r.a,
                semi_minor: r.b,
                orientation: r.theta,
                weight: r.weight,
                pixel_count: pixels.len(),
                pixels,
            },
            None => {
                let (mean, cov) = pixel_moments::<f64>(&pixels).expect("non-empty");
                let (a, b, t) = crate::overlap::ellipse_axes(&cov, crate::overlap::DEFAULT_SCALE)
                    .ok_or(Error::NotPositiveDefinite { component: i })?;
                CellEllipse {
                    cx: mean[0],
                    cy: mean[1],
                    semi_major: a,
                    semi_minor: b,
                    orientation: t,
                    weight: 1.0,
                    pixel_count: pixels.len(),
                    pixels,
                }
            }
        };
        out.push(cell);
    }
    Ok(out)
}
