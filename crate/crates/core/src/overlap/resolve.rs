use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::{distance_transform, DistanceField};
use super::ellipse::{ellipse_axes, pixel_moments, CellEllipse, DEFAULT_SCALE};
use super::gmm::{fit_gmm, EmParams, Gaussian2};
use super::maxima::find_local_maxima;
use super::multiplex::{multiplex_coordinates, DEFAULT_ALPHA_CAP};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::segmentation::{connected_components, BinaryMask, Component};

/// Where a reported cell's ellipse comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EllipseGeometry {
    /// Moments of the pixels hard-assigned to the cell (same for every K).
    #[default]
    AssignedPixels,
    /// Fitted mixture covariance; single-seed components still use pixels.
    Mixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OverlapParams {
    /// Local-maxima radius, roughly one nucleus radius.
    pub r: u32,
    pub scale: f64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub alpha_cap: u32,
    pub geometry: EllipseGeometry,
}

impl Default for OverlapParams {
    fn default() -> Self {
        Self {
            r: 10,
            scale: DEFAULT_SCALE,
            em_tol: 1e-4,
            em_max_iter: 100,
            alpha_cap: DEFAULT_ALPHA_CAP,
            geometry: EllipseGeometry::AssignedPixels,
        }
    }
}

impl OverlapParams {
    fn em(&self) -> EmParams {
        let r = f64::from(self.r);
        EmParams {
            tol: self.em_tol,
            max_iter: self.em_max_iter,
            init_var: r * r / 2.0,
            ..EmParams::default()
        }
    }
}

/// What happened to one connected component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub area: usize,
    pub seeds: usize,
    /// Seed indices whose mixture weight collapsed.
    pub collapsed: Vec<usize>,
    /// Seeds that survived EM but won no pixel.
    pub unassigned: Vec<usize>,
    /// Too few multiplexed points for the seed count; fitted as one cell.
    pub single_fallback: bool,
    pub em_iterations: usize,
    pub em_converged: bool,
    /// Log-likelihood after each EM step, and the trace positions right
    /// after a component drop.
    pub em_log_likelihood: Vec<f64>,
    pub em_restarts: Vec<usize>,
    pub cells: usize,
}

#[derive(Debug, Clone)]
pub struct Resolution<T> {
    pub cells: Vec<CellEllipse<T>>,
    pub components: Vec<ComponentReport>,
}

/// Splits every 8-connected component of `mask` into elliptical cells.
pub fn resolve_cells<T: Real>(mask: &BinaryMask, params: &OverlapParams) -> Result<Resolution<T>> {
    if params.r == 0 {
        return Err(Error::InvalidParameter("overlap radius must be at least 1".into()));
    }
    if !(params.scale > 0.0) {
        return Err(Error::InvalidParameter("ellipse scale must be positive".into()));
    }
    let field = distance_transform::<T>(mask);
    let components = connected_components(mask);
    let per: Vec<_> = components
        .par_iter()
        .map(|c| resolve_component(&field, c, params))
        .collect::<Result<_>>()?;
    let mut cells = Vec::new();
    let mut reports = Vec::with_capacity(per.len());
    for (mut c, r) in per {
        cells.append(&mut c);
        reports.push(r);
    }
    Ok(Resolution { cells, components: reports })
}

fn single_cell<T: Real>(pixels: Vec<(u32, u32)>, weight: T, scale: T) -> CellEllipse<T> {
    let (mean, cov) = pixel_moments::<T>(&pixels).expect("non-empty pixel set");
    let (a, b, theta) = ellipse_axes(&cov, scale).expect("pixel covariance is positive definite");
    CellEllipse {
        cx: mean[0],
        cy: mean[1],
        semi_major: a,
        semi_minor: b,
        orientation: theta,
        weight,
        pixel_count: pixels.len(),
        pixels,
    }
}

fn resolve_component<T: Real>(
    field: &DistanceField<T>,
    comp: &Component,
    params: &OverlapParams,
) -> Result<(Vec<CellEllipse<T>>, ComponentReport)> {
    let scale = T::lit(params.scale);
    let (x0, y0, x1, y1) = comp.bbox();

    // maxima of the field restricted to this component
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let mut local = vec![0u64; (w * h) as usize];
    for &(x, y) in &comp.pixels {
        local[((y - y0) * w + (x - x0)) as usize] = field.get_squared(x, y);
    }
    let sub = DistanceField::<T>::from_squared(w, h, local);
    let seeds = find_local_maxima(&sub, params.r);

    let mut report = ComponentReport {
        area: comp.area(),
        seeds: seeds.len().max(1),
        collapsed: Vec::new(),
        unassigned: Vec::new(),
        single_fallback: false,
        em_iterations: 0,
        em_converged: true,
        em_log_likelihood: Vec::new(),
        em_restarts: Vec::new(),
        cells: 1,
    };

    let points = multiplex_coordinates(field, comp, (x0, y0), params.alpha_cap);
    if seeds.len() >= 2 && points.len() < 3 * seeds.len() {
        report.single_fallback = true;
    }
    if seeds.len() < 2 || report.single_fallback {
        return Ok((vec![single_cell(comp.pixels.clone(), T::one(), scale)], report));
    }

    let init: Vec<[T; 2]> = seeds
        .iter()
        .map(|&(x, y)| [T::from_count(x as usize), T::from_count(y as usize)])
        .collect();
    let fit = fit_gmm(&points, &init, &params.em())?;
    report.collapsed = fit.dropped.clone();
    report.em_iterations = fit.iterations;
    report.em_converged = fit.converged;
    report.em_log_likelihood = fit.log_likelihood.iter().map(|v| v.to_f64_lossy()).collect();
    report.em_restarts = fit.restarts.clone();

    // hard assignment by maximum posterior, ties to the lower component
    let k = fit.components.len();
    let mut owned: Vec<Vec<(u32, u32)>> = vec![Vec::new(); k];
    for &(x, y) in &comp.pixels {
        let p = [T::from_count((x - x0) as usize), T::from_count((y - y0) as usize)];
        let best = argmax_posterior(&fit.components, p);
        owned[best].push((x, y));
    }

    let survivors: Vec<usize> = (0..k).filter(|&j| !owned[j].is_empty()).collect();
    report.unassigned = (0..k).filter(|j| owned[*j].is_empty()).map(|j| fit.kept[j]).collect();
    let wsum: T = survivors.iter().map(|&j| fit.components[j].weight).sum();

    let origin = [T::from_count(x0 as usize), T::from_count(y0 as usize)];
    let mut cells = Vec::with_capacity(survivors.len());
    for j in survivors {
        let g = &fit.components[j];
        let weight = g.weight / wsum;
        let pixels = std::mem::take(&mut owned[j]);
        let cell = match params.geometry {
            EllipseGeometry::AssignedPixels => single_cell(pixels, weight, scale),
            EllipseGeometry::Mixture => {
                let (a, b, theta) =
                    ellipse_axes(&g.cov, scale).ok_or(Error::NotPositiveDefinite { component: fit.kept[j] })?;
                CellEllipse {
                    cx: origin[0] + g.mean[0],
                    cy: origin[1] + g.mean[1],
                    semi_major: a,
                    semi_minor: b,
                    orientation: theta,
                    weight,
                    pixel_count: pixels.len(),
                    pixels,
                }
            }
        };
        cells.push(cell);
    }
    report.cells = cells.len();
    Ok((cells, report))
}

fn argmax_posterior<T: Real>(comps: &[Gaussian2<T>], p: [T; 2]) -> usize {
    let mut best = 0;
    let mut best_v = T::neg_infinity();
    for (j, g) in comps.iter().enumerate() {
        let v = g.weight.ln() + g.log_density(p);
        if v > best_v {
            best_v = v;
            best = j;
        }
    }
    best
}
