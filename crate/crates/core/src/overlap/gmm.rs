//! Expectation-maximization for two-dimensional Gaussian mixtures over
//! weighted point sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Symmetric 2×2 covariance `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2<T> {
    pub xx: T,
    pub xy: T,
    pub yy: T,
}

impl<T: Real> Cov2<T> {
    pub fn isotropic(var: T) -> Self {
        Self {
            xx: var,
            xy: T::zero(),
            yy: var,
        }
    }

    pub fn det(&self) -> T {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn regularized(self, eps: T) -> Self {
        Self {
            xx: self.xx + eps,
            xy: self.xy,
            yy: self.yy + eps,
        }
    }

    /// `(λ_max, λ_min)`.
    pub fn eigenvalues(&self) -> (T, T) {
        let half = T::lit(0.5);
        let mid = (self.xx + self.yy) * half;
        let diff = (self.xx - self.yy) * half;
        let rad = (diff * diff + self.xy * self.xy).sqrt();
        (mid + rad, mid - rad)
    }

    fn is_positive_definite(&self) -> bool {
        self.xx > T::zero() && self.det() > T::zero()
    }
}

/// A coordinate multiset stored as distinct points with multiplicities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Multiset<T> {
    pub points: Vec<[T; 2]>,
    pub counts: Vec<u32>,
}

impl<T: Real> Multiset<T> {
    pub fn push(&mut self, p: [T; 2], count: u32) {
        if count > 0 {
            self.points.push(p);
            self.counts.push(count);
        }
    }

    /// Total multiplicity.
    pub fn len(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Weighted mean and (population) covariance.
    pub fn moments(&self) -> Option<([T; 2], Cov2<T>)> {
        let n = T::from_count(self.len());
        if self.is_empty() {
            return None;
        }
        let (mut sx, mut sy) = (T::zero(), T::zero());
        for (p, &c) in self.points.iter().zip(&self.counts) {
            let c = T::lit(c.into());
            sx += c * p[0];
            sy += c * p[1];
        }
        let mean = [sx / n, sy / n];
        let mut cov = Cov2::isotropic(T::zero());
        for (p, &c) in self.points.iter().zip(&self.counts) {
            let c = T::lit(c.into());
            let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
            cov.xx += c * dx * dx;
            cov.xy += c * dx * dy;
            cov.yy += c * dy * dy;
        }
        cov.xx /= n;
        cov.xy /= n;
        cov.yy /= n;
        Some((mean, cov))
    }
}

/// One weighted mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian2<T> {
    pub weight: T,
    pub mean: [T; 2],
    pub cov: Cov2<T>,
}

impl<T: Real> Gaussian2<T> {
    /// `ln N(p | mean, cov)`.
    pub fn log_density(&self, p: [T; 2]) -> T {
        let det = self.cov.det();
        let (dx, dy) = (p[0] - self.mean[0], p[1] - self.mean[1]);
        let mahal = (self.cov.yy * dx * dx - T::lit(2.0) * self.cov.xy * dx * dy + self.cov.xx * dy * dy) / det;
        -(T::lit(2.0) * T::PI()).ln() - T::lit(0.5) * det.ln() - T::lit(0.5) * mahal
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmParams {
    /// Stop once the log-likelihood per multiplexed point improves by less
    /// than this; an absolute bound would tighten with component size.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to both covariance diagonals after every M-step.
    pub reg: f64,
    /// Initial isotropic variance of every component.
    pub init_var: f64,
    /// Components whose weight falls below this are dropped.
    pub min_weight: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 100,
            reg: 1e-3,
            init_var: 50.0,
            min_weight: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmmFit<T> {
    pub components: Vec<Gaussian2<T>>,
    /// Indices into the initial centre list of the surviving components.
    pub kept: Vec<usize>,
    /// Initial-centre indices dropped after collapsing.
    pub dropped: Vec<usize>,
    /// Log-likelihood before the first iteration and after each M-step.
    pub log_likelihood: Vec<T>,
    /// Positions in `log_likelihood` evaluated right after a drop; the
    /// monotone guarantee restarts there.
    pub restarts: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T: Real> GmmFit<T> {
    /// Largest decrease between consecutive log-likelihood values, ignoring
    /// steps across a restart. Zero or negative means monotone.
    pub fn worst_decrease(&self) -> T {
        self.log_likelihood
            .windows(2)
            .enumerate()
            .filter(|(i, _)| !self.restarts.contains(&(i + 1)))
            .map(|(_, w)| w[0] - w[1])
            .fold(T::neg_infinity(), T::max)
    }
}

/// Log responsibilities and log-likelihood for the current parameters.
fn expectation<T: Real>(points: &Multiset<T>, comps: &[Gaussian2<T>], resp: &mut [T]) -> T {
    let k = comps.len();
    let mut ll = T::zero();
    for (n, (p, &c)) in points.points.iter().zip(&points.counts).enumerate() {
        let row = &mut resp[n * k..(n + 1) * k];
        let mut top = T::neg_infinity();
        for (slot, g) in row.iter_mut().zip(comps) {
            *slot = g.weight.ln() + g.log_density(*p);
            top = top.max(*slot);
        }
        let sum: T = row.iter().map(|&v| (v - top).exp()).sum();
        let lse = top + sum.ln();
        for slot in row.iter_mut() {
            *slot = (*slot - lse).exp();
        }
        ll += T::lit(c.into()) * lse;
    }
    ll
}

fn maximization<T: Real>(points: &Multiset<T>, resp: &[T], comps: &mut [Gaussian2<T>], reg: T) {
    let k = comps.len();
    let total = T::from_count(points.len());
    for (j, g) in comps.iter_mut().enumerate() {
        let (mut nk, mut sx, mut sy) = (T::zero(), T::zero(), T::zero());
        for (n, (p, &c)) in points.points.iter().zip(&points.counts).enumerate() {
            let r = resp[n * k + j] * T::lit(c.into());
            nk += r;
            sx += r * p[0];
            sy += r * p[1];
        }
        if nk <= T::zero() {
            g.weight = T::zero();
            continue;
        }
        let mean = [sx / nk, sy / nk];
        let mut cov = Cov2::isotropic(T::zero());
        for (n, (p, &c)) in points.points.iter().zip(&points.counts).enumerate() {
            let r = resp[n * k + j] * T::lit(c.into());
            let (dx, dy) = (p[0] - mean[0], p[1] - mean[1]);
            cov.xx += r * dx * dx;
            cov.xy += r * dx * dy;
            cov.yy += r * dy * dy;
        }
        g.weight = nk / total;
        g.mean = mean;
        g.cov = Cov2 {
            xx: cov.xx / nk,
            xy: cov.xy / nk,
            yy: cov.yy / nk,
        }
        .regularized(reg);
    }
}

/// Fits a `init.len()`-component mixture starting from the given means,
/// isotropic covariances `init_var · I` and uniform weights.
pub fn fit_gmm<T: Real>(points: &Multiset<T>, init: &[[T; 2]], params: &EmParams) -> Result<GmmFit<T>> {
    let k = init.len();
    if k == 0 {
        return Err(Error::InvalidParameter("mixture needs at least one component".into()));
    }
    if points.len() < 3 * k {
        return Err(Error::InsufficientPoints {
            needed: 3 * k,
            got: points.len(),
        });
    }
    for (i, a) in init.iter().enumerate() {
        if init[..i].iter().any(|b| b == a) {
            return Err(Error::InvalidParameter(format!("initial centre {i} duplicates an earlier one")));
        }
    }

    let reg = T::lit(params.reg);
    let min_weight = T::lit(params.min_weight);
    let total: u64 = points.counts.iter().map(|&c| u64::from(c)).sum();
    let tol = T::lit(params.tol * total as f64);
    let uniform = T::one() / T::from_count(k);
    let mut comps: Vec<Gaussian2<T>> = init
        .iter()
        .map(|&mean| Gaussian2 {
            weight: uniform,
            mean,
            cov: Cov2::isotropic(T::lit(params.init_var)),
        })
        .collect();
    let mut kept: Vec<usize> = (0..k).collect();
    let mut dropped = Vec::new();
    let mut restarts = Vec::new();

    let mut resp = vec![T::zero(); points.points.len() * k];
    let mut history = vec![expectation(points, &comps, &mut resp)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < params.max_iter {
        iterations += 1;
        maximization(points, &resp, &mut comps, reg);

        let before = comps.len();
        let mut idx = 0;
        comps.retain(|g| {
            let keep = g.weight >= min_weight;
            if !keep {
                dropped.push(kept[idx]);
            }
            idx += 1;
            keep
        });
        if comps.len() != before {
            kept.retain(|i| !dropped.contains(i));
            let total: T = comps.iter().map(|g| g.weight).sum();
            for g in &mut comps {
                g.weight /= total;
            }
            restarts.push(history.len());
        }
        for (i, g) in comps.iter().enumerate() {
            if !g.cov.is_positive_definite() {
                return Err(Error::NotPositiveDefinite { component: kept[i] });
            }
        }

        let kk = comps.len();
        resp.truncate(points.points.len() * kk);
        let ll = expectation(points, &comps, &mut resp);
        let gain = ll - *history.last().expect("initial log-likelihood");
        history.push(ll);
        if comps.len() == before && gain < tol {
            converged = true;
            break;
        }
    }

    Ok(GmmFit {
        components: comps,
        kept,
        dropped,
        log_likelihood: history,
        restarts,
        iterations,
        converged,
    })
}
