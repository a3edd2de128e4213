//! Ratio estimation between two sets, and neighbourhood-mass estimation around a point.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::oracle::OracleHandle;
use crate::profile::ConstantsProfile;
use crate::query::QuerySet;

/// Result of [`compare`]. `Ratio` estimates `D(Y) / D(X)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CompareOutcome {
    /// `D(Y)` looks much smaller than `D(X)`.
    Low,
    /// `D(Y)` looks much larger than `D(X)`.
    High,
    Ratio(f64),
}

impl CompareOutcome {
    pub fn ratio(self) -> Option<f64> {
        match self {
            CompareOutcome::Ratio(r) => Some(r),
            _ => None,
        }
    }
}

/// Number of draws [`compare`] issues: `ceil(cmp_c · K · ln(2/δ) / η²)`.
pub fn compare_draws(eta: f64, k: f64, delta: f64, profile: &ConstantsProfile) -> u64 {
    (profile.cmp_c * k * (2.0 / delta).ln() / (eta * eta)).ceil() as u64
}

/// Draws from `D` conditioned on `X ∪ Y` and turns the fraction landing in `Y` into a ratio.
///
/// ```
/// use std::sync::Arc;
/// use condtest::{compare, CompareOutcome, ConstantsProfile, Distribution, Model, OracleHandle, QuerySet};
///
/// let d = Arc::new(Distribution::new(vec![1.0, 3.0]).unwrap());
/// let mut h = OracleHandle::new(d, Model::Pcond, 7).with_discipline(condtest::Discipline::Permissive);
/// let out = compare(&mut h, &QuerySet::point(0), &QuerySet::point(1), 0.1, 4.0, 0.05, &ConstantsProfile::desk()).unwrap();
/// let rho = out.ratio().unwrap();
/// assert!((rho - 3.0).abs() < 0.3);
/// ```
pub fn compare(
    h: &mut OracleHandle,
    x: &QuerySet,
    y: &QuerySet,
    eta: f64,
    k: f64,
    delta: f64,
    profile: &ConstantsProfile,
) -> Result<CompareOutcome> {
    check_unit("eta", eta, 1.0)?;
    check_unit("delta", delta, 0.5)?;
    if !(k >= 1.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "K = {k} must be at least 1"
        )));
    }
    let m = compare_draws(eta, k, delta, profile);
    let hits = h.draw_split(x, y, m)?;
    let mu = hits as f64 / m as f64;
    let cutoff = (2.0 / 3.0) / (k + 1.0);
    Ok(if mu < cutoff {
        CompareOutcome::Low
    } else if 1.0 - mu < cutoff {
        CompareOutcome::High
    } else {
        CompareOutcome::Ratio(mu / (1.0 - mu))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodEstimate {
    /// Estimated mass of the points whose weight is within `1 + alpha` of `D(x)`.
    pub w_hat: f64,
    pub alpha: f64,
    /// Grid step.
    pub theta: f64,
    pub grid_index: u64,
    pub grid_len: u64,
    pub sample_size: u64,
}

/// Grid step and number of grid points for the `α` draw.
pub fn neighborhood_grid(
    kappa: f64,
    beta: f64,
    eta: f64,
    delta: f64,
    profile: &ConstantsProfile,
) -> (f64, u64) {
    let theta = kappa * eta * beta * delta / 64.0;
    let len = (kappa / theta).ceil() as u64;
    let cap = profile.en_grid_max;
    if cap > 0.0 && len as f64 > cap {
        let len = cap as u64;
        (kappa / len as f64, len)
    } else {
        (theta, len)
    }
}

pub fn neighborhood_sample_size(
    beta: f64,
    eta: f64,
    delta: f64,
    profile: &ConstantsProfile,
) -> u64 {
    let raw = (profile.en_sample_c * (4.0 / delta).ln() / (beta * eta * eta)).ceil() as u64;
    ConstantsProfile::capped(raw, profile.en_sample_max)
}

/// Closed ratio window `[1/(1+α+θ/2), 1+α+θ/2]`.
pub fn ratio_window(alpha: f64, theta: f64) -> (f64, f64) {
    let hi = 1.0 + alpha + theta / 2.0;
    (1.0 / hi, hi)
}

/// Estimates `D(U_α(x))` for a randomly drawn `α ∈ [κ, 2κ)`.
///
/// `rng` supplies the algorithm's own coins (the grid draw); samples come from `h`.
pub fn estimate_neighborhood<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    x: usize,
    kappa: f64,
    beta: f64,
    eta: f64,
    delta: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<NeighborhoodEstimate> {
    for (name, v) in [
        ("kappa", kappa),
        ("beta", beta),
        ("eta", eta),
        ("delta", delta),
    ] {
        check_unit(name, v, 0.5)?;
    }
    if x >= h.n() {
        return Err(Error::IndexOutOfRange { index: x, n: h.n() });
    }
    let (theta, grid_len) = neighborhood_grid(kappa, beta, eta, delta, profile);
    let grid_index = rng.random_range(0..grid_len);
    let alpha = kappa + grid_index as f64 * theta;
    let sample_size = neighborhood_sample_size(beta, eta, delta, profile);
    let sample = h.draw_histogram(&QuerySet::FullDomain, sample_size)?;
    let (lo, hi) = ratio_window(alpha, theta);
    let sub_delta = delta / (4.0 * sample_size as f64);
    let mut inside = 0u64;
    for (y, count) in sample {
        let ratio = if y == x {
            1.0
        } else {
            match compare(
                h,
                &QuerySet::point(x),
                &QuerySet::point(y),
                theta / 4.0,
                4.0,
                sub_delta,
                profile,
            )? {
                CompareOutcome::Ratio(r) => r,
                _ => continue,
            }
        };
        if (lo..=hi).contains(&ratio) {
            inside += count;
        }
    }
    Ok(NeighborhoodEstimate {
        w_hat: inside as f64 / sample_size as f64,
        alpha,
        theta,
        grid_index,
        grid_len,
        sample_size,
    })
}
