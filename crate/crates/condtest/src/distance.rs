//! Estimating the total variation distance to uniform with pair-conditional queries.
//!
//! The estimator first calibrates a reference point whose weight is known up to a small factor,
//! then compares uniformly drawn points against it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Result};
use crate::oracle::{Model, OracleHandle};
use crate::profile::ConstantsProfile;
use crate::query::QuerySet;
use crate::subroutines::{compare, estimate_neighborhood, ratio_window, CompareOutcome};
use crate::verdict::require_model;

/// A point together with a multiplicative estimate of its weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub x: usize,
    pub d_hat: f64,
    pub w_hat: f64,
    pub mu_hat: f64,
    pub alpha: f64,
}

/// Sample sizes for [`find_reference`]: `(|X|, |Y|)`.
pub fn reference_sizes(kappa: f64, profile: &ConstantsProfile) -> (u64, u64) {
    let log = (1.0 / kappa).log2();
    let x = (profile.fr_x_c * log / (kappa * kappa)).ceil() as u64;
    let y = (profile.fr_y_c * log * log / kappa.powi(5)).ceil() as u64;
    (
        ConstantsProfile::capped(x, profile.fr_x_max),
        ConstantsProfile::capped(y, profile.fr_y_max),
    )
}

/// Looks for a point of weight `Θ(1/N)` and estimates that weight. `None` means no such pair
/// was found, which signals that nearly all mass sits on heavy points.
pub fn find_reference<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    kappa: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Option<ReferencePoint>> {
    require_model("find_reference", h, &[Model::Pcond])?;
    check_unit("kappa", kappa, 0.25)?;
    let n = h.n();
    let nf = n as f64;
    let log = (1.0 / kappa).log2();
    let (x_size, y_size) = reference_sizes(kappa, profile);
    let beta = kappa * kappa / (40.0 * log);
    let delta = 1.0 / (40.0 * x_size as f64);
    let cmp_delta = 1.0 / (40.0 * (x_size * y_size) as f64);
    let w_floor = kappa * kappa / (20.0 * log);
    let mu_floor = kappa.powi(3) / (20.0 * log);

    let candidates = h.draw_many(&QuerySet::FullDomain, x_size)?;
    let mut found = None;
    for x in candidates {
        let est = estimate_neighborhood(h, x, kappa, beta, kappa, delta, profile, rng)?;
        if est.w_hat < w_floor {
            continue;
        }
        let window = ratio_window(est.alpha, est.theta);
        let mut inside = 0u64;
        for _ in 0..y_size {
            let y = rng.random_range(0..n);
            let ratio = if y == x {
                Some(1.0)
            } else {
                compare(
                    h,
                    &QuerySet::point(x),
                    &QuerySet::point(y),
                    est.theta / 4.0,
                    4.0,
                    cmp_delta,
                    profile,
                )?
                .ratio()
            };
            if ratio.is_some_and(|r| (window.0..=window.1).contains(&r)) {
                inside += 1;
            }
        }
        let mu_hat = inside as f64 / y_size as f64;
        let d_hat = est.w_hat / (mu_hat * nf);
        let passes =
            mu_hat >= mu_floor && d_hat >= kappa / (4.0 * nf) && d_hat <= 2.0 / (kappa * nf);
        if passes && found.is_none() {
            found = Some(ReferencePoint {
                x,
                d_hat,
                w_hat: est.w_hat,
                mu_hat,
                alpha: est.alpha,
            });
        }
    }
    Ok(found)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub d_hat: f64,
    pub reference: Option<ReferencePoint>,
}

/// Per-point contribution given the compared ratio `D(y)/D(x)` and the reference weight.
///
/// Heavy-looking points contribute 0, very light ones 1, and the rest `1 − N ρ D̂(x)`.
pub fn psi_hat(outcome: CompareOutcome, d_hat: f64, n: usize, eps: f64) -> f64 {
    let nf = n as f64;
    match outcome {
        CompareOutcome::High => 0.0,
        CompareOutcome::Low => 1.0,
        CompareOutcome::Ratio(rho) if rho * d_hat >= 1.0 / nf => 0.0,
        CompareOutcome::Ratio(rho) if rho * d_hat <= eps / (4.0 * nf) => 1.0,
        CompareOutcome::Ratio(rho) => 1.0 - nf * rho * d_hat,
    }
}

pub fn estimate_distance_to_uniformity<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<DistanceEstimate> {
    require_model("distance", h, &[Model::Pcond])?;
    check_unit("eps", eps, 1.0)?;
    let kappa = eps / 8.0;
    let Some(reference) = find_reference(h, kappa, profile, rng)? else {
        return Ok(DistanceEstimate {
            d_hat: 1.0,
            reference: None,
        });
    };
    let n = h.n();
    let nf = n as f64;
    let sample = (profile.dist_s_c / (eps * eps)).ceil() as u64;
    let scaled = nf * reference.d_hat;
    let k = f64::max(2.0 / scaled, 4.0 * scaled / eps).max(1.0);
    let delta = 1.0 / (10.0 * sample as f64);
    let mut total = 0.0;
    for _ in 0..sample {
        let y = rng.random_range(0..n);
        let outcome = if y == reference.x {
            CompareOutcome::Ratio(1.0)
        } else {
            compare(
                h,
                &QuerySet::point(reference.x),
                &QuerySet::point(y),
                kappa,
                k,
                delta,
                profile,
            )?
        };
        total += psi_hat(outcome, reference.d_hat, n, eps);
    }
    Ok(DistanceEstimate {
        d_hat: (total / sample as f64).clamp(0.0, 1.0),
        reference: Some(reference),
    })
}

/// Upper bound on the queries of one estimate, independent of the domain size.
pub fn distance_query_bound(eps: f64, profile: &ConstantsProfile) -> u64 {
    use crate::subroutines::{compare_draws, neighborhood_grid, neighborhood_sample_size};
    let kappa = eps / 8.0;
    let log = (1.0 / kappa).log2();
    let (x_size, y_size) = reference_sizes(kappa, profile);
    let beta = kappa * kappa / (40.0 * log);
    let delta = 1.0 / (40.0 * x_size as f64);
    let (theta, _) = neighborhood_grid(kappa, beta, kappa, delta, profile);
    let en_sample = neighborhood_sample_size(beta, kappa, delta, profile);
    let en_cost = en_sample
        + en_sample * compare_draws(theta / 4.0, 4.0, delta / (4.0 * en_sample as f64), profile);
    let y_cost = y_size
        * compare_draws(
            theta / 4.0,
            4.0,
            1.0 / (40.0 * (x_size * y_size) as f64),
            profile,
        );
    let sample = (profile.dist_s_c / (eps * eps)).ceil() as u64;
    // The gate keeps N·D̂(x) within [κ/4, 2/κ], so K never exceeds 8/(κε).
    let k_max = f64::max(8.0 / kappa, 8.0 / (kappa * eps));
    let s_cost = sample * compare_draws(kappa, k_max, 1.0 / (10.0 * sample as f64), profile);
    x_size + x_size * (en_cost + y_cost) + s_cost
}
