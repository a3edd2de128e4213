//! Testing whether two unknown distributions are equal.
//!
//! Two routes: a pair-conditional tester built on neighbourhood estimates around reference
//! points, and a conditional tester that simulates approximate evaluation queries.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::oracle::{Model, OracleHandle};
use crate::profile::ConstantsProfile;
use crate::query::QuerySet;
use crate::subroutines::{
    compare, estimate_neighborhood, ratio_window, CompareOutcome, NeighborhoodEstimate,
};
use crate::verdict::{require_model, Verdict};

/// One reference point of the pair-conditional tester with its two neighbourhood estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverPoint {
    pub point: usize,
    pub neighborhood: NeighborhoodEstimate,
    /// Fraction of the second sample landing in the first distribution's neighbourhood.
    pub w2_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityRun {
    pub verdict: Verdict,
    /// Reference points examined before the verdict.
    pub cover: Vec<CoverPoint>,
}

/// Sizes used by [`pcond_test_equality`]: `(ε̃, t, s1, s2)`.
pub fn equality_schedule(n: usize, eps: f64, profile: &ConstantsProfile) -> (f64, u64, u64, u64) {
    let tilde = eps / profile.eq_tilde_div;
    let log_n = (n.max(2) as f64).log2();
    let t = (profile.eq_t_c * log_n / (eps * eps)).ceil().max(1.0);
    let s1 = (profile.eq_s1_c * t / (eps * eps)).ceil();
    let s2 = (profile.eq_s2_c * t * t.ln().max(1.0) / eps.powi(3)).ceil();
    (tilde, t as u64, s1 as u64, s2 as u64)
}

fn ratio_in(outcome: Option<CompareOutcome>, (lo, hi): (f64, f64)) -> bool {
    matches!(outcome, Some(CompareOutcome::Ratio(r)) if (lo..=hi).contains(&r))
}

/// Compare against a fixed reference; `None` when the pair has no mass under this distribution.
fn compare_to(
    h: &mut OracleHandle,
    reference: usize,
    point: usize,
    eta: f64,
    delta: f64,
    profile: &ConstantsProfile,
) -> Result<Option<CompareOutcome>> {
    if point == reference {
        return Ok(Some(CompareOutcome::Ratio(1.0)));
    }
    match compare(
        h,
        &QuerySet::point(reference),
        &QuerySet::point(point),
        eta,
        4.0,
        delta,
        profile,
    ) {
        Ok(outcome) => Ok(Some(outcome)),
        Err(Error::ZeroMassSet) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn pcond_test_equality<R: Rng + ?Sized>(
    h1: &mut OracleHandle,
    h2: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Verdict> {
    Ok(pcond_test_equality_detailed(h1, h2, eps, profile, rng)?.verdict)
}

/// `h2` is queried on pairs built from points drawn from the first distribution, so it needs
/// permissive discipline.
pub fn pcond_test_equality_detailed<R: Rng + ?Sized>(
    h1: &mut OracleHandle,
    h2: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<EqualityRun> {
    require_model("pcond_equality", h1, &[Model::Pcond])?;
    require_model("pcond_equality", h2, &[Model::Pcond])?;
    check_unit("eps", eps, 1.0)?;
    if h1.n() != h2.n() {
        return Err(Error::DomainMismatch {
            left: h1.n(),
            right: h2.n(),
        });
    }
    let (tilde, t, s1, s2) = equality_schedule(h1.n(), eps, profile);
    let references = h1.draw_many(&QuerySet::FullDomain, t)?;
    let threshold = tilde / t as f64;
    let delta = 1.0 / (200.0 * t as f64 * (s1 + s2) as f64);
    let mut cover = Vec::new();
    let finish = |verdict, cover| Ok(EqualityRun { verdict, cover });

    for reference in references {
        let neighborhood = estimate_neighborhood(
            h1,
            reference,
            tilde,
            tilde / (2.0 * t as f64),
            tilde / 8.0,
            1.0 / (100.0 * t as f64),
            profile,
            rng,
        )?;
        let (alpha, theta) = (neighborhood.alpha, neighborhood.theta);
        let first = h1.draw_histogram(&QuerySet::FullDomain, s1)?;
        let second = h2.draw_histogram(&QuerySet::FullDomain, s2)?;

        let mut ratios: HashMap<usize, (Option<CompareOutcome>, Option<CompareOutcome>)> =
            HashMap::new();
        for &(i, _) in first.iter().chain(&second) {
            if ratios.contains_key(&i) {
                continue;
            }
            let rho1 = compare_to(h1, reference, i, theta / 4.0, delta, profile)?;
            let rho2 = compare_to(h2, reference, i, theta / 4.0, delta, profile)?;
            ratios.insert(i, (rho1, rho2));
        }

        let window = ratio_window(alpha, theta);
        let inside: u64 = second
            .iter()
            .filter(|(i, _)| ratio_in(ratios[i].0, window))
            .map(|(_, c)| c)
            .sum();
        let w1 = neighborhood.w_hat;
        let w2 = inside as f64 / s2 as f64;
        cover.push(CoverPoint {
            point: reference,
            neighborhood,
            w2_hat: w2,
        });

        let mass_mismatch = if w1 <= 0.75 * threshold {
            w2 > 1.5 * threshold
        } else {
            !(1.0 - tilde / 2.0..=1.0 + tilde / 2.0).contains(&(w2 / w1))
        };
        if mass_mismatch {
            return finish(Verdict::Reject, cover);
        }

        let narrow = ratio_window(alpha, tilde);
        let wide = ratio_window(alpha, 3.0 * tilde);
        if ratios
            .values()
            .any(|&(rho1, rho2)| ratio_in(rho1, narrow) && !ratio_in(rho2, wide))
        {
            return finish(Verdict::Reject, cover);
        }
    }
    finish(Verdict::Accept, cover)
}

/// Output of the approximate evaluation simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvalResult {
    Value(f64),
    Unknown,
}

/// Constants of one approximate evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    /// Working accuracy after the cap.
    pub eps: f64,
    pub delta: f64,
    pub max_rounds: u32,
    pub kappa: f64,
    /// Conditional draws per round.
    pub draws: u64,
}

pub const EVAL_K: f64 = 9.0;

pub fn eval_params(
    n: usize,
    eps: f64,
    delta: f64,
    profile: &ConstantsProfile,
) -> Result<EvalParams> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps = {eps} must be positive"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let eps = if eps > profile.ae_eps_cap {
        profile.ae_eps_cap / 2.0
    } else {
        eps
    };
    let rounds = ((n as f64).log2() + (EVAL_K / delta).log2() + 1.0).ceil();
    let log_term = (rounds / delta).ln();
    let kappa = profile.ae_kappa_c * eps / (rounds * rounds * log_term);
    let draws = profile.ae_m_c
        * f64::max(
            rounds * rounds * log_term / (eps * eps * kappa),
            (rounds / (delta * kappa)).ln() / (kappa * kappa),
        );
    Ok(EvalParams {
        eps,
        delta,
        max_rounds: rounds as u32,
        kappa,
        draws: draws.ceil() as u64,
    })
}

/// One round of the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRound {
    pub set_size: usize,
    /// Fraction of the round's draws landing in the next set.
    pub fraction: f64,
    /// Whether the round jumped straight to the target point.
    pub direct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTrace {
    pub params: EvalParams,
    pub rounds: Vec<EvalRound>,
}

pub fn approx_eval<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    i_star: usize,
    eps: f64,
    delta: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<EvalResult> {
    Ok(approx_eval_traced(h, i_star, eps, delta, profile, rng)?.0)
}

/// Estimates `D(i_star)` by shrinking a set around `i_star` and multiplying conditional
/// fractions. Returns [`Error::Fail`] when the round cap runs out.
pub fn approx_eval_traced<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    i_star: usize,
    eps: f64,
    delta: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<(EvalResult, EvalTrace)> {
    require_model("approx_eval", h, &[Model::Cond])?;
    let n = h.n();
    if i_star >= n {
        return Err(Error::IndexOutOfRange { index: i_star, n });
    }
    let params = eval_params(n, eps, delta, profile)?;
    let mut trace = EvalTrace {
        params,
        rounds: Vec::new(),
    };
    let m = params.draws;
    let mut set = QuerySet::FullDomain;
    let mut estimate = 1.0;

    for _ in 0..params.max_rounds {
        let size = set.len(n);
        if size == 1 {
            return Ok((EvalResult::Value(estimate), trace));
        }
        let hist = match h.draw_histogram(&set, m) {
            Ok(hist) => hist,
            Err(Error::ZeroMassSet) => return Ok((EvalResult::Unknown, trace)),
            Err(e) => return Err(e),
        };
        let star_fraction =
            hist.iter().find(|c| c.0 == i_star).map_or(0, |c| c.1) as f64 / m as f64;
        if star_fraction >= params.kappa / 20.0 {
            estimate *= star_fraction;
            trace.rounds.push(EvalRound {
                set_size: size,
                fraction: star_fraction,
                direct: true,
            });
            set = QuerySet::point(i_star);
            continue;
        }
        let cutoff = 0.75 * params.kappa * m as f64;
        let heavy: Vec<usize> = hist
            .iter()
            .filter(|c| c.1 as f64 >= cutoff)
            .map(|c| c.0)
            .collect();
        let heavy_fraction = hist
            .iter()
            .filter(|c| c.1 as f64 >= cutoff)
            .map(|c| c.1)
            .sum::<u64>() as f64
            / m as f64;
        if heavy_fraction > 1.0 - params.eps / 10.0 {
            return Ok((EvalResult::Unknown, trace));
        }
        let next: Vec<usize> = set
            .iter(n)
            .filter(|&i| i == i_star || (heavy.binary_search(&i).is_err() && rng.random::<bool>()))
            .collect();
        let next = QuerySet::Explicit(next);
        let kept: u64 = hist
            .iter()
            .filter(|c| next.contains(c.0))
            .map(|c| c.1)
            .sum();
        if kept == 0 {
            return Ok((EvalResult::Unknown, trace));
        }
        let fraction = kept as f64 / m as f64;
        estimate *= fraction;
        trace.rounds.push(EvalRound {
            set_size: size,
            fraction,
            direct: false,
        });
        set = next;
    }
    Err(Error::Fail)
}

/// Draws `⌈5/ε⌉` points from each distribution and compares approximate evaluations.
pub fn eval_test_equality<R: Rng + ?Sized>(
    h1: &mut OracleHandle,
    h2: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Verdict> {
    require_model("eval_equality", h1, &[Model::Cond])?;
    require_model("eval_equality", h2, &[Model::Cond])?;
    check_unit("eps", eps, 1.0)?;
    if h1.n() != h2.n() {
        return Err(Error::DomainMismatch {
            left: h1.n(),
            right: h2.n(),
        });
    }
    let m = (5.0 / eps).ceil() as u64;
    let mut points = h1.draw_many(&QuerySet::FullDomain, m)?;
    points.extend(h2.draw_many(&QuerySet::FullDomain, m)?);
    let sub = eps / 100.0;
    for point in points {
        let EvalResult::Value(v1) = approx_eval(h1, point, sub, sub, profile, rng)? else {
            return Ok(Verdict::Reject);
        };
        let EvalResult::Value(v2) = approx_eval(h2, point, sub, sub, profile, rng)? else {
            return Ok(Verdict::Reject);
        };
        if v1 < (1.0 - eps / 8.0) * v2 || v1 > (1.0 + eps / 8.0) * v2 {
            return Ok(Verdict::Reject);
        }
    }
    Ok(Verdict::Accept)
}
