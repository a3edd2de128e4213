//! Uniformity testing with pair-conditional queries, at a cost independent of the domain size.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::round_down_to_power_of_half;
use crate::error::{check_unit, Result};
use crate::oracle::{Model, OracleHandle};
use crate::profile::ConstantsProfile;
use crate::query::QuerySet;
use crate::subroutines::{compare, compare_draws, CompareOutcome};
use crate::verdict::{reject_on_zero_mass, require_model, Verdict};

/// One stage of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub j: u32,
    /// Samples from the oracle and uniform points, each.
    pub s: u64,
    pub eta: f64,
    pub delta: f64,
    /// Draws per comparison.
    pub m: u64,
    /// Allowed distance of the comparison fraction from one half.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformitySchedule {
    /// `ε` rounded down to a power of one half.
    pub eps: f64,
    pub t: u32,
    pub q: u64,
    pub stages: Vec<Stage>,
}

impl UniformitySchedule {
    pub fn new(eps: f64, profile: &ConstantsProfile) -> Result<Self> {
        check_unit("eps", eps, 1.0)?;
        let eps = round_down_to_power_of_half(eps);
        let t = (4.0 / eps).log2().round() as u32 + 1;
        let delta = (-profile.unif_delta_c * t as f64).exp().min(0.5);
        let stages = (1..=t)
            .map(|j| {
                let scale = 2f64.powi(j as i32);
                let eta = (profile.unif_eta_c * eps * scale).min(1.0);
                Stage {
                    j,
                    s: (profile.unif_s_c * scale * t as f64).ceil() as u64,
                    eta,
                    delta,
                    m: compare_draws(eta, 2.0, delta, profile),
                    tolerance: 2f64.powi(j as i32 - 5) * eps / 4.0,
                }
            })
            .collect();
        Ok(UniformitySchedule {
            eps,
            t,
            q: profile.unif_q as u64,
            stages,
        })
    }

    /// Total queries of a run that compares every pair.
    pub fn query_budget(&self) -> u64 {
        self.stages
            .iter()
            .map(|s| s.s + 2 * self.q * s.s * s.m)
            .sum()
    }
}

/// Exact query count of an accepting run, whatever the domain size.
pub fn query_budget(eps: f64, profile: &ConstantsProfile) -> Result<u64> {
    Ok(UniformitySchedule::new(eps, profile)?.query_budget())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityRun {
    pub verdict: Verdict,
    /// Queries not issued because a pair repeated its reference point.
    pub skipped_queries: u64,
    /// Stage at which the run stopped.
    pub last_stage: u32,
}

pub fn pcond_test_uniform<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Verdict> {
    Ok(pcond_test_uniform_detailed(h, eps, profile, rng)?.verdict)
}

/// Same as [`pcond_test_uniform`], with bookkeeping.
///
/// A pair whose two points coincide has comparison fraction exactly one half, so it is skipped
/// and its queries are recorded in `skipped_queries`.
pub fn pcond_test_uniform_detailed<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<UniformityRun> {
    require_model("pcond_uniform", h, &[Model::Pcond])?;
    let schedule = UniformitySchedule::new(eps, profile)?;
    let n = h.n();
    let refs: Vec<usize> = (0..schedule.q).map(|_| rng.random_range(0..n)).collect();
    let mut skipped = 0u64;
    for stage in &schedule.stages {
        let mut others = h.draw_many(&QuerySet::FullDomain, stage.s)?;
        others.extend((0..stage.s).map(|_| rng.random_range(0..n)));
        for &x in &refs {
            for &y in &others {
                if x == y {
                    skipped += stage.m;
                    continue;
                }
                let outcome = compare(
                    h,
                    &QuerySet::point(x),
                    &QuerySet::point(y),
                    stage.eta,
                    2.0,
                    stage.delta,
                    profile,
                );
                let fraction = match reject_on_zero_mass(outcome)? {
                    Some(CompareOutcome::Ratio(rho)) => rho / (1.0 + rho),
                    _ => f64::NAN,
                };
                if !((fraction - 0.5).abs() <= stage.tolerance) {
                    return Ok(UniformityRun {
                        verdict: Verdict::Reject,
                        skipped_queries: skipped,
                        last_stage: stage.j,
                    });
                }
            }
        }
    }
    Ok(UniformityRun {
        verdict: Verdict::Accept,
        skipped_queries: skipped,
        last_stage: schedule.t,
    })
}
