//! Testing equality to a fully known distribution `D*`.
//!
//! The conditional tester works on `D*` sorted by weight. [`KnownTarget`] does the sorting once;
//! all "positions" below are 0-based ranks in that order, while oracle queries use the
//! caller's original labels.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{known_identity_levels, BucketScheme, Distribution};
use crate::error::{check_unit, Error, Result};
use crate::oracle::{Model, OracleHandle};
use crate::profile::ConstantsProfile;
use crate::query::QuerySet;
use crate::subroutines::{compare, compare_draws, CompareOutcome};
use crate::verdict::{reject_on_zero_mass, require_model, Verdict};

/// `D*` with its weight-sorted order precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownTarget {
    dstar: Arc<Distribution>,
    order: Vec<usize>,
    rank: Vec<usize>,
    prefix: Vec<f64>,
}

/// How the conditional tester proceeds, decided by where the sorted prefix mass crosses `2ε₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// The lightest `light_len` points weigh at most `ε₁`; every other point is heavier than `ε₁`.
    Heavy { light_len: usize },
    /// The lightest `k_star` points weigh between `ε₁` and `2ε₁`.
    Main { k_star: usize },
}

impl KnownTarget {
    pub fn new(dstar: Arc<Distribution>) -> Self {
        let n = dstar.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| dstar.weight(a).total_cmp(&dstar.weight(b)));
        let mut rank = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            rank[i] = pos;
        }
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for &i in &order {
            acc += dstar.weight(i);
            prefix.push(acc);
        }
        KnownTarget {
            dstar,
            order,
            rank,
            prefix,
        }
    }

    pub fn dstar(&self) -> &Distribution {
        &self.dstar
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    /// Original labels from lightest to heaviest.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn rank(&self, label: usize) -> usize {
        self.rank[label]
    }

    /// Weight of the point at sorted position `pos`.
    pub fn sorted_weight(&self, pos: usize) -> f64 {
        self.dstar.weight(self.order[pos])
    }

    /// `D*` of the `count` lightest points.
    pub fn prefix_mass(&self, count: usize) -> f64 {
        self.prefix[count]
    }

    /// Exact mass of sorted positions `lo..=hi`, summed directly.
    pub fn span_mass(&self, lo: usize, hi: usize) -> f64 {
        (lo..=hi).map(|p| self.sorted_weight(p)).sum()
    }

    /// Original labels at sorted positions `lo..=hi`, as a query set.
    pub fn span_set(&self, lo: usize, hi: usize) -> QuerySet {
        let mut labels = self.order[lo..=hi].to_vec();
        labels.sort_unstable();
        QuerySet::Explicit(labels)
    }

    /// Exact draw from `D*`; costs no oracle queries.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dstar.sample_in(&QuerySet::FullDomain, rng.random())
    }

    pub fn branch(&self, eps1: f64) -> Branch {
        let crossing = self.prefix[1..].partition_point(|&p| p <= 2.0 * eps1) + 1;
        let crossing = crossing.min(self.n());
        if self.prefix[crossing - 1] <= eps1 {
            Branch::Heavy {
                light_len: crossing - 1,
            }
        } else {
            Branch::Main {
                k_star: crossing - 1,
            }
        }
    }
}

/// Comparable witnesses for the point at sorted position `target_pos`: disjoint spans that cover
/// positions `0..target_pos` left to right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPartition {
    pub target_pos: usize,
    /// Inclusive sorted-position spans, in increasing order.
    pub intervals: Vec<(usize, usize)>,
}

/// Splits the positions below `target_pos` into spans whose mass is within a factor two of the
/// target's weight, working right to left.
///
/// When the target weighs at least `ε₁` the single span `0..target_pos` is returned.
pub fn build_witnesses(
    target: &KnownTarget,
    target_pos: usize,
    eps1: f64,
) -> Result<WitnessPartition> {
    let Branch::Main { k_star } = target.branch(eps1) else {
        return Err(Error::NotInNoGapRegime);
    };
    if target_pos < k_star || target_pos >= target.n() {
        return Err(Error::NotInNoGapRegime);
    }
    let weight = target.sorted_weight(target_pos);
    if weight >= eps1 {
        return Ok(WitnessPartition {
            target_pos,
            intervals: vec![(0, target_pos - 1)],
        });
    }
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    let mut end = target_pos;
    while end > 0 {
        let mut start = end;
        let mut acc = 0.0;
        while start > 0 && acc + target.sorted_weight(start - 1) <= weight {
            start -= 1;
            acc += target.sorted_weight(start);
        }
        if start == 0 {
            match intervals.last_mut() {
                Some(last) => last.0 = 0,
                None => intervals.push((0, end - 1)),
            }
            break;
        }
        intervals.push((start, end - 1));
        end = start;
    }
    intervals.reverse();
    Ok(WitnessPartition {
        target_pos,
        intervals,
    })
}

/// The four derived accuracies `(ε/10, ε/2, ε/48, ε/6)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonLadder {
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps4: f64,
}

pub fn epsilon_ladder(eps: f64) -> EpsilonLadder {
    EpsilonLadder {
        eps1: eps / 10.0,
        eps2: eps / 2.0,
        eps3: eps / 48.0,
        eps4: eps / 6.0,
    }
}

fn check_target(h: &OracleHandle, target: &KnownTarget) -> Result<()> {
    if h.n() != target.n() {
        return Err(Error::DomainMismatch {
            left: h.n(),
            right: target.n(),
        });
    }
    Ok(())
}

/// Pair-conditional identity tester: bucket screening followed by cross comparisons between
/// points drawn from `D*` and points drawn from `D`.
pub fn pcond_test_known<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    target: &KnownTarget,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Verdict> {
    require_model("pcond_known", h, &[Model::Pcond])?;
    check_unit("eps", eps, 1.0)?;
    check_target(h, target)?;
    let n = target.n();
    let eta = eps / profile.known_eta_div;
    let b = (known_identity_levels(n, eta) + 1) as f64;

    let buckets = target
        .dstar()
        .bucketize(BucketScheme::KnownIdentity { eta });
    let expected = buckets.masses(target.dstar());
    let m = (profile.known_m_c * b * b * (20.0 * (b + 1.0)).ln() / (eta * eta)).ceil() as u64;
    let mut observed = vec![0u64; buckets.len()];
    for (i, count) in h.draw_histogram(&QuerySet::FullDomain, m)? {
        observed[buckets.bucket_of[i]] += count;
    }
    let screen = eta / b;
    if observed
        .iter()
        .zip(&expected)
        .any(|(&c, &e)| (c as f64 / m as f64 - e).abs() > screen)
    {
        return Ok(Verdict::Reject);
    }

    let s = (profile.known_s_c * b / eps).ceil() as u64;
    let from_target: Vec<usize> = (0..s).map(|_| target.sample(rng)).collect();
    let from_oracle = h.draw_many(&QuerySet::FullDomain, s)?;
    let cmp_eta = eta / (4.0 * b);
    let cmp_delta = 1.0 / (10.0 * (s * s) as f64);
    let floor = 1.0 - eta / (2.0 * b);
    for &x in &from_target {
        for &y in &from_oracle {
            let expected_ratio = target.dstar().weight(x) / target.dstar().weight(y);
            if x == y || !(0.5..=2.0).contains(&expected_ratio) {
                continue;
            }
            let outcome = compare(
                h,
                &QuerySet::point(y),
                &QuerySet::point(x),
                cmp_eta,
                2.0,
                cmp_delta,
                profile,
            );
            match reject_on_zero_mass(outcome)? {
                Some(CompareOutcome::High) => {}
                Some(CompareOutcome::Ratio(v)) if v >= floor * expected_ratio => {}
                _ => return Ok(Verdict::Reject),
            }
        }
    }
    Ok(Verdict::Accept)
}

/// Conditional identity tester with a query cost independent of the domain size.
pub fn cond_test_known<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    target: &KnownTarget,
    eps: f64,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Verdict> {
    require_model("cond_known", h, &[Model::Cond])?;
    check_unit("eps", eps, 1.0)?;
    check_target(h, target)?;
    let ladder = epsilon_ladder(eps);
    match target.branch(ladder.eps1) {
        Branch::Heavy { light_len } => test_known_heavy(h, target, ladder, light_len, profile),
        Branch::Main { k_star } => Ok(reject_on_zero_mass(test_known_main(
            h, target, eps, ladder, k_star, profile, rng,
        ))?
        .unwrap_or(Verdict::Reject)),
    }
}

fn test_known_heavy(
    h: &mut OracleHandle,
    target: &KnownTarget,
    ladder: EpsilonLadder,
    light_len: usize,
    profile: &ConstantsProfile,
) -> Result<Verdict> {
    let eps1 = ladder.eps1;
    let m = heavy_sample_size(eps1, profile);
    let mut counts = vec![0u64; target.n() - light_len];
    for (i, c) in h.draw_histogram(&QuerySet::FullDomain, m)? {
        let pos = target.rank(i);
        if pos >= light_len {
            counts[pos - light_len] = c;
        }
    }
    let mut heavy_fraction = 0.0;
    for (offset, &c) in counts.iter().enumerate() {
        let frac = c as f64 / m as f64;
        heavy_fraction += frac;
        if (frac - target.sorted_weight(light_len + offset)).abs() > eps1 * eps1 {
            return Ok(Verdict::Reject);
        }
    }
    if (1.0 - heavy_fraction) - target.prefix_mass(light_len) > eps1 {
        return Ok(Verdict::Reject);
    }
    Ok(Verdict::Accept)
}

fn heavy_sample_size(eps1: f64, profile: &ConstantsProfile) -> u64 {
    (profile.ck_heavy_m_c * (20.0 * (1.0 + 1.0 / eps1)).ln() / eps1.powi(4)).ceil() as u64
}

struct MainSizes {
    m_prefix: u64,
    ell: u64,
    m_weigh: u64,
    h_count: u64,
}

fn main_sizes(eps: f64, profile: &ConstantsProfile) -> MainSizes {
    let EpsilonLadder { eps1, eps3, .. } = epsilon_ladder(eps);
    let ell = (profile.ck_l_c / eps).ceil() as u64;
    MainSizes {
        m_prefix: (profile.ck_prefix_c * 20f64.ln() / (eps1 * eps1)).ceil() as u64,
        ell,
        m_weigh: (profile.ck_weigh_m_c * (20.0 * ell as f64).ln() / (eps3 * eps3 * eps1)).ceil()
            as u64,
        h_count: (profile.ck_h_c / eps).ceil() as u64,
    }
}

/// Most queries [`cond_test_known`] can spend; depends on `ε` and the profile only.
///
/// Runs stop early on rejection and skip sampled points in the light prefix, so individual
/// ledgers fall at or below this figure.
pub fn cond_known_budget(eps: f64, profile: &ConstantsProfile) -> u64 {
    let ladder = epsilon_ladder(eps);
    let MainSizes {
        m_prefix,
        ell,
        m_weigh,
        h_count,
    } = main_sizes(eps, profile);
    let single = compare_draws(
        ladder.eps2 / 16.0,
        2.0 / ladder.eps1,
        1.0 / (10.0 * ell as f64),
        profile,
    );
    let witness = h_count
        * compare_draws(
            ladder.eps4 / 8.0,
            4.0,
            1.0 / (10.0 * (ell * h_count) as f64),
            profile,
        );
    let main = m_prefix + ell + ell * (m_weigh + single.max(witness));
    main.max(heavy_sample_size(ladder.eps1, profile))
}

fn within(value: f64, center: f64, rel: f64) -> bool {
    value >= (1.0 - rel) * center && value <= (1.0 + rel) * center
}

fn test_known_main<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    target: &KnownTarget,
    eps: f64,
    ladder: EpsilonLadder,
    k_star: usize,
    profile: &ConstantsProfile,
    rng: &mut R,
) -> Result<Verdict> {
    let EpsilonLadder {
        eps1,
        eps2,
        eps3,
        eps4,
    } = ladder;
    let MainSizes {
        m_prefix,
        ell,
        m_weigh,
        h_count,
    } = main_sizes(eps, profile);

    let hits = h.draw_count(
        &QuerySet::FullDomain,
        &target.span_set(0, k_star - 1),
        m_prefix,
    )?;
    let frac = hits as f64 / m_prefix as f64;
    if !(eps1 / 2.0..=2.5 * eps1).contains(&frac) {
        return Ok(Verdict::Reject);
    }

    let draws = h.draw_many(&QuerySet::FullDomain, ell)?;

    for &point in &draws {
        let pos = target.rank(point);
        if pos < k_star {
            continue;
        }
        let hits = h.draw_count(&QuerySet::FullDomain, &target.span_set(0, pos), m_weigh)?;
        if !within(
            hits as f64 / m_weigh as f64,
            target.prefix_mass(pos + 1),
            eps3,
        ) {
            return Ok(Verdict::Reject);
        }
        let weight = target.sorted_weight(pos);
        let single = QuerySet::point(point);
        if weight >= eps1 {
            let expected = target.prefix_mass(pos) / weight;
            let outcome = compare(
                h,
                &single,
                &target.span_set(0, pos - 1),
                eps2 / 16.0,
                2.0 / eps1,
                1.0 / (10.0 * ell as f64),
                profile,
            )?;
            match outcome {
                CompareOutcome::Ratio(v) if within(v, expected, eps2 / 8.0) => {}
                _ => return Ok(Verdict::Reject),
            }
        } else {
            let partition = build_witnesses(target, pos, eps1)?;
            let delta = 1.0 / (10.0 * (ell * h_count) as f64);
            for _ in 0..h_count {
                let (lo, hi) = partition.intervals[rng.random_range(0..partition.intervals.len())];
                let expected = target.span_mass(lo, hi) / weight;
                let outcome = compare(
                    h,
                    &single,
                    &target.span_set(lo, hi),
                    eps4 / 8.0,
                    4.0,
                    delta,
                    profile,
                )?;
                match outcome {
                    CompareOutcome::Ratio(v) if within(v, expected, eps4 / 4.0) => {}
                    _ => return Ok(Verdict::Reject),
                }
            }
        }
    }
    Ok(Verdict::Accept)
}
