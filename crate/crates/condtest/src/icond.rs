//! Uniformity testing with interval-conditional queries.
//!
//! Each sampled point's weight is recovered by descending a balanced binary split of the
//! domain and multiplying the estimated conditional masses of the halves that contain it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_unit, Error, Result};
use crate::oracle::{Model, OracleHandle};
use crate::profile::ConstantsProfile;
use crate::query::QuerySet;
use crate::subroutines::{compare, CompareOutcome};
use crate::verdict::{reject_on_zero_mass, require_model, Verdict};

/// One level of the descent towards `y`; endpoints are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentFrame {
    pub a: usize,
    pub b: usize,
    /// Last point of the left half.
    pub c: usize,
    pub y_left: bool,
    /// `|I_y| / |I_ȳ|`, the ratio a uniform distribution would show.
    pub rho_expected: f64,
}

impl DescentFrame {
    /// The half containing the target.
    pub fn target_half(&self) -> QuerySet {
        if self.y_left {
            QuerySet::Interval(self.a, self.c)
        } else {
            QuerySet::Interval(self.c + 1, self.b)
        }
    }

    pub fn other_half(&self) -> QuerySet {
        if self.y_left {
            QuerySet::Interval(self.c + 1, self.b)
        } else {
            QuerySet::Interval(self.a, self.c)
        }
    }
}

/// The frames visited while descending from `[0, n−1]` to `{y}`.
pub fn descent_frames(n: usize, y: usize) -> Result<Vec<DescentFrame>> {
    if y >= n {
        return Err(Error::IndexOutOfRange { index: y, n });
    }
    let (mut a, mut b) = (0, n - 1);
    let mut frames = Vec::new();
    while a < b {
        let len = b - a + 1;
        let c = a + len.div_ceil(2) - 1;
        let (big, small) = (len.div_ceil(2) as f64, (len / 2) as f64);
        let y_left = y <= c;
        let rho_expected = if y_left { big / small } else { small / big };
        frames.push(DescentFrame {
            a,
            b,
            c,
            y_left,
            rho_expected,
        });
        if y_left {
            b = c;
        } else {
            a = c + 1;
        }
    }
    Ok(frames)
}

/// Parameters shared by every descent level: `(η, δ)`.
pub fn descent_parameters(n: usize, eps: f64) -> (f64, f64) {
    let log = (n as f64).log2().max(1.0);
    (eps / (48.0 * log), eps / (100.0 * (1.0 + log)))
}

/// Estimates `D(y)` by telescoping, or returns `None` when some level's ratio strays from the
/// uniform value by more than a `1 ± η` factor.
pub fn binary_descent(
    h: &mut OracleHandle,
    eps: f64,
    y: usize,
    profile: &ConstantsProfile,
) -> Result<Option<f64>> {
    require_model("binary_descent", h, &[Model::Icond, Model::Cond])?;
    check_unit("eps", eps, 1.0)?;
    let (eta, delta) = descent_parameters(h.n(), eps);
    let mut estimate = 1.0;
    for frame in descent_frames(h.n(), y)? {
        let outcome = compare(
            h,
            &frame.other_half(),
            &frame.target_half(),
            eta,
            2.0,
            delta,
            profile,
        );
        let Some(outcome) = reject_on_zero_mass(outcome)? else {
            return Ok(None);
        };
        let rho = match outcome {
            CompareOutcome::Ratio(r) => r,
            _ => return Ok(None),
        };
        let lo = (1.0 - eta) * frame.rho_expected;
        let hi = (1.0 + eta) * frame.rho_expected;
        if !(lo..=hi).contains(&rho) {
            return Ok(None);
        }
        estimate *= rho / (1.0 + rho);
    }
    Ok(Some(estimate))
}

/// Number of sampled points: `ceil(20/ε)`.
pub fn icond_sample_size(eps: f64) -> u64 {
    (20.0 / eps).ceil() as u64
}

/// Accepts when every sampled point's estimated weight is within `1 ± ε/12` of `1/N`.
pub fn icond_test_uniform<R: Rng + ?Sized>(
    h: &mut OracleHandle,
    eps: f64,
    profile: &ConstantsProfile,
    _rng: &mut R,
) -> Result<Verdict> {
    require_model("icond_uniform", h, &[Model::Icond])?;
    check_unit("eps", eps, 1.0)?;
    let nf = h.n() as f64;
    let points = h.draw_many(&QuerySet::FullDomain, icond_sample_size(eps))?;
    for y in points {
        let Some(d_hat) = binary_descent(h, eps, y, profile)? else {
            return Ok(Verdict::Reject);
        };
        if (d_hat * nf - 1.0).abs() > eps / 12.0 {
            return Ok(Verdict::Reject);
        }
    }
    Ok(Verdict::Accept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversarial::{half_split, random_block_profile};
    use crate::dist::Distribution;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn icond(d: &Distribution, seed: u64) -> OracleHandle {
        OracleHandle::new(Arc::new(d.clone()), Model::Icond, seed)
    }

    fn run(d: &Distribution, eps: f64, seed: u64) -> (Verdict, OracleHandle) {
        let mut h = icond(d, seed);
        let mut coins = ChaCha8Rng::seed_from_u64(seed);
        let v = icond_test_uniform(&mut h, eps, &ConstantsProfile::desk(), &mut coins).unwrap();
        (v, h)
    }

    #[test]
    fn single_point_domain_descends_to_one() {
        let d = Distribution::uniform(1).unwrap();
        let mut h = icond(&d, 0);
        h.draw(&QuerySet::FullDomain).unwrap();
        assert_eq!(
            binary_descent(&mut h, 0.5, 0, &ConstantsProfile::desk()).unwrap(),
            Some(1.0)
        );
        assert!(descent_frames(1, 0).unwrap().is_empty());
    }

    #[test]
    fn frames_split_odd_intervals_left_heavy() {
        let frames = descent_frames(5, 4).unwrap();
        assert_eq!((frames[0].a, frames[0].b, frames[0].c), (0, 4, 2));
        assert!(!frames[0].y_left);
        assert!((frames[0].rho_expected - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((frames[1].a, frames[1].b, frames[1].c), (3, 4, 3));
        assert_eq!(frames.len(), 2);
    }

    #[test]
    fn uniform_descent_is_accurate() {
        let n = 1024;
        let d = Distribution::uniform(n).unwrap();
        let eps = 0.5;
        let good = (0..300)
            .filter(|&seed| {
                let mut h = icond(&d, seed).with_discipline(crate::Discipline::Permissive);
                binary_descent(&mut h, eps, 37, &ConstantsProfile::desk())
                    .unwrap()
                    .is_some_and(|v| (v * n as f64 - 1.0).abs() <= eps / 12.0)
            })
            .count();
        assert!(good >= 290, "{good}");
    }

    #[test]
    fn heavy_half_descent_rejects_or_tracks_the_weight() {
        let n = 1024;
        let d = half_split(n, 0.5).unwrap();
        let eps = 0.5;
        for seed in 0..20 {
            let mut h = icond(&d, seed).with_discipline(crate::Discipline::Permissive);
            if let Some(v) = binary_descent(&mut h, eps, 37, &ConstantsProfile::desk()).unwrap() {
                assert!((v / d.weight(37) - 1.0).abs() <= eps / 12.0, "{v}");
            }
        }
    }

    #[test]
    fn accepts_uniform_and_rejects_blocks() {
        let n = 1 << 12;
        let u = Distribution::uniform(n).unwrap();
        let accepted = (0..30).filter(|&s| run(&u, 0.5, s).0.is_accept()).count();
        assert!(accepted >= 25, "{accepted}");
        let rejected = (0..30)
            .filter(|&s| {
                let far = random_block_profile(n, 0.5, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
                !run(&far, 0.5, s).0.is_accept()
            })
            .count();
        assert!(rejected >= 25, "{rejected}");
    }

    #[test]
    fn only_interval_queries_are_issued() {
        let (_, h) = run(&Distribution::uniform(4096).unwrap(), 0.5, 1);
        let ledger = h.ledger();
        assert_eq!(ledger.pcond + ledger.cond, 0);
        assert!(ledger.icond > 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn uniform_ratios_match_exactly(n in 1usize..5000, y_frac in 0.0f64..1.0) {
            let y = ((n as f64 * y_frac) as usize).min(n - 1);
            let d = Distribution::uniform(n).unwrap();
            let frames = descent_frames(n, y).unwrap();
            prop_assert!(frames.len() <= 1 + (n as f64).log2().ceil() as usize);
            if n.is_power_of_two() {
                prop_assert_eq!(frames.len(), n.trailing_zeros() as usize);
            }
            let mut product = 1.0;
            for f in &frames {
                prop_assert!(f.a <= y && y <= f.b);
                let exact = d.mass(&f.target_half()) / d.mass(&f.other_half());
                prop_assert!((exact / f.rho_expected - 1.0).abs() < 1e-9);
                product *= exact / (1.0 + exact);
            }
            prop_assert!((product * n as f64 - 1.0).abs() < 1e-9);
        }
    }
}
