//! Monte Carlo experiment runner.
//!
//! Trial `i` runs on seed `base ^ i`. That seed feeds a ChaCha8 stream whose first three words
//! seed the primary oracle, the secondary oracle and the tester's own coins, so every trial is
//! reproducible in isolation and trials can run in any order.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::distance::estimate_distance_to_uniformity;
use crate::equality::{eval_test_equality, pcond_test_equality};
use crate::error::{Error, Result};
use crate::icond::icond_test_uniform;
use crate::identity::{cond_test_known, pcond_test_known, KnownTarget};
use crate::oracle::{Discipline, Model, OracleHandle, QueryLedger};
use crate::profile::ConstantsProfile;
use crate::spec::DistSpec;
use crate::stats::{log_log_slope, mean_std, wilson, RateInterval, Z95};
use crate::uniformity::pcond_test_uniform;
use crate::verdict::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TesterId {
    PcondUniform,
    PcondKnown,
    CondKnown,
    PcondEquality,
    EvalEquality,
    Distance,
    IcondUniform,
}

/// How a tester uses the second distribution spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondSpec {
    None,
    /// The fully known reference distribution.
    KnownTarget,
    /// A second unknown distribution with its own oracle.
    SecondOracle,
}

impl TesterId {
    pub const ALL: [TesterId; 7] = [
        TesterId::PcondUniform,
        TesterId::PcondKnown,
        TesterId::CondKnown,
        TesterId::PcondEquality,
        TesterId::EvalEquality,
        TesterId::Distance,
        TesterId::IcondUniform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TesterId::PcondUniform => "pcond_uniform",
            TesterId::PcondKnown => "pcond_known",
            TesterId::CondKnown => "cond_known",
            TesterId::PcondEquality => "pcond_equality",
            TesterId::EvalEquality => "eval_equality",
            TesterId::Distance => "distance",
            TesterId::IcondUniform => "icond_uniform",
        }
    }

    pub fn model(self) -> Model {
        match self {
            TesterId::PcondUniform
            | TesterId::PcondKnown
            | TesterId::PcondEquality
            | TesterId::Distance => Model::Pcond,
            TesterId::CondKnown | TesterId::EvalEquality => Model::Cond,
            TesterId::IcondUniform => Model::Icond,
        }
    }

    pub fn second_spec(self) -> SecondSpec {
        match self {
            TesterId::PcondKnown | TesterId::CondKnown => SecondSpec::KnownTarget,
            TesterId::PcondEquality | TesterId::EvalEquality => SecondSpec::SecondOracle,
            _ => SecondSpec::None,
        }
    }

    /// Access discipline for the primary and secondary oracle.
    ///
    /// Testers that query pairs built from points another source produced (the known target,
    /// or the other oracle) run permissively on that handle.
    pub fn disciplines(self) -> (Discipline, Discipline) {
        match self {
            TesterId::PcondKnown => (Discipline::Permissive, Discipline::Strict),
            TesterId::PcondEquality => (Discipline::Strict, Discipline::Permissive),
            _ => (Discipline::Strict, Discipline::Strict),
        }
    }

    pub fn is_estimator(self) -> bool {
        self == TesterId::Distance
    }
}

impl fmt::Display for TesterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TesterId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TesterId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTester(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub tester: TesterId,
    pub dist: DistSpec,
    pub dist2: Option<DistSpec>,
    pub eps: f64,
    pub trials: u64,
    pub seed: u64,
    pub profile_id: String,
    pub profile: ConstantsProfile,
}

impl ExperimentConfig {
    pub fn new(tester: TesterId, dist: DistSpec, eps: f64, trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            tester,
            dist,
            dist2: None,
            eps,
            trials,
            seed,
            profile_id: "desk".into(),
            profile: ConstantsProfile::desk(),
        }
    }

    pub fn with_dist2(mut self, dist2: DistSpec) -> Self {
        self.dist2 = Some(dist2);
        self
    }

    /// Resolves a profile id as [`ConstantsProfile::resolve`] does and keeps the id for the report.
    pub fn with_profile(mut self, id: &str) -> Result<Self> {
        self.profile = ConstantsProfile::resolve(id)?;
        self.profile_id = id.to_string();
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub verdict: Option<Verdict>,
    pub estimate: Option<f64>,
    /// Error kind when the trial aborted; such trials count as non-accepting.
    pub error: Option<String>,
    #[serde(flatten)]
    pub ledger: QueryLedger,
    pub millis: f64,
}

impl TrialRecord {
    pub fn accepted(&self) -> bool {
        self.verdict == Some(Verdict::Accept)
    }
}

/// Mean query count per oracle kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanLedger {
    pub samp: f64,
    pub cond: f64,
    pub pcond: f64,
    pub icond: f64,
    pub total: f64,
}

/// Everything except timing, so that reruns compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tester: TesterId,
    pub n: usize,
    pub eps: f64,
    pub trials: u64,
    pub seed: u64,
    pub accepts: u64,
    pub errors: u64,
    pub accept_rate: RateInterval,
    pub estimate_mean: Option<f64>,
    pub estimate_std: Option<f64>,
    pub mean_queries: MeanLedger,
    pub profile_id: String,
    pub profile: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub report: AggregateReport,
    pub records: Vec<TrialRecord>,
}

/// Oracles and target shared by every trial; per-trial handles are forks.
struct Setup {
    tester: TesterId,
    eps: f64,
    profile: ConstantsProfile,
    primary: OracleHandle,
    secondary: Option<OracleHandle>,
    target: Option<KnownTarget>,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.trials == 0 {
            return Err(Error::InvalidParameter(
                "at least one trial is needed".into(),
            ));
        }
        let tester = cfg.tester;
        let dist = Arc::new(cfg.dist.build()?);
        let second = match (tester.second_spec(), &cfg.dist2) {
            (SecondSpec::None, None) => None,
            (SecondSpec::None, Some(_)) => {
                return Err(Error::SpecParse(format!(
                    "{tester} takes a single distribution"
                )));
            }
            (_, None) => {
                return Err(Error::SpecParse(format!(
                    "{tester} needs a second distribution"
                )))
            }
            (_, Some(spec)) => {
                let d = Arc::new(spec.build()?);
                if d.n() != dist.n() {
                    return Err(Error::DomainMismatch {
                        left: dist.n(),
                        right: d.n(),
                    });
                }
                Some(d)
            }
        };
        let (first_discipline, second_discipline) = tester.disciplines();
        let primary = OracleHandle::new(dist, tester.model(), 0).with_discipline(first_discipline);
        let (secondary, target) = match tester.second_spec() {
            SecondSpec::SecondOracle => {
                let d = second.expect("checked above");
                (
                    Some(
                        OracleHandle::new(d, tester.model(), 0).with_discipline(second_discipline),
                    ),
                    None,
                )
            }
            SecondSpec::KnownTarget => {
                (None, Some(KnownTarget::new(second.expect("checked above"))))
            }
            SecondSpec::None => (None, None),
        };
        Ok(Setup {
            tester,
            eps: cfg.eps,
            profile: cfg.profile.clone(),
            primary,
            secondary,
            target,
        })
    }

    fn run_trial(&self, trial: u64, seed: u64) -> (TrialRecord, Option<Error>) {
        let mut streams = ChaCha8Rng::seed_from_u64(seed);
        let mut h1 = self.primary.fork(streams.next_u64());
        let mut h2 = self.secondary.as_ref().map(|h| h.fork(streams.next_u64()));
        let mut coins = ChaCha8Rng::seed_from_u64(streams.next_u64());
        let (eps, profile) = (self.eps, &self.profile);
        let start = Instant::now();
        let outcome: Result<(Option<Verdict>, Option<f64>)> = match self.tester {
            TesterId::PcondUniform => {
                pcond_test_uniform(&mut h1, eps, profile, &mut coins).map(|v| (Some(v), None))
            }
            TesterId::IcondUniform => {
                icond_test_uniform(&mut h1, eps, profile, &mut coins).map(|v| (Some(v), None))
            }
            TesterId::PcondKnown => {
                let target = self.target.as_ref().expect("known target");
                pcond_test_known(&mut h1, target, eps, profile, &mut coins).map(|v| (Some(v), None))
            }
            TesterId::CondKnown => {
                let target = self.target.as_ref().expect("known target");
                cond_test_known(&mut h1, target, eps, profile, &mut coins).map(|v| (Some(v), None))
            }
            TesterId::PcondEquality => {
                let h2 = h2.as_mut().expect("second oracle");
                pcond_test_equality(&mut h1, h2, eps, profile, &mut coins).map(|v| (Some(v), None))
            }
            TesterId::EvalEquality => {
                let h2 = h2.as_mut().expect("second oracle");
                eval_test_equality(&mut h1, h2, eps, profile, &mut coins).map(|v| (Some(v), None))
            }
            TesterId::Distance => {
                estimate_distance_to_uniformity(&mut h1, eps, profile, &mut coins)
                    .map(|e| (None, Some(e.d_hat)))
            }
        };
        let millis = start.elapsed().as_secs_f64() * 1e3;
        let ledger = match &h2 {
            Some(h2) => h1.ledger().merged(h2.ledger()),
            None => h1.ledger(),
        };
        let (verdict, estimate, failure) = match outcome {
            Ok((v, e)) => (v, e, None),
            Err(e) => (None, None, Some(e)),
        };
        let error = failure.as_ref().map(|e| e.kind().to_string());
        (
            TrialRecord {
                trial,
                seed,
                verdict,
                estimate,
                error,
                ledger,
                millis,
            },
            failure,
        )
    }
}

/// Per-trial seed.
pub fn trial_seed(base: u64, trial: u64) -> u64 {
    base ^ trial
}

/// Runs every trial in parallel and aggregates in trial order.
///
/// ```
/// use condtest::harness::{run_experiment, ExperimentConfig, TesterId};
/// use condtest::spec::DistSpec;
///
/// let spec = DistSpec::parse(r#"{"kind":"generator","name":"uniform","params":{"n":1000}}"#).unwrap();
/// let cfg = ExperimentConfig::new(TesterId::PcondUniform, spec, 0.5, 4, 7);
/// let out = run_experiment(&cfg).unwrap();
/// assert_eq!(out.records.len(), 4);
/// assert!(out.report.accept_rate.rate <= 1.0);
/// ```
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let setup = Setup::new(cfg)?;
    // Configuration problems (wrong model, bad eps) surface once, before any trial runs.
    let (probe, failure) = setup.run_trial(0, trial_seed(cfg.seed, 0));
    if let Some(e @ (Error::InvalidParameter(_) | Error::IncompatibleOracleModel { .. })) = failure
    {
        return Err(e);
    }
    let mut records = vec![probe];
    records.extend(
        (1..cfg.trials)
            .into_par_iter()
            .map(|i| setup.run_trial(i, trial_seed(cfg.seed, i)).0)
            .collect::<Vec<_>>(),
    );
    let report = aggregate(cfg, setup.primary.n(), &records);
    Ok(Experiment { report, records })
}

fn aggregate(cfg: &ExperimentConfig, n: usize, records: &[TrialRecord]) -> AggregateReport {
    let trials = records.len() as u64;
    let accepts = records.iter().filter(|r| r.accepted()).count() as u64;
    let errors = records.iter().filter(|r| r.error.is_some()).count() as u64;
    let estimates: Vec<f64> = records.iter().filter_map(|r| r.estimate).collect();
    let (estimate_mean, estimate_std) = if estimates.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(&estimates);
        (Some(m), Some(s))
    };
    let t = trials as f64;
    let mean =
        |f: fn(&QueryLedger) -> u64| records.iter().map(|r| f(&r.ledger) as f64).sum::<f64>() / t;
    AggregateReport {
        tester: cfg.tester,
        n,
        eps: cfg.eps,
        trials,
        seed: cfg.seed,
        accepts,
        errors,
        accept_rate: wilson(accepts, trials, Z95),
        estimate_mean,
        estimate_std,
        mean_queries: MeanLedger {
            samp: mean(|l| l.samp),
            cond: mean(|l| l.cond),
            pcond: mean(|l| l.pcond),
            icond: mean(|l| l.icond),
            total: mean(|l| l.total),
        },
        profile_id: cfg.profile_id.clone(),
        profile: cfg.profile.to_table(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub mean_total: f64,
    pub std_total: f64,
    pub accept_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub tester: TesterId,
    pub eps: f64,
    pub rows: Vec<SweepRow>,
    /// Least-squares exponent of mean queries against `log₂ N`.
    pub log_n_exponent: f64,
}

/// Reruns `cfg` with its specs resized to each `n` in the grid.
pub fn scaling_sweep(cfg: &ExperimentConfig, n_grid: &[usize]) -> Result<SweepReport> {
    let mut grid = n_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let mut rows = Vec::with_capacity(grid.len());
    for n in grid {
        let mut sized = cfg.clone();
        sized.dist = cfg.dist.with_n(n)?;
        sized.dist2 = cfg.dist2.as_ref().map(|d| d.with_n(n)).transpose()?;
        let out = run_experiment(&sized)?;
        let totals: Vec<f64> = out.records.iter().map(|r| r.ledger.total as f64).collect();
        let (mean_total, std_total) = mean_std(&totals);
        rows.push(SweepRow {
            n,
            mean_total,
            std_total,
            accept_rate: out.report.accept_rate.rate,
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).log2(), r.mean_total))
        .collect();
    let log_n_exponent = if points.len() >= 2 {
        log_log_slope(&points)
    } else {
        0.0
    };
    Ok(SweepReport {
        tester: cfg.tester,
        eps: cfg.eps,
        rows,
        log_n_exponent,
    })
}

/// Exact total variation distance between a spec's distribution and uniform.
pub fn distance_to_uniform(d: &Distribution) -> f64 {
    crate::dist::tv_distance(d, &Distribution::uniform(d.n()).expect("non-empty"))
        .expect("same domain")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> DistSpec {
        DistSpec::parse(&format!(
            r#"{{"kind":"generator","name":"uniform","params":{{"n":{n}}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn ids_round_trip() {
        for t in TesterId::ALL {
            assert_eq!(t.as_str().parse::<TesterId>().unwrap(), t);
        }
        assert!(matches!(
            "nope".parse::<TesterId>(),
            Err(Error::UnknownTester(_))
        ));
    }

    #[test]
    fn reruns_are_identical() {
        let cfg = ExperimentConfig::new(TesterId::PcondUniform, uniform(1000), 0.5, 8, 42);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.report, b.report);
        let strip = |e: &Experiment| {
            e.records
                .iter()
                .map(|r| (r.seed, r.verdict, r.ledger))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
        for (i, r) in a.records.iter().enumerate() {
            assert_eq!(r.seed, 42 ^ i as u64);
        }
    }

    #[test]
    fn single_trial_rate_is_zero_or_one() {
        let cfg = ExperimentConfig::new(TesterId::IcondUniform, uniform(64), 0.5, 1, 3);
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 1);
        assert!(out.report.accept_rate.rate == 0.0 || out.report.accept_rate.rate == 1.0);
        assert_eq!(out.records[0].ledger.pcond + out.records[0].ledger.cond, 0);
    }

    #[test]
    fn rate_matches_record_fraction() {
        let far = DistSpec::parse(
            r#"{"kind":"generator","name":"half_split","params":{"n":1000,"eps":0.1}}"#,
        )
        .unwrap();
        let out = run_experiment(&ExperimentConfig::new(
            TesterId::PcondUniform,
            far,
            0.5,
            20,
            1,
        ))
        .unwrap();
        let accepted = out.records.iter().filter(|r| r.accepted()).count() as f64;
        assert_eq!(out.report.accept_rate.rate, accepted / 20.0);
    }

    #[test]
    fn spec_arity_is_checked() {
        let two = ExperimentConfig::new(TesterId::PcondUniform, uniform(8), 0.5, 1, 0)
            .with_dist2(uniform(8));
        assert!(matches!(run_experiment(&two), Err(Error::SpecParse(_))));
        let one = ExperimentConfig::new(TesterId::EvalEquality, uniform(8), 0.5, 1, 0);
        assert!(matches!(run_experiment(&one), Err(Error::SpecParse(_))));
        let mismatch = ExperimentConfig::new(TesterId::CondKnown, uniform(8), 0.5, 1, 0)
            .with_dist2(uniform(16));
        assert!(matches!(
            run_experiment(&mismatch),
            Err(Error::DomainMismatch { .. })
        ));
        let zero = ExperimentConfig::new(TesterId::Distance, uniform(8), 0.5, 0, 0);
        assert!(run_experiment(&zero).is_err());
    }

    #[test]
    fn no_tester_trips_the_access_discipline() {
        let cases = [
            (TesterId::PcondUniform, None),
            (TesterId::IcondUniform, None),
            (TesterId::Distance, None),
            (TesterId::PcondKnown, Some(uniform(128))),
            (TesterId::CondKnown, Some(uniform(128))),
            (TesterId::PcondEquality, Some(uniform(128))),
            (TesterId::EvalEquality, Some(uniform(128))),
        ];
        let far = DistSpec::parse(
            r#"{"kind":"generator","name":"half_split","params":{"n":128,"eps":0.5}}"#,
        )
        .unwrap();
        for (tester, second) in cases {
            for dist in [uniform(128), far.clone()] {
                let mut cfg = ExperimentConfig::new(tester, dist, 0.5, 6, 9);
                cfg.dist2 = second.clone();
                let out = run_experiment(&cfg).unwrap();
                for r in &out.records {
                    assert_eq!(r.error, None, "{tester}: {r:?}");
                }
            }
        }
    }

    #[test]
    fn sweep_rows_come_out_in_n_order() {
        let cfg = ExperimentConfig::new(TesterId::PcondUniform, uniform(1000), 0.5, 4, 5);
        let sweep = scaling_sweep(&cfg, &[100_000, 1000, 10_000]).unwrap();
        assert_eq!(
            sweep.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
            vec![1000, 10_000, 100_000]
        );
        assert_eq!(sweep.rows.len(), 3);
    }
}
