pub mod adversarial;
pub mod dist;
pub mod distance;
pub mod equality;
pub mod error;
pub mod harness;
pub mod icond;
pub mod identity;
pub mod oracle;
pub mod profile;
pub mod query;
pub mod spec;
pub mod stats;
pub mod subroutines;
pub mod uniformity;
pub mod verdict;

pub use dist::{tv_distance, Distribution};
pub use distance::{
    estimate_distance_to_uniformity, find_reference, DistanceEstimate, ReferencePoint,
};
pub use equality::{approx_eval, eval_test_equality, pcond_test_equality, EvalResult};
pub use error::{Error, Result};
pub use harness::{run_experiment, scaling_sweep, ExperimentConfig, TesterId};
pub use icond::{binary_descent, icond_test_uniform, DescentFrame};
pub use identity::{
    build_witnesses, cond_known_budget, cond_test_known, pcond_test_known, KnownTarget,
};
pub use oracle::{Discipline, Model, OracleHandle, QueryLedger};
pub use profile::ConstantsProfile;
pub use query::QuerySet;
pub use spec::DistSpec;
pub use subroutines::{compare, estimate_neighborhood, CompareOutcome, NeighborhoodEstimate};
pub use uniformity::pcond_test_uniform;
pub use verdict::Verdict;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/oracles.md")]
    mod oracles {}
    #[doc = include_str!("../../../book/src/testers.md")]
    mod testers {}
    #[doc = include_str!("../../../book/src/estimators.md")]
    mod estimators {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/profiles.md")]
    mod profiles {}
}
