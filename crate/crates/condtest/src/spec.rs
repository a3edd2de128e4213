//! Distribution spec files.
//!
//! A spec is a JSON document, either explicit weights or a named generator:
//!
//! ```
//! use condtest::spec::DistSpec;
//!
//! let spec = DistSpec::parse(r#"{"kind":"generator","name":"half_split","params":{"n":4,"eps":0.25}}"#).unwrap();
//! assert_eq!(spec.build().unwrap().weights(), &[0.375, 0.375, 0.125, 0.125]);
//! ```

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversarial::{block_profile, half_split, random_block_profile, staircase, PairProfile};
use crate::dist::Distribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Explicit { weights: Vec<f64> },
    Generator(Generator),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Generator {
    Uniform(UniformParams),
    HalfSplit(HalfSplitParams),
    Staircase(StaircaseParams),
    BlockProfile(BlockProfileParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformParams {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HalfSplitParams {
    pub n: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaircaseParams {
    pub k: u64,
    pub r: u64,
    /// `None` gives the unperturbed staircase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<PairProfile>>,
}

/// Either the full geometry (`x`, `offset`, `profiles`) or none of it, in which case a random
/// member of the family is drawn from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockProfileParams {
    pub n: usize,
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profiles: Option<Vec<PairProfile>>,
    #[serde(default)]
    pub seed: u64,
}

impl DistSpec {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::SpecParse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::SpecParse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("specs always serialize")
    }

    /// Domain size, when it can be read off without building the distribution.
    pub fn n(&self) -> Option<usize> {
        match self {
            DistSpec::Explicit { weights } => Some(weights.len()),
            DistSpec::Generator(Generator::Uniform(p)) => Some(p.n),
            DistSpec::Generator(Generator::HalfSplit(p)) => Some(p.n),
            DistSpec::Generator(Generator::BlockProfile(p)) => Some(p.n),
            DistSpec::Generator(Generator::Staircase(_)) => None,
        }
    }

    /// The same family at a different domain size; explicit weights and staircases have no such knob.
    pub fn with_n(&self, new_n: usize) -> Result<Self> {
        let mut out = self.clone();
        match &mut out {
            DistSpec::Generator(Generator::Uniform(p)) => p.n = new_n,
            DistSpec::Generator(Generator::HalfSplit(p)) => p.n = new_n,
            DistSpec::Generator(Generator::BlockProfile(p)) if p.x.is_none() => p.n = new_n,
            _ => return Err(Error::SpecParse("this spec has no resizable domain".into())),
        }
        Ok(out)
    }

    pub fn build(&self) -> Result<Distribution> {
        match self {
            DistSpec::Explicit { weights } => Distribution::new(weights.clone()),
            DistSpec::Generator(g) => g.build(),
        }
    }
}

impl Generator {
    pub fn build(&self) -> Result<Distribution> {
        match self {
            Generator::Uniform(p) => Distribution::uniform(p.n),
            Generator::HalfSplit(p) => half_split(p.n, p.eps),
            Generator::Staircase(p) => staircase(p.k, p.r, p.profile.as_deref()),
            Generator::BlockProfile(p) => match (p.x, p.offset, &p.profiles) {
                (Some(x), Some(offset), Some(profiles)) => {
                    block_profile(p.n, x, offset, profiles, p.eps)
                }
                (None, None, None) => {
                    random_block_profile(p.n, p.eps, &mut ChaCha8Rng::seed_from_u64(p.seed))
                }
                _ => Err(Error::SpecParse(
                    "block_profile needs all of x, offset, profiles or none of them".into(),
                )),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_weights_round_trip() {
        let spec = DistSpec::parse(r#"{"kind":"explicit","weights":[1,3]}"#).unwrap();
        assert_eq!(spec.build().unwrap().weights(), &[0.25, 0.75]);
        assert_eq!(DistSpec::parse(&spec.to_json()).unwrap(), spec);
    }

    #[test]
    fn staircase_with_profile() {
        let spec = DistSpec::parse(
            r#"{"kind":"generator","name":"staircase","params":{"k":2,"r":1,"profile":["up_down"]}}"#,
        )
        .unwrap();
        let d = spec.build().unwrap();
        assert!((d.interval_mass(0, 1) - 0.75).abs() < 1e-15);
        assert!(spec.with_n(10).is_err());
    }

    #[test]
    fn block_profile_random_and_explicit() {
        let random = DistSpec::parse(
            r#"{"kind":"generator","name":"block_profile","params":{"n":64,"eps":0.25,"seed":3}}"#,
        )
        .unwrap();
        assert_eq!(
            random.build().unwrap().weights(),
            random.build().unwrap().weights()
        );
        assert_eq!(random.with_n(128).unwrap().build().unwrap().n(), 128);
        let partial = DistSpec::parse(
            r#"{"kind":"generator","name":"block_profile","params":{"n":64,"eps":0.25,"x":1}}"#,
        )
        .unwrap();
        assert!(matches!(partial.build(), Err(Error::SpecParse(_))));
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for text in [
            r#"{"kind":"explicit"}"#,
            r#"{"kind":"generator","name":"zipf","params":{}}"#,
            r#"{"kind":"generator","name":"half_split","params":{"n":4,"eps":0.1,"extra":1}}"#,
            r#"{"kind":"explicit","weights":[1],"name":"x"}"#,
            "not json",
        ] {
            assert!(
                matches!(DistSpec::parse(text), Err(Error::SpecParse(_))),
                "{text}"
            );
        }
        let negative = DistSpec::parse(r#"{"kind":"explicit","weights":[1,-1]}"#).unwrap();
        assert!(matches!(
            negative.build(),
            Err(Error::NegativeWeight { .. })
        ));
    }
}
