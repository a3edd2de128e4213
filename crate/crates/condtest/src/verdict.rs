use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{Model, OracleHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }
}

pub(crate) fn require_model(
    tester: &'static str,
    h: &OracleHandle,
    allowed: &[Model],
) -> Result<()> {
    if allowed.contains(&h.model()) {
        Ok(())
    } else {
        Err(Error::IncompatibleOracleModel {
            tester,
            expected: allowed[0],
            got: h.model(),
        })
    }
}

/// Maps an empty-mass query to a rejection: it certifies the distribution differs from the target.
pub(crate) fn reject_on_zero_mass<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroMassSet) => Ok(None),
        Err(e) => Err(e),
    }
}
