//! Query sets: the argument `S` handed to a conditional oracle.
//!
//! Points are 0-based throughout the crate, so a domain of size `n` is `0..n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A subset of the domain in one of the four shapes the oracle models care about.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuerySet {
    FullDomain,
    /// Two distinct points.
    Pair(usize, usize),
    /// Inclusive range `a..=b`.
    Interval(usize, usize),
    /// Strictly increasing, non-empty list of points.
    Explicit(Vec<usize>),
}

impl QuerySet {
    pub fn point(i: usize) -> Self {
        QuerySet::Explicit(vec![i])
    }

    pub fn pair(i: usize, j: usize) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidQuerySet(format!(
                "pair ({i}, {i}) repeats a point"
            )));
        }
        Ok(QuerySet::Pair(i, j))
    }

    pub fn interval(a: usize, b: usize) -> Result<Self> {
        if a > b {
            return Err(Error::InvalidQuerySet(format!(
                "interval {a}..={b} is empty"
            )));
        }
        Ok(QuerySet::Interval(a, b))
    }

    /// Builds an explicit set from any collection of points; order and duplicates are ignored.
    pub fn explicit(points: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut v: Vec<usize> = points.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::InvalidQuerySet("explicit set is empty".into()));
        }
        Ok(QuerySet::Explicit(v))
    }

    /// Checks the shape invariants against a domain of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let in_range = |i: usize| {
            if i < n {
                Ok(())
            } else {
                Err(Error::IndexOutOfRange { index: i, n })
            }
        };
        match self {
            QuerySet::FullDomain => Ok(()),
            QuerySet::Pair(i, j) => {
                in_range(*i)?;
                in_range(*j)?;
                if i == j {
                    Err(Error::InvalidQuerySet("pair repeats a point".into()))
                } else {
                    Ok(())
                }
            }
            QuerySet::Interval(a, b) => {
                in_range(*b)?;
                if a > b {
                    Err(Error::InvalidQuerySet("interval is empty".into()))
                } else {
                    Ok(())
                }
            }
            QuerySet::Explicit(v) => {
                let Some(&last) = v.last() else {
                    return Err(Error::InvalidQuerySet("explicit set is empty".into()));
                };
                if v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidQuerySet(
                        "explicit set is not strictly increasing".into(),
                    ));
                }
                in_range(last)
            }
        }
    }

    pub fn len(&self, n: usize) -> usize {
        match self {
            QuerySet::FullDomain => n,
            QuerySet::Pair(..) => 2,
            QuerySet::Interval(a, b) => b - a + 1,
            QuerySet::Explicit(v) => v.len(),
        }
    }

    pub fn contains(&self, i: usize) -> bool {
        match self {
            QuerySet::FullDomain => true,
            QuerySet::Pair(a, b) => i == *a || i == *b,
            QuerySet::Interval(a, b) => (*a..=*b).contains(&i),
            QuerySet::Explicit(v) => v.binary_search(&i).is_ok(),
        }
    }

    /// Points of the set in increasing order.
    pub fn iter(&self, n: usize) -> Box<dyn Iterator<Item = usize> + '_> {
        match self {
            QuerySet::FullDomain => Box::new(0..n),
            QuerySet::Pair(a, b) => Box::new([*a.min(b), *a.max(b)].into_iter()),
            QuerySet::Interval(a, b) => Box::new(*a..=*b),
            QuerySet::Explicit(v) => Box::new(v.iter().copied()),
        }
    }

    pub fn to_vec(&self, n: usize) -> Vec<usize> {
        self.iter(n).collect()
    }

    /// The set as an inclusive range, when it is one.
    pub fn as_range(&self, n: usize) -> Option<(usize, usize)> {
        match self {
            QuerySet::FullDomain => Some((0, n - 1)),
            QuerySet::Interval(a, b) => Some((*a, *b)),
            QuerySet::Pair(a, b) => {
                let (lo, hi) = (*a.min(b), *a.max(b));
                (hi == lo + 1).then_some((lo, hi))
            }
            QuerySet::Explicit(v) => {
                let (first, last) = (v[0], v[v.len() - 1]);
                (last - first + 1 == v.len()).then_some((first, last))
            }
        }
    }

    pub fn shape_name(&self) -> &'static str {
        match self {
            QuerySet::FullDomain => "full-domain",
            QuerySet::Pair(..) => "pair",
            QuerySet::Interval(..) => "interval",
            QuerySet::Explicit(_) => "explicit",
        }
    }

    pub fn is_disjoint(&self, other: &QuerySet, n: usize) -> bool {
        if let (Some((a, b)), Some((c, d))) = (self.as_range(n), other.as_range(n)) {
            return b < c || d < a;
        }
        let (small, large) = if self.len(n) <= other.len(n) {
            (self, other)
        } else {
            (other, self)
        };
        !small.iter(n).any(|i| large.contains(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_enforce_shape() {
        assert!(QuerySet::pair(3, 3).is_err());
        assert!(QuerySet::interval(4, 2).is_err());
        assert!(QuerySet::explicit(Vec::new()).is_err());
        assert_eq!(
            QuerySet::explicit([5, 1, 5, 3]).unwrap(),
            QuerySet::Explicit(vec![1, 3, 5])
        );
    }

    #[test]
    fn validate_against_domain() {
        assert!(QuerySet::Interval(0, 7).validate(8).is_ok());
        assert_eq!(
            QuerySet::Interval(0, 8).validate(8),
            Err(Error::IndexOutOfRange { index: 8, n: 8 })
        );
        assert!(QuerySet::Explicit(vec![2, 1]).validate(8).is_err());
    }

    #[test]
    fn ranges_and_disjointness() {
        assert_eq!(QuerySet::Explicit(vec![4, 5, 6]).as_range(10), Some((4, 6)));
        assert_eq!(QuerySet::Explicit(vec![4, 6]).as_range(10), None);
        assert!(QuerySet::Interval(0, 3).is_disjoint(&QuerySet::Interval(4, 9), 10));
        assert!(!QuerySet::Interval(0, 4).is_disjoint(&QuerySet::Explicit(vec![4, 8]), 10));
        assert!(QuerySet::point(2).is_disjoint(&QuerySet::Pair(1, 3), 10));
    }
}
