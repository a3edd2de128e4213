//! Explicit distributions over `0..n` and the exact quantities the testers are checked against.

use crate::error::{Error, Result};
use crate::query::QuerySet;

/// Intervals shorter than this are summed directly instead of through prefix differences,
/// which keeps tiny masses accurate.
const DIRECT_SUM_LEN: usize = 64;

/// A normalised probability mass function over `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
    /// `prefix[i]` is the mass of `0..i`; length `n + 1`.
    prefix: Vec<f64>,
    raw_total: f64,
}

impl Distribution {
    /// Normalises non-negative weights into a distribution.
    ///
    /// ```
    /// use condtest::Distribution;
    /// let d = Distribution::new(vec![1.0, 2.0, 3.0]).unwrap();
    /// assert!((d.weight(2) - 0.5).abs() < 1e-15);
    /// ```
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyDomain);
        }
        if let Some((index, &weight)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::NegativeWeight { index, weight });
        }
        let raw_total: f64 = weights.iter().sum();
        if raw_total <= 0.0 {
            return Err(Error::ZeroTotalMass);
        }
        let weights: Vec<f64> = weights.into_iter().map(|w| w / raw_total).collect();
        let mut prefix = Vec::with_capacity(weights.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for w in &weights {
            acc += w;
            prefix.push(acc);
        }
        Ok(Distribution {
            weights,
            prefix,
            raw_total,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(vec![1.0; n])
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::IndexOutOfRange { index: at, n });
        }
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        Self::new(w)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Sum of the weights as given, before normalisation.
    pub fn raw_total(&self) -> f64 {
        self.raw_total
    }

    /// Mass of `lo..=hi`.
    pub fn interval_mass(&self, lo: usize, hi: usize) -> f64 {
        if hi - lo < DIRECT_SUM_LEN {
            self.weights[lo..=hi].iter().sum()
        } else {
            (self.prefix[hi + 1] - self.prefix[lo]).max(0.0)
        }
    }

    pub fn mass(&self, s: &QuerySet) -> f64 {
        match s {
            QuerySet::FullDomain => self.prefix[self.n()],
            QuerySet::Pair(i, j) => self.weights[*i] + self.weights[*j],
            QuerySet::Interval(a, b) => self.interval_mass(*a, *b),
            QuerySet::Explicit(v) => v.iter().map(|&i| self.weights[i]).sum(),
        }
    }

    /// `D_S` as `(point, probability)` pairs in increasing point order.
    pub fn conditional_pmf(&self, s: &QuerySet) -> Result<Vec<(usize, f64)>> {
        s.validate(self.n())?;
        let total = self.mass(s);
        if total <= 0.0 {
            return Err(Error::ZeroMassSet);
        }
        Ok(s.iter(self.n())
            .map(|i| (i, self.weights[i] / total))
            .collect())
    }

    /// Points whose weight is within a factor `1 + gamma` of `D(x)`.
    pub fn neighborhood(&self, x: usize, gamma: f64) -> Vec<usize> {
        let wx = self.weights[x];
        let (lo, hi) = (wx / (1.0 + gamma), (1.0 + gamma) * wx);
        (0..self.n())
            .filter(|&y| (lo..=hi).contains(&self.weights[y]))
            .collect()
    }

    /// Points with `D(i) >= 1/(gamma n)`.
    pub fn heavy_set(&self, gamma: f64) -> Vec<usize> {
        let threshold = 1.0 / (gamma * self.n() as f64);
        (0..self.n())
            .filter(|&i| self.weights[i] >= threshold)
            .collect()
    }

    /// Contribution of point `i` to the distance from uniform: `1 - n D(i)` below `1/n`, else 0.
    pub fn psi(&self, i: usize) -> f64 {
        let scaled = self.n() as f64 * self.weights[i];
        if scaled < 1.0 {
            1.0 - scaled
        } else {
            0.0
        }
    }

    pub fn bucketize(&self, scheme: BucketScheme) -> BucketDecomposition {
        let ranges = scheme.ranges(self.n());
        let bucket_of = self
            .weights
            .iter()
            .map(|&w| {
                ranges
                    .iter()
                    .position(|r| r.range.contains(w))
                    .expect("bucket ranges cover [0, 1]")
            })
            .collect();
        BucketDecomposition { bucket_of, ranges }
    }

    /// Point of `s` at conditional quantile `u` in `[0, 1)`. The caller guarantees `D(s) > 0`.
    pub(crate) fn sample_in(&self, s: &QuerySet, u: f64) -> usize {
        match s {
            QuerySet::FullDomain => self.search(0, self.n() - 1, u),
            QuerySet::Interval(a, b) if b - a >= DIRECT_SUM_LEN => self.search(*a, *b, u),
            QuerySet::Interval(a, b) => self.linear(*a..=*b, u),
            QuerySet::Pair(i, j) => self.linear([*i, *j].into_iter(), u),
            QuerySet::Explicit(v) => self.linear(v.iter().copied(), u),
        }
    }

    fn linear(&self, points: impl Iterator<Item = usize> + Clone, u: f64) -> usize {
        let total: f64 = points.clone().map(|i| self.weights[i]).sum();
        let target = u * total;
        let mut acc = 0.0;
        let mut last_positive = None;
        for i in points {
            let w = self.weights[i];
            if w > 0.0 {
                acc += w;
                last_positive = Some(i);
                if target < acc {
                    return i;
                }
            }
        }
        last_positive.expect("set has positive mass")
    }

    fn search(&self, a: usize, b: usize, u: f64) -> usize {
        let lo = self.prefix[a];
        let target = lo + u * (self.prefix[b + 1] - lo);
        let k = a + self.prefix[a + 1..=b + 1].partition_point(|&p| p <= target);
        if k <= b && self.weights[k] > 0.0 {
            return k;
        }
        (a..=b.min(k))
            .rev()
            .find(|&i| self.weights[i] > 0.0)
            .or_else(|| (a..=b).find(|&i| self.weights[i] > 0.0))
            .expect("interval has positive mass")
    }
}

/// `½ Σ |D1(i) − D2(i)|`.
///
/// ```
/// use condtest::{tv_distance, Distribution};
/// let spike = Distribution::point_mass(4, 0).unwrap();
/// let flat = Distribution::uniform(4).unwrap();
/// assert!((tv_distance(&spike, &flat).unwrap() - 0.75).abs() < 1e-15);
/// ```
pub fn tv_distance(d1: &Distribution, d2: &Distribution) -> Result<f64> {
    if d1.n() != d2.n() {
        return Err(Error::DomainMismatch {
            left: d1.n(),
            right: d2.n(),
        });
    }
    let l1: f64 = d1
        .weights
        .iter()
        .zip(&d2.weights)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((0.5 * l1).min(1.0))
}

/// A weight range with explicit endpoint closure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl WeightRange {
    fn half_open(lo: f64, hi: f64) -> Self {
        WeightRange {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    pub fn contains(&self, w: f64) -> bool {
        let above = if self.lo_closed {
            w >= self.lo
        } else {
            w > self.lo
        };
        let below = if self.hi_closed {
            w <= self.hi
        } else {
            w < self.hi
        };
        above && below
    }
}

/// One bucket: a label and the weight range it covers.
#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub label: String,
    pub range: WeightRange,
}

/// The three bucketings used by the testers and their analyses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BucketScheme {
    /// `B_0 = [0, η/n)` and `B_j = [2^{j-1} η/n, 2^j η/n)`.
    KnownIdentity { eta: f64 },
    /// Zero-weight points, `L_j` and `H_j` for `j = 0..=log2(4/ε)` around `1/n`, and
    /// everything at or above `2/n`.
    /// `eps` is first rounded down to a power of one half.
    UniformSoundness { eps: f64 },
    /// Light points below `κ/(2n)`, medium buckets on a `(1+κ)` grid, heavy points from `1/(κn)`.
    MediumWeight { kappa: f64 },
}

impl BucketScheme {
    fn ranges(self, n: usize) -> Vec<Bucket> {
        let nf = n as f64;
        let mut out = Vec::new();
        let mut push = |label: String, range: WeightRange| out.push(Bucket { label, range });
        match self {
            BucketScheme::KnownIdentity { eta } => {
                let top = known_identity_levels(n, eta);
                push("B0".into(), WeightRange::half_open(0.0, eta / nf));
                for j in 1..=top {
                    let mut r = WeightRange::half_open(
                        2f64.powi(j as i32 - 1) * eta / nf,
                        2f64.powi(j as i32) * eta / nf,
                    );
                    if j == top {
                        r.hi = r.hi.max(1.0);
                        r.hi_closed = true;
                    }
                    push(format!("B{j}"), r);
                }
            }
            BucketScheme::UniformSoundness { eps } => {
                let eps = round_down_to_power_of_half(eps);
                let levels = (4.0 / eps).log2().round() as i32;
                let step = |j: i32| 2f64.powi(j) * eps / 4.0;
                push(
                    "zero".into(),
                    WeightRange {
                        lo: 0.0,
                        hi: 0.0,
                        lo_closed: true,
                        hi_closed: true,
                    },
                );
                for j in (1..=levels).rev() {
                    push(
                        format!("L{j}"),
                        WeightRange {
                            lo: (1.0 - step(j)).max(0.0) / nf,
                            hi: (1.0 - step(j - 1)) / nf,
                            lo_closed: false,
                            hi_closed: true,
                        },
                    );
                }
                push(
                    "L0".into(),
                    WeightRange {
                        lo: (1.0 - step(0)) / nf,
                        hi: 1.0 / nf,
                        lo_closed: false,
                        hi_closed: false,
                    },
                );
                push(
                    "H0".into(),
                    WeightRange::half_open(1.0 / nf, (1.0 + step(0)) / nf),
                );
                for j in 1..=levels {
                    push(
                        format!("H{j}"),
                        WeightRange::half_open((1.0 + step(j - 1)) / nf, (1.0 + step(j)) / nf),
                    );
                }
                push(
                    "top".into(),
                    WeightRange {
                        lo: (1.0 + step(levels)) / nf,
                        hi: f64::INFINITY,
                        lo_closed: true,
                        hi_closed: true,
                    },
                );
            }
            BucketScheme::MediumWeight { kappa } => {
                let light = kappa / (2.0 * nf);
                let heavy = 1.0 / (kappa * nf);
                let count = ((2.0 / (kappa * kappa)).ln() / (1.0 + kappa).ln()).ceil() as i32;
                push("L".into(), WeightRange::half_open(0.0, light));
                for j in 1..=count {
                    let lo = (1.0 + kappa).powi(j - 1) * light;
                    let hi = ((1.0 + kappa).powi(j) * light).min(heavy);
                    if lo < hi {
                        push(format!("M{j}"), WeightRange::half_open(lo, hi));
                    }
                }
                push(
                    "H".into(),
                    WeightRange {
                        lo: heavy,
                        hi: f64::INFINITY,
                        lo_closed: true,
                        hi_closed: true,
                    },
                );
            }
        }
        out
    }
}

/// Number of non-trivial buckets `⌈log2(n/η) + 1⌉`; the full count `b` is one more.
pub fn known_identity_levels(n: usize, eta: f64) -> usize {
    ((n as f64 / eta).log2() + 1.0).ceil() as usize
}

/// Largest power of one half not exceeding `eps` (capped at 1).
pub fn round_down_to_power_of_half(eps: f64) -> f64 {
    let k = (1.0 / eps).log2().ceil().max(0.0);
    let rounded = 0.5f64.powi(k as i32);
    if rounded > eps {
        rounded / 2.0
    } else {
        rounded
    }
}

/// A partition of the domain into weight buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct BucketDecomposition {
    pub bucket_of: Vec<usize>,
    pub ranges: Vec<Bucket>,
}

impl BucketDecomposition {
    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn members(&self, bucket: usize) -> Vec<usize> {
        (0..self.bucket_of.len())
            .filter(|&i| self.bucket_of[i] == bucket)
            .collect()
    }

    /// Exact mass of every bucket under `d`.
    pub fn masses(&self, d: &Distribution) -> Vec<f64> {
        let mut m = vec![0.0; self.len()];
        for (i, &b) in self.bucket_of.iter().enumerate() {
            m[b] += d.weight(i);
        }
        m
    }
}
