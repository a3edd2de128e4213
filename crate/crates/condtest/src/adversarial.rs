//! Hard-instance generators: far-from-target distributions used as soundness fixtures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};

/// Which member of a pair of buckets or block halves carries the extra mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairProfile {
    /// First member heavy, second light.
    UpDown,
    /// First member light, second heavy.
    DownUp,
}

impl PairProfile {
    fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        if rng.random::<bool>() {
            PairProfile::UpDown
        } else {
            PairProfile::DownUp
        }
    }

    /// Multipliers applied to the first and second member.
    fn factors(self, up: f64, down: f64) -> (f64, f64) {
        match self {
            PairProfile::UpDown => (up, down),
            PairProfile::DownUp => (down, up),
        }
    }
}

const MAX_STAIRCASE_N: u128 = 1 << 20;

/// First half of the domain at `(1+2ε)/n`, second half at `(1−2ε)/n`.
///
/// ```
/// let d = condtest::adversarial::half_split(4, 0.25).unwrap();
/// assert_eq!(d.weights(), &[0.375, 0.375, 0.125, 0.125]);
/// ```
pub fn half_split(n: usize, eps: f64) -> Result<Distribution> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::OddN(n));
    }
    check_far(eps)?;
    let nf = n as f64;
    let (hi, lo) = ((1.0 + 2.0 * eps) / nf, (1.0 - 2.0 * eps) / nf);
    Distribution::new((0..n).map(|i| if i < n / 2 { hi } else { lo }).collect())
}

/// Domain size of a staircase: `k + k² + … + k^{2r}`.
pub fn staircase_size(k: u64, r: u64) -> Result<usize> {
    if k < 2 || r < 1 {
        return Err(Error::InvalidParameter(format!(
            "staircase needs K >= 2 and r >= 1, got K={k}, r={r}"
        )));
    }
    let mut total: u128 = 0;
    let mut size: u128 = 1;
    for _ in 0..2 * r {
        size = size.saturating_mul(k as u128);
        total = total.saturating_add(size);
        if total > MAX_STAIRCASE_N {
            return Err(Error::DomainTooLarge(total));
        }
    }
    Ok(total as usize)
}

/// Buckets `B_1..B_{2r}` laid out left to right, `|B_i| = k^i`, each of mass `1/(2r)`.
///
/// With a profile, bucket pair `(B_{2i−1}, B_{2i})` is reweighted to `3/(4r)` and `1/(4r)`
/// (or the reverse) per entry. The pairs keep total mass `1/r`.
pub fn staircase(k: u64, r: u64, profile: Option<&[PairProfile]>) -> Result<Distribution> {
    let n = staircase_size(k, r)?;
    if let Some(p) = profile {
        if p.len() as u64 != r {
            return Err(Error::InvalidParameter(format!(
                "profile has {} entries, expected {r}",
                p.len()
            )));
        }
    }
    let bucket_mass = 1.0 / (2 * r) as f64;
    let mut weights = Vec::with_capacity(n);
    let mut size = 1usize;
    for pair in 0..r as usize {
        let (first, second) = match profile {
            Some(p) => p[pair].factors(1.5, 0.5),
            None => (1.0, 1.0),
        };
        for factor in [first, second] {
            size *= k as usize;
            let w = factor * bucket_mass / size as f64;
            weights.extend(std::iter::repeat(w).take(size));
        }
    }
    Distribution::new(weights)
}

/// `2^x` blocks of `Δ = n/2^x` points; each block splits into halves at `(1±2ε)/n` per its
/// profile, and the whole layout is rotated right by `offset`.
pub fn block_profile(
    n: usize,
    x: u32,
    offset: usize,
    profiles: &[PairProfile],
    eps: f64,
) -> Result<Distribution> {
    check_far(eps)?;
    let blocks = 1usize
        .checked_shl(x)
        .filter(|&b| b <= n)
        .ok_or_else(|| Error::BadBlockGeometry(format!("2^{x} blocks do not fit in {n} points")))?;
    if n % blocks != 0 {
        return Err(Error::BadBlockGeometry(format!(
            "{blocks} blocks do not divide {n}"
        )));
    }
    let width = n / blocks;
    if width < 2 || width % 2 == 1 {
        return Err(Error::BadBlockGeometry(format!(
            "block width {width} must be even and at least 2"
        )));
    }
    if offset >= n {
        return Err(Error::BadBlockGeometry(format!(
            "offset {offset} outside 0..{n}"
        )));
    }
    if profiles.len() != blocks {
        return Err(Error::BadBlockGeometry(format!(
            "{} profiles for {blocks} blocks",
            profiles.len()
        )));
    }
    let nf = n as f64;
    let (up, down) = ((1.0 + 2.0 * eps) / nf, (1.0 - 2.0 * eps) / nf);
    let base: Vec<f64> = profiles
        .iter()
        .flat_map(|p| {
            let (first, second) = p.factors(up, down);
            std::iter::repeat(first)
                .take(width / 2)
                .chain(std::iter::repeat(second).take(width / 2))
        })
        .collect();
    Distribution::new((0..n).map(|i| base[(i + n - offset) % n]).collect())
}

pub fn random_staircase<R: Rng + ?Sized>(k: u64, r: u64, rng: &mut R) -> Result<Distribution> {
    let profile: Vec<PairProfile> = (0..r).map(|_| PairProfile::random(rng)).collect();
    staircase(k, r, Some(&profile))
}

/// Random block exponent, offset and profiles for a domain of size `n`.
pub fn random_block_profile<R: Rng + ?Sized>(
    n: usize,
    eps: f64,
    rng: &mut R,
) -> Result<Distribution> {
    let exponents: Vec<u32> = (0..usize::BITS)
        .filter(|&x| {
            let blocks = 1usize << x;
            blocks <= n && n % blocks == 0 && (n / blocks) % 2 == 0
        })
        .collect();
    if exponents.is_empty() {
        return Err(Error::BadBlockGeometry(format!(
            "no valid block width for {n} points"
        )));
    }
    let x = exponents[rng.random_range(0..exponents.len())];
    let profiles: Vec<PairProfile> = (0..1usize << x).map(|_| PairProfile::random(rng)).collect();
    block_profile(n, x, rng.random_range(0..n), &profiles, eps)
}

fn check_far(eps: f64) -> Result<()> {
    if (0.0..=0.5).contains(&eps) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "eps = {eps} must lie in [0, 1/2]"
        )))
    }
}
