//! Seeded, query-counting oracle access to an explicit distribution.
//!
//! Every operation consumes exactly one `u64` from the handle's ChaCha8 stream, either
//! directly as a uniform variate or to seed a per-operation child stream. Two handles with the
//! same seed that receive the same sequence of operations therefore produce the same answers,
//! whatever the domain size.
//!
//! Batched operations (`draw_split`, `draw_count`, `draw_histogram`) are distributionally
//! identical to issuing `m` single draws and tallying them: counts come from exact binomial
//! and multinomial sampling, and the ledger is charged `m` queries.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution as _};
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::query::QuerySet;

/// Largest sample the oracle will hand back as an explicit list.
pub const MAX_MATERIALIZED: u64 = 1 << 27;

/// Which conditioning sets the oracle accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Full domain only.
    Samp,
    /// Any set.
    Cond,
    /// Full domain or sets of at most two points.
    Pcond,
    /// Full domain or intervals.
    Icond,
}

/// Whether a conditioning set must contain a point the oracle has already returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discipline {
    #[default]
    Strict,
    Permissive,
}

/// Query tallies by kind. Full-domain queries count as `samp` whatever the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryLedger {
    pub samp: u64,
    pub cond: u64,
    pub pcond: u64,
    pub icond: u64,
    pub total: u64,
}

impl QueryLedger {
    pub fn merged(self, other: QueryLedger) -> QueryLedger {
        QueryLedger {
            samp: self.samp + other.samp,
            cond: self.cond + other.cond,
            pcond: self.pcond + other.pcond,
            icond: self.icond + other.icond,
            total: self.total + other.total,
        }
    }
}

/// A single-threaded oracle over one distribution. Use [`OracleHandle::fork`] for parallel work.
#[derive(Debug, Clone)]
pub struct OracleHandle {
    dist: Arc<Distribution>,
    model: Model,
    seed: u64,
    rng: ChaCha8Rng,
    ledger: QueryLedger,
    returned: BTreeSet<usize>,
    discipline: Discipline,
}

impl OracleHandle {
    pub fn new(dist: Arc<Distribution>, model: Model, seed: u64) -> Self {
        OracleHandle {
            dist,
            model,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ledger: QueryLedger::default(),
            returned: BTreeSet::new(),
            discipline: Discipline::Strict,
        }
    }

    pub fn with_discipline(mut self, discipline: Discipline) -> Self {
        self.discipline = discipline;
        self
    }

    /// Fresh handle over the same distribution, model and discipline.
    pub fn fork(&self, seed: u64) -> Self {
        OracleHandle::new(Arc::clone(&self.dist), self.model, seed).with_discipline(self.discipline)
    }

    pub fn dist(&self) -> &Distribution {
        &self.dist
    }

    pub fn shared_dist(&self) -> Arc<Distribution> {
        Arc::clone(&self.dist)
    }

    pub fn n(&self) -> usize {
        self.dist.n()
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn discipline(&self) -> Discipline {
        self.discipline
    }

    pub fn ledger(&self) -> QueryLedger {
        self.ledger
    }

    pub fn returned_points(&self) -> &BTreeSet<usize> {
        &self.returned
    }

    /// One conditional draw from `D_S`.
    pub fn draw(&mut self, s: &QuerySet) -> Result<usize> {
        self.admit(s)?;
        self.charge(s, 1)?;
        let u: f64 = self.rng.random();
        let i = self.dist.sample_in(s, u);
        self.returned.insert(i);
        Ok(i)
    }

    /// `m` independent draws from `D_S`, in draw order.
    pub fn draw_many(&mut self, s: &QuerySet, m: u64) -> Result<Vec<usize>> {
        if m > MAX_MATERIALIZED {
            return Err(Error::SampleTooLarge(m));
        }
        self.admit(s)?;
        self.charge(s, m)?;
        let mut rng = self.child_rng();
        let sampler = Sampler::new(&self.dist, s);
        let out: Vec<usize> = (0..m)
            .map(|_| sampler.sample(&self.dist, rng.random()))
            .collect();
        self.returned.extend(out.iter().copied());
        Ok(out)
    }

    /// Tally of `m` draws from `D_S` as `(point, count)` for points drawn at least once.
    pub fn draw_histogram(&mut self, s: &QuerySet, m: u64) -> Result<Vec<(usize, u64)>> {
        self.admit(s)?;
        self.charge(s, m)?;
        let mut rng = self.child_rng();
        let n = self.n();
        let hist = if (m as u128) < s.len(n) as u128 {
            let sampler = Sampler::new(&self.dist, s);
            let mut points: Vec<usize> = (0..m)
                .map(|_| sampler.sample(&self.dist, rng.random()))
                .collect();
            points.sort_unstable();
            let mut hist: Vec<(usize, u64)> = Vec::new();
            for p in points {
                match hist.last_mut() {
                    Some((q, c)) if *q == p => *c += 1,
                    _ => hist.push((p, 1)),
                }
            }
            hist
        } else {
            let cells: Vec<(usize, f64)> = s
                .iter(n)
                .map(|i| (i, self.dist.weight(i)))
                .filter(|c| c.1 > 0.0)
                .collect();
            multinomial(&cells, m, &mut rng)
        };
        self.returned.extend(hist.iter().map(|h| h.0));
        Ok(hist)
    }

    /// Issues `m` draws on `X ∪ Y` and returns how many landed in `Y`.
    pub fn draw_split(&mut self, x: &QuerySet, y: &QuerySet, m: u64) -> Result<u64> {
        let n = self.n();
        x.validate(n)?;
        y.validate(n)?;
        if !x.is_disjoint(y, n) {
            return Err(Error::SetsNotDisjoint);
        }
        let union = union_of(x, y, n);
        let total = self.admit(&union)?;
        self.charge(&union, m)?;
        let mut rng = self.child_rng();
        let (mx, my) = (self.dist.mass(x), self.dist.mass(y));
        let p = (my / (mx + my)).clamp(0.0, 1.0);
        debug_assert!(total > 0.0);
        let hits = binomial(m, p, &mut rng);
        if hits > 0 && my > 0.0 {
            self.returned.insert(self.dist.sample_in(y, rng.random()));
        }
        if hits < m && mx > 0.0 {
            self.returned.insert(self.dist.sample_in(x, rng.random()));
        }
        Ok(hits)
    }

    /// Issues `m` draws on `S` and returns how many landed in `target`.
    ///
    /// Only a representative of the target side is recorded as returned.
    pub fn draw_count(&mut self, s: &QuerySet, target: &QuerySet, m: u64) -> Result<u64> {
        let n = self.n();
        target.validate(n)?;
        let total = self.admit(s)?;
        self.charge(s, m)?;
        let mut rng = self.child_rng();
        let inside: Vec<usize> = if matches!(s, QuerySet::FullDomain) {
            target.to_vec(n)
        } else {
            target.iter(n).filter(|&i| s.contains(i)).collect()
        };
        let hit_mass: f64 = inside.iter().map(|&i| self.dist.weight(i)).sum();
        let hits = binomial(m, (hit_mass / total).clamp(0.0, 1.0), &mut rng);
        if hits > 0 && hit_mass > 0.0 {
            let rep = QuerySet::Explicit(inside);
            self.returned
                .insert(self.dist.sample_in(&rep, rng.random()));
        }
        Ok(hits)
    }

    /// Shape, discipline and mass checks; returns `D(S)`.
    fn admit(&self, s: &QuerySet) -> Result<f64> {
        let n = self.n();
        s.validate(n)?;
        let legal = match (self.model, s) {
            (_, QuerySet::FullDomain) => true,
            (Model::Samp, _) => false,
            (Model::Cond, _) => true,
            (Model::Pcond, _) => s.len(n) <= 2,
            (Model::Icond, _) => s.as_range(n).is_some(),
        };
        if !legal {
            return Err(Error::IllegalShapeForModel {
                model: self.model,
                shape: s.shape_name(),
            });
        }
        if self.discipline == Discipline::Strict && !self.touches_returned(s) {
            return Err(Error::DisciplineViolation);
        }
        let mass = self.dist.mass(s);
        if mass <= 0.0 {
            return Err(Error::ZeroMassSet);
        }
        Ok(mass)
    }

    fn touches_returned(&self, s: &QuerySet) -> bool {
        let n = self.n();
        match s {
            QuerySet::FullDomain => true,
            QuerySet::Interval(a, b) => self.returned.range(*a..=*b).next().is_some(),
            _ if s.len(n) <= self.returned.len() => s.iter(n).any(|i| self.returned.contains(&i)),
            _ => self.returned.iter().any(|&i| s.contains(i)),
        }
    }

    fn charge(&mut self, s: &QuerySet, m: u64) -> Result<()> {
        let slot = match (s, self.model) {
            (QuerySet::FullDomain, _) | (_, Model::Samp) => &mut self.ledger.samp,
            (_, Model::Cond) => &mut self.ledger.cond,
            (_, Model::Pcond) => &mut self.ledger.pcond,
            (_, Model::Icond) => &mut self.ledger.icond,
        };
        *slot = slot.checked_add(m).ok_or(Error::BudgetOverflow)?;
        self.ledger.total = self
            .ledger
            .total
            .checked_add(m)
            .ok_or(Error::BudgetOverflow)?;
        Ok(())
    }

    fn child_rng(&mut self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng.next_u64())
    }
}

/// Smallest legal shape for `X ∪ Y`: an interval when contiguous, a pair for two points,
/// otherwise an explicit list.
pub(crate) fn union_of(x: &QuerySet, y: &QuerySet, n: usize) -> QuerySet {
    if let (Some((a, b)), Some((c, d))) = (x.as_range(n), y.as_range(n)) {
        if b + 1 == c {
            return QuerySet::Interval(a, d);
        }
        if d + 1 == a {
            return QuerySet::Interval(c, b);
        }
    }
    if x.len(n) == 1 && y.len(n) == 1 {
        let (i, j) = (x.iter(n).next().unwrap(), y.iter(n).next().unwrap());
        return QuerySet::Pair(i.min(j), i.max(j));
    }
    let mut v: Vec<usize> = x.iter(n).chain(y.iter(n)).collect();
    v.sort_unstable();
    QuerySet::Explicit(v)
}

pub(crate) fn binomial(m: u64, p: f64, rng: &mut ChaCha8Rng) -> u64 {
    if m == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return m;
    }
    Binomial::new(m, p).expect("p lies in (0, 1)").sample(rng)
}

/// Multinomial counts via sequential conditional binomials.
fn multinomial(cells: &[(usize, f64)], m: u64, rng: &mut ChaCha8Rng) -> Vec<(usize, u64)> {
    let mut suffix = vec![0.0; cells.len() + 1];
    for k in (0..cells.len()).rev() {
        suffix[k] = suffix[k + 1] + cells[k].1;
    }
    let mut left = m;
    let mut out = Vec::new();
    for (k, &(i, w)) in cells.iter().enumerate() {
        if left == 0 {
            break;
        }
        let c = if k + 1 == cells.len() {
            left
        } else {
            binomial(left, w / suffix[k], rng)
        };
        if c > 0 {
            out.push((i, c));
            left -= c;
        }
    }
    out
}

/// Repeated conditional sampling from one set.
enum Sampler {
    Prefix(QuerySet),
    Table {
        points: Vec<usize>,
        cumulative: Vec<f64>,
    },
}

impl Sampler {
    fn new(d: &Distribution, s: &QuerySet) -> Self {
        match s {
            QuerySet::FullDomain => Sampler::Prefix(QuerySet::FullDomain),
            QuerySet::Interval(a, b) if b - a >= 64 => Sampler::Prefix(s.clone()),
            _ => {
                let mut points = Vec::new();
                let mut cumulative = Vec::new();
                let mut acc = 0.0;
                for i in s.iter(d.n()) {
                    let w = d.weight(i);
                    if w > 0.0 {
                        acc += w;
                        points.push(i);
                        cumulative.push(acc);
                    }
                }
                Sampler::Table { points, cumulative }
            }
        }
    }

    fn sample(&self, d: &Distribution, u: f64) -> usize {
        match self {
            Sampler::Prefix(s) => d.sample_in(s, u),
            Sampler::Table { points, cumulative } => {
                let target = u * cumulative[cumulative.len() - 1];
                let k = cumulative.partition_point(|&c| c <= target);
                points[k.min(points.len() - 1)]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn handle(weights: Vec<f64>, model: Model, seed: u64) -> OracleHandle {
        OracleHandle::new(Arc::new(Distribution::new(weights).unwrap()), model, seed)
            .with_discipline(Discipline::Permissive)
    }

    #[test]
    fn pair_on_uniform_returns_members() {
        let mut h = handle(vec![1.0; 10], Model::Pcond, 1);
        let mut seen = [0u32; 2];
        for _ in 0..2000 {
            match h.draw(&QuerySet::Pair(2, 6)).unwrap() {
                2 => seen[0] += 1,
                6 => seen[1] += 1,
                other => panic!("drew {other}"),
            }
        }
        assert!(seen.iter().all(|&c| (900..1100).contains(&c)), "{seen:?}");
    }

    #[test]
    fn zero_mass_set_fails() {
        let mut h = handle(vec![1.0, 0.0, 0.0], Model::Cond, 1);
        assert_eq!(
            h.draw(&QuerySet::Explicit(vec![1, 2])),
            Err(Error::ZeroMassSet)
        );
        assert_eq!(h.ledger().total, 0);
    }

    #[test]
    fn interval_frequency_within_three_sigma() {
        let mut h = handle(vec![0.1, 0.2, 0.3, 0.4], Model::Icond, 9);
        let m = 100_000;
        let hist = h.draw_histogram(&QuerySet::Interval(2, 3), m).unwrap();
        let fours = hist.iter().find(|c| c.0 == 3).unwrap().1 as f64;
        let p = 4.0 / 7.0;
        let sigma = (m as f64 * p * (1.0 - p)).sqrt();
        assert!((fours - m as f64 * p).abs() < 3.0 * sigma);
        let singles = h.draw_many(&QuerySet::Interval(2, 3), m).unwrap();
        let fours = singles.iter().filter(|&&i| i == 3).count() as f64;
        assert!((fours - m as f64 * p).abs() < 3.0 * sigma);
    }

    #[test]
    fn ledger_counts_by_kind() {
        let mut h = handle(vec![1.0; 8], Model::Samp, 3);
        assert_eq!(h.ledger(), QueryLedger::default());
        for _ in 0..5 {
            h.draw(&QuerySet::FullDomain).unwrap();
        }
        assert_eq!(h.ledger().samp, 5);
        assert_eq!(h.ledger().total, 5);
        assert!(matches!(
            h.draw(&QuerySet::Pair(0, 1)),
            Err(Error::IllegalShapeForModel { .. })
        ));

        let mut p = handle(vec![1.0; 8], Model::Pcond, 3);
        p.draw_split(&QuerySet::point(1), &QuerySet::point(5), 40)
            .unwrap();
        p.draw_many(&QuerySet::FullDomain, 7).unwrap();
        assert_eq!(
            p.ledger(),
            QueryLedger {
                samp: 7,
                cond: 0,
                pcond: 40,
                icond: 0,
                total: 47
            }
        );
    }

    #[test]
    fn shape_enforcement() {
        let mut p = handle(vec![1.0; 8], Model::Pcond, 3);
        assert!(p.draw(&QuerySet::Interval(0, 2)).is_err());
        assert!(p.draw(&QuerySet::Explicit(vec![0, 4, 5])).is_err());
        assert!(p.draw(&QuerySet::Interval(3, 4)).is_ok());
        let mut i = handle(vec![1.0; 8], Model::Icond, 3);
        assert!(i.draw(&QuerySet::Explicit(vec![0, 2])).is_err());
        assert!(i.draw(&QuerySet::Pair(0, 5)).is_err());
        assert!(i.draw(&QuerySet::Explicit(vec![3, 4, 5])).is_ok());
    }

    #[test]
    fn strict_discipline() {
        let d = Arc::new(Distribution::uniform(16).unwrap());
        let mut h = OracleHandle::new(d, Model::Cond, 5);
        assert_eq!(
            h.draw(&QuerySet::Pair(0, 1)),
            Err(Error::DisciplineViolation)
        );
        let x = h.draw(&QuerySet::FullDomain).unwrap();
        let other = (x + 1) % 16;
        assert!(h.draw(&QuerySet::pair(x, other).unwrap()).is_ok());
        assert!(h.draw(&QuerySet::Interval(x, x)).is_ok());
    }

    #[test]
    fn split_union_shapes() {
        assert_eq!(
            union_of(&QuerySet::point(3), &QuerySet::point(9), 10),
            QuerySet::Pair(3, 9)
        );
        assert_eq!(
            union_of(&QuerySet::Interval(4, 7), &QuerySet::Interval(0, 3), 10),
            QuerySet::Interval(0, 7)
        );
        assert_eq!(
            union_of(&QuerySet::point(1), &QuerySet::Interval(5, 6), 10),
            QuerySet::Explicit(vec![1, 5, 6])
        );
        let mut h = handle(vec![1.0; 10], Model::Cond, 1);
        assert_eq!(
            h.draw_split(&QuerySet::Interval(0, 4), &QuerySet::Interval(3, 6), 10),
            Err(Error::SetsNotDisjoint)
        );
    }

    #[test]
    fn fork_is_fresh_and_deterministic() {
        let mut h = handle(vec![1.0, 2.0, 3.0, 4.0], Model::Cond, 11);
        h.draw_many(&QuerySet::FullDomain, 10).unwrap();
        let mut a = h.fork(77);
        let mut b = h.fork(77);
        assert_eq!(a.ledger().total, 0);
        assert!(a.returned_points().is_empty());
        assert_eq!(a.dist(), h.dist());
        let xs: Vec<usize> = (0..50)
            .map(|_| a.draw(&QuerySet::FullDomain).unwrap())
            .collect();
        let ys: Vec<usize> = (0..50)
            .map(|_| b.draw(&QuerySet::FullDomain).unwrap())
            .collect();
        assert_eq!(xs, ys);
        assert_eq!(
            a.draw_split(&QuerySet::point(0), &QuerySet::Interval(1, 3), 1000)
                .unwrap(),
            b.draw_split(&QuerySet::point(0), &QuerySet::Interval(1, 3), 1000)
                .unwrap()
        );
    }

    #[test]
    fn forks_with_different_seeds_are_uncorrelated() {
        let h = handle(vec![1.0; 2], Model::Samp, 0);
        let mut a = h.fork(1);
        let mut b = h.fork(2);
        let m = 10_000;
        let xa = a.draw_many(&QuerySet::FullDomain, m).unwrap();
        let xb = b.draw_many(&QuerySet::FullDomain, m).unwrap();
        // Indicator correlation; under independence its sd is 1/sqrt(m).
        let mean = |v: &[usize]| v.iter().sum::<usize>() as f64 / m as f64;
        let (ma, mb) = (mean(&xa), mean(&xb));
        let cov: f64 = xa
            .iter()
            .zip(&xb)
            .map(|(&x, &y)| (x as f64 - ma) * (y as f64 - mb))
            .sum::<f64>()
            / m as f64;
        let corr = cov / (ma * (1.0 - ma) * mb * (1.0 - mb)).sqrt();
        assert!(corr.abs() < 3.0 / (m as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn histogram_paths_agree_in_total() {
        let mut h = handle((1..=50).map(|i| i as f64).collect(), Model::Cond, 4);
        let small = h.draw_histogram(&QuerySet::FullDomain, 20).unwrap();
        assert_eq!(small.iter().map(|c| c.1).sum::<u64>(), 20);
        let big = h
            .draw_histogram(&QuerySet::Explicit(vec![0, 10, 20, 49]), 1_000_000_000_000)
            .unwrap();
        assert_eq!(big.iter().map(|c| c.1).sum::<u64>(), 1_000_000_000_000);
        let share = big.iter().find(|c| c.0 == 49).unwrap().1 as f64 / 1e12;
        assert!((share - 50.0 / 83.0).abs() < 1e-4);
    }

    fn weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..1.0], 2..40)
            .prop_filter("positive total", |w| w.iter().sum::<f64>() > 1e-6)
    }

    proptest! {
        #[test]
        fn draws_stay_inside_positive_mass(w in weights(), a in 0usize..40, b in 0usize..40, seed: u64) {
            let n = w.len();
            let (a, b) = ((a % n).min(b % n), (a % n).max(b % n));
            let mut h = handle(w, Model::Cond, seed);
            let s = QuerySet::Interval(a, b);
            match h.draw_many(&s, 50) {
                Ok(points) => {
                    for p in points {
                        prop_assert!(s.contains(p));
                        prop_assert!(h.dist().weight(p) > 0.0);
                    }
                    prop_assert_eq!(h.ledger().cond, 50);
                }
                Err(e) => prop_assert_eq!(e, Error::ZeroMassSet),
            }
        }

        #[test]
        fn ledger_is_monotone_and_conserved(w in weights(), seed: u64, ops in prop::collection::vec(0u64..30, 1..10)) {
            let mut h = handle(w, Model::Cond, seed);
            let mut before = h.ledger();
            for m in ops {
                h.draw_histogram(&QuerySet::FullDomain, m).unwrap();
                let after = h.ledger();
                prop_assert_eq!(after.total, before.total + m);
                prop_assert_eq!(after.total, after.samp + after.cond + after.pcond + after.icond);
                before = after;
            }
        }

        #[test]
        fn same_seed_same_answers(w in weights(), seed: u64) {
            let mut a = handle(w.clone(), Model::Cond, seed);
            let mut b = handle(w, Model::Cond, seed);
            prop_assert_eq!(a.draw_many(&QuerySet::FullDomain, 30).unwrap(), b.draw_many(&QuerySet::FullDomain, 30).unwrap());
            prop_assert_eq!(a.draw_histogram(&QuerySet::FullDomain, 300).unwrap(), b.draw_histogram(&QuerySet::FullDomain, 300).unwrap());
        }
    }
}
