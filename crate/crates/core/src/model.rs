//! Domain types shared by the engine and the family-specific modules.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::subset::{GroundSet, Subset};

/// Target inclusion probability for every element, each in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Marginals(Vec<Rational>);

impl Marginals {
    pub fn new(values: Vec<Rational>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !rational::in_unit_interval(v))
        {
            return Err(Error::InvalidInput(format!(
                "marginal of element {i} is {}, outside [0, 1]",
                rational::format(v)
            )));
        }
        Ok(Marginals(values))
    }

    pub(crate) fn new_unchecked(values: Vec<Rational>) -> Self {
        debug_assert!(values.iter().all(rational::in_unit_interval));
        Marginals(values)
    }

    pub fn zeros(n: usize) -> Self {
        Marginals(vec![Rational::zero(); n])
    }

    pub fn ones(n: usize) -> Self {
        Marginals(vec![Rational::one(); n])
    }

    pub fn from_ratios(values: &[(i64, i64)]) -> Result<Self> {
        Marginals::new(values.iter().map(|&(p, q)| rational::ratio(p, q)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &Rational {
        &self.0[i]
    }

    pub fn values(&self) -> &[Rational] {
        &self.0
    }

    pub fn into_values(self) -> Vec<Rational> {
        self.0
    }

    pub fn sum_over(&self, set: Subset) -> Rational {
        sum_over(&self.0, set)
    }

    /// Elements with positive marginal.
    pub fn support(&self) -> Subset {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_positive())
            .map(|(i, _)| i)
            .collect()
    }
}

pub(crate) fn sum_over(values: &[Rational], set: Subset) -> Rational {
    set.iter().fold(Rational::zero(), |acc, i| acc + &values[i])
}

/// How requirement values are obtained for members.
#[derive(Clone)]
pub enum Requirements {
    /// Explicit value per member.
    Table(HashMap<Subset, Rational>),
    /// `π_P = 1 − Σ_{e∈P} μ_e`.
    Affine(Vec<Rational>),
    Callback(Arc<dyn Fn(Subset) -> Rational + Send + Sync>),
}

impl Requirements {
    pub fn table<I: IntoIterator<Item = (Subset, Rational)>>(entries: I) -> Self {
        Requirements::Table(entries.into_iter().collect())
    }

    pub fn affine(mu: Vec<Rational>) -> Result<Self> {
        if let Some(v) = mu.iter().find(|v| !rational::in_unit_interval(v)) {
            return Err(Error::InvalidInput(format!(
                "affine coefficient {} outside [0, 1]",
                rational::format(v)
            )));
        }
        Ok(Requirements::Affine(mu))
    }

    pub fn callback<F: Fn(Subset) -> Rational + Send + Sync + 'static>(f: F) -> Self {
        Requirements::Callback(Arc::new(f))
    }

    /// Requirement of `set`; `None` when a table has no entry for it.
    pub fn eval(&self, set: Subset) -> Option<Rational> {
        match self {
            Requirements::Table(t) => t.get(&set).cloned(),
            Requirements::Affine(mu) => Some(Rational::one() - sum_over(mu, set)),
            Requirements::Callback(f) => Some(f(set)),
        }
    }
}

impl fmt::Debug for Requirements {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Requirements::Table(t) => f.debug_tuple("Table").field(&t.len()).finish(),
            Requirements::Affine(mu) => f.debug_tuple("Affine").field(mu).finish(),
            Requirements::Callback(_) => f.write_str("Callback"),
        }
    }
}

/// Distribution over subsets of the ground set.
///
/// Zero-weight entries are dropped, so the support is exactly the key set.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Decomposition {
    weights: BTreeMap<Subset, Rational>,
}

impl Decomposition {
    /// Builds a distribution, merging duplicate sets. Weights must be
    /// nonnegative and sum to one.
    pub fn new<I: IntoIterator<Item = (Subset, Rational)>>(entries: I) -> Result<Self> {
        let d = Decomposition::from_weights(entries);
        if d.weights.values().any(|w| w.is_negative()) {
            return Err(Error::InvalidInput(
                "negative weight in decomposition".into(),
            ));
        }
        let total = d.total();
        if !total.is_one() {
            return Err(Error::InvalidInput(format!(
                "decomposition weights sum to {}",
                rational::format(&total)
            )));
        }
        Ok(d)
    }

    /// Builds a weight map without checking normalization.
    pub fn from_weights<I: IntoIterator<Item = (Subset, Rational)>>(entries: I) -> Self {
        let mut weights = BTreeMap::new();
        for (set, w) in entries {
            *weights.entry(set).or_insert_with(Rational::zero) += w;
        }
        weights.retain(|_, w: &mut Rational| !w.is_zero());
        Decomposition { weights }
    }

    pub fn point(set: Subset) -> Self {
        Decomposition::from_weights([(set, Rational::one())])
    }

    pub fn weight(&self, set: Subset) -> Rational {
        self.weights
            .get(&set)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Subset, &Rational)> {
        self.weights.iter().map(|(s, w)| (*s, w))
    }

    pub fn support(&self) -> impl Iterator<Item = Subset> + '_ {
        self.weights.keys().copied()
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn total(&self) -> Rational {
        self.weights.values().fold(Rational::zero(), |a, w| a + w)
    }

    pub fn marginals(&self, n: usize) -> Vec<Rational> {
        let mut m = vec![Rational::zero(); n];
        for (set, w) in &self.weights {
            for i in set.iter() {
                m[i] += w;
            }
        }
        m
    }

    pub fn hitting(&self, member: Subset) -> Rational {
        self.weights
            .iter()
            .filter(|(s, _)| s.intersects(member))
            .fold(Rational::zero(), |a, (_, w)| a + w)
    }

    pub fn expected_cost(&self, costs: &[Rational]) -> Rational {
        self.weights
            .iter()
            .fold(Rational::zero(), |a, (s, w)| a + sum_over(costs, *s) * w)
    }

    pub(crate) fn add(&mut self, set: Subset, w: &Rational) {
        if w.is_zero() {
            return;
        }
        let entry = self.weights.entry(set).or_insert_with(Rational::zero);
        *entry += w;
        if entry.is_zero() {
            self.weights.remove(&set);
        }
    }

    /// Convex combination `Σ λ_i z_i`.
    pub fn mix<'a, I: IntoIterator<Item = (&'a Rational, &'a Decomposition)>>(parts: I) -> Self {
        let mut out = Decomposition::default();
        for (lambda, z) in parts {
            for (set, w) in z.iter() {
                out.add(set, &(lambda * w));
            }
        }
        out
    }

    /// Draws one support set with probability equal to its weight.
    pub fn sample(&self, seed: u64) -> Subset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng)
    }

    /// Draws one set using `rng`. The uniform variate is the exact rational
    /// `u / 2^64` for a random `u64`.
    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Subset {
        let u = unit_draw(rng);
        let total = self.total();
        let threshold = u * &total;
        let mut acc = Rational::zero();
        let mut last = Subset::EMPTY;
        for (set, w) in &self.weights {
            acc += w;
            last = *set;
            if threshold < acc {
                return *set;
            }
        }
        last
    }
}

/// Uniform rational in `[0, 1)` with denominator `2^64`.
pub fn unit_draw<R: Rng>(rng: &mut R) -> Rational {
    Rational::new(BigInt::from(rng.gen::<u64>()), BigInt::from(1u128 << 64))
}

/// Engine state between iterations: residual marginals and the amount by
/// which all requirements have been lowered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResidualState {
    pub rho_bar: Marginals,
    pub offset: Rational,
    pub iteration: usize,
}

impl ResidualState {
    pub fn initial(rho: &Marginals) -> Self {
        ResidualState {
            rho_bar: rho.clone(),
            offset: Rational::zero(),
            iteration: 0,
        }
    }

    /// Residual requirement `π_P − λ`.
    pub fn residual(&self, pi: &Rational) -> Rational {
        pi - &self.offset
    }

    /// Residual slack `ρ̄(P) − π̄_P` of a member.
    pub fn slack(&self, set: Subset, pi: &Rational) -> Rational {
        self.rho_bar.sum_over(set) - self.residual(pi)
    }

    pub fn is_tight(&self, set: Subset, pi: &Rational) -> bool {
        self.slack(set, pi).is_zero()
    }
}

/// A set family together with its requirements.
pub trait SetSystem: Send + Sync {
    fn ground_size(&self) -> usize;

    /// Member maximizing `π_P − w(P)` for nonnegative weights `w`, with that
    /// value; `None` for an empty family.
    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>>;

    /// All members with their requirements.
    fn members(&self) -> Result<Vec<(Subset, Rational)>>;

    /// Whether `members` is cheap enough to call inside the engine loop.
    fn is_explicit(&self) -> bool {
        false
    }
}

/// Source of admissible support candidates for residual states.
pub trait AscOracle {
    fn next_asc(&self, state: &ResidualState) -> Result<Subset>;
}

/// Family given as a plain list.
#[derive(Clone, Debug)]
pub struct ExplicitSystem {
    n: usize,
    members: Vec<(Subset, Rational)>,
}

impl ExplicitSystem {
    /// Builds the family, dropping duplicate members (keeping the largest
    /// requirement). Every member needs a requirement of at most 1.
    pub fn new(n: usize, members: Vec<Subset>, req: &Requirements) -> Result<Self> {
        let full = Subset::full(n);
        let mut best: BTreeMap<Subset, Rational> = BTreeMap::new();
        for p in members {
            if !p.is_subset_of(full) {
                return Err(Error::InvalidInput(format!(
                    "member {p:?} leaves the ground set"
                )));
            }
            let pi = req
                .eval(p)
                .ok_or_else(|| Error::InvalidInput(format!("no requirement for member {p:?}")))?;
            if pi > Rational::one() {
                return Err(Error::InvalidInput(format!(
                    "requirement {} of member {p:?} exceeds 1",
                    rational::format(&pi)
                )));
            }
            match best.get_mut(&p) {
                Some(v) if *v >= pi => {}
                Some(v) => *v = pi,
                None => {
                    best.insert(p, pi);
                }
            }
        }
        Ok(ExplicitSystem {
            n,
            members: best.into_iter().collect(),
        })
    }

    pub fn from_pairs(n: usize, pairs: Vec<(Subset, Rational)>) -> Result<Self> {
        let sets = pairs.iter().map(|(s, _)| *s).collect();
        let mut table: HashMap<Subset, Rational> = HashMap::new();
        for (s, v) in pairs {
            match table.get(&s) {
                Some(old) if *old >= v => {}
                _ => {
                    table.insert(s, v);
                }
            }
        }
        ExplicitSystem::new(n, sets, &Requirements::Table(table))
    }

    pub fn sets(&self) -> impl Iterator<Item = Subset> + '_ {
        self.members.iter().map(|(s, _)| *s)
    }

    pub fn entries(&self) -> &[(Subset, Rational)] {
        &self.members
    }
}

impl SetSystem for ExplicitSystem {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>> {
        Ok(max_violated_by_enumeration(&self.members, weights))
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        Ok(self.members.clone())
    }

    fn is_explicit(&self) -> bool {
        true
    }
}

/// First member (in list order) attaining `max π_P − w(P)`.
pub fn max_violated_by_enumeration(
    members: &[(Subset, Rational)],
    weights: &[Rational],
) -> Option<(Subset, Rational)> {
    let mut best: Option<(Subset, Rational)> = None;
    for (p, pi) in members {
        let v = pi - sum_over(weights, *p);
        if best.as_ref().is_none_or(|(_, b)| v > *b) {
            best = Some((*p, v));
        }
    }
    best
}

/// Ground set plus set system.
#[derive(Clone)]
pub struct Instance {
    pub ground: GroundSet,
    pub system: Arc<dyn SetSystem>,
}

impl Instance {
    pub fn new(ground: GroundSet, system: Arc<dyn SetSystem>) -> Result<Self> {
        if ground.len() != system.ground_size() {
            return Err(Error::DimensionMismatch {
                expected: ground.len(),
                found: system.ground_size(),
            });
        }
        Ok(Instance { ground, system })
    }

    pub fn explicit(ground: GroundSet, members: Vec<Subset>, req: &Requirements) -> Result<Self> {
        let sys = ExplicitSystem::new(ground.len(), members, req)?;
        Instance::new(ground, Arc::new(sys))
    }

    pub fn n(&self) -> usize {
        self.ground.len()
    }

    pub(crate) fn check_marginals(&self, rho: &Marginals) -> Result<()> {
        if rho.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: rho.len(),
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("ground", &self.ground.elements())
            .finish_non_exhaustive()
    }
}

/// Outcome of testing the covering condition `Σ_{e∈P} ρ_e ≥ π_P`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StarCheck {
    Feasible,
    Violated { member: Subset, gap: Rational },
}

impl StarCheck {
    pub fn is_feasible(&self) -> bool {
        matches!(self, StarCheck::Feasible)
    }

    pub(crate) fn from_max(best: Option<(Subset, Rational)>) -> Self {
        match best {
            Some((member, gap)) if gap.is_positive() => StarCheck::Violated { member, gap },
            _ => StarCheck::Feasible,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn marginals_reject_out_of_range() {
        assert!(Marginals::new(vec![ratio(3, 2)]).is_err());
        assert!(Marginals::new(vec![ratio(-1, 2)]).is_err());
        let m = Marginals::from_ratios(&[(1, 2), (0, 1)]).unwrap();
        assert_eq!(m.support(), Subset::singleton(0));
    }

    #[test]
    fn decomposition_merges_and_normalizes() {
        let a = Subset::singleton(0);
        assert!(Decomposition::new([(a, ratio(9, 10))]).is_err());
        let z = Decomposition::new([
            (a, ratio(1, 4)),
            (a, ratio(1, 4)),
            (Subset::EMPTY, ratio(1, 2)),
        ])
        .unwrap();
        assert_eq!(z.support_size(), 2);
        assert_eq!(z.weight(a), ratio(1, 2));
        assert_eq!(z.marginals(1), vec![ratio(1, 2)]);
        assert_eq!(z.hitting(a), ratio(1, 2));
    }

    #[test]
    fn sampling_trivial_distributions() {
        let a = Subset::singleton(0);
        for seed in 0..20 {
            assert_eq!(
                Decomposition::point(Subset::EMPTY).sample(seed),
                Subset::EMPTY
            );
            assert_eq!(Decomposition::point(a).sample(seed), a);
        }
    }

    #[test]
    fn sampling_frequency() {
        let (a, b) = (Subset::singleton(0), Subset::singleton(1));
        let z = Decomposition::new([(a, ratio(1, 2)), (b, ratio(1, 2))]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 100_000;
        let hits = (0..draws).filter(|_| z.sample_with(&mut rng) == a).count();
        let freq = hits as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.01, "{freq}");
    }

    #[test]
    fn explicit_system_dedups_keeping_max() {
        let a = Subset::singleton(0);
        let sys = ExplicitSystem::from_pairs(1, vec![(a, ratio(1, 3)), (a, ratio(1, 2))]).unwrap();
        assert_eq!(sys.entries(), &[(a, ratio(1, 2))]);
        assert!(ExplicitSystem::from_pairs(1, vec![(a, int(2))]).is_err());
    }

    #[test]
    fn affine_requirements() {
        let req = Requirements::affine(vec![ratio(1, 10), ratio(2, 10)]).unwrap();
        assert_eq!(req.eval(Subset::full(2)), ratio(7, 10).into());
        assert!(Requirements::affine(vec![int(-1)]).is_err());
    }
}
