//! Families consisting of all subsets with a supermodular requirement
//! function.
//!
//! Tight sets of a feasible residual state are closed under union and
//! intersection, so their union `Q` is tight itself. The support candidate
//! takes every positive element outside `Q` plus one positive element of `Q`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::model::{AscOracle, Marginals, ResidualState, SetSystem, StarCheck};
use crate::rational::{self, Rational};
use crate::subset::Subset;

type ValueFn = Arc<dyn Fn(Subset) -> Rational + Send + Sync>;

enum Values {
    /// Indexed by the subset bitmask.
    Table(Vec<Rational>),
    Callback {
        f: ValueFn,
        cache: RwLock<HashMap<Subset, Rational>>,
    },
}

/// Value oracle for a supermodular requirement function on all subsets.
pub struct SupermodularOracle {
    n: usize,
    values: Values,
    limits: Limits,
}

impl SupermodularOracle {
    /// Requirement table over all subsets; the empty set defaults to 0 and
    /// every other subset must be present. Values must be at most 1 and the
    /// empty set must not have a positive requirement.
    pub fn from_table(n: usize, table: &HashMap<Subset, Rational>, limits: Limits) -> Result<Self> {
        check_enumerable(n, &limits)?;
        let mut values = Vec::with_capacity(1 << n);
        for p in Subset::all(n) {
            let v = match table.get(&p) {
                Some(v) => v.clone(),
                None if p.is_empty() => Rational::zero(),
                None => {
                    return Err(Error::InvalidInput(format!(
                        "no requirement for subset {p:?}"
                    )))
                }
            };
            values.push(v);
        }
        if let Some(extra) = table.keys().find(|p| !p.is_subset_of(Subset::full(n))) {
            return Err(Error::InvalidInput(format!(
                "subset {extra:?} leaves the ground set"
            )));
        }
        let oracle = SupermodularOracle {
            n,
            values: Values::Table(values),
            limits,
        };
        oracle.validate_bounds()?;
        Ok(oracle)
    }

    /// Requirement function given as a callback. Values are cached.
    pub fn from_fn<F>(n: usize, f: F, limits: Limits) -> Result<Self>
    where
        F: Fn(Subset) -> Rational + Send + Sync + 'static,
    {
        let oracle = SupermodularOracle {
            n,
            values: Values::Callback {
                f: Arc::new(f),
                cache: RwLock::new(HashMap::new()),
            },
            limits,
        };
        if oracle.value(Subset::EMPTY) > Rational::zero() {
            return Err(Error::InvalidInput(
                "the empty set has a positive requirement".into(),
            ));
        }
        Ok(oracle)
    }

    fn validate_bounds(&self) -> Result<()> {
        if self.value(Subset::EMPTY) > Rational::zero() {
            return Err(Error::InvalidInput(
                "the empty set has a positive requirement".into(),
            ));
        }
        for p in Subset::all(self.n) {
            let v = self.value(p);
            if v > Rational::one() {
                return Err(Error::InvalidInput(format!(
                    "requirement {} of {p:?} exceeds 1",
                    rational::format(&v)
                )));
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self, p: Subset) -> Rational {
        match &self.values {
            Values::Table(t) => t[p.bits() as usize].clone(),
            Values::Callback { f, cache } => {
                if let Some(v) = cache.read().expect("cache lock").get(&p) {
                    return v.clone();
                }
                let v = f(p);
                cache.write().expect("cache lock").insert(p, v.clone());
                v
            }
        }
    }

    fn all_values(&self, cap: usize) -> Result<Vec<Rational>> {
        check_enumerable(
            self.n,
            &Limits {
                subset_elements: cap,
                ..self.limits.clone()
            },
        )?;
        Ok(match &self.values {
            Values::Table(t) => t.clone(),
            Values::Callback { .. } => Subset::all(self.n).map(|p| self.value(p)).collect(),
        })
    }

    /// Every tight set of the residual state, by enumeration.
    pub fn tight_sets(&self, state: &ResidualState) -> Result<Vec<Subset>> {
        let values = self.all_values(self.limits.subset_elements)?;
        let sums = subset_sums(self.n, state.rho_bar.values());
        Ok(Subset::all(self.n)
            .filter(|p| {
                let i = p.bits() as usize;
                sums[i] == &values[i] - &state.offset
            })
            .collect())
    }

    /// Union of all tight sets, empty when there are none. Fails if that
    /// union is not tight, which happens only if the requirements are not
    /// supermodular or the residual marginals violate the covering condition.
    pub fn tight_union(&self, state: &ResidualState) -> Result<Subset> {
        self.tight_union_capped(state, self.limits.subset_elements)
    }

    fn tight_union_capped(&self, state: &ResidualState, cap: usize) -> Result<Subset> {
        let values = self.all_values(cap)?;
        let sums = subset_sums(self.n, state.rho_bar.values());
        let mut q = Subset::EMPTY;
        let mut any = false;
        for p in Subset::all(self.n) {
            let i = p.bits() as usize;
            if sums[i] == &values[i] - &state.offset {
                q = q.union(p);
                any = true;
            }
        }
        let i = q.bits() as usize;
        if any && sums[i] != &values[i] - &state.offset {
            return Err(Error::InvariantViolated(format!(
                "union {q:?} of tight sets is not tight; requirements are not supermodular"
            )));
        }
        Ok(q)
    }

    /// Most violated covering inequality over all subsets.
    pub fn max_violated_check(&self, rho: &Marginals) -> Result<StarCheck> {
        Ok(StarCheck::from_max(
            self.maximize(rho.values(), self.limits.subset_elements)?,
        ))
    }

    fn maximize(&self, weights: &[Rational], cap: usize) -> Result<Option<(Subset, Rational)>> {
        let values = self.all_values(cap)?;
        let sums = subset_sums(self.n, weights);
        let mut best: Option<(Subset, Rational)> = None;
        for p in Subset::all(self.n) {
            let i = p.bits() as usize;
            let v = &values[i] - &sums[i];
            let better = match &best {
                None => true,
                Some((q, b)) => v > *b || (v == *b && p < *q),
            };
            if better {
                best = Some((p, v));
            }
        }
        Ok(best)
    }

    /// Looks for a pair violating supermodularity among `samples` random pairs.
    pub fn find_supermodularity_violation<R: Rng>(
        &self,
        rng: &mut R,
        samples: usize,
    ) -> Option<(Subset, Subset)> {
        let full = Subset::full(self.n).bits();
        (0..samples).find_map(|_| {
            let p = Subset::from_bits(rng.gen::<u64>() & full);
            let q = Subset::from_bits(rng.gen::<u64>() & full);
            let lhs = self.value(p.intersection(q)) + self.value(p.union(q));
            (lhs < self.value(p) + self.value(q)).then_some((p, q))
        })
    }

    /// Pairs sampled by the debug check: `min(500, 4^n)`.
    pub fn default_samples(&self) -> usize {
        if self.n >= 5 {
            500
        } else {
            (1usize << (2 * self.n)).min(500)
        }
    }
}

fn check_enumerable(n: usize, limits: &Limits) -> Result<()> {
    if n > limits.subset_elements {
        return Err(Error::ScaleExceeded {
            what: format!("enumeration of all subsets of {n} elements"),
            limit: limits.subset_elements,
        });
    }
    Ok(())
}

/// `w(P)` for every subset `P`, indexed by bitmask.
pub(crate) fn subset_sums(n: usize, weights: &[Rational]) -> Vec<Rational> {
    let mut sums = vec![Rational::zero(); 1 << n];
    for bits in 1..(1usize << n) {
        let low = bits.trailing_zeros() as usize;
        sums[bits] = &sums[bits & (bits - 1)] + &weights[low];
    }
    sums
}

impl SetSystem for SupermodularOracle {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>> {
        self.maximize(weights, self.limits.subset_elements)
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        let values = self.all_values(self.limits.subset_elements)?;
        Ok(Subset::all(self.n).zip(values).collect())
    }

    fn is_explicit(&self) -> bool {
        self.n <= self.limits.engine_subset_elements
    }
}

impl AscOracle for SupermodularOracle {
    fn next_asc(&self, state: &ResidualState) -> Result<Subset> {
        let q = self.tight_union_capped(state, self.limits.engine_subset_elements)?;
        Ok(asc_from_tight_union(q, state.rho_bar.support()))
    }
}

/// `E_ρ∖Q`, plus the first element of `Q ∩ E_ρ` when there is one.
pub fn asc_from_tight_union(q: Subset, support: Subset) -> Subset {
    let outside = support.difference(q);
    match support.intersection(q).first() {
        Some(e) => outside.with(e),
        None => outside,
    }
}
