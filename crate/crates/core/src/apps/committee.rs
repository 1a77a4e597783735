//! Committee election with diversity groups and a fixed committee size.
//!
//! Candidate `e` must sit on the committee with probability `ρ_e` where
//! `Σ ρ_e = k`, and each group `P` should be represented with probability
//! `π_P`. Any feasible decomposition is rounded to one whose sets all have
//! size `k`, at the price of scaling the group guarantees by `1 − ε` with
//! `ε = max_e ρ_e`. The rounding shrinks each set to one representative per
//! group it meets, mixes in the empty set, routes the missing marginal mass
//! through a transportation problem and fills each set up by systematic
//! sampling.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::engine::{decompose, verify_members, BruteForceAsc};
use crate::error::{Error, Result};
use crate::exactlp::{
    solve_with_limits, transport_feasible, LinearProgram, LpStatus, Relation, Transport,
};
use crate::limits::Limits;
use crate::model::{unit_draw, Decomposition, ExplicitSystem, Instance, Marginals};
use crate::rational::Rational;
use crate::subset::{GroundSet, Subset};

#[derive(Clone, Debug)]
pub struct CommitteeInstance {
    k: usize,
    rho: Marginals,
    groups: Vec<(Subset, Rational)>,
}

impl CommitteeInstance {
    /// Marginals proportional to votes: `ρ_e = k·n_e / Σ n`.
    pub fn from_votes(votes: &[u64], k: usize, groups: Vec<(Subset, Rational)>) -> Result<Self> {
        let total: u64 = votes.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput("no votes were cast".into()));
        }
        let rho = votes
            .iter()
            .map(|&v| Rational::new((v as i128 * k as i128).into(), (total as i128).into()))
            .collect();
        Self::from_marginals(Marginals::new(rho)?, k, groups)
    }

    pub fn from_marginals(
        rho: Marginals,
        k: usize,
        groups: Vec<(Subset, Rational)>,
    ) -> Result<Self> {
        let total: Rational = rho.values().iter().sum();
        if total != Rational::from_integer(k.into()) {
            return Err(Error::CardinalityMismatch { total, k });
        }
        if groups.len() > k {
            return Err(Error::TooManyGroups {
                groups: groups.len(),
                k,
            });
        }
        let full = Subset::full(rho.len());
        if let Some((p, _)) = groups
            .iter()
            .find(|(p, _)| p.is_empty() || !p.is_subset_of(full))
        {
            return Err(Error::InvalidInput(format!(
                "group {p:?} is empty or leaves the candidate set"
            )));
        }
        if groups.iter().any(|(_, pi)| *pi > Rational::one()) {
            return Err(Error::InvalidInput(
                "group requirements must be at most 1".into(),
            ));
        }
        Ok(CommitteeInstance { k, rho, groups })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn candidates(&self) -> usize {
        self.rho.len()
    }

    pub fn rho(&self) -> &Marginals {
        &self.rho
    }

    pub fn groups(&self) -> &[(Subset, Rational)] {
        &self.groups
    }

    /// `ε = max_e ρ_e`.
    pub fn epsilon(&self) -> Rational {
        self.rho
            .values()
            .iter()
            .cloned()
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// A feasible decomposition of `ρ` for the groups, without the size
    /// constraint. Tries the iterative engine first and falls back to an
    /// LP over all candidate subsets when no support candidate exists.
    pub fn decompose(&self, limits: &Limits) -> Result<Decomposition> {
        let n = self.candidates();
        let system = Arc::new(ExplicitSystem::from_pairs(n, self.groups.clone())?);
        let inst = Instance::new(GroundSet::numbered(n), system)?;
        match decompose(
            &inst,
            &self.rho,
            &BruteForceAsc::new(self.groups.clone(), limits),
        ) {
            Err(Error::OracleFailure(_)) => self.decompose_by_lp(limits),
            other => other,
        }
    }

    fn decompose_by_lp(&self, limits: &Limits) -> Result<Decomposition> {
        let n = self.candidates();
        if n > limits.subset_elements {
            return Err(Error::ScaleExceeded {
                what: format!("LP over all subsets of {n} candidates"),
                limit: limits.subset_elements,
            });
        }
        let sets: Vec<Subset> = Subset::all(n).collect();
        let indicator = |f: &dyn Fn(Subset) -> bool| -> Vec<Rational> {
            sets.iter()
                .map(|&s| {
                    if f(s) {
                        Rational::one()
                    } else {
                        Rational::zero()
                    }
                })
                .collect()
        };
        let mut lp = LinearProgram::new(sets.len());
        lp.add(indicator(&|_| true), Relation::Eq, Rational::one());
        for (e, r) in self.rho.values().iter().enumerate() {
            lp.add(indicator(&|s| s.contains(e)), Relation::Eq, r.clone());
        }
        for (p, pi) in &self.groups {
            lp.add(indicator(&|s| s.intersects(*p)), Relation::Ge, pi.clone());
        }
        let sol = solve_with_limits(&lp, limits)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::OracleFailure(
                "the marginals have no feasible decomposition for the groups".into(),
            ));
        }
        Ok(Decomposition::from_weights(sets.into_iter().zip(sol.point)))
    }
}

/// One set of the shrunk distribution with the fill-up lengths of the
/// candidates outside it.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplerRow {
    pub set: Subset,
    pub weight: Rational,
    /// `(e, x_{e,S}/ẑ_S)` for `e ∉ S`, in candidate order; the lengths sum
    /// to `k − |S|`.
    pub lengths: Vec<(usize, Rational)>,
}

/// Distribution over committees of size exactly `k`.
#[derive(Clone, Debug)]
pub struct FixedSizeSampler {
    k: usize,
    epsilon: Rational,
    z_hat: Decomposition,
    rows: Vec<SamplerRow>,
}

impl FixedSizeSampler {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    /// The shrunk distribution mixed with the empty set.
    pub fn z_hat(&self) -> &Decomposition {
        &self.z_hat
    }

    pub fn rows(&self) -> &[SamplerRow] {
        &self.rows
    }

    /// Draws a set from `ẑ` and a uniform offset `τ`, then fills up.
    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Subset {
        let u = unit_draw(rng);
        let tau = unit_draw(rng);
        let mut acc = Rational::zero();
        let row = self
            .rows
            .iter()
            .find(|r| {
                acc += &r.weight;
                u < acc
            })
            .unwrap_or_else(|| self.rows.last().expect("sampler has at least one row"));
        row.set.union(systematic_sample(&row.lengths, &tau))
    }

    pub fn sample(&self, seed: u64) -> Subset {
        self.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// The exact law of `sample`: for each row, `τ` is integrated over the
    /// cells between consecutive fractional parts of the breakpoints, on
    /// which the filled-up set is constant.
    pub fn exact_law(&self) -> Decomposition {
        let mut entries = Vec::new();
        for row in &self.rows {
            let mut cuts = vec![Rational::zero()];
            let mut alpha = Rational::zero();
            for (_, len) in &row.lengths {
                alpha += len;
                cuts.push(alpha.fract());
            }
            cuts.sort();
            cuts.dedup();
            cuts.push(Rational::one());
            for pair in cuts.windows(2) {
                let width = &pair[1] - &pair[0];
                let set = row.set.union(systematic_sample(&row.lengths, &pair[0]));
                entries.push((set, &row.weight * width));
            }
        }
        Decomposition::from_weights(entries)
    }
}

/// Systematic sampling: lay the lengths end to end from 0 as
/// `[α_{i−1}, α_i)` and take every element whose interval contains one of
/// `τ, τ+1, τ+2, …`. With lengths in `[0, 1]` summing to an integer `m`
/// and `τ ∈ [0, 1)` this picks exactly `m` elements.
pub fn systematic_sample(lengths: &[(usize, Rational)], tau: &Rational) -> Subset {
    let mut picked = Subset::EMPTY;
    let mut lo = Rational::zero();
    for (e, len) in lengths {
        let hi = &lo + len;
        // Smallest τ + h ≥ lo.
        let h = (&lo - tau).ceil().max(Rational::zero());
        if tau + h < hi {
            picked = picked.with(*e);
        }
        lo = hi;
    }
    picked
}

/// Rounds a feasible decomposition `z` of `ρ` for the groups to a
/// distribution over committees of size `k`.
pub fn committee_round(inst: &CommitteeInstance, z: &Decomposition) -> Result<FixedSizeSampler> {
    let n = inst.candidates();
    let report = verify_members(inst.groups(), inst.rho(), z);
    if !report.is_ok() {
        return Err(Error::InvalidInput(
            "the given distribution is not a feasible decomposition".into(),
        ));
    }
    let epsilon = inst.epsilon();
    let keep = Rational::one() - &epsilon;
    let mut shrunk = Vec::new();
    for (s, w) in z.iter() {
        let reps = inst
            .groups()
            .iter()
            .filter_map(|(p, _)| p.intersection(s).first())
            .fold(Subset::EMPTY, Subset::with);
        shrunk.push((reps, &keep * w));
    }
    shrunk.push((Subset::EMPTY, epsilon.clone()));
    let z_hat = Decomposition::from_weights(shrunk);

    let covered = z_hat.marginals(n);
    let demands: Vec<Rational> = inst
        .rho()
        .values()
        .iter()
        .zip(&covered)
        .map(|(r, c)| r - c)
        .collect();
    if let Some(e) = demands.iter().position(Signed::is_negative) {
        return Err(Error::InvariantViolated(format!(
            "shrunk marginal of candidate {e} exceeds its target"
        )));
    }
    let sets: Vec<(Subset, Rational)> = z_hat.iter().map(|(s, w)| (s, w.clone())).collect();
    let supplies: Vec<Rational> = sets
        .iter()
        .map(|(s, w)| Rational::from_integer((inst.k() - s.len()).into()) * w)
        .collect();
    let mut arcs = Vec::new();
    let mut caps = Vec::new();
    for (i, (s, w)) in sets.iter().enumerate() {
        for e in (0..n).filter(|&e| !s.contains(e)) {
            arcs.push((i, e));
            caps.push(w.clone());
        }
    }
    let flows = match transport_feasible(&supplies, &demands, &arcs, &caps)? {
        Transport::Feasible(flows) => flows,
        Transport::Infeasible { .. } => {
            return Err(Error::InvariantViolated(
                "fill-up transportation problem is infeasible".into(),
            ))
        }
    };
    let mut rows: Vec<SamplerRow> = sets
        .iter()
        .map(|(s, w)| SamplerRow {
            set: *s,
            weight: w.clone(),
            lengths: Vec::new(),
        })
        .collect();
    for (&(i, e), x) in arcs.iter().zip(flows) {
        let len = x / &rows[i].weight;
        rows[i].lengths.push((e, len));
    }
    Ok(FixedSizeSampler {
        k: inst.k(),
        epsilon,
        z_hat,
        rows,
    })
}
