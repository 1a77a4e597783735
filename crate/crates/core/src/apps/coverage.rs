//! Robust randomized weighted coverage.
//!
//! Each element `e` covers `U_e ⊆ U`. Under scenario `ω` a chosen set `S`
//! earns `f^ω(S) = r^ω(∪_{e∈S} U_e) − c^ω(S)`, and the goal is a
//! distribution over sets maximizing the worst expected profit. The LP over
//! `(ρ, π, t)` with `π_u ≤ ρ(P_u)`, `P_u = {e : u ∈ U_e}`, is exact when the
//! coverage hypergraph is balanced, and a perfect decomposition of its
//! optimal `ρ` is an optimal distribution.

use num_traits::{One, Signed, Zero};

use crate::balanced::{find_odd_special_cycle, perfect_decompose, Hypergraph};
use crate::error::{Error, Result};
use crate::exactlp::{solve_with_limits, LinearProgram, LpStatus, Relation, Sense};
use crate::limits::Limits;
use crate::model::{Decomposition, Marginals};
use crate::rational::Rational;
use crate::subset::Subset;

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    /// Reward per universe item.
    pub rewards: Vec<Rational>,
    /// Cost per element.
    pub costs: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct CoverageInstance {
    universe: usize,
    covers: Vec<Subset>,
    scenarios: Vec<Scenario>,
}

impl CoverageInstance {
    /// `covers[e]` is `U_e` as a subset of the universe `0..universe`.
    pub fn new(universe: usize, covers: Vec<Subset>, scenarios: Vec<Scenario>) -> Result<Self> {
        if universe > 64 || covers.len() > 64 {
            return Err(Error::ScaleExceeded {
                what: "coverage instance".into(),
                limit: 64,
            });
        }
        if covers
            .iter()
            .any(|c| !c.is_subset_of(Subset::full(universe)))
        {
            return Err(Error::InvalidInput(
                "a covered set leaves the universe".into(),
            ));
        }
        if scenarios.is_empty() {
            return Err(Error::InvalidInput(
                "at least one scenario is required".into(),
            ));
        }
        for sc in &scenarios {
            if sc.rewards.len() != universe {
                return Err(Error::DimensionMismatch {
                    expected: universe,
                    found: sc.rewards.len(),
                });
            }
            if sc.costs.len() != covers.len() {
                return Err(Error::DimensionMismatch {
                    expected: covers.len(),
                    found: sc.costs.len(),
                });
            }
            if sc.rewards.iter().chain(&sc.costs).any(Signed::is_negative) {
                return Err(Error::InvalidInput(
                    "rewards and costs must be nonnegative".into(),
                ));
            }
        }
        Ok(CoverageInstance {
            universe,
            covers,
            scenarios,
        })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn elements(&self) -> usize {
        self.covers.len()
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    /// `P_u`: elements covering `u`.
    pub fn member_of(&self, u: usize) -> Subset {
        Subset::from_indices((0..self.covers.len()).filter(|&e| self.covers[e].contains(u)))
    }

    /// The hypergraph `(E, {P_u})` with empty and repeated members dropped.
    pub fn hypergraph(&self) -> Result<Hypergraph> {
        let mut members: Vec<Subset> = Vec::new();
        for u in 0..self.universe {
            let p = self.member_of(u);
            if !p.is_empty() && !members.contains(&p) {
                members.push(p);
            }
        }
        Hypergraph::new(self.covers.len(), members)
    }

    /// `f^ω(S)`.
    pub fn value(&self, scenario: usize, s: Subset) -> Rational {
        let sc = &self.scenarios[scenario];
        let covered = s
            .iter()
            .fold(Subset::EMPTY, |acc, e| acc.union(self.covers[e]));
        let reward: Rational = covered.iter().map(|u| sc.rewards[u].clone()).sum();
        let cost: Rational = s.iter().map(|e| sc.costs[e].clone()).sum();
        reward - cost
    }

    /// Expected profit of `z` under each scenario.
    pub fn expected_values(&self, z: &Decomposition) -> Vec<Rational> {
        (0..self.scenarios.len())
            .map(|w| z.iter().map(|(s, p)| self.value(w, s) * p).sum())
            .collect()
    }

    /// Worst expected profit of `z` over the scenarios.
    pub fn worst_case(&self, z: &Decomposition) -> Rational {
        self.expected_values(z)
            .into_iter()
            .min()
            .unwrap_or_else(Rational::zero)
    }
}

#[derive(Clone, Debug)]
pub struct CoverageOutcome {
    pub rho: Marginals,
    /// Coverage probability target per universe item.
    pub pi: Vec<Rational>,
    /// Optimal worst-case profit.
    pub t: Rational,
    pub decomposition: Decomposition,
}

/// Optimal robust distribution for a balanced coverage instance.
pub fn solve_robust_coverage(inst: &CoverageInstance, limits: &Limits) -> Result<CoverageOutcome> {
    let hypergraph = inst.hypergraph()?;
    if let Some(cycle) = find_odd_special_cycle(&hypergraph, limits)? {
        return Err(Error::NotBalanced {
            reason: format!("odd special cycle through elements {:?}", cycle.elements),
            certificate: None,
        });
    }
    let n = inst.elements();
    let m = inst.universe();
    // Variables: ρ_e at 0..n, π_u at n..n+m, t last.
    let t = n + m;
    let mut lp = LinearProgram::new(n + m + 1);
    let mut objective = vec![Rational::zero(); n + m + 1];
    objective[t] = Rational::one();
    lp.set_objective(Sense::Maximize, objective);
    for j in 0..n + m {
        lp.set_bounds(j, Some(Rational::zero()), Some(Rational::one()));
    }
    lp.set_bounds(t, None, None);
    for sc in inst.scenarios() {
        let mut terms = vec![(t, Rational::one())];
        terms.extend(
            sc.rewards
                .iter()
                .enumerate()
                .map(|(u, r)| (n + u, -r.clone())),
        );
        terms.extend(sc.costs.iter().enumerate().map(|(e, c)| (e, c.clone())));
        lp.add_sparse(&terms, Relation::Le, Rational::zero());
    }
    for u in 0..m {
        let mut terms = vec![(n + u, Rational::one())];
        terms.extend(inst.member_of(u).iter().map(|e| (e, -Rational::one())));
        lp.add_sparse(&terms, Relation::Le, Rational::zero());
    }
    let sol = solve_with_limits(&lp, limits)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::InvariantViolated(format!(
            "coverage LP ended with {:?}",
            sol.status
        )));
    }
    let rho = Marginals::new(sol.point[..n].to_vec())?;
    let pi = sol.point[n..n + m].to_vec();
    let z = perfect_decompose(&hypergraph, &rho, limits)?;
    if inst.worst_case(&z) < sol.value {
        return Err(Error::InvariantViolated(
            "decomposition falls short of the LP optimum".into(),
        ));
    }
    Ok(CoverageOutcome {
        rho,
        pi,
        t: sol.value,
        decomposition: z,
    })
}
