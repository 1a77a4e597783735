//! Balanced hypergraphs: odd special cycles and perfect decompositions.
//!
//! A decomposition is perfect when every member `P` is hit with probability
//! `min{ρ(P), 1}`. Each member gets a private fresh element whose marginal is
//! the missing mass `1 − min{ρ(P), 1}`; the augmented marginals then lie in
//! the covering polytope, which is integral for balanced hypergraphs, and a
//! convex combination of transversals projects back to the original ground
//! set.

use num_traits::{One, Zero};

use crate::engine::lift_marginals;
use crate::error::{Error, Result};
use crate::exactlp::{solve_with_limits, LinearProgram, LpStatus, Relation};
use crate::limits::Limits;
use crate::model::{Decomposition, Marginals, Requirements};
use crate::rational::{self, Rational};
use crate::subset::Subset;

/// Explicit family of nonempty subsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hypergraph {
    n: usize,
    members: Vec<Subset>,
}

/// `P_i ∩ C = {e_i, e_{i+1}}` for `C = {e_1..e_k}`, indices mod `k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecialCycle {
    pub elements: Vec<usize>,
    /// Member indices.
    pub members: Vec<usize>,
}

impl Hypergraph {
    pub fn new(n: usize, members: Vec<Subset>) -> Result<Self> {
        if n > 64 {
            return Err(Error::ScaleExceeded {
                what: format!("{n} elements"),
                limit: 64,
            });
        }
        if let Some(p) = members
            .iter()
            .find(|p| p.is_empty() || !p.is_subset_of(Subset::full(n)))
        {
            return Err(Error::InvalidInput(format!(
                "member {p:?} is empty or leaves the ground set"
            )));
        }
        Ok(Hypergraph { n, members })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[Subset] {
        &self.members
    }

    /// Checks the defining property of a special cycle of this hypergraph.
    pub fn is_special_cycle(&self, cycle: &SpecialCycle) -> bool {
        let k = cycle.elements.len();
        if k < 2 || cycle.members.len() != k {
            return false;
        }
        let c: Subset = cycle.elements.iter().copied().collect();
        let mut distinct = cycle.members.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if c.len() != k
            || distinct.len() != k
            || cycle.members.iter().any(|&i| i >= self.members.len())
        {
            return false;
        }
        (0..k).all(|i| {
            let want = Subset::singleton(cycle.elements[i]).with(cycle.elements[(i + 1) % k]);
            self.members[cycle.members[i]].intersection(c) == want
        })
    }
}

struct CycleSearch<'a> {
    h: &'a Hypergraph,
    budget: usize,
    elements: Vec<usize>,
    members: Vec<usize>,
}

impl CycleSearch<'_> {
    fn tick(&mut self, limit: usize) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::ScaleExceeded {
                what: "special cycle search".into(),
                limit,
            });
        }
        self.budget -= 1;
        Ok(())
    }

    /// Extends `e_1 P_1 … e_i` by a member `P_i ∋ e_i`, either closing the
    /// cycle or continuing with a new element `e_{i+1} ∈ P_i`.
    fn extend(&mut self, limit: usize) -> Result<bool> {
        self.tick(limit)?;
        let i = self.elements.len();
        let first = self.elements[0];
        let current = self.elements[i - 1];
        let earlier: Subset = self.elements[..i - 1].iter().copied().collect();
        let used_members: Vec<usize> = self.members.clone();
        for (m, &p) in self.h.members.iter().enumerate() {
            if used_members.contains(&m) || !p.contains(current) {
                continue;
            }
            // Closing: P_k meets the cycle in exactly {e_k, e_1}.
            if i >= 3
                && i % 2 == 1
                && p.contains(first)
                && p.intersection(earlier) == Subset::singleton(first)
            {
                self.members.push(m);
                return Ok(true);
            }
            if p.intersects(earlier) {
                continue;
            }
            for next in p.iter() {
                if next <= first
                    || next == current
                    || self
                        .members
                        .iter()
                        .any(|&q| self.h.members[q].contains(next))
                {
                    continue;
                }
                self.members.push(m);
                self.elements.push(next);
                if self.extend(limit)? {
                    return Ok(true);
                }
                self.elements.pop();
                self.members.pop();
            }
        }
        Ok(false)
    }
}

/// An odd special cycle if one exists. The search starts each cycle at its
/// smallest element and gives up after `limits.cycle_search` steps.
pub fn find_odd_special_cycle(h: &Hypergraph, limits: &Limits) -> Result<Option<SpecialCycle>> {
    let mut search = CycleSearch {
        h,
        budget: limits.cycle_search,
        elements: Vec::new(),
        members: Vec::new(),
    };
    for first in 0..h.n {
        search.elements = vec![first];
        search.members.clear();
        if search.extend(limits.cycle_search)? {
            let cycle = SpecialCycle {
                elements: search.elements.clone(),
                members: search.members.clone(),
            };
            debug_assert!(h.is_special_cycle(&cycle));
            return Ok(Some(cycle));
        }
    }
    Ok(None)
}

/// `π^ρ_P = min{ρ(P), 1}` for every member.
pub fn pi_rho(h: &Hypergraph, rho: &Marginals) -> Requirements {
    Requirements::table(
        h.members
            .iter()
            .map(|&p| (p, rational::min(rho.sum_over(p), Rational::one()))),
    )
}

/// Minimal transversals of `members`, by branching on the first unhit member
/// and forbidding earlier choices.
pub fn minimal_transversals(members: &[Subset], limits: &Limits) -> Result<Vec<Subset>> {
    let mut out = Vec::new();
    branch(
        members,
        Subset::EMPTY,
        Subset::EMPTY,
        limits.transversals,
        &mut out,
    )?;
    Ok(out)
}

fn branch(
    members: &[Subset],
    chosen: Subset,
    forbidden: Subset,
    cap: usize,
    out: &mut Vec<Subset>,
) -> Result<()> {
    let Some(&unhit) = members.iter().find(|p| !p.intersects(chosen)) else {
        if out.len() == cap {
            return Err(Error::ScaleExceeded {
                what: "minimal transversal enumeration".into(),
                limit: cap,
            });
        }
        out.push(chosen);
        return Ok(());
    };
    let mut forbidden = forbidden;
    for e in unhit.difference(forbidden).iter() {
        let next = chosen.with(e);
        if has_private_members(members, next) {
            branch(members, next, forbidden, cap, out)?;
        }
        forbidden = forbidden.with(e);
    }
    Ok(())
}

/// Every chosen element is the only chosen element of some member.
fn has_private_members(members: &[Subset], chosen: Subset) -> bool {
    chosen.iter().all(|e| {
        members
            .iter()
            .any(|p| p.intersection(chosen) == Subset::singleton(e))
    })
}

/// Decomposition of `rho` hitting every member with probability at least
/// `min{ρ(P), 1}`. Fails with `NotBalanced` when no such
/// decomposition exists, which happens for some `rho` exactly when the
/// hypergraph has an odd special cycle.
pub fn perfect_decompose(
    h: &Hypergraph,
    rho: &Marginals,
    limits: &Limits,
) -> Result<Decomposition> {
    if rho.len() != h.n {
        return Err(Error::DimensionMismatch {
            expected: h.n,
            found: rho.len(),
        });
    }
    let n = h.n;
    let m = h.members.len();
    if n + m > 64 {
        return Err(Error::ScaleExceeded {
            what: format!("{} elements after augmentation", n + m),
            limit: 64,
        });
    }
    let augmented: Vec<Subset> = h
        .members
        .iter()
        .enumerate()
        .map(|(i, p)| p.with(n + i))
        .collect();
    let mut target: Vec<Rational> = rho.values().to_vec();
    for p in &h.members {
        target.push(Rational::one() - rational::min(rho.sum_over(*p), Rational::one()));
    }
    let transversals = minimal_transversals(&augmented, limits)?;

    let mut lp = LinearProgram::new(transversals.len());
    lp.add(
        vec![Rational::one(); transversals.len()],
        Relation::Eq,
        Rational::one(),
    );
    for (e, t) in target.iter().enumerate() {
        let row = transversals
            .iter()
            .map(|s| {
                if s.contains(e) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        lp.add(row, Relation::Le, t.clone());
    }
    let sol = solve_with_limits(&lp, limits)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::NotBalanced {
                reason: "the augmented marginals are not a combination of transversals".into(),
                certificate: sol.farkas.map(Box::new),
            })
        }
        other => {
            return Err(Error::InvariantViolated(format!(
                "transversal LP ended with {other:?}"
            )))
        }
    }
    let original = Subset::full(n);
    let z = Decomposition::from_weights(
        transversals
            .iter()
            .zip(&sol.point)
            .filter(|(_, w)| !w.is_zero())
            .map(|(t, w)| (t.intersection(original), w.clone())),
    );
    lift_marginals(&z, rho)
}
