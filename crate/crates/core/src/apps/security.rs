//! Deterrence in inspection games.
//!
//! The defender inspects a random set of edges. An attacker choosing route
//! set `P` gains `r_P` if no inspected edge lies in `P` and loses `β`
//! otherwise, so deterrence needs `Pr[S ∩ P ≠ ∅] ≥ r_P/β` for every `P`. The
//! cheapest deterring strategy is found by minimizing `c·ρ` over marginals
//! satisfying the covering condition and then decomposing the optimum.

use std::collections::VecDeque;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::engine::{decompose, verify};
use crate::error::{Error, Result};
use crate::exactlp::{solve_with_limits, LinearProgram, LpStatus, Relation, Sense};
use crate::lattice::{decompose_lattice, lattice_instance, LatticeOracle, RootedCutLattice};
use crate::limits::Limits;
use crate::model::{Decomposition, Instance, Marginals};
use crate::rational::{self, Rational};
use crate::subset::{GroundSet, Subset};
use crate::supermodular::SupermodularOracle;

/// Tree whose edges are inspected; `α_{vw}` is the attacker's reward for
/// smuggling between `v` and `w`, available when the whole tree path
/// between them is in the attacked set.
#[derive(Clone, Debug)]
pub struct SmugglingTree {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    /// Tree path of each rewarded pair with its reward.
    paths: Vec<(Subset, Rational)>,
    beta: Rational,
}

impl SmugglingTree {
    pub fn new(
        nodes: usize,
        edges: Vec<(usize, usize)>,
        rewards: Vec<(usize, usize, Rational)>,
        beta: Rational,
    ) -> Result<Self> {
        if nodes == 0 || edges.len() + 1 != nodes {
            return Err(Error::InvalidInput(
                "a tree on k nodes needs k − 1 edges".into(),
            ));
        }
        if edges.len() > 64 {
            return Err(Error::ScaleExceeded {
                what: format!("{} edges", edges.len()),
                limit: 64,
            });
        }
        if edges
            .iter()
            .any(|&(u, v)| u >= nodes || v >= nodes || u == v)
        {
            return Err(Error::InvalidInput(
                "tree edge is a loop or leaves the node set".into(),
            ));
        }
        if !beta.is_positive() {
            return Err(Error::InvalidInput("beta must be positive".into()));
        }
        let mut tree = SmugglingTree {
            nodes,
            edges,
            paths: Vec::new(),
            beta,
        };
        for (v, w, a) in rewards {
            if v >= nodes || w >= nodes || v == w {
                return Err(Error::InvalidInput(format!(
                    "reward pair ({v}, {w}) is not a pair of distinct nodes"
                )));
            }
            if a.is_negative() {
                return Err(Error::InvalidInput("rewards must be nonnegative".into()));
            }
            let path = tree
                .path(v, w)
                .ok_or_else(|| Error::InvalidInput("tree is not connected".into()))?;
            tree.paths.push((path, a));
        }
        let full = tree.requirement(Subset::full(tree.edges.len()));
        if full > Rational::one() {
            return Err(Error::InvalidInput(format!(
                "total reward over beta is {}, above 1",
                rational::format(&full)
            )));
        }
        Ok(tree)
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edge set of the tree path between two nodes.
    fn path(&self, from: usize, to: usize) -> Option<Subset> {
        let mut via: Vec<Option<(usize, usize)>> = vec![None; self.nodes];
        let mut seen = vec![false; self.nodes];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                let other = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen[other] {
                    seen[other] = true;
                    via[other] = Some((i, u));
                    queue.push_back(other);
                }
            }
        }
        if !seen[to] {
            return None;
        }
        let mut set = Subset::EMPTY;
        let mut v = to;
        while let Some((edge, prev)) = via[v] {
            set = set.with(edge);
            v = prev;
        }
        Some(set)
    }

    /// `r_P`: total reward of pairs whose tree path lies in `P`.
    pub fn reward(&self, p: Subset) -> Rational {
        self.paths
            .iter()
            .filter(|(path, _)| path.is_subset_of(p))
            .map(|(_, a)| a.clone())
            .sum()
    }

    pub fn requirement(&self, p: Subset) -> Rational {
        self.reward(p) / &self.beta
    }

    /// Requirement oracle over all edge subsets.
    pub fn oracle(&self, limits: Limits) -> Result<SupermodularOracle> {
        let tree = self.clone();
        SupermodularOracle::from_fn(self.edges.len(), move |p| tree.requirement(p), limits)
    }
}

/// The attacked structure.
#[derive(Clone, Debug)]
pub enum SecurityModel {
    /// Any edge subset of a tree, with pairwise smuggling rewards.
    Smuggling(SmugglingTree),
    /// Cuts separating node sets from the root of a graph.
    EnergyNetwork(RootedCutLattice),
}

impl SecurityModel {
    pub fn ground_size(&self) -> usize {
        match self {
            SecurityModel::Smuggling(t) => t.edges().len(),
            SecurityModel::EnergyNetwork(l) => l.edges().len(),
        }
    }

    /// Every member with positive requirement.
    fn positive_members(&self, limits: &Limits) -> Result<Vec<(Subset, Rational)>> {
        let all = match self {
            SecurityModel::Smuggling(t) => {
                let n = t.edges().len();
                if n > limits.subset_elements {
                    return Err(Error::ScaleExceeded {
                        what: format!("enumeration of all subsets of {n} edges"),
                        limit: limits.subset_elements,
                    });
                }
                Subset::all(n)
                    .map(|p| (p, t.requirement(p)))
                    .collect::<Vec<_>>()
            }
            SecurityModel::EnergyNetwork(l) => l.members()?,
        };
        Ok(all.into_iter().filter(|(_, pi)| pi.is_positive()).collect())
    }
}

#[derive(Clone, Debug)]
pub struct SecurityGame {
    pub model: SecurityModel,
    /// Inspection cost per edge.
    pub costs: Vec<Rational>,
}

impl SecurityGame {
    pub fn new(model: SecurityModel, costs: Vec<Rational>) -> Result<Self> {
        if costs.len() != model.ground_size() {
            return Err(Error::DimensionMismatch {
                expected: model.ground_size(),
                found: costs.len(),
            });
        }
        if costs.iter().any(Signed::is_negative) {
            return Err(Error::InvalidInput(
                "inspection costs must be nonnegative".into(),
            ));
        }
        Ok(SecurityGame { model, costs })
    }
}

#[derive(Clone, Debug)]
pub struct SecurityOutcome {
    pub marginals: Marginals,
    pub decomposition: Decomposition,
    /// `Σ_e c_e ρ_e`, equal to the expected inspection cost of the decomposition.
    pub cost: Rational,
}

/// Cheapest deterring inspection strategy.
pub fn solve_security_game(game: &SecurityGame, limits: &Limits) -> Result<SecurityOutcome> {
    let n = game.model.ground_size();
    let members = game.model.positive_members(limits)?;
    let mut lp = LinearProgram::new(n);
    lp.set_objective(Sense::Minimize, game.costs.clone());
    for e in 0..n {
        lp.set_bounds(e, Some(Rational::zero()), Some(Rational::one()));
    }
    for (p, pi) in &members {
        let terms: Vec<(usize, Rational)> = p.iter().map(|e| (e, Rational::one())).collect();
        lp.add_sparse(&terms, Relation::Ge, pi.clone());
    }
    let sol = solve_with_limits(&lp, limits)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            return Err(Error::NotDeterable(
                "no inspection marginals satisfy every requirement".into(),
            ))
        }
        other => {
            return Err(Error::InvariantViolated(format!(
                "inspection LP ended with {other:?}"
            )))
        }
    }
    let rho = Marginals::new(sol.point)?;
    let ground = GroundSet::numbered(n);
    let (inst, z) = match &game.model {
        SecurityModel::Smuggling(tree) => {
            let oracle = Arc::new(tree.oracle(limits.clone())?);
            let inst = Instance::new(ground, oracle.clone())?;
            let z = decompose(&inst, &rho, oracle.as_ref())?;
            (inst, z)
        }
        SecurityModel::EnergyNetwork(lattice) => {
            let oracle: Arc<dyn LatticeOracle> = Arc::new(lattice.clone());
            let inst = lattice_instance(ground, oracle.clone(), limits.clone())?;
            let z = decompose_lattice(&inst, oracle.as_ref(), &rho, limits)?;
            (inst, z)
        }
    };
    if !verify(&inst, &rho, &z)?.is_ok() {
        return Err(Error::InvariantViolated(
            "inspection strategy fails verification".into(),
        ));
    }
    let cost = z.expected_cost(&game.costs);
    if cost != sol.value {
        return Err(Error::InvariantViolated(
            "decomposition cost differs from the LP optimum".into(),
        ));
    }
    Ok(SecurityOutcome {
        marginals: rho,
        decomposition: z,
        cost,
    })
}
