//! Lattice polyhedra: the two-phase greedy algorithm, greedy supports and the
//! support candidates they induce, exact separation, Carathéodory peeling and
//! the rooted-cut lattice of a graph.
//!
//! A lattice oracle only has to report the maximum member inside a given
//! subset of the ground set. Comparison, meet and join are used by the
//! property checks.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::engine::{decompose_with, lift_marginals, EngineOptions, Outcome};
use crate::error::{Error, Result};
use crate::exactlp::{solve_with_limits, LinearProgram, LpStatus, Relation, Sense};
use crate::limits::Limits;
use crate::model::{
    sum_over, AscOracle, Decomposition, Instance, Marginals, ResidualState, SetSystem, StarCheck,
};
use crate::rational::{self, Rational};
use crate::subset::{GroundSet, Subset};

/// Access to a lattice of members `𝒫 ⊆ 2^E` with requirements.
pub trait LatticeOracle: Send + Sync {
    fn ground_size(&self) -> usize;

    /// Maximum member contained in `within`, with its requirement.
    fn max_member(&self, within: Subset) -> Result<Option<(Subset, Rational)>>;

    /// Lattice order between two members.
    fn compare(&self, p: Subset, q: Subset) -> Option<Ordering>;

    fn meet(&self, p: Subset, q: Subset) -> Subset;

    fn join(&self, p: Subset, q: Subset) -> Subset;

    /// All members with requirements.
    fn members(&self) -> Result<Vec<(Subset, Rational)>>;

    /// Base-2 logarithm of an upper bound on the number of members.
    fn member_exponent(&self) -> usize;
}

/// Elements `e_1..e_m` and members `P_1..P_m` from a greedy run.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct GreedySupport {
    pub elements: Vec<usize>,
    pub members: Vec<Subset>,
    /// `π_{P_i}` without any offset.
    pub values: Vec<Rational>,
}

impl GreedySupport {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Number of leading members with `π_{P_i} − offset > 0`.
    pub fn truncation(&self, offset: &Rational) -> usize {
        self.values
            .iter()
            .rposition(|v| v > offset)
            .map_or(0, |i| i + 1)
    }

    pub fn truncated(&self, m: usize) -> GreedySupport {
        GreedySupport {
            elements: self.elements[..m].to_vec(),
            members: self.members[..m].to_vec(),
            values: self.values[..m].to_vec(),
        }
    }

    pub fn element_set(&self) -> Subset {
        self.elements.iter().copied().collect()
    }
}

/// Output of the two-phase greedy algorithm.
#[derive(Clone, Debug)]
pub struct Greedy {
    /// Minimizer of `c·x` over `{x ≥ 0 : x(P) ≥ π_P − offset}`.
    pub point: Vec<Rational>,
    pub support: GreedySupport,
    /// Dual value of each `P_i`.
    pub duals: Vec<Rational>,
}

impl Greedy {
    /// `Σ y_i (π_{P_i} − offset)`, equal to `c·point`.
    pub fn dual_value(&self, offset: &Rational) -> Rational {
        self.duals
            .iter()
            .zip(&self.support.values)
            .map(|(y, v)| y * (v - offset))
            .sum()
    }
}

enum GreedyRun {
    Done(Greedy),
    /// An empty member with positive residual requirement: the polyhedron is empty.
    Empty(Subset, Rational),
}

fn run_greedy(
    oracle: &dyn LatticeOracle,
    costs: &[Rational],
    offset: &Rational,
) -> Result<GreedyRun> {
    let n = oracle.ground_size();
    if costs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: costs.len(),
        });
    }
    let mut within = Subset::full(n);
    let mut residual = costs.to_vec();
    let mut support = GreedySupport::default();
    let mut duals = Vec::new();
    while let Some((p, pi)) = oracle.max_member(within)? {
        if &pi <= offset {
            break;
        }
        if !p.is_subset_of(within) {
            return Err(Error::OracleInconsistent(format!(
                "maximum member {p:?} leaves {within:?}"
            )));
        }
        if p.is_empty() {
            return Ok(GreedyRun::Empty(p, pi));
        }
        let e = p
            .iter()
            .min_by(|&a, &b| residual[a].cmp(&residual[b]))
            .expect("nonempty");
        let y = residual[e].clone();
        for f in p.iter() {
            residual[f] -= &y;
        }
        support.elements.push(e);
        support.members.push(p);
        support.values.push(pi);
        duals.push(y);
        within = within.without(e);
    }
    let point = solve_support(n, &support, offset)?;
    Ok(GreedyRun::Done(Greedy {
        point,
        support,
        duals,
    }))
}

/// Solves `x(P_i) = π_{P_i} − offset` with `x` zero off the support elements,
/// by back-substitution from `e_m` to `e_1`.
fn solve_support(n: usize, support: &GreedySupport, offset: &Rational) -> Result<Vec<Rational>> {
    let mut x = vec![Rational::zero(); n];
    for i in (0..support.len()).rev() {
        let p = support.members[i];
        let e = support.elements[i];
        let rest = sum_over(&x, p.without(e));
        let v = &support.values[i] - offset - rest;
        if v.is_negative() {
            return Err(Error::OracleInconsistent(format!(
                "greedy assigns {} to element {e}; requirements are not monotone supermodular",
                rational::format(&v)
            )));
        }
        x[e] = v;
    }
    Ok(x)
}

/// Two-phase greedy for `min c·x` over `{x ≥ 0 : x(P) ≥ π_P − offset}` with
/// `c ≥ 0`. Ties between elements go to the earlier one.
pub fn greedy(oracle: &dyn LatticeOracle, costs: &[Rational], offset: &Rational) -> Result<Greedy> {
    match run_greedy(oracle, costs, offset)? {
        GreedyRun::Done(g) => Ok(g),
        GreedyRun::Empty(p, pi) => Err(Error::InvalidInput(format!(
            "empty member {p:?} has positive requirement {}",
            rational::format(&pi)
        ))),
    }
}

/// Greedy with zero costs: an extreme point of the polyhedron and its greedy
/// support.
pub fn two_phase_greedy(oracle: &dyn LatticeOracle) -> Result<(Marginals, GreedySupport)> {
    let g = greedy(
        oracle,
        &vec![Rational::zero(); oracle.ground_size()],
        &Rational::zero(),
    )?;
    let point = Marginals::new(g.point)
        .map_err(|_| Error::OracleInconsistent("greedy point leaves the unit cube".into()))?;
    Ok((point, g.support))
}

/// Reverse scan over the first `m` support members, adding `e_i` whenever
/// `P_i` is not hit yet.
pub fn asc_from_support(support: &GreedySupport, m: usize) -> Subset {
    let mut s = Subset::EMPTY;
    for i in (0..m).rev() {
        if !support.members[i].intersects(s) {
            s = s.with(support.elements[i]);
        }
    }
    s
}

/// Checks the greedy support conditions against `point` and an offset by
/// enumerating members. Returns a description of the first failure.
///
/// The chain conditions are checked in the form the ASC argument relies on:
/// `P_i ∩ {e_{i+1},…,e_m} ⊆ Q` and `e_i ∈ Q` whenever `P_i ⪰ Q ≻ P_{i+1}`,
/// and `e_m ∈ Q` whenever `Q ≺ P_m` has positive requirement.
pub fn check_greedy_support(
    oracle: &dyn LatticeOracle,
    support: &GreedySupport,
    point: &[Rational],
    offset: &Rational,
) -> Result<Option<String>> {
    let members = oracle.members()?;
    let m = support.len();
    let em = support.element_set();
    let mut removed = Subset::EMPTY;
    for i in 0..m {
        let (e, p) = (support.elements[i], support.members[i]);
        if !p.contains(e) {
            return Ok(Some(format!("membership: e_{i} not in P_{i}")));
        }
        let top = oracle
            .max_member(Subset::full(oracle.ground_size()).difference(removed))?
            .map(|(q, _)| q);
        if top != Some(p) {
            return Ok(Some(format!(
                "maximality: P_{i} is not the maximum member avoiding earlier elements"
            )));
        }
        if &support.values[i] <= offset {
            return Ok(Some(format!(
                "positivity: P_{i} has no positive requirement"
            )));
        }
        if support.members[i + 1..].iter().any(|q| q.contains(e)) {
            return Ok(Some(format!("removal: e_{i} lies in a later member")));
        }
        if i + 1 < m && oracle.compare(p, support.members[i + 1]) != Some(Ordering::Greater) {
            return Ok(Some(format!("chain: P_{i} does not exceed P_{}", i + 1)));
        }
        removed = removed.with(e);
    }
    if let Some((q, _)) = members
        .iter()
        .find(|(q, pi)| q.is_subset_of(Subset::full(point.len()).difference(em)) && pi > offset)
    {
        return Ok(Some(format!(
            "positivity: member {q:?} avoids the support but has positive requirement"
        )));
    }
    if let Some(e) = (0..point.len()).find(|&e| !em.contains(e) && !point[e].is_zero()) {
        return Ok(Some(format!(
            "complementary slackness: point is nonzero at {e} outside the support"
        )));
    }
    for i in 0..m {
        if sum_over(point, support.members[i]) != &support.values[i] - offset {
            return Ok(Some(format!("complementary slackness: P_{i} is not tight")));
        }
    }
    for i in 0..m.saturating_sub(1) {
        let (hi, lo) = (support.members[i], support.members[i + 1]);
        for (q, _) in &members {
            let between = oracle.compare(hi, *q).is_some_and(|o| o != Ordering::Less)
                && oracle.compare(*q, lo) == Some(Ordering::Greater);
            if between && !hi.intersection(em).is_subset_of(q.intersection(em)) {
                return Ok(Some(format!(
                    "between members: member {q:?} between P_{i} and P_{}",
                    i + 1
                )));
            }
        }
    }
    if m > 0 {
        let (last, em_last) = (support.members[m - 1], support.elements[m - 1]);
        for (q, pi) in &members {
            let below = oracle.compare(*q, last) == Some(Ordering::Less);
            if below && pi > offset && !q.contains(em_last) {
                return Ok(Some(format!(
                    "below the last member: member {q:?} below P_m misses e_m"
                )));
            }
        }
    }
    Ok(None)
}

/// Membership test for `{x ≥ 0 : x(P) ≥ π_P − offset}` by column generation
/// over greedy vertices. Returns a violated member and its violation
/// `π_P − w(P) > offset` when `w` is outside.
fn violated_at(
    oracle: &dyn LatticeOracle,
    w: &[Rational],
    offset: &Rational,
    limits: &Limits,
) -> Result<Option<(Subset, Rational)>> {
    let n = w.len();
    if n == 0 {
        return Ok(match oracle.max_member(Subset::EMPTY)? {
            Some((p, pi)) if &pi > offset => Some((p, pi)),
            _ => None,
        });
    }
    let mut costs = vec![Rational::new(1.into(), (n as i64).into()); n];
    let mut columns: Vec<Vec<Rational>> = Vec::new();
    loop {
        let g = match run_greedy(oracle, &costs, offset)? {
            GreedyRun::Done(g) => g,
            GreedyRun::Empty(p, pi) => return Ok(Some((p, pi))),
        };
        let cw: Rational = costs.iter().zip(w).map(|(c, x)| c * x).sum();
        if cw < g.dual_value(offset) {
            // c ≥ Σ y_i χ_{P_i} and w ≥ 0, so some P_i with y_i > 0 is violated.
            for i in 0..g.support.len() {
                let p = g.support.members[i];
                let v = &g.support.values[i] - sum_over(w, p);
                if g.duals[i].is_positive() && &v > offset {
                    return Ok(Some((p, v)));
                }
            }
            return Err(Error::OracleInconsistent(
                "greedy dual certificate names no violated member".into(),
            ));
        }
        columns.push(g.point);
        // Master: max d − c·w subject to d ≤ c·v for every column, Σc = 1, c ≥ 0.
        let mut lp = LinearProgram::new(n + 1);
        let mut objective: Vec<Rational> = w.iter().map(|x| -x).collect();
        objective.push(Rational::one());
        lp.set_objective(Sense::Maximize, objective);
        lp.set_bounds(n, None, None);
        for v in &columns {
            let mut row: Vec<Rational> = v.iter().map(|x| -x).collect();
            row.push(Rational::one());
            lp.add(row, Relation::Le, Rational::zero());
        }
        let mut sum = vec![Rational::one(); n];
        sum.push(Rational::zero());
        lp.add(sum, Relation::Eq, Rational::one());
        let sol = solve_with_limits(&lp, limits)?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::InvariantViolated(format!(
                "separation master ended with {:?}",
                sol.status
            )));
        }
        if !sol.value.is_positive() {
            return Ok(None);
        }
        costs = sol.point[..n].to_vec();
    }
}

/// `max_P (π_P − w(P))` and a maximizer, for `w ≥ 0`.
///
/// Starts from the top member and raises the threshold to each violation
/// found until `w` satisfies every shifted inequality.
pub fn max_violation(
    oracle: &dyn LatticeOracle,
    w: &[Rational],
    limits: &Limits,
) -> Result<Option<(Subset, Rational)>> {
    if w.iter().any(Signed::is_negative) {
        return Err(Error::InvalidInput(
            "separation needs nonnegative weights".into(),
        ));
    }
    let Some((top, pi)) = oracle.max_member(Subset::full(oracle.ground_size()))? else {
        return Ok(None);
    };
    let mut best = (top, pi - sum_over(w, top));
    while let Some(found) = violated_at(oracle, w, &best.1, limits)? {
        if found.1 <= best.1 {
            return Err(Error::OracleInconsistent(
                "separation made no progress".into(),
            ));
        }
        best = found;
    }
    Ok(Some(best))
}

/// Most violated covering inequality of the lattice.
pub fn max_violated_lattice(
    oracle: &dyn LatticeOracle,
    rho: &Marginals,
    limits: &Limits,
) -> Result<StarCheck> {
    if rho.len() != oracle.ground_size() {
        return Err(Error::DimensionMismatch {
            expected: oracle.ground_size(),
            found: rho.len(),
        });
    }
    Ok(StarCheck::from_max(max_violation(
        oracle,
        rho.values(),
        limits,
    )?))
}

/// Support candidates from a fixed greedy support, truncated to the members
/// whose residual requirement is still positive.
pub struct ExtremeAsc {
    pub support: GreedySupport,
}

impl AscOracle for ExtremeAsc {
    fn next_asc(&self, state: &ResidualState) -> Result<Subset> {
        Ok(asc_from_support(
            &self.support,
            self.support.truncation(&state.offset),
        ))
    }
}

/// Decomposes an extreme point certified by `support`. `inst` must carry the
/// lattice's set system.
pub fn decompose_extreme(
    inst: &Instance,
    point: &Marginals,
    support: &GreedySupport,
) -> Result<Outcome> {
    decompose_with(
        inst,
        point,
        &ExtremeAsc {
            support: support.clone(),
        },
        &EngineOptions::default(),
    )
}

/// `ρ = Σ λ_i v_i + r` with greedy extreme points `v_i` and a ray `r ≥ 0`.
#[derive(Clone, Debug)]
pub struct Caratheodory {
    pub parts: Vec<(Rational, Marginals, GreedySupport)>,
    pub ray: Vec<Rational>,
}

/// Writes `rho` as a convex combination of greedy extreme points plus a
/// nonnegative ray. Members are enumerated.
pub fn caratheodory_decompose(oracle: &dyn LatticeOracle, rho: &Marginals) -> Result<Caratheodory> {
    let n = oracle.ground_size();
    if rho.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rho.len(),
        });
    }
    let members = oracle.members()?;
    if let Some((p, pi)) = members.iter().find(|(p, pi)| rho.sum_over(*p) < *pi) {
        return Err(Error::NotInYStar {
            member: format!("{p:?}"),
            gap: pi - rho.sum_over(*p),
        });
    }
    let mut x: Vec<Rational> = rho.values().to_vec();
    let mut coef = Rational::one();
    let mut parts = Vec::new();
    for _ in 0..=n + 1 {
        // Cost vector whose minimizers form the smallest face containing x.
        let mut costs = vec![Rational::zero(); n];
        let mut face_value = Rational::zero();
        for (p, pi) in &members {
            if sum_over(&x, *p) == *pi {
                for e in p.iter() {
                    costs[e] += Rational::one();
                }
                face_value += pi;
            }
        }
        for e in 0..n {
            if x[e].is_zero() {
                costs[e] += Rational::one();
            }
        }
        let g = greedy(oracle, &costs, &Rational::zero())?;
        let v = g.point;
        let cv: Rational = costs.iter().zip(&v).map(|(c, y)| c * y).sum();
        if cv != face_value {
            return Err(Error::OracleInconsistent(
                "greedy vertex leaves the minimal face".into(),
            ));
        }
        let d: Vec<Rational> = x.iter().zip(&v).map(|(a, b)| a - b).collect();
        let vm = Marginals::new(v.clone())
            .map_err(|_| Error::OracleInconsistent("greedy point leaves the unit cube".into()))?;
        if d.iter().all(|t| !t.is_negative()) {
            parts.push((coef.clone(), vm, g.support));
            let ray = d.iter().map(|t| &coef * t).collect();
            return Ok(Caratheodory { parts, ray });
        }
        // Walk from v through x until a new constraint becomes tight.
        let mut mu: Option<Rational> = None;
        let mut tighten = |bound: Rational| {
            if mu.as_ref().is_none_or(|m| bound < *m) {
                mu = Some(bound);
            }
        };
        for e in 0..n {
            if d[e].is_negative() {
                tighten(&v[e] / -&d[e]);
            }
        }
        for (p, pi) in &members {
            let dp = sum_over(&d, *p);
            if dp.is_negative() {
                tighten((sum_over(&v, *p) - pi) / -dp);
            }
        }
        let mu = mu.expect("some coordinate decreases");
        if mu <= Rational::one() {
            return Err(Error::InvariantViolated(
                "Carathéodory step does not leave the current point".into(),
            ));
        }
        parts.push((&coef * (Rational::one() - mu.recip()), vm, g.support));
        coef /= &mu;
        x = v.iter().zip(&d).map(|(a, b)| a + &mu * b).collect();
    }
    Err(Error::InvariantViolated(
        "Carathéodory peeling did not terminate".into(),
    ))
}

/// Feasible decomposition of `rho` for a lattice instance, or `NotInYStar`.
/// `inst` must carry `LatticeSystem::new(oracle)`.
pub fn decompose_lattice(
    inst: &Instance,
    oracle: &dyn LatticeOracle,
    rho: &Marginals,
    limits: &Limits,
) -> Result<Decomposition> {
    if let StarCheck::Violated { member, gap } = max_violated_lattice(oracle, rho, limits)? {
        return Err(Error::NotInYStar {
            member: inst.ground.display(member),
            gap,
        });
    }
    let car = caratheodory_decompose(oracle, rho)?;
    let mut pieces = Vec::with_capacity(car.parts.len());
    for (w, point, support) in &car.parts {
        pieces.push((
            w.clone(),
            decompose_extreme(inst, point, support)?.decomposition,
        ));
    }
    let mixed = Decomposition::mix(pieces.iter().map(|(w, z)| (w, z)));
    lift_marginals(&mixed, rho)
}

/// Set system view of a lattice.
pub struct LatticeSystem {
    oracle: Arc<dyn LatticeOracle>,
    limits: Limits,
}

impl LatticeSystem {
    pub fn new(oracle: Arc<dyn LatticeOracle>, limits: Limits) -> Self {
        LatticeSystem { oracle, limits }
    }

    pub fn oracle(&self) -> &dyn LatticeOracle {
        self.oracle.as_ref()
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }
}

impl SetSystem for LatticeSystem {
    fn ground_size(&self) -> usize {
        self.oracle.ground_size()
    }

    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>> {
        max_violation(self.oracle.as_ref(), weights, &self.limits)
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        self.oracle.members()
    }

    fn is_explicit(&self) -> bool {
        self.oracle.member_exponent() <= self.limits.engine_subset_elements
    }
}

/// Builds the instance of a lattice over `ground`.
pub fn lattice_instance(
    ground: GroundSet,
    oracle: Arc<dyn LatticeOracle>,
    limits: Limits,
) -> Result<Instance> {
    Instance::new(ground, Arc::new(LatticeSystem::new(oracle, limits)))
}

/// Cuts `δ(U)` for `U ⊆ V∖{v_0}` of a connected graph, ordered by
/// containment of `U`, with `π_{δ(U)} = α(U)/β`.
#[derive(Clone, Debug)]
pub struct RootedCutLattice {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    root: usize,
    alpha: Vec<Rational>,
    beta: Rational,
    limits: Limits,
}

impl RootedCutLattice {
    pub fn new(
        nodes: usize,
        edges: Vec<(usize, usize)>,
        root: usize,
        alpha: Vec<Rational>,
        beta: Rational,
        limits: Limits,
    ) -> Result<Self> {
        if nodes > 64 || edges.len() > 64 {
            return Err(Error::ScaleExceeded {
                what: "graphs beyond 64 nodes or edges".into(),
                limit: 64,
            });
        }
        if root >= nodes {
            return Err(Error::InvalidInput("root is not a node".into()));
        }
        if let Some((i, _)) = edges
            .iter()
            .enumerate()
            .find(|(_, &(u, v))| u >= nodes || v >= nodes || u == v)
        {
            return Err(Error::InvalidInput(format!(
                "edge {i} is a loop or leaves the node set"
            )));
        }
        if alpha.len() != nodes {
            return Err(Error::DimensionMismatch {
                expected: nodes,
                found: alpha.len(),
            });
        }
        if !beta.is_positive() {
            return Err(Error::InvalidInput("beta must be positive".into()));
        }
        if alpha.iter().any(Signed::is_negative) {
            return Err(Error::InvalidInput(
                "node weights must be nonnegative".into(),
            ));
        }
        let lattice = RootedCutLattice {
            nodes,
            edges,
            root,
            alpha,
            beta,
            limits,
        };
        if lattice.root_component(Subset::EMPTY) != Subset::full(nodes) {
            return Err(Error::InvalidInput("graph is not connected".into()));
        }
        let total: Rational = (0..nodes)
            .filter(|&v| v != root)
            .map(|v| lattice.alpha[v].clone())
            .sum();
        if total > lattice.beta {
            return Err(Error::InvalidInput(
                "node weights outside the root exceed beta".into(),
            ));
        }
        Ok(lattice)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Edges with exactly one endpoint in `u`.
    pub fn cut(&self, u: Subset) -> Subset {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, &(a, b))| u.contains(a) != u.contains(b))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn requirement_of(&self, u: Subset) -> Rational {
        u.iter().map(|v| self.alpha[v].clone()).sum::<Rational>() / &self.beta
    }

    /// Nodes reachable from the root without using edges in `blocked`.
    fn root_component(&self, blocked: Subset) -> Subset {
        let mut seen = Subset::singleton(self.root);
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                if blocked.contains(i) {
                    continue;
                }
                let other = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                if !seen.contains(other) {
                    seen = seen.with(other);
                    queue.push_back(other);
                }
            }
        }
        seen
    }

    /// The node set `U` with `δ(U) = cut`, if the edge set is a member.
    /// Walks the graph from the root, switching sides on every cut edge.
    pub fn shore(&self, cut: Subset) -> Option<Subset> {
        let mut side: Vec<Option<bool>> = vec![None; self.nodes];
        side[self.root] = Some(false);
        let mut queue = VecDeque::from([self.root]);
        while let Some(u) = queue.pop_front() {
            let su = side[u].expect("visited");
            for (i, &(a, b)) in self.edges.iter().enumerate() {
                let other = if a == u {
                    b
                } else if b == u {
                    a
                } else {
                    continue;
                };
                let s = su != cut.contains(i);
                match side[other] {
                    None => {
                        side[other] = Some(s);
                        queue.push_back(other);
                    }
                    Some(t) if t != s => return None,
                    Some(_) => {}
                }
            }
        }
        let u: Subset = (0..self.nodes).filter(|&v| side[v] == Some(true)).collect();
        (self.cut(u) == cut).then_some(u)
    }

    fn shore_or_empty(&self, cut: Subset) -> Subset {
        self.shore(cut).unwrap_or(Subset::EMPTY)
    }
}

impl LatticeOracle for RootedCutLattice {
    fn ground_size(&self) -> usize {
        self.edges.len()
    }

    fn max_member(&self, within: Subset) -> Result<Option<(Subset, Rational)>> {
        let u = Subset::full(self.nodes).difference(self.root_component(within));
        Ok(Some((self.cut(u), self.requirement_of(u))))
    }

    fn compare(&self, p: Subset, q: Subset) -> Option<Ordering> {
        let (a, b) = (self.shore(p)?, self.shore(q)?);
        if a == b {
            Some(Ordering::Equal)
        } else if a.is_subset_of(b) {
            Some(Ordering::Less)
        } else if b.is_subset_of(a) {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    fn meet(&self, p: Subset, q: Subset) -> Subset {
        self.cut(self.shore_or_empty(p).intersection(self.shore_or_empty(q)))
    }

    fn join(&self, p: Subset, q: Subset) -> Subset {
        self.cut(self.shore_or_empty(p).union(self.shore_or_empty(q)))
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        let free = self.nodes - 1;
        if free > self.limits.subset_elements {
            return Err(Error::ScaleExceeded {
                what: format!("cuts of {} nodes", self.nodes),
                limit: self.limits.subset_elements,
            });
        }
        let others = Subset::full(self.nodes).without(self.root);
        Ok(others
            .subsets()
            .map(|u| (self.cut(u), self.requirement_of(u)))
            .collect())
    }

    fn member_exponent(&self) -> usize {
        self.nodes.saturating_sub(1)
    }
}

/// Family of subsets closed under union and intersection, ordered by
/// inclusion.
#[derive(Clone, Debug)]
pub struct ExplicitLattice {
    n: usize,
    members: Vec<(Subset, Rational)>,
}

impl ExplicitLattice {
    pub fn new(n: usize, members: Vec<(Subset, Rational)>) -> Result<Self> {
        let sets: Vec<Subset> = members.iter().map(|(p, _)| *p).collect();
        for (i, p) in sets.iter().enumerate() {
            if !p.is_subset_of(Subset::full(n)) {
                return Err(Error::InvalidInput(format!(
                    "member {p:?} leaves the ground set"
                )));
            }
            if sets[..i].contains(p) {
                return Err(Error::InvalidInput(format!("member {p:?} is listed twice")));
            }
            for q in &sets {
                if !sets.contains(&p.union(*q)) || !sets.contains(&p.intersection(*q)) {
                    return Err(Error::InvalidInput(format!(
                        "members {p:?} and {q:?} break lattice closure"
                    )));
                }
            }
        }
        if let Some((p, _)) = members.iter().find(|(_, pi)| *pi > Rational::one()) {
            return Err(Error::InvalidInput(format!(
                "requirement of {p:?} exceeds 1"
            )));
        }
        Ok(ExplicitLattice { n, members })
    }
}

impl LatticeOracle for ExplicitLattice {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn max_member(&self, within: Subset) -> Result<Option<(Subset, Rational)>> {
        let inside = self.members.iter().filter(|(p, _)| p.is_subset_of(within));
        let top = inside.fold(None::<Subset>, |acc, (p, _)| {
            Some(acc.map_or(*p, |a| a.union(*p)))
        });
        Ok(top.map(|t| {
            let pi = self
                .members
                .iter()
                .find(|(p, _)| *p == t)
                .map(|(_, pi)| pi.clone())
                .expect("closed");
            (t, pi)
        }))
    }

    fn compare(&self, p: Subset, q: Subset) -> Option<Ordering> {
        if p == q {
            Some(Ordering::Equal)
        } else if p.is_subset_of(q) {
            Some(Ordering::Less)
        } else if q.is_subset_of(p) {
            Some(Ordering::Greater)
        } else {
            None
        }
    }

    fn meet(&self, p: Subset, q: Subset) -> Subset {
        p.intersection(q)
    }

    fn join(&self, p: Subset, q: Subset) -> Subset {
        p.union(q)
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        Ok(self.members.clone())
    }

    fn member_exponent(&self) -> usize {
        self.members.len().next_power_of_two().trailing_zeros() as usize
    }
}

/// Checks submodularity of the incidence vectors, consecutivity, and
/// supermodularity and monotonicity of the requirements over all members.
pub fn check_lattice_axioms(oracle: &dyn LatticeOracle) -> Result<Option<String>> {
    let members = oracle.members()?;
    let pi = |s: Subset| {
        members
            .iter()
            .find(|(p, _)| *p == s)
            .map(|(_, v)| v.clone())
    };
    for (p, pp) in &members {
        for (q, pq) in &members {
            let (join, meet) = (oracle.join(*p, *q), oracle.meet(*p, *q));
            let (Some(pj), Some(pm)) = (pi(join), pi(meet)) else {
                return Ok(Some(format!(
                    "meet or join of {p:?} and {q:?} is not a member"
                )));
            };
            for e in 0..oracle.ground_size() {
                let lhs = join.contains(e) as u8 + meet.contains(e) as u8;
                if lhs > p.contains(e) as u8 + q.contains(e) as u8 {
                    return Ok(Some(format!("(SM) fails for {p:?} and {q:?} at {e}")));
                }
            }
            if &pj + &pm < pp + pq {
                return Ok(Some(format!(
                    "requirements are not supermodular on {p:?} and {q:?}"
                )));
            }
            if oracle.compare(*p, *q) == Some(Ordering::Less) && pp > pq {
                return Ok(Some(format!(
                    "requirements are not monotone on {p:?} and {q:?}"
                )));
            }
        }
    }
    for (p, _) in &members {
        for (q, _) in &members {
            if oracle.compare(*p, *q) != Some(Ordering::Less) {
                continue;
            }
            for (r, _) in &members {
                if oracle.compare(*q, *r) == Some(Ordering::Less)
                    && !p.intersection(*r).is_subset_of(*q)
                {
                    return Ok(Some(format!("(CS) fails for {p:?}, {q:?}, {r:?}")));
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{check_star, verify};
    use crate::model::{max_violated_by_enumeration, ExplicitSystem};
    use crate::rational::ratio;
    use proptest::prelude::*;

    fn s(ix: &[usize]) -> Subset {
        Subset::from_indices(ix.iter().copied())
    }

    /// Path v0 - v1 - v2 with f1 = v0v1, f2 = v1v2.
    fn path_graph() -> RootedCutLattice {
        RootedCutLattice::new(
            3,
            vec![(0, 1), (1, 2)],
            0,
            vec![ratio(0, 1), ratio(3, 10), ratio(2, 10)],
            ratio(1, 1),
            Limits::default(),
        )
        .unwrap()
    }

    fn instance(oracle: Arc<dyn LatticeOracle>) -> Instance {
        let n = oracle.ground_size();
        lattice_instance(GroundSet::numbered(n), oracle, Limits::default()).unwrap()
    }

    #[test]
    fn path_graph_greedy() {
        let lattice = path_graph();
        let (point, support) = two_phase_greedy(&lattice).unwrap();
        assert_eq!(point.values(), &[ratio(1, 2), ratio(1, 5)]);
        assert_eq!(support.elements, vec![0, 1]);
        assert_eq!(support.members, vec![s(&[0]), s(&[1])]);
        assert_eq!(
            check_greedy_support(&lattice, &support, point.values(), &Rational::zero()).unwrap(),
            None
        );
        assert_eq!(asc_from_support(&support, 2), s(&[0, 1]));
        assert!(max_violated_lattice(&lattice, &point, &Limits::default())
            .unwrap()
            .is_feasible());
    }

    #[test]
    fn path_graph_extreme_decomposition() {
        let lattice = Arc::new(path_graph());
        let inst = instance(lattice.clone());
        let (point, support) = two_phase_greedy(lattice.as_ref()).unwrap();
        let out = decompose_extreme(&inst, &point, &support).unwrap();
        let expected = Decomposition::new([
            (s(&[]), ratio(1, 2)),
            (s(&[0, 1]), ratio(1, 5)),
            (s(&[0]), ratio(3, 10)),
        ])
        .unwrap();
        assert_eq!(out.decomposition, expected);
        assert_eq!(out.decomposition.hitting(s(&[0])), ratio(1, 2));
        assert_eq!(out.decomposition.hitting(s(&[1])), ratio(1, 5));
        assert_eq!(out.decomposition.hitting(s(&[0, 1])), ratio(1, 2));
        assert!(verify(&inst, &point, &out.decomposition).unwrap().is_ok());
    }

    #[test]
    fn trivial_greedy_cases() {
        let zero = RootedCutLattice::new(
            2,
            vec![(0, 1)],
            0,
            vec![ratio(0, 1); 2],
            ratio(1, 1),
            Limits::default(),
        )
        .unwrap();
        let (point, support) = two_phase_greedy(&zero).unwrap();
        assert!(support.is_empty());
        assert_eq!(point.values(), &[ratio(0, 1)]);
        assert_eq!(asc_from_support(&support, 0), Subset::EMPTY);
        let inst = instance(Arc::new(zero));
        assert_eq!(
            decompose_extreme(&inst, &point, &support)
                .unwrap()
                .decomposition,
            Decomposition::point(Subset::EMPTY)
        );

        let single = Arc::new(ExplicitLattice::new(1, vec![(s(&[0]), ratio(1, 1))]).unwrap());
        let (point, support) = two_phase_greedy(single.as_ref()).unwrap();
        assert_eq!(point.values(), &[ratio(1, 1)]);
        let inst = instance(single.clone());
        assert_eq!(
            decompose_extreme(&inst, &point, &support)
                .unwrap()
                .decomposition,
            Decomposition::point(s(&[0]))
        );
    }

    #[test]
    fn nested_chain_asc() {
        let support = GreedySupport {
            elements: vec![0, 1],
            members: vec![s(&[0, 1]), s(&[1])],
            values: vec![ratio(1, 2), ratio(1, 4)],
        };
        assert_eq!(asc_from_support(&support, 2), s(&[1]));
        assert_eq!(support.truncation(&ratio(1, 4)), 1);
        assert_eq!(support.truncation(&ratio(1, 2)), 0);
    }

    #[test]
    fn zero_marginals_are_violated() {
        let lattice = path_graph();
        assert_eq!(
            max_violated_lattice(&lattice, &Marginals::zeros(2), &Limits::default()).unwrap(),
            StarCheck::Violated {
                member: s(&[0]),
                gap: ratio(1, 2)
            }
        );
    }

    #[test]
    fn caratheodory_examples() {
        let lattice = path_graph();
        let (point, _) = two_phase_greedy(&lattice).unwrap();
        let car = caratheodory_decompose(&lattice, &point).unwrap();
        assert_eq!(car.parts.len(), 1);
        assert_eq!(car.parts[0].0, ratio(1, 1));
        assert_eq!(car.ray, vec![ratio(0, 1); 2]);

        let bumped = Marginals::new(vec![ratio(1, 2), ratio(3, 10)]).unwrap();
        let car = caratheodory_decompose(&lattice, &bumped).unwrap();
        assert_eq!(car.parts.len(), 1);
        assert_eq!(car.parts[0].1, point);
        assert_eq!(car.ray, vec![ratio(0, 1), ratio(1, 10)]);
    }

    #[test]
    fn decompose_lattice_rejects_infeasible() {
        let lattice = Arc::new(path_graph());
        let inst = instance(lattice.clone());
        let rho = Marginals::new(vec![ratio(1, 10), ratio(1, 10)]).unwrap();
        assert!(matches!(
            decompose_lattice(&inst, lattice.as_ref(), &rho, &Limits::default()),
            Err(Error::NotInYStar { .. })
        ));
    }

    #[test]
    fn decompose_lattice_at_extreme_point_matches() {
        let lattice = Arc::new(path_graph());
        let inst = instance(lattice.clone());
        let (point, support) = two_phase_greedy(lattice.as_ref()).unwrap();
        let direct = decompose_extreme(&inst, &point, &support)
            .unwrap()
            .decomposition;
        assert_eq!(
            decompose_lattice(&inst, lattice.as_ref(), &point, &Limits::default()).unwrap(),
            direct
        );
    }

    #[test]
    fn validation() {
        let l = Limits::default();
        assert!(RootedCutLattice::new(
            3,
            vec![(0, 1)],
            0,
            vec![ratio(0, 1); 3],
            ratio(1, 1),
            l.clone()
        )
        .is_err());
        assert!(RootedCutLattice::new(
            2,
            vec![(0, 1)],
            0,
            vec![ratio(0, 1); 2],
            ratio(0, 1),
            l.clone()
        )
        .is_err());
        assert!(RootedCutLattice::new(
            2,
            vec![(0, 1)],
            0,
            vec![ratio(0, 1), ratio(2, 1)],
            ratio(1, 1),
            l
        )
        .is_err());
        assert!(
            ExplicitLattice::new(2, vec![(s(&[0]), ratio(0, 1)), (s(&[1]), ratio(0, 1))]).is_err()
        );
    }

    /// Connected random graph: a random spanning tree plus extra edges.
    fn graph_strategy(
        max_nodes: usize,
    ) -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<i64>, i64)> {
        (3..=max_nodes).prop_flat_map(|k| {
            (
                Just(k),
                proptest::collection::vec(0usize..100, k - 1),
                proptest::collection::vec((0usize..k, 0usize..k), 0..4),
                proptest::collection::vec(0i64..=4, k),
                1i64..=3,
            )
                .prop_map(|(k, parents, extra, alpha, beta_scale)| {
                    let mut edges: Vec<(usize, usize)> =
                        (1..k).map(|v| (parents[v - 1] % v, v)).collect();
                    for (a, b) in extra {
                        if a != b && edges.len() < 9 {
                            edges.push((a.min(b), a.max(b)));
                        }
                    }
                    (k, edges, alpha, beta_scale)
                })
        })
    }

    fn build_cut(
        k: usize,
        edges: Vec<(usize, usize)>,
        alpha: &[i64],
        beta_scale: i64,
    ) -> RootedCutLattice {
        let mut a: Vec<Rational> = alpha
            .iter()
            .map(|&x| Rational::from_integer(x.into()))
            .collect();
        a[0] = Rational::zero();
        let total: Rational = a.iter().sum();
        let beta = (total.max(Rational::one())) * Rational::from_integer(beta_scale.into())
            / Rational::from_integer(2.into())
            + Rational::new(1.into(), 2.into());
        let beta = beta.max(a.iter().sum());
        RootedCutLattice::new(k, edges, 0, a, beta, Limits::default()).unwrap()
    }

    /// A point satisfying every cut inequality: the greedy extreme point plus
    /// a random bump, capped at 1.
    fn feasible_point(lattice: &RootedCutLattice, bump: &[i64]) -> Marginals {
        let (point, _) = two_phase_greedy(lattice).unwrap();
        let v = point
            .values()
            .iter()
            .enumerate()
            .map(|(e, x)| rational::min(x + ratio(bump[e % bump.len()], 10), Rational::one()))
            .collect();
        Marginals::new(v).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn rooted_cuts_satisfy_axioms((k, edges, alpha, b) in graph_strategy(6)) {
            let lattice = build_cut(k, edges, &alpha, b);
            prop_assert_eq!(check_lattice_axioms(&lattice).unwrap(), None);
        }

        #[test]
        fn greedy_supports_are_valid((k, edges, alpha, b) in graph_strategy(6), costs in proptest::collection::vec(0i64..5, 9)) {
            let lattice = build_cut(k, edges, &alpha, b);
            let m = lattice.ground_size();
            let c: Vec<Rational> = (0..m).map(|e| Rational::from_integer(costs[e].into())).collect();
            let g = greedy(&lattice, &c, &Rational::zero()).unwrap();
            prop_assert_eq!(check_greedy_support(&lattice, &g.support, &g.point, &Rational::zero()).unwrap(), None);
            // The greedy point is optimal: compare with the LP over all cut rows.
            let mut lp = LinearProgram::new(m);
            lp.set_objective(Sense::Minimize, c.clone());
            for (p, pi) in lattice.members().unwrap() {
                let row: Vec<Rational> = (0..m).map(|e| if p.contains(e) { Rational::one() } else { Rational::zero() }).collect();
                lp.add(row, Relation::Ge, pi);
            }
            let sol = crate::exactlp::solve(&lp).unwrap();
            let gv: Rational = c.iter().zip(&g.point).map(|(a, b)| a * b).sum();
            prop_assert_eq!(sol.value, gv.clone());
            prop_assert_eq!(g.dual_value(&Rational::zero()), gv);
        }

        #[test]
        fn separation_matches_enumeration((k, edges, alpha, b) in graph_strategy(7), rho in proptest::collection::vec(0i64..=10, 9)) {
            let lattice = build_cut(k, edges, &alpha, b);
            let m = lattice.ground_size();
            let rho = Marginals::new((0..m).map(|e| ratio(rho[e], 10)).collect()).unwrap();
            let fast = max_violation(&lattice, rho.values(), &Limits::default()).unwrap().unwrap();
            let slow = max_violated_by_enumeration(&lattice.members().unwrap(), rho.values()).unwrap();
            prop_assert_eq!(&fast.1, &slow.1);
            prop_assert_eq!(lattice.requirement_of(lattice.shore(fast.0).unwrap()) - rho.sum_over(fast.0), fast.1);
        }

        #[test]
        fn truncated_supports_stay_greedy((k, edges, alpha, b) in graph_strategy(6)) {
            let lattice = Arc::new(build_cut(k, edges, &alpha, b));
            let inst = instance(lattice.clone());
            let (point, support) = two_phase_greedy(lattice.as_ref()).unwrap();
            let out = decompose_extreme(&inst, &point, &support).unwrap();
            let mut state = ResidualState::initial(&point);
            for step in &out.steps {
                let mut r = state.rho_bar.values().to_vec();
                for e in step.support.iter() {
                    r[e] -= &step.epsilon;
                }
                state.rho_bar = Marginals::new(r).unwrap();
                state.offset += &step.epsilon;
                let cut = support.truncated(support.truncation(&state.offset));
                prop_assert_eq!(
                    check_greedy_support(lattice.as_ref(), &cut, state.rho_bar.values(), &state.offset).unwrap(),
                    None
                );
            }
            // Each candidate hits every support member exactly once.
            let mut offset = Rational::zero();
            for step in &out.steps {
                let m = support.truncation(&offset);
                for p in &support.members[..m] {
                    prop_assert_eq!(p.intersection(step.support).len(), 1);
                }
                offset += &step.epsilon;
            }
            prop_assert!(verify(&inst, &point, &out.decomposition).unwrap().is_ok());
        }

        #[test]
        fn caratheodory_recombines((k, edges, alpha, b) in graph_strategy(6), bump in proptest::collection::vec(0i64..=5, 1..9)) {
            let lattice = build_cut(k, edges, &alpha, b);
            let rho = feasible_point(&lattice, &bump);
            let car = caratheodory_decompose(&lattice, &rho).unwrap();
            prop_assert!(car.parts.len() <= lattice.ground_size() + 1);
            prop_assert!(car.ray.iter().all(|r| !r.is_negative()));
            let total: Rational = car.parts.iter().map(|(w, _, _)| w.clone()).sum();
            prop_assert_eq!(total, Rational::one());
            for (w, point, support) in &car.parts {
                prop_assert!(w.is_positive());
                prop_assert_eq!(check_greedy_support(&lattice, support, point.values(), &Rational::zero()).unwrap(), None);
            }
            let mut sum = car.ray.clone();
            for (w, point, _) in &car.parts {
                for (acc, x) in sum.iter_mut().zip(point.values()) {
                    *acc += w * x;
                }
            }
            prop_assert_eq!(sum.as_slice(), rho.values());
        }

        #[test]
        fn lattice_decomposition_is_feasible((k, edges, alpha, b) in graph_strategy(6), bump in proptest::collection::vec(0i64..=5, 1..9)) {
            let lattice = Arc::new(build_cut(k, edges, &alpha, b));
            let inst = instance(lattice.clone());
            let rho = feasible_point(lattice.as_ref(), &bump);
            let z = decompose_lattice(&inst, lattice.as_ref(), &rho, &Limits::default()).unwrap();
            prop_assert!(verify(&inst, &rho, &z).unwrap().is_ok());
            // Independent check on a plain member list.
            let plain = ExplicitSystem::from_pairs(lattice.ground_size(), lattice.members().unwrap()).unwrap();
            let plain = Instance::new(GroundSet::numbered(lattice.ground_size()), Arc::new(plain)).unwrap();
            prop_assert!(check_star(&plain, &rho).unwrap().is_feasible());
            prop_assert!(verify(&plain, &rho, &z).unwrap().is_ok());
        }
    }
}
