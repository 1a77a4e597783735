//! Abstract networks: families whose members carry linear orders and are
//! closed under crossing, with s-t paths of a digraph as the main instance.
//!
//! For a tight member `P`, every element of `P` that comes after the first
//! element with positive residual marginal is left out of the support
//! candidate.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::model::{
    max_violated_by_enumeration, sum_over, AscOracle, Marginals, Requirements, ResidualState,
    SetSystem, StarCheck,
};
use crate::rational::{self, Rational};
use crate::subset::Subset;

/// Builds the order of `P ×_e Q` from the order of `P`, the crossing element
/// and the order of `Q`.
pub type CrossRule = Arc<dyn Fn(&[usize], usize, &[usize]) -> Vec<usize> + Send + Sync>;

/// Ordered family with requirements and a fixed crossing choice.
#[derive(Clone)]
pub struct AbstractNetwork {
    n: usize,
    orders: Vec<Vec<usize>>,
    sets: Vec<Subset>,
    pi: Vec<Rational>,
    index: HashMap<Subset, usize>,
    rule: Option<CrossRule>,
}

/// Result of testing the weak conservation law.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Conservation {
    Ok,
    CounterExample { p: Subset, q: Subset, e: usize },
}

impl AbstractNetwork {
    /// Members are given by their orders. The crossing `P ×_e Q` is the member
    /// equal to `prefix(P, e) ∪ suffix(Q, e)` when there is one, and otherwise
    /// the first listed member contained in it.
    pub fn new(
        n: usize,
        orders: Vec<Vec<usize>>,
        req: &Requirements,
        limits: &Limits,
    ) -> Result<Self> {
        Self::build(n, orders, req, limits, None)
    }

    /// Like [`AbstractNetwork::new`] with a custom crossing rule. The rule's
    /// output must be a member; [`AbstractNetwork::check_crossing`] verifies
    /// the containment condition.
    pub fn with_rule(
        n: usize,
        orders: Vec<Vec<usize>>,
        req: &Requirements,
        limits: &Limits,
        rule: CrossRule,
    ) -> Result<Self> {
        Self::build(n, orders, req, limits, Some(rule))
    }

    fn build(
        n: usize,
        orders: Vec<Vec<usize>>,
        req: &Requirements,
        limits: &Limits,
        rule: Option<CrossRule>,
    ) -> Result<Self> {
        if orders.len() > limits.paths {
            return Err(Error::ScaleExceeded {
                what: format!("{} members", orders.len()),
                limit: limits.paths,
            });
        }
        let mut sets = Vec::with_capacity(orders.len());
        let mut pi = Vec::with_capacity(orders.len());
        let mut index = HashMap::new();
        for (i, order) in orders.iter().enumerate() {
            let mut set = Subset::EMPTY;
            for &e in order {
                if e >= n {
                    return Err(Error::InvalidInput(format!(
                        "member {i} uses element {e} outside the ground set"
                    )));
                }
                if set.contains(e) {
                    return Err(Error::InvalidInput(format!(
                        "member {i} lists element {e} twice"
                    )));
                }
                set = set.with(e);
            }
            if index.insert(set, i).is_some() {
                return Err(Error::InvalidInput(format!(
                    "member {i} repeats the set {set:?}"
                )));
            }
            let v = req
                .eval(set)
                .ok_or_else(|| Error::InvalidInput(format!("no requirement for member {set:?}")))?;
            if v > Rational::one() {
                return Err(Error::InvalidInput(format!(
                    "requirement {} of member {set:?} exceeds 1",
                    rational::format(&v)
                )));
            }
            sets.push(set);
            pi.push(v);
        }
        Ok(AbstractNetwork {
            n,
            orders,
            sets,
            pi,
            index,
            rule,
        })
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn order(&self, i: usize) -> &[usize] {
        &self.orders[i]
    }

    pub fn set(&self, i: usize) -> Subset {
        self.sets[i]
    }

    pub fn requirement(&self, i: usize) -> &Rational {
        &self.pi[i]
    }

    /// Member realizing `P ×_e Q` for member indices `p`, `q` and `e ∈ P ∩ Q`.
    pub fn cross(&self, p: usize, e: usize, q: usize) -> Result<usize> {
        let (po, qo) = (&self.orders[p], &self.orders[q]);
        if let Some(rule) = &self.rule {
            let r = rule(po, e, qo);
            let set: Subset = r.iter().copied().collect();
            return self.index.get(&set).copied().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "crossing of members {p} and {q} at {e} is not a member"
                ))
            });
        }
        let bound = prefix(po, e).union(suffix(qo, e));
        if let Some(&r) = self.index.get(&bound) {
            return Ok(r);
        }
        self.sets
            .iter()
            .position(|s| s.is_subset_of(bound))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "family is not closed under crossing members {p} and {q} at {e}"
                ))
            })
    }

    /// First triple violating the containment condition of crossings.
    pub fn check_crossing(&self) -> Result<Option<(usize, usize, usize)>> {
        for p in 0..self.len() {
            for q in 0..self.len() {
                for e in self.sets[p].intersection(self.sets[q]).iter() {
                    let r = self.cross(p, e, q)?;
                    let bound = prefix(&self.orders[p], e).union(suffix(&self.orders[q], e));
                    if !self.sets[r].is_subset_of(bound) {
                        return Ok(Some((p, q, e)));
                    }
                }
            }
        }
        Ok(None)
    }

    /// Tests `π_P + π_Q ≥ π_{P×_eQ} + π_{Q×_eP}` over all pairs and common
    /// elements.
    pub fn check_weak_conservation(&self) -> Result<Conservation> {
        for p in 0..self.len() {
            for q in p..self.len() {
                for e in self.sets[p].intersection(self.sets[q]).iter() {
                    let a = self.cross(p, e, q)?;
                    let b = self.cross(q, e, p)?;
                    if &self.pi[p] + &self.pi[q] < &self.pi[a] + &self.pi[b] {
                        return Ok(Conservation::CounterExample {
                            p: self.sets[p],
                            q: self.sets[q],
                            e,
                        });
                    }
                }
            }
        }
        Ok(Conservation::Ok)
    }

    /// Indices of members with `ρ̄(P) = π_P − λ`.
    pub fn enumerate_tight(&self, state: &ResidualState) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| state.is_tight(self.sets[i], &self.pi[i]))
            .collect()
    }
}

/// Elements `p` with `p ⪯ e` in `order`.
fn prefix(order: &[usize], e: usize) -> Subset {
    let end = order.iter().position(|&x| x == e).map_or(0, |i| i + 1);
    order[..end].iter().copied().collect()
}

/// Elements `q` with `e ⪯ q` in `order`.
fn suffix(order: &[usize], e: usize) -> Subset {
    let start = order.iter().position(|&x| x == e).unwrap_or(order.len());
    order[start..].iter().copied().collect()
}

/// `E_ρ̄` minus every element of a tight member that follows the member's
/// first element with positive residual marginal.
pub fn asc_from_tight<'a, I>(tight: I, support: Subset) -> Subset
where
    I: IntoIterator<Item = &'a [usize]>,
{
    let mut s = support;
    for order in tight {
        if let Some(first) = order.iter().position(|&e| support.contains(e)) {
            for &e in &order[first + 1..] {
                s = s.without(e);
            }
        }
    }
    s
}

impl SetSystem for AbstractNetwork {
    fn ground_size(&self) -> usize {
        self.n
    }

    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>> {
        Ok(max_violated_by_enumeration(&self.members()?, weights))
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        Ok(self
            .sets
            .iter()
            .copied()
            .zip(self.pi.iter().cloned())
            .collect())
    }

    fn is_explicit(&self) -> bool {
        true
    }
}

impl AscOracle for AbstractNetwork {
    fn next_asc(&self, state: &ResidualState) -> Result<Subset> {
        let tight = self.enumerate_tight(state);
        Ok(asc_from_tight(
            tight.iter().map(|&i| self.orders[i].as_slice()),
            state.rho_bar.support(),
        ))
    }
}

/// Simple s-t paths of a digraph. Arc `i` is ground element `i`.
pub struct DigraphPathSystem {
    nodes: usize,
    arcs: Vec<(usize, usize)>,
    source: usize,
    sink: usize,
    req: Requirements,
    limits: Limits,
    paths: OnceLock<Vec<Vec<usize>>>,
}

impl DigraphPathSystem {
    pub fn new(
        nodes: usize,
        arcs: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
        req: Requirements,
        limits: Limits,
    ) -> Result<Self> {
        if source >= nodes || sink >= nodes {
            return Err(Error::InvalidInput("source or sink is not a node".into()));
        }
        if source == sink {
            return Err(Error::InvalidInput("source and sink coincide".into()));
        }
        if arcs.len() > 64 {
            return Err(Error::ScaleExceeded {
                what: format!("{} arcs", arcs.len()),
                limit: 64,
            });
        }
        if let Some((i, _)) = arcs
            .iter()
            .enumerate()
            .find(|(_, &(u, v))| u >= nodes || v >= nodes)
        {
            return Err(Error::InvalidInput(format!(
                "arc {i} has an endpoint outside the node set"
            )));
        }
        if let Requirements::Affine(mu) = &req {
            if mu.len() != arcs.len() {
                return Err(Error::DimensionMismatch {
                    expected: arcs.len(),
                    found: mu.len(),
                });
            }
            if let Some(v) = mu.iter().find(|v| !rational::in_unit_interval(v)) {
                return Err(Error::InvalidInput(format!(
                    "affine coefficient {} outside [0, 1]",
                    rational::format(v)
                )));
            }
        }
        let sys = DigraphPathSystem {
            nodes,
            arcs,
            source,
            sink,
            req,
            limits,
            paths: OnceLock::new(),
        };
        let zeros = vec![Rational::zero(); sys.arcs.len()];
        if sys.dijkstra(&zeros, sys.source, false)[sys.sink].is_none() {
            return Err(Error::NoPath {
                source_node: source.to_string(),
                sink: sink.to_string(),
            });
        }
        Ok(sys)
    }

    pub fn arcs(&self) -> &[(usize, usize)] {
        &self.arcs
    }

    pub fn requirements(&self) -> &Requirements {
        &self.req
    }

    /// All simple s-t paths as arc sequences, in depth-first order.
    pub fn paths(&self) -> Result<&[Vec<usize>]> {
        if let Some(p) = self.paths.get() {
            return Ok(p);
        }
        let all = self.simple_paths(|_| true)?;
        Ok(self.paths.get_or_init(|| all))
    }

    fn simple_paths(&self, allowed: impl Fn(usize) -> bool) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        let mut visited = vec![false; self.nodes];
        let mut stack = Vec::new();
        visited[self.source] = true;
        self.extend_paths(self.source, &allowed, &mut visited, &mut stack, &mut out)?;
        Ok(out)
    }

    fn extend_paths(
        &self,
        u: usize,
        allowed: &dyn Fn(usize) -> bool,
        visited: &mut [bool],
        stack: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) -> Result<()> {
        if u == self.sink {
            if out.len() == self.limits.paths {
                return Err(Error::ScaleExceeded {
                    what: "s-t path enumeration".into(),
                    limit: self.limits.paths,
                });
            }
            out.push(stack.clone());
            return Ok(());
        }
        for (a, &(x, v)) in self.arcs.iter().enumerate() {
            if x != u || visited[v] || !allowed(a) {
                continue;
            }
            visited[v] = true;
            stack.push(a);
            self.extend_paths(v, allowed, visited, stack, out)?;
            stack.pop();
            visited[v] = false;
        }
        Ok(())
    }

    /// Distances from `root` (or to `root` when `reverse`) under nonnegative
    /// arc weights.
    fn dijkstra(&self, weights: &[Rational], root: usize, reverse: bool) -> Vec<Option<Rational>> {
        self.dijkstra_tree(weights, root, reverse).0
    }

    fn dijkstra_tree(
        &self,
        weights: &[Rational],
        root: usize,
        reverse: bool,
    ) -> (Vec<Option<Rational>>, Vec<Option<usize>>) {
        let mut dist: Vec<Option<Rational>> = vec![None; self.nodes];
        let mut pred: Vec<Option<usize>> = vec![None; self.nodes];
        let mut done = vec![false; self.nodes];
        dist[root] = Some(Rational::zero());
        loop {
            let next = (0..self.nodes)
                .filter(|&v| !done[v])
                .filter_map(|v| dist[v].as_ref().map(|d| (v, d)))
                .min_by(|a, b| a.1.cmp(b.1))
                .map(|(v, _)| v);
            let Some(u) = next else { break };
            done[u] = true;
            let du = dist[u].clone().expect("reached");
            for (a, &(x, y)) in self.arcs.iter().enumerate() {
                let (from, to) = if reverse { (y, x) } else { (x, y) };
                if from != u || done[to] {
                    continue;
                }
                let cand = &du + &weights[a];
                if dist[to].as_ref().is_none_or(|d| cand < *d) {
                    dist[to] = Some(cand);
                    pred[to] = Some(a);
                }
            }
        }
        (dist, pred)
    }

    fn affine_weights(&self, mu: &[Rational], weights: &[Rational]) -> Vec<Rational> {
        mu.iter().zip(weights).map(|(m, w)| m + w).collect()
    }

    /// Shortest s-t path under `μ + w`, as `(arc set, 1 − length)`.
    fn shortest_affine(&self, mu: &[Rational], weights: &[Rational]) -> (Subset, Rational) {
        let w = self.affine_weights(mu, weights);
        let (dist, pred) = self.dijkstra_tree(&w, self.source, false);
        let mut set = Subset::EMPTY;
        let mut v = self.sink;
        while v != self.source {
            let a = pred[v].expect("sink reachable");
            set = set.with(a);
            v = self.arcs[a].0;
        }
        (
            set,
            Rational::one() - dist[self.sink].clone().expect("sink reachable"),
        )
    }

    /// Most violated covering inequality for affine requirements, by a
    /// shortest path computation.
    pub fn max_violated_affine(&self, rho: &Marginals) -> Result<StarCheck> {
        let Requirements::Affine(mu) = &self.req else {
            return Err(Error::InvalidInput("requirements are not affine".into()));
        };
        if rho.len() != self.arcs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.arcs.len(),
                found: rho.len(),
            });
        }
        Ok(StarCheck::from_max(Some(
            self.shortest_affine(mu, rho.values()),
        )))
    }

    /// Tight paths of the residual state as arc sequences.
    pub fn tight_paths(&self, state: &ResidualState) -> Result<Vec<Vec<usize>>> {
        let rho = state.rho_bar.values();
        match &self.req {
            Requirements::Affine(mu) => {
                let w = self.affine_weights(mu, rho);
                let from = self.dijkstra(&w, self.source, false);
                let to = self.dijkstra(&w, self.sink, true);
                let d = from[self.sink].clone().expect("sink reachable");
                if d != Rational::one() - &state.offset {
                    return Ok(Vec::new());
                }
                let tight_arc = |a: usize| {
                    let (u, v) = self.arcs[a];
                    match (&from[u], &to[v]) {
                        (Some(du), Some(dv)) => du + &w[a] + dv == d,
                        _ => false,
                    }
                };
                self.simple_paths(tight_arc)
            }
            _ => {
                let mut out = Vec::new();
                for path in self.paths()? {
                    let set: Subset = path.iter().copied().collect();
                    if state.is_tight(set, &self.eval(set)?) {
                        out.push(path.clone());
                    }
                }
                Ok(out)
            }
        }
    }

    fn eval(&self, set: Subset) -> Result<Rational> {
        let v = self
            .req
            .eval(set)
            .ok_or_else(|| Error::InvalidInput(format!("no requirement for path {set:?}")))?;
        if v > Rational::one() {
            return Err(Error::InvalidInput(format!(
                "requirement {} of path {set:?} exceeds 1",
                rational::format(&v)
            )));
        }
        Ok(v)
    }

    /// The explicit abstract network of all paths, crossing by concatenation
    /// with loops erased.
    pub fn to_network(&self) -> Result<AbstractNetwork> {
        let arcs = self.arcs.clone();
        let rule: CrossRule = Arc::new(move |p, e, q| cross_paths(&arcs, p, e, q));
        AbstractNetwork::with_rule(
            self.arcs.len(),
            self.paths()?.to_vec(),
            &self.req,
            &self.limits,
            rule,
        )
    }
}

/// Prefix of `p` through `e` followed by the suffix of `q` after `e`,
/// shortcut at every repeated node.
pub fn cross_paths(arcs: &[(usize, usize)], p: &[usize], e: usize, q: &[usize]) -> Vec<usize> {
    let i = p.iter().position(|&x| x == e).expect("e on p");
    let j = q.iter().position(|&x| x == e).expect("e on q");
    let mut out: Vec<usize> = Vec::new();
    let mut nodes: Vec<usize> = vec![arcs[p[0]].0];
    for &a in p[..=i].iter().chain(&q[j + 1..]) {
        let head = arcs[a].1;
        if let Some(k) = nodes.iter().position(|&v| v == head) {
            nodes.truncate(k + 1);
            out.truncate(k);
        } else {
            nodes.push(head);
            out.push(a);
        }
    }
    out
}

impl SetSystem for DigraphPathSystem {
    fn ground_size(&self) -> usize {
        self.arcs.len()
    }

    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>> {
        if let Requirements::Affine(mu) = &self.req {
            if weights.iter().all(|w| !w.is_negative()) {
                return Ok(Some(self.shortest_affine(mu, weights)));
            }
        }
        Ok(max_violated_by_enumeration(&self.members()?, weights))
    }

    fn members(&self) -> Result<Vec<(Subset, Rational)>> {
        self.paths()?
            .iter()
            .map(|p| {
                let set: Subset = p.iter().copied().collect();
                Ok((set, self.eval(set)?))
            })
            .collect()
    }

    fn is_explicit(&self) -> bool {
        !matches!(self.req, Requirements::Affine(_))
    }
}

impl AscOracle for DigraphPathSystem {
    fn next_asc(&self, state: &ResidualState) -> Result<Subset> {
        let tight = self.tight_paths(state)?;
        Ok(asc_from_tight(
            tight.iter().map(Vec::as_slice),
            state.rho_bar.support(),
        ))
    }
}

/// `w(P)` helper for tests and callers holding arc sequences.
pub fn path_weight(weights: &[Rational], path: &[usize]) -> Rational {
    sum_over(weights, path.iter().copied().collect())
}
