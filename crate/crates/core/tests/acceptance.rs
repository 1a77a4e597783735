//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every check is exact (rational arithmetic) except the Monte-Carlo
//! comparison in criterion 6, whose tolerance is pinned at `MC_TOL`.
//! Instances come from fixed seeds, so reruns are reproducible.

use std::collections::HashMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use mdx_core::abstract_network::DigraphPathSystem;
use mdx_core::apps::committee::{committee_round, CommitteeInstance};
use mdx_core::apps::coverage::{solve_robust_coverage, CoverageInstance, Scenario};
use mdx_core::apps::security::{solve_security_game, SecurityGame, SecurityModel, SmugglingTree};
use mdx_core::balanced::{find_odd_special_cycle, perfect_decompose, Hypergraph};
use mdx_core::engine::{decompose_with, iteration_bound, EngineOptions, Outcome};
use mdx_core::exactlp::{solve, LinearProgram, LpStatus, Relation, Sense};
use mdx_core::lattice::{
    caratheodory_decompose, check_greedy_support, check_lattice_axioms, decompose_extreme,
    decompose_lattice, lattice_instance, two_phase_greedy, LatticeOracle, RootedCutLattice,
};
use mdx_core::rational::{self, Rational};
use mdx_core::supermodular::SupermodularOracle;
use mdx_core::{
    check_star, AscOracle, Decomposition, Error, GroundSet, Instance, Limits, Marginals, SetSystem,
    StarCheck, Subset,
};
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PER_FAMILY: usize = 500;
const STAR_CASES: usize = 100;
const LATTICE_CASES: usize = 200;
const HYPERGRAPHS: usize = 1000;
const RHO_PER_HYPERGRAPH: usize = 50;
const COMMITTEES: usize = 100;
const MC_DRAWS: usize = 100_000;
const MC_TOL: f64 = 0.01;
const SECURITY_CASES: usize = 100;
const COVERAGE_CASES: usize = 100;

type Members = Vec<(Subset, Rational)>;
type Check = std::result::Result<String, String>;

fn q(num: i64, den: i64) -> Rational {
    rational::ratio(num, den)
}

fn int(n: i64) -> Rational {
    rational::int(n)
}

fn sum_over(x: &[Rational], p: Subset) -> Rational {
    p.iter().map(|e| x[e].clone()).sum()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Probability that `z` hits `p`, computed from scratch.
fn hit(z: &Decomposition, p: Subset) -> Rational {
    z.iter()
        .filter(|(s, _)| s.intersects(p))
        .map(|(_, w)| w.clone())
        .sum()
}

/// Normalization, nonnegativity, exact marginals and every hitting row.
fn check_feasible(
    members: &Members,
    rho: &[Rational],
    z: &Decomposition,
    what: &str,
) -> std::result::Result<(), String> {
    let n = rho.len();
    let mut total = Rational::zero();
    let mut marg = vec![Rational::zero(); n];
    for (s, w) in z.iter() {
        ensure(w.is_positive(), || format!("{what}: weight {w} on {s:?}"))?;
        ensure(s.is_subset_of(Subset::full(n)), || {
            format!("{what}: set {s:?} leaves E")
        })?;
        total += w;
        for e in s.iter() {
            marg[e] += w;
        }
    }
    ensure(total.is_one(), || format!("{what}: total {total}"))?;
    ensure(marg == rho, || {
        format!("{what}: marginals {marg:?} != {rho:?}")
    })?;
    for (p, pi) in members {
        let h = hit(z, *p);
        ensure(h >= *pi, || format!("{what}: {p:?} hit {h} < {pi}"))?;
    }
    Ok(())
}

/// Loop count against `C(n, 2) + n`.
fn check_bound(out: &Outcome, n: usize, what: &str) -> std::result::Result<(), String> {
    let bound = n * (n - 1) / 2 + n;
    ensure(out.iterations() <= bound, || {
        format!("{what}: {} iterations > {bound}", out.iterations())
    })
}

/// Replays the engine steps and checks the residual invariants after each
/// one and the terminal offset.
fn replay(
    members: &Members,
    rho: &Marginals,
    out: &Outcome,
    what: &str,
) -> std::result::Result<(), String> {
    let mut bar = rho.values().to_vec();
    let mut offset = Rational::zero();
    for (i, step) in out.steps.iter().enumerate() {
        ensure(step.epsilon.is_positive(), || {
            format!("{what}: step {i} has ε = {}", step.epsilon)
        })?;
        for e in step.support.iter() {
            bar[e] -= &step.epsilon;
        }
        offset += &step.epsilon;
        ensure(bar.iter().all(|x| !x.is_negative()), || {
            format!("{what}: step {i} leaves ρ̄ = {bar:?}")
        })?;
        for (p, pi) in members {
            ensure(sum_over(&bar, *p) >= pi - &offset, || {
                format!("{what}: step {i} breaks the residual covering row of {p:?}")
            })?;
        }
    }
    let pi_max = members
        .iter()
        .map(|(_, pi)| pi.clone())
        .max()
        .unwrap_or_else(Rational::zero);
    if pi_max.is_positive() {
        ensure(offset == pi_max, || {
            format!("{what}: Σε = {offset}, max π = {pi_max}")
        })?;
    } else {
        ensure(out.steps.is_empty(), || {
            format!("{what}: steps with no positive requirement")
        })?;
    }
    Ok(())
}

/// Random marginals on a grid of tenths.
fn random_rho(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n).map(|_| q(rng.gen_range(0..=10), 10)).collect()
}

/// Raises entries along violated members until the covering condition holds.
fn repair(rng: &mut ChaCha8Rng, inst: &Instance, mut rho: Vec<Rational>) -> Marginals {
    loop {
        let m = Marginals::new(rho.clone()).unwrap();
        match check_star(inst, &m).unwrap() {
            StarCheck::Feasible => return m,
            StarCheck::Violated { member, gap } => {
                let open: Vec<usize> = member
                    .iter()
                    .filter(|&e| rho[e] < Rational::one())
                    .collect();
                let e = open[rng.gen_range(0..open.len())];
                let room = Rational::one() - &rho[e];
                rho[e] += rational::min(room, gap);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Instance generators

/// Sum of containment indicators plus a convex function of a modular
/// weight, scaled so that the full set gets a value in `[1/2, 1]`.
fn random_supermodular(rng: &mut ChaCha8Rng, n: usize) -> SupermodularOracle {
    let terms: Vec<(Subset, i64)> = (0..rng.gen_range(0..=3))
        .map(|_| {
            (
                Subset::from_bits(rng.gen_range(1..1u64 << n)),
                rng.gen_range(1..=4),
            )
        })
        .collect();
    let w: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=3)).collect();
    let raw = |p: Subset| -> i64 {
        let a: i64 = terms
            .iter()
            .filter(|(t, _)| t.is_subset_of(p))
            .map(|(_, c)| c)
            .sum();
        let x: i64 = p.iter().map(|e| w[e]).sum();
        a + x * x
    };
    let top = raw(Subset::full(n)).max(1);
    let scale = q(rng.gen_range(5..=10), 10 * top);
    let table: HashMap<Subset, Rational> =
        Subset::all(n).map(|p| (p, int(raw(p)) * &scale)).collect();
    SupermodularOracle::from_table(n, &table, Limits::default()).unwrap()
}

/// DAG on `0..k` with forward arcs, source 0 and sink `k − 1`, and affine
/// requirements `π_P = 1 − μ(P)`.
fn random_dag(rng: &mut ChaCha8Rng, max_arcs: usize) -> DigraphPathSystem {
    loop {
        let k = rng.gen_range(3..=6);
        let mut arcs: Vec<(usize, usize)> = Vec::new();
        let count = rng.gen_range(2..=max_arcs);
        while arcs.len() < count {
            let u = rng.gen_range(0..k - 1);
            let v = rng.gen_range(u + 1..k);
            arcs.push((u, v));
        }
        let mu: Vec<Rational> = arcs.iter().map(|_| q(rng.gen_range(0..=4), 20)).collect();
        let req = mdx_core::Requirements::affine(mu).unwrap();
        if let Ok(sys) = DigraphPathSystem::new(k, arcs, 0, k - 1, req, Limits::default()) {
            return sys;
        }
    }
}

/// Connected graph rooted at 0 with random node weights.
fn random_cuts(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> RootedCutLattice {
    let k = rng.gen_range(2..=max_nodes);
    let mut edges: Vec<(usize, usize)> = (1..k).map(|v| (rng.gen_range(0..v), v)).collect();
    let extra = rng.gen_range(0..=max_edges.saturating_sub(edges.len()));
    for _ in 0..extra {
        let a = rng.gen_range(0..k);
        let b = rng.gen_range(0..k);
        if a != b {
            edges.push((a.min(b), a.max(b)));
        }
    }
    let mut alpha: Vec<Rational> = (0..k).map(|_| int(rng.gen_range(0..=4))).collect();
    alpha[0] = Rational::zero();
    let total: Rational = alpha.iter().sum();
    let beta = rational::max(total, Rational::one()) * q(rng.gen_range(10..=16), 10);
    RootedCutLattice::new(k, edges, 0, alpha, beta, Limits::default()).unwrap()
}

fn cut_instance(lattice: &Arc<RootedCutLattice>) -> Instance {
    let n = lattice.ground_size();
    lattice_instance(GroundSet::numbered(n), lattice.clone(), Limits::default()).unwrap()
}

// ---------------------------------------------------------------------------
// Criteria 1 and 3

struct EngineTally {
    runs: usize,
    /// Largest loop count seen, with the bound for its ground set.
    longest: (usize, usize),
    failures: Vec<String>,
}

impl EngineTally {
    fn new() -> Self {
        EngineTally {
            runs: 0,
            longest: (0, 0),
            failures: Vec::new(),
        }
    }

    fn record(&mut self, out: &Outcome, n: usize, what: &str, feas: &mut Vec<String>) {
        self.runs += 1;
        if let Err(e) = check_bound(out, n, what) {
            feas.push(e);
        }
        if out.iterations() > self.longest.0 {
            self.longest = (out.iterations(), iteration_bound(n));
        }
    }
}

/// Exact feasibility of the engine output (criterion 1) and the per-step
/// invariants (criterion 3) for the three oracle families.
fn engine_runs() -> (Check, Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut feas: Vec<String> = Vec::new();
    let mut tally = EngineTally::new();
    let opts = EngineOptions::default();

    for case in 0..PER_FAMILY {
        let n = rng.gen_range(1..=7);
        let oracle = Arc::new(random_supermodular(&mut rng, n));
        let inst = Instance::new(GroundSet::numbered(n), oracle.clone()).unwrap();
        let rho0 = random_rho(&mut rng, n);
        let rho = repair(&mut rng, &inst, rho0);
        let members = oracle.members().unwrap();
        match decompose_with(&inst, &rho, oracle.as_ref(), &opts) {
            Ok(out) => {
                tally.record(&out, n, &format!("supermodular #{case}"), &mut feas);
                if let Err(e) = check_feasible(
                    &members,
                    rho.values(),
                    &out.decomposition,
                    &format!("supermodular #{case}"),
                ) {
                    feas.push(e);
                }
                if let Err(e) = replay(&members, &rho, &out, &format!("supermodular #{case}")) {
                    tally.failures.push(e);
                }
            }
            Err(e) => feas.push(format!("supermodular #{case}: {e}")),
        }
    }

    for case in 0..PER_FAMILY {
        let sys = Arc::new(random_dag(&mut rng, 7));
        let n = sys.arcs().len();
        let inst = Instance::new(GroundSet::numbered(n), sys.clone()).unwrap();
        let rho0 = random_rho(&mut rng, n);
        let rho = repair(&mut rng, &inst, rho0);
        let members = sys.members().unwrap();
        match decompose_with(&inst, &rho, sys.as_ref() as &dyn AscOracle, &opts) {
            Ok(out) => {
                tally.record(&out, n, &format!("paths #{case}"), &mut feas);
                if let Err(e) = check_feasible(
                    &members,
                    rho.values(),
                    &out.decomposition,
                    &format!("paths #{case}"),
                ) {
                    feas.push(e);
                }
                if let Err(e) = replay(&members, &rho, &out, &format!("paths #{case}")) {
                    tally.failures.push(e);
                }
            }
            Err(e) => feas.push(format!("paths #{case}: {e}")),
        }
    }

    for case in 0..PER_FAMILY {
        let lattice = Arc::new(random_cuts(&mut rng, 6, 7));
        let n = lattice.ground_size();
        let inst = cut_instance(&lattice);
        let rho0 = random_rho(&mut rng, n);
        let rho = repair(&mut rng, &inst, rho0);
        let members = lattice.members().unwrap();
        match decompose_lattice(&inst, lattice.as_ref(), &rho, &Limits::default()) {
            Ok(z) => {
                if let Err(e) = check_feasible(&members, rho.values(), &z, &format!("cuts #{case}"))
                {
                    feas.push(e);
                }
            }
            Err(e) => feas.push(format!("cuts #{case}: {e}")),
        }
        // The engine runs inside: one per Carathéodory vertex.
        let car = match caratheodory_decompose(lattice.as_ref(), &rho) {
            Ok(car) => car,
            Err(e) => {
                feas.push(format!("cuts #{case}: {e}"));
                continue;
            }
        };
        for (j, (_, point, support)) in car.parts.iter().enumerate() {
            match decompose_extreme(&inst, point, support) {
                Ok(out) => {
                    let what = format!("cuts #{case} vertex {j}");
                    tally.record(&out, n, &what, &mut feas);
                    if let Err(e) =
                        check_feasible(&members, point.values(), &out.decomposition, &what)
                    {
                        feas.push(e);
                    }
                    if let Err(e) = replay(&members, point, &out, &what) {
                        tally.failures.push(e);
                    }
                }
                Err(e) => feas.push(format!("cuts #{case} vertex {j}: {e}")),
            }
        }
    }

    let c1 = if feas.is_empty() {
        Ok(format!(
            "{} instances per family, {} engine runs, longest run {} iterations (bound {})",
            PER_FAMILY, tally.runs, tally.longest.0, tally.longest.1
        ))
    } else {
        Err(first(&feas))
    };
    let c3 = if tally.failures.is_empty() && feas.is_empty() {
        Ok(format!("{} engine runs replayed step by step", tally.runs))
    } else if tally.failures.is_empty() {
        Err(format!(
            "engine runs failed before replay: {}",
            first(&feas)
        ))
    } else {
        Err(first(&tally.failures))
    };
    (c1, c3)
}

fn first(errors: &[String]) -> String {
    format!(
        "{} failures; first: {}",
        errors.len(),
        errors.first().map_or("", |s| s.as_str())
    )
}

// ---------------------------------------------------------------------------
// Criterion 2

/// `z` as a point of the LP over all subsets: `Σ z_S = 1`, marginals `ρ`,
/// hitting rows `π`.
fn subset_lp(n: usize, members: &Members, rho: &[Rational]) -> LinearProgram {
    let sets: Vec<Subset> = Subset::all(n).collect();
    let mut lp = LinearProgram::new(sets.len());
    let row = |f: &dyn Fn(Subset) -> bool| -> Vec<Rational> {
        sets.iter()
            .map(|s| {
                if f(*s) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect()
    };
    lp.add(row(&|_| true), Relation::Eq, Rational::one());
    for (e, r) in rho.iter().enumerate() {
        lp.add(row(&|s| s.contains(e)), Relation::Eq, r.clone());
    }
    for (p, pi) in members {
        if pi.is_positive() {
            lp.add(row(&|s| s.intersects(*p)), Relation::Ge, pi.clone());
        }
    }
    lp
}

fn as_point(n: usize, z: &Decomposition) -> Vec<Rational> {
    Subset::all(n).map(|s| z.weight(s)).collect()
}

#[derive(Default)]
struct StarTally {
    accepted: usize,
    rejected: usize,
    failures: Vec<String>,
}

impl StarTally {
    /// Accepted marginals must decompose into a point of the subset LP;
    /// rejected ones must make that LP infeasible.
    fn run(
        &mut self,
        what: String,
        n: usize,
        members: &Members,
        rho: &Marginals,
        accepted: bool,
        decompose: impl FnOnce() -> std::result::Result<Decomposition, String>,
    ) {
        let lp = subset_lp(n, members, rho.values());
        if accepted {
            self.accepted += 1;
            match decompose() {
                Ok(z) if lp.is_feasible_point(&as_point(n, &z)) => {}
                Ok(_) => self
                    .failures
                    .push(format!("{what}: output is not a point of the subset LP")),
                Err(e) => self.failures.push(format!("{what}: accepted but {e}")),
            }
        } else {
            self.rejected += 1;
            match solve(&lp) {
                Ok(sol) if sol.status == LpStatus::Infeasible => {}
                Ok(_) => self
                    .failures
                    .push(format!("{what}: rejected but the subset LP is feasible")),
                Err(e) => self.failures.push(format!("{what}: {e}")),
            }
        }
    }
}

/// Half the marginals are repaired into the covering region; the rest are
/// raw draws that may or may not satisfy it.
fn star_rho(rng: &mut ChaCha8Rng, inst: &Instance, n: usize) -> Marginals {
    let raw = random_rho(rng, n);
    if rng.gen_bool(0.5) {
        repair(rng, inst, raw)
    } else {
        Marginals::new(raw).unwrap()
    }
}

fn star_sufficiency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut t = StarTally::default();
    let opts = EngineOptions::default();
    for case in 0..STAR_CASES {
        let n = rng.gen_range(1..=6);
        let oracle = Arc::new(random_supermodular(&mut rng, n));
        let inst = Instance::new(GroundSet::numbered(n), oracle.clone()).unwrap();
        let rho = star_rho(&mut rng, &inst, n);
        let ok = check_star(&inst, &rho).unwrap().is_feasible();
        let members = oracle.members().unwrap();
        t.run(
            format!("supermodular #{case}"),
            n,
            &members,
            &rho,
            ok,
            || {
                decompose_with(&inst, &rho, oracle.as_ref(), &opts)
                    .map(|out| out.decomposition)
                    .map_err(|e| e.to_string())
            },
        );
    }
    for case in 0..STAR_CASES {
        let sys = Arc::new(random_dag(&mut rng, 9));
        let n = sys.arcs().len();
        let inst = Instance::new(GroundSet::numbered(n), sys.clone()).unwrap();
        let rho = star_rho(&mut rng, &inst, n);
        let ok = check_star(&inst, &rho).unwrap().is_feasible();
        let members = sys.members().unwrap();
        t.run(format!("paths #{case}"), n, &members, &rho, ok, || {
            decompose_with(&inst, &rho, sys.as_ref() as &dyn AscOracle, &opts)
                .map(|out| out.decomposition)
                .map_err(|e| e.to_string())
        });
    }
    for case in 0..STAR_CASES {
        let lattice = Arc::new(random_cuts(&mut rng, 6, 9));
        let n = lattice.ground_size();
        let inst = cut_instance(&lattice);
        let rho = star_rho(&mut rng, &inst, n);
        let ok = check_star(&inst, &rho).unwrap().is_feasible();
        let members = lattice.members().unwrap();
        t.run(format!("cuts #{case}"), n, &members, &rho, ok, || {
            decompose_lattice(&inst, lattice.as_ref(), &rho, &Limits::default())
                .map_err(|e| e.to_string())
        });
    }
    if t.failures.is_empty() {
        Ok(format!(
            "{} accepted and decomposed, {} rejected with an infeasible subset LP",
            t.accepted, t.rejected
        ))
    } else {
        Err(first(&t.failures))
    }
}

// ---------------------------------------------------------------------------
// Criterion 4

fn lattice_machinery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures: Vec<String> = Vec::new();
    let mut vertices = 0usize;
    let mut fail = |msg: String| failures.push(msg);
    for case in 0..LATTICE_CASES {
        let lattice = Arc::new(random_cuts(&mut rng, 6, 9));
        let n = lattice.ground_size();
        let inst = cut_instance(&lattice);
        if let Some(msg) = check_lattice_axioms(lattice.as_ref()).unwrap() {
            fail(format!("#{case}: lattice axiom: {msg}"));
        }
        let (point, support) = two_phase_greedy(lattice.as_ref()).unwrap();
        if let Some(msg) = check_greedy_support(
            lattice.as_ref(),
            &support,
            point.values(),
            &Rational::zero(),
        )
        .unwrap()
        {
            fail(format!("#{case}: greedy support: {msg}"));
        }
        match decompose_extreme(&inst, &point, &support) {
            Ok(out) => {
                let mut offset = Rational::zero();
                for step in &out.steps {
                    let m = support.truncation(&offset);
                    if let Some(p) = support.members[..m]
                        .iter()
                        .find(|p| p.intersection(step.support).len() != 1)
                    {
                        fail(format!(
                            "#{case}: candidate {:?} meets {p:?} {} times",
                            step.support,
                            p.intersection(step.support).len()
                        ));
                    }
                    offset += &step.epsilon;
                }
                let members = lattice.members().unwrap();
                if let Err(e) = check_feasible(
                    &members,
                    point.values(),
                    &out.decomposition,
                    &format!("#{case}"),
                ) {
                    fail(e);
                }
            }
            Err(e) => fail(format!("#{case}: extreme point: {e}")),
        }

        // Carathéodory on a random point of the covering region.
        let raw = random_rho(&mut rng, n);
        let rho = repair(&mut rng, &inst, raw);
        match caratheodory_decompose(lattice.as_ref(), &rho) {
            Ok(car) => {
                vertices = vertices.max(car.parts.len());
                if car.parts.len() > n + 1 {
                    fail(format!(
                        "#{case}: {} vertices for {n} elements",
                        car.parts.len()
                    ));
                }
                let total: Rational = car.parts.iter().map(|(w, _, _)| w.clone()).sum();
                let mut sum = car.ray.clone();
                for (w, v, s) in &car.parts {
                    if !w.is_positive() {
                        fail(format!("#{case}: weight {w}"));
                    }
                    if let Some(msg) =
                        check_greedy_support(lattice.as_ref(), s, v.values(), &Rational::zero())
                            .unwrap()
                    {
                        fail(format!("#{case}: vertex support: {msg}"));
                    }
                    for (acc, x) in sum.iter_mut().zip(v.values()) {
                        *acc += w * x;
                    }
                }
                if !total.is_one()
                    || car.ray.iter().any(Signed::is_negative)
                    || sum.as_slice() != rho.values()
                {
                    fail(format!("#{case}: recombination is not exact"));
                }
            }
            Err(e) => fail(format!("#{case}: Carathéodory: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{LATTICE_CASES} rooted-cut lattices, at most {vertices} vertices per recombination"
        ))
    } else {
        Err(first(&failures))
    }
}

// ---------------------------------------------------------------------------
// Criterion 5

fn s(ix: &[usize]) -> Subset {
    Subset::from_indices(ix.iter().copied())
}

/// Perfect decomposition check: exact marginals and `Pr[hit P] ≥ min(ρ(P), 1)`.
fn check_perfect(
    h: &Hypergraph,
    rho: &[Rational],
    z: &Decomposition,
) -> std::result::Result<(), String> {
    let members: Members = h
        .members()
        .iter()
        .map(|p| (*p, rational::min(sum_over(rho, *p), Rational::one())))
        .collect();
    check_feasible(&members, rho, z, "perfect")
}

/// Marginal draws mixing tenths with halves, so that odd cycles are hit.
fn dichotomy_rho(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    (0..n)
        .map(|_| match rng.gen_range(0..3) {
            0 => q(rng.gen_range(0..=10), 10),
            1 => q(rng.gen_range(0..=2), 2),
            _ => q(rng.gen_range(0..=4), 4),
        })
        .collect()
}

fn balanced_dichotomy() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let limits = Limits::default();
    let mut failures: Vec<String> = Vec::new();
    let mut graphs: Vec<(String, Hypergraph)> = vec![
        (
            "triangle".into(),
            Hypergraph::new(3, vec![s(&[0, 1]), s(&[1, 2]), s(&[0, 2])]).unwrap(),
        ),
        (
            "intervals".into(),
            Hypergraph::new(
                5,
                vec![
                    s(&[0, 1]),
                    s(&[1, 2, 3]),
                    s(&[3, 4]),
                    s(&[2]),
                    s(&[0, 1, 2, 3, 4]),
                ],
            )
            .unwrap(),
        ),
    ];
    for i in 0..HYPERGRAPHS {
        let n = rng.gen_range(1..=5);
        let m = rng.gen_range(1..=6);
        let members = (0..m)
            .map(|_| Subset::from_bits(rng.gen_range(1..1u64 << n)))
            .collect();
        graphs.push((format!("random #{i}"), Hypergraph::new(n, members).unwrap()));
    }
    let (mut balanced, mut unbalanced, mut caught_randomly) = (0usize, 0usize, 0usize);
    for (name, h) in &graphs {
        let n = h.n();
        let cycle = match find_odd_special_cycle(h, &limits) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        let mut draws: Vec<Vec<Rational>> = (0..RHO_PER_HYPERGRAPH - 1)
            .map(|_| dichotomy_rho(&mut rng, n))
            .collect();
        // The last draw puts 1/2 on a cycle's elements (or on a random set
        // when there is none); every member then needs certain coverage.
        let halves: Subset = match &cycle {
            Some(c) => c.elements.iter().copied().collect(),
            None => Subset::from_bits(rng.gen_range(0..1u64 << n)),
        };
        draws.push(
            (0..n)
                .map(|e| {
                    if halves.contains(e) {
                        q(1, 2)
                    } else {
                        Rational::zero()
                    }
                })
                .collect(),
        );
        let mut failed_at: Option<usize> = None;
        for (j, rho) in draws.iter().enumerate() {
            let m = Marginals::new(rho.clone()).unwrap();
            match perfect_decompose(h, &m, &limits) {
                Ok(z) => {
                    if let Err(e) = check_perfect(h, rho, &z) {
                        failures.push(format!("{name}: {e}"));
                    }
                }
                Err(Error::NotBalanced { .. }) => {
                    failed_at.get_or_insert(j);
                }
                Err(e) => failures.push(format!("{name}: {e}")),
            }
        }
        match &cycle {
            None => {
                balanced += 1;
                if let Some(j) = failed_at {
                    failures.push(format!(
                        "{name}: balanced but draw {j} is not perfectly decomposable"
                    ));
                }
            }
            Some(c) => {
                unbalanced += 1;
                if !h.is_special_cycle(c) || c.elements.len() % 2 == 0 {
                    failures.push(format!("{name}: bad certificate {c:?}"));
                }
                match failed_at {
                    None => failures.push(format!("{name}: odd cycle but every draw decomposed")),
                    Some(j) if j + 1 < RHO_PER_HYPERGRAPH => caught_randomly += 1,
                    Some(_) => {}
                }
            }
        }
    }
    let triangle = perfect_decompose(
        &graphs[0].1,
        &Marginals::new(vec![q(1, 2); 3]).unwrap(),
        &limits,
    );
    if !matches!(triangle, Err(Error::NotBalanced { .. })) {
        failures.push("triangle at 1/2 did not fail with NotBalanced".into());
    }
    if failures.is_empty() {
        Ok(format!(
            "{balanced} balanced, {unbalanced} unbalanced ({caught_randomly} caught before the cycle-derived draw)"
        ))
    } else {
        Err(first(&failures))
    }
}

// ---------------------------------------------------------------------------
// Criterion 6

/// `k` units spread over `n` candidates in steps of `1/d`, each at most 1.
fn committee_rho(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<Rational> {
    let d = 12i64;
    let mut units = vec![0i64; n];
    let mut left = k as i64 * d;
    while left > 0 {
        let e = rng.gen_range(0..n);
        if units[e] < d {
            units[e] += 1;
            left -= 1;
        }
    }
    units.into_iter().map(|u| q(u, d)).collect()
}

fn committee() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let limits = Limits::default();
    let mut failures: Vec<String> = Vec::new();
    let mut mc_case: Option<(CommitteeInstance, Decomposition)> = None;
    for case in 0..COMMITTEES {
        let n = rng.gen_range(2..=6);
        let k = rng.gen_range(1..=3.min(n));
        let rho = committee_rho(&mut rng, n, k);
        // Independent rounding hits P with probability 1 − Π(1 − ρ_e), so
        // scaled-down versions of that are attainable.
        let groups: Members = (0..rng.gen_range(0..=k))
            .map(|_| {
                let p = Subset::from_bits(rng.gen_range(1..1u64 << n));
                let miss: Rational = p.iter().map(|e| Rational::one() - &rho[e]).product();
                (p, (Rational::one() - miss) * q(rng.gen_range(0..=10), 10))
            })
            .collect();
        let inst = match CommitteeInstance::from_marginals(
            Marginals::new(rho.clone()).unwrap(),
            k,
            groups.clone(),
        ) {
            Ok(i) => i,
            Err(e) => {
                failures.push(format!("#{case}: {e}"));
                continue;
            }
        };
        let z = match inst.decompose(&limits) {
            Ok(z) => z,
            Err(e) => {
                failures.push(format!("#{case}: decomposition: {e}"));
                continue;
            }
        };
        let sampler = match committee_round(&inst, &z) {
            Ok(s) => s,
            Err(e) => {
                failures.push(format!("#{case}: rounding: {e}"));
                continue;
            }
        };
        let law = sampler.exact_law();
        let keep = Rational::one() - inst.epsilon();
        let scaled: Members = groups.iter().map(|(p, pi)| (*p, pi * &keep)).collect();
        if let Err(e) = check_feasible(&scaled, &rho, &law, &format!("#{case}")) {
            failures.push(e);
        }
        if let Some((bad, _)) = law.iter().find(|(s, _)| s.len() != k) {
            failures.push(format!(
                "#{case}: committee {bad:?} has size {} != {k}",
                bad.len()
            ));
        }
        if n == 6 && k == 3 && !groups.is_empty() && mc_case.is_none() {
            mc_case = Some((inst, z));
        }
    }
    let Some((inst, z)) = mc_case else {
        return Err("no instance with six candidates, three seats and groups".into());
    };
    let sampler = committee_round(&inst, &z).unwrap();
    let mut draw_rng = ChaCha8Rng::seed_from_u64(60);
    let n = inst.candidates();
    let mut counts = vec![0usize; n];
    for _ in 0..MC_DRAWS {
        let s = sampler.sample_with(&mut draw_rng);
        if s.len() != inst.k() {
            failures.push(format!("Monte-Carlo draw {s:?} has the wrong size"));
            break;
        }
        for e in s.iter() {
            counts[e] += 1;
        }
    }
    let worst = (0..n)
        .map(|e| (counts[e] as f64 / MC_DRAWS as f64 - rational::to_f64(inst.rho().get(e))).abs())
        .fold(0.0, f64::max);
    if worst > MC_TOL {
        failures.push(format!("Monte-Carlo marginal error {worst:.4} > {MC_TOL}"));
    }
    if failures.is_empty() {
        Ok(format!("{COMMITTEES} exact laws; {MC_DRAWS} draws, worst marginal error {worst:.4} (tolerance {MC_TOL})"))
    } else {
        Err(first(&failures))
    }
}

// ---------------------------------------------------------------------------
// Criterion 7

/// Cheapest deterring marginals over the listed rows, solved from scratch.
fn security_lp(n: usize, members: &Members, costs: &[Rational]) -> Rational {
    let mut lp = LinearProgram::new(n);
    lp.set_objective(Sense::Minimize, costs.to_vec());
    for e in 0..n {
        lp.set_bounds(e, Some(Rational::zero()), Some(Rational::one()));
    }
    for (p, pi) in members {
        let row = (0..n)
            .map(|e| {
                if p.contains(e) {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        lp.add(row, Relation::Ge, pi.clone());
    }
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.value
}

/// Edge set of the tree path between two nodes.
fn tree_path(edges: &[(usize, usize)], from: usize, to: usize) -> Subset {
    fn walk(edges: &[(usize, usize)], at: usize, to: usize, came: Option<usize>) -> Option<Subset> {
        if at == to {
            return Some(Subset::EMPTY);
        }
        for (i, &(a, b)) in edges.iter().enumerate() {
            if Some(i) == came {
                continue;
            }
            let next = if a == at {
                b
            } else if b == at {
                a
            } else {
                continue;
            };
            if let Some(rest) = walk(edges, next, to, Some(i)) {
                return Some(rest.with(i));
            }
        }
        None
    }
    walk(edges, from, to, None).unwrap()
}

fn security() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let limits = Limits::default();
    let mut failures: Vec<String> = Vec::new();
    for mode in ["smuggling", "energy"] {
        for case in 0..SECURITY_CASES {
            let (model, members) = if mode == "smuggling" {
                let k = rng.gen_range(2..=7);
                let edges: Vec<(usize, usize)> = (1..k).map(|v| (rng.gen_range(0..v), v)).collect();
                let mut rewards = Vec::new();
                for _ in 0..rng.gen_range(1..=4) {
                    let v = rng.gen_range(0..k);
                    let w = rng.gen_range(0..k);
                    if v != w {
                        rewards.push((v, w, int(rng.gen_range(0..=5))));
                    }
                }
                let total: Rational = rewards.iter().map(|r| r.2.clone()).sum();
                let beta = rational::max(total, Rational::one()) * q(rng.gen_range(10..=15), 10);
                let paths: Vec<(Subset, Rational)> = rewards
                    .iter()
                    .map(|&(v, w, ref a)| (tree_path(&edges, v, w), a.clone()))
                    .collect();
                let members: Members = Subset::all(edges.len())
                    .map(|p| {
                        let r: Rational = paths
                            .iter()
                            .filter(|(t, _)| t.is_subset_of(p))
                            .map(|(_, a)| a.clone())
                            .sum();
                        (p, r / &beta)
                    })
                    .filter(|(_, pi)| pi.is_positive())
                    .collect();
                let tree = SmugglingTree::new(k, edges, rewards, beta).unwrap();
                (SecurityModel::Smuggling(tree), members)
            } else {
                let lattice = random_cuts(&mut rng, 6, 8);
                let members: Members = lattice
                    .members()
                    .unwrap()
                    .into_iter()
                    .filter(|(_, pi)| pi.is_positive())
                    .collect();
                (SecurityModel::EnergyNetwork(lattice), members)
            };
            let n = model.ground_size();
            let costs: Vec<Rational> = (0..n).map(|_| int(rng.gen_range(0..=5))).collect();
            let game = SecurityGame::new(model, costs.clone()).unwrap();
            let what = format!("{mode} #{case}");
            match solve_security_game(&game, &limits) {
                Ok(out) => {
                    let lp = security_lp(n, &members, &costs);
                    let expected: Rational = out
                        .decomposition
                        .iter()
                        .map(|(s, w)| sum_over(&costs, s) * w)
                        .sum();
                    if out.cost != lp || expected != lp {
                        failures.push(format!(
                            "{what}: cost {} / expected {expected} / LP {lp}",
                            out.cost
                        ));
                    }
                    if let Err(e) =
                        check_feasible(&members, out.marginals.values(), &out.decomposition, &what)
                    {
                        failures.push(e);
                    }
                }
                Err(e) => failures.push(format!("{what}: {e}")),
            }
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{SECURITY_CASES} instances per mode match the LP optimum"
        ))
    } else {
        Err(first(&failures))
    }
}

/// Largest worst-case expected profit over all distributions on subsets.
fn coverage_brute_force(n: usize, covers: &[Subset], scenarios: &[Scenario]) -> Rational {
    let sets: Vec<Subset> = Subset::all(n).collect();
    let t = sets.len();
    let mut lp = LinearProgram::new(t + 1);
    lp.set_bounds(t, None, None);
    let mut obj = vec![Rational::zero(); t + 1];
    obj[t] = Rational::one();
    lp.set_objective(Sense::Maximize, obj);
    let mut total = vec![Rational::one(); t + 1];
    total[t] = Rational::zero();
    lp.add(total, Relation::Eq, Rational::one());
    for sc in scenarios {
        let mut row: Vec<Rational> = sets
            .iter()
            .map(|s| {
                let covered = s.iter().fold(Subset::EMPTY, |acc, e| acc.union(covers[e]));
                let gain: Rational = covered.iter().map(|u| sc.rewards[u].clone()).sum();
                sum_over(&sc.costs, *s) - gain
            })
            .collect();
        row.push(Rational::one());
        lp.add(row, Relation::Le, Rational::zero());
    }
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    sol.value
}

fn coverage() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let limits = Limits::default();
    let mut failures: Vec<String> = Vec::new();
    for case in 0..COVERAGE_CASES {
        let n = rng.gen_range(1..=6);
        let u = rng.gen_range(1..=6);
        // Interval covers keep the item-membership hypergraph balanced.
        let covers: Vec<Subset> = (0..n)
            .map(|_| {
                let a = rng.gen_range(0..u);
                let b = rng.gen_range(a..u);
                (a..=b).collect()
            })
            .collect();
        let scenarios: Vec<Scenario> = (0..rng.gen_range(1..=3))
            .map(|_| Scenario {
                rewards: (0..u).map(|_| int(rng.gen_range(0..=5))).collect(),
                costs: (0..n).map(|_| q(rng.gen_range(0..=6), 2)).collect(),
            })
            .collect();
        let brute = coverage_brute_force(n, &covers, &scenarios);
        let inst = CoverageInstance::new(u, covers, scenarios).unwrap();
        match solve_robust_coverage(&inst, &limits) {
            Ok(out) => {
                let worst = inst.worst_case(&out.decomposition);
                if out.t != brute || worst != brute {
                    failures.push(format!(
                        "#{case}: t {} / attained {worst} / brute force {brute}",
                        out.t
                    ));
                }
                if let Err(e) = check_feasible(
                    &Vec::new(),
                    out.rho.values(),
                    &out.decomposition,
                    &format!("#{case}"),
                ) {
                    failures.push(e);
                }
            }
            Err(e) => failures.push(format!("#{case}: {e}")),
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "{COVERAGE_CASES} instances match the brute-force optimum"
        ))
    } else {
        Err(first(&failures))
    }
}

fn applications() -> Check {
    let a = security();
    let b = coverage();
    match (a, b) {
        (Ok(a), Ok(b)) => Ok(format!("security: {a}; coverage: {b}")),
        (Err(e), _) => Err(format!("security: {e}")),
        (_, Err(e)) => Err(format!("coverage: {e}")),
    }
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let started = Instant::now();
    let handles = vec![
        std::thread::spawn(|| {
            let (c1, c3) = engine_runs();
            vec![
                (1, "iteration bound and exact feasibility", c1),
                (3, "engine invariants", c3),
            ]
        }),
        std::thread::spawn(|| vec![(2, "covering-condition sufficiency", star_sufficiency())]),
        std::thread::spawn(|| vec![(4, "lattice machinery", lattice_machinery())]),
        std::thread::spawn(|| vec![(5, "balanced dichotomy", balanced_dichotomy())]),
        std::thread::spawn(|| vec![(6, "committee rounding", committee())]),
        std::thread::spawn(|| vec![(7, "applications", applications())]),
    ];
    let mut results: Vec<(usize, &str, Check)> = Vec::new();
    for h in handles {
        match h.join() {
            Ok(r) => results.extend(r),
            Err(_) => results.push((0, "criterion thread", Err("panicked".into()))),
        }
    }
    results.sort_by_key(|r| r.0);
    let mut ok = true;
    for (id, name, res) in &results {
        match res {
            Ok(detail) => println!("PASS [{id}] {name}: {detail}"),
            Err(why) => {
                ok = false;
                println!("FAIL [{id}] {name}: {why}");
            }
        }
    }
    println!(
        "acceptance finished in {:.1}s",
        started.elapsed().as_secs_f64()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
