//! The generic decomposition loop and the utilities around it.
//!
//! Each iteration asks an [`AscOracle`] for a support candidate `S`, moves
//! probability mass `ε` from the empty set to `S`, and lowers all residual
//! requirements by `ε`. Once no requirement is positive, the remaining mass
//! sits on `∅` and [`lift_marginals`] tops up the marginals.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::model::{
    max_violated_by_enumeration, sum_over, AscOracle, Decomposition, Instance, Marginals,
    Requirements, ResidualState, StarCheck,
};
use crate::rational::{self, Rational};
use crate::subset::Subset;

/// Dominance between members under requirements `req` and marginals `rho`.
///
/// `P ⊑ Q` iff `P = Q`, or `π_P ≤ π_Q − ρ(Q∖P)` and `π_P < π_Q`. Members
/// without a requirement entry only dominate themselves.
pub fn dominates(p: Subset, q: Subset, req: &Requirements, rho: &Marginals) -> bool {
    if p == q {
        return true;
    }
    match (req.eval(p), req.eval(q)) {
        (Some(pi_p), Some(pi_q)) => dominates_values(p, &pi_p, q, &pi_q, rho.values()),
        _ => false,
    }
}

pub fn dominates_values(
    p: Subset,
    pi_p: &Rational,
    q: Subset,
    pi_q: &Rational,
    rho: &[Rational],
) -> bool {
    p == q || (pi_p < pi_q && *pi_p <= pi_q - sum_over(rho, q.difference(p)))
}

/// Members with positive residual requirement that no other such member
/// dominates.
pub fn non_dominated(members: &[(Subset, Rational)], state: &ResidualState) -> Vec<Subset> {
    let positive: Vec<(Subset, Rational)> = members
        .iter()
        .map(|(p, pi)| (*p, state.residual(pi)))
        .filter(|(_, v)| v.is_positive())
        .collect();
    let rho = state.rho_bar.values();
    positive
        .iter()
        .filter(|(p, pp)| {
            !positive
                .iter()
                .any(|(q, pq)| q != p && dominates_values(*p, pp, *q, pq, rho))
        })
        .map(|(p, _)| *p)
        .collect()
}

/// Which admissibility condition a support candidate breaks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AscViolation {
    Empty,
    /// Element outside the residual support.
    Positivity(usize),
    /// Tight member hit more than once.
    Tight(Subset),
    /// Non-dominated positive member missed.
    Cover(Subset),
}

/// Checks a support candidate against the three admissibility conditions by
/// enumerating `members`.
pub fn validate_asc(
    s: Subset,
    state: &ResidualState,
    members: &[(Subset, Rational)],
) -> std::result::Result<(), AscViolation> {
    if s.is_empty() {
        return Err(AscViolation::Empty);
    }
    let support = state.rho_bar.support();
    if let Some(e) = s.difference(support).first() {
        return Err(AscViolation::Positivity(e));
    }
    for (p, pi) in members {
        if state.is_tight(*p, pi) && s.intersection(*p).len() > 1 {
            return Err(AscViolation::Tight(*p));
        }
    }
    for p in non_dominated(members, state) {
        if !s.intersects(p) {
            return Err(AscViolation::Cover(p));
        }
    }
    Ok(())
}

/// Support candidates found by exhaustive search over subsets of the
/// residual support. Works for any explicit family in which candidates
/// exist; returns the lexicographically smallest one.
pub struct BruteForceAsc {
    members: Vec<(Subset, Rational)>,
    limit: usize,
}

impl BruteForceAsc {
    pub fn new(members: Vec<(Subset, Rational)>, limits: &Limits) -> Self {
        BruteForceAsc {
            members,
            limit: limits.engine_subset_elements,
        }
    }
}

impl AscOracle for BruteForceAsc {
    fn next_asc(&self, state: &ResidualState) -> Result<Subset> {
        let support = state.rho_bar.support();
        if support.len() > self.limit {
            return Err(Error::ScaleExceeded {
                what: format!("support candidate search over {} elements", support.len()),
                limit: self.limit,
            });
        }
        let tight: Vec<Subset> = self
            .members
            .iter()
            .filter(|(p, pi)| state.is_tight(*p, pi))
            .map(|(p, _)| *p)
            .collect();
        let cover = non_dominated(&self.members, state);
        let elems: Vec<usize> = support.iter().collect();
        search_lex(&elems, 0, Subset::EMPTY, &tight, &cover)
            .ok_or_else(|| Error::OracleFailure("no admissible support candidate exists".into()))
    }
}

fn search_lex(
    elems: &[usize],
    from: usize,
    cur: Subset,
    tight: &[Subset],
    cover: &[Subset],
) -> Option<Subset> {
    for k in from..elems.len() {
        let next = cur.with(elems[k]);
        if tight.iter().any(|p| next.intersection(*p).len() > 1) {
            continue;
        }
        if cover.iter().all(|p| next.intersects(*p)) {
            return Some(next);
        }
        if let Some(found) = search_lex(elems, k + 1, next, tight, cover) {
            return Some(found);
        }
    }
    None
}

#[derive(Clone, Debug, Default)]
pub struct EngineOptions {
    /// Validate every support candidate and the residual covering condition
    /// by enumeration after every step. Requires an explicit family.
    pub check: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub support: Subset,
    pub epsilon: Rational,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    /// Final decomposition with exact marginals.
    pub decomposition: Decomposition,
    /// Loop output before marginal lifting.
    pub raw: Decomposition,
    pub steps: Vec<Step>,
}

impl Outcome {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
}

/// Largest number of loop iterations for a ground set of `n` elements.
pub fn iteration_bound(n: usize) -> usize {
    n * (n + 1) / 2
}

struct Context<'a> {
    inst: &'a Instance,
    members: Option<Vec<(Subset, Rational)>>,
    pi_max: Option<Rational>,
}

impl<'a> Context<'a> {
    fn new(inst: &'a Instance) -> Result<Self> {
        let members = if inst.system.is_explicit() {
            Some(inst.system.members()?)
        } else {
            None
        };
        let zeros = vec![Rational::zero(); inst.n()];
        let pi_max = match &members {
            Some(m) => m.iter().map(|(_, pi)| pi).max().cloned(),
            None => inst.system.max_violated(&zeros)?.map(|(_, v)| v),
        };
        Ok(Context {
            inst,
            members,
            pi_max,
        })
    }

    fn max_violated(&self, weights: &[Rational]) -> Result<Option<(Subset, Rational)>> {
        match &self.members {
            Some(m) => Ok(max_violated_by_enumeration(m, weights)),
            None => self.inst.system.max_violated(weights),
        }
    }

    fn epsilon(&self, s: Subset, state: &ResidualState) -> Result<Rational> {
        if s.is_empty() {
            return Err(Error::EmptySupport);
        }
        let Some(pi_max) = &self.pi_max else {
            return Err(Error::OracleFailure(
                "empty family has no positive requirement".into(),
            ));
        };
        let rho = state.rho_bar.values();
        let mut t = s.iter().map(|e| &rho[e]).min().cloned().expect("nonempty");
        t = rational::min(t, pi_max - &state.offset);
        if let Some(members) = &self.members {
            for (p, pi) in members {
                let k = p.intersection(s).len();
                if k > 1 {
                    let bound = state.slack(*p, pi) / Rational::from_integer((k as i64 - 1).into());
                    t = rational::min(t, bound);
                }
            }
            return Ok(t);
        }
        // Discrete Newton on the largest violation of the shifted system.
        for _ in 0..s.len() + 2 {
            let w: Vec<Rational> = rho
                .iter()
                .enumerate()
                .map(|(e, r)| if s.contains(e) { r - &t } else { r.clone() })
                .collect();
            let Some((p, v)) = self.max_violated(&w)? else {
                return Ok(t);
            };
            if &v - &state.offset - &t <= Rational::zero() {
                return Ok(t);
            }
            let k = p.intersection(s).len();
            if k <= 1 {
                return Err(Error::OracleFailure(format!(
                    "violated member {} meets the candidate at most once",
                    self.inst.ground.display(p)
                )));
            }
            let pi = &v + sum_over(&w, p);
            t = state.slack(p, &pi) / Rational::from_integer((k as i64 - 1).into());
        }
        Err(Error::OracleFailure(
            "step length search did not converge".into(),
        ))
    }
}

/// Step length for support candidate `s` in residual state `state`:
/// the largest `ε` keeping residual marginals nonnegative and the residual
/// covering condition intact.
pub fn epsilon(s: Subset, state: &ResidualState, inst: &Instance) -> Result<Rational> {
    Context::new(inst)?.epsilon(s, state)
}

/// Runs the decomposition loop with default options.
pub fn decompose(
    inst: &Instance,
    rho: &Marginals,
    oracle: &dyn AscOracle,
) -> Result<Decomposition> {
    Ok(decompose_with(inst, rho, oracle, &EngineOptions::default())?.decomposition)
}

pub fn decompose_with(
    inst: &Instance,
    rho: &Marginals,
    oracle: &dyn AscOracle,
    opts: &EngineOptions,
) -> Result<Outcome> {
    inst.check_marginals(rho)?;
    let ctx = Context::new(inst)?;
    if opts.check && ctx.members.is_none() {
        return Err(Error::FamilyNotEnumerable);
    }
    let n = inst.n();
    let bound = iteration_bound(n);
    let mut state = ResidualState::initial(rho);
    let mut steps = Vec::new();
    let mut rho_bar: Vec<Rational> = rho.values().to_vec();

    while let Some(pi_max) = &ctx.pi_max {
        if pi_max - &state.offset <= Rational::zero() {
            break;
        }
        if let Some((p, v)) = ctx.max_violated(&rho_bar)? {
            let gap = v - &state.offset;
            if gap.is_positive() {
                return Err(Error::InfeasibleMarginals {
                    member: inst.ground.display(p),
                    gap,
                });
            }
        }
        if steps.len() >= bound {
            return Err(Error::IterationOverflow { limit: bound });
        }
        let s = oracle.next_asc(&state)?;
        if s.is_empty() {
            return Err(Error::OracleFailure(
                "oracle returned an empty support candidate".into(),
            ));
        }
        if let Some(e) = s.difference(state.rho_bar.support()).first() {
            return Err(Error::OracleFailure(format!(
                "support candidate contains {} with zero residual marginal",
                inst.ground.name(e)
            )));
        }
        if opts.check {
            let members = ctx.members.as_ref().expect("checked above");
            validate_asc(s, &state, members).map_err(|v| {
                Error::OracleFailure(format!("inadmissible support candidate: {v:?}"))
            })?;
        }
        let eps = ctx.epsilon(s, &state)?;
        if !eps.is_positive() {
            return Err(Error::OracleFailure(format!(
                "support candidate {} admits no progress",
                inst.ground.display(s)
            )));
        }
        for e in s.iter() {
            rho_bar[e] -= &eps;
        }
        state.offset += &eps;
        state.iteration += 1;
        state.rho_bar = Marginals::new_unchecked(rho_bar.clone());
        if opts.check {
            check_residual(&ctx, &state)?;
        }
        steps.push(Step {
            support: s,
            epsilon: eps,
        });
    }

    let mut raw = Decomposition::default();
    let mut total = Rational::zero();
    for step in &steps {
        raw.add(step.support, &step.epsilon);
        total += &step.epsilon;
    }
    raw.add(Subset::EMPTY, &(Rational::one() - total));
    let decomposition = lift_marginals(&raw, rho)?;
    Ok(Outcome {
        decomposition,
        raw,
        steps,
    })
}

fn check_residual(ctx: &Context<'_>, state: &ResidualState) -> Result<()> {
    if state.rho_bar.values().iter().any(|r| r.is_negative()) {
        return Err(Error::InvariantViolated(
            "negative residual marginal".into(),
        ));
    }
    for (p, pi) in ctx.members.as_deref().unwrap_or_default() {
        if state.slack(*p, pi).is_negative() {
            return Err(Error::InvariantViolated(format!(
                "residual covering condition fails for {}",
                ctx.inst.ground.display(*p)
            )));
        }
    }
    Ok(())
}

/// Raises marginals of `z` to exactly `rho` by moving mass to supersets.
///
/// Elements are handled in ground-set order; for each deficit the heaviest
/// support set missing the element (lexicographically first among equals)
/// gives up mass to its extension by that element. Hitting probabilities
/// never decrease.
pub fn lift_marginals(z: &Decomposition, rho: &Marginals) -> Result<Decomposition> {
    let n = rho.len();
    let current = z.marginals(n);
    let mut out = z.clone();
    for (e, have) in current.iter().enumerate() {
        let mut deficit = rho.get(e) - have;
        if deficit.is_negative() {
            return Err(Error::DeficitNegative {
                element: format!("#{e}"),
                excess: -deficit,
            });
        }
        while deficit.is_positive() {
            let mut best: Option<(Subset, Rational)> = None;
            for (set, w) in out.iter() {
                if !set.contains(e) && best.as_ref().is_none_or(|(_, b)| w > b) {
                    best = Some((set, w.clone()));
                }
            }
            let Some((set, w)) = best else {
                return Err(Error::InvariantViolated(format!(
                    "no mass available to lift element #{e}"
                )));
            };
            let moved = rational::min(deficit.clone(), w);
            out.add(set, &-moved.clone());
            out.add(set.with(e), &moved);
            deficit -= moved;
        }
    }
    Ok(out)
}

/// Exact verification of a decomposition against an instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub total: Rational,
    pub normalized: bool,
    pub nonnegative: bool,
    pub marginal_ok: bool,
    pub hitting_ok: bool,
    /// `max_P (π_P − Pr[S ∩ P ≠ ∅])`; `None` for an empty family.
    pub worst_violation: Option<Rational>,
    pub worst_member: Option<Subset>,
    pub members_checked: usize,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.normalized && self.nonnegative && self.marginal_ok && self.hitting_ok
    }
}

pub fn verify(inst: &Instance, rho: &Marginals, z: &Decomposition) -> Result<Report> {
    inst.check_marginals(rho)?;
    let members = inst.system.members().map_err(|e| match e {
        Error::ScaleExceeded { .. } | Error::FamilyNotEnumerable => Error::FamilyNotEnumerable,
        other => other,
    })?;
    Ok(verify_members(&members, rho, z))
}

pub fn verify_members(
    members: &[(Subset, Rational)],
    rho: &Marginals,
    z: &Decomposition,
) -> Report {
    let total = z.total();
    let marginals = z.marginals(rho.len());
    let mut worst: Option<(Subset, Rational)> = None;
    for (p, pi) in members {
        let v = pi - z.hitting(*p);
        if worst.as_ref().is_none_or(|(_, w)| v > *w) {
            worst = Some((*p, v));
        }
    }
    let full = Subset::full(rho.len());
    Report {
        normalized: total.is_one(),
        total,
        nonnegative: z
            .iter()
            .all(|(s, w)| w.is_positive() && s.is_subset_of(full)),
        marginal_ok: marginals.as_slice() == rho.values(),
        hitting_ok: worst.as_ref().is_none_or(|(_, w)| !w.is_positive()),
        worst_member: worst.as_ref().map(|(p, _)| *p),
        worst_violation: worst.map(|(_, w)| w),
        members_checked: members.len(),
    }
}

/// Tests the covering condition, reporting the most violated member.
pub fn check_star(inst: &Instance, rho: &Marginals) -> Result<StarCheck> {
    inst.check_marginals(rho)?;
    Ok(StarCheck::from_max(inst.system.max_violated(rho.values())?))
}

/// Draws one set from `z`; deterministic in `seed`.
pub fn sample(z: &Decomposition, seed: u64) -> Subset {
    z.sample(seed)
}
