//! Exact rational linear programming and transportation feasibility.
//!
//! The simplex here is a dense two-phase tableau method with Bland's rule.
//! It is meant for small problems (a few hundred variables) where exactness
//! matters more than speed.

use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::limits::Limits;
use crate::rational::{self, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// `optimize c·x` subject to linear rows and per-variable bounds. Bounds
/// default to `[0, ∞)`; `None` means unbounded in that direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<Option<Rational>>,
    pub upper: Vec<Option<Rational>>,
}

impl LinearProgram {
    /// Feasibility problem in `n` nonnegative variables.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            sense: Sense::Minimize,
            objective: vec![Rational::zero(); n],
            constraints: Vec::new(),
            lower: vec![Some(Rational::zero()); n],
            upper: vec![None; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_objective(&mut self, sense: Sense, objective: Vec<Rational>) {
        assert_eq!(objective.len(), self.num_vars(), "objective length");
        self.sense = sense;
        self.objective = objective;
    }

    pub fn add(&mut self, coeffs: Vec<Rational>, relation: Relation, rhs: Rational) -> usize {
        assert_eq!(coeffs.len(), self.num_vars(), "constraint length");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn add_sparse(
        &mut self,
        terms: &[(usize, Rational)],
        relation: Relation,
        rhs: Rational,
    ) -> usize {
        let mut coeffs = vec![Rational::zero(); self.num_vars()];
        for (j, a) in terms {
            coeffs[*j] += a;
        }
        self.add(coeffs, relation, rhs)
    }

    pub fn set_bounds(&mut self, j: usize, lower: Option<Rational>, upper: Option<Rational>) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        dot(&self.objective, x)
    }

    /// Exact feasibility test of a point.
    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        x.len() == self.num_vars()
            && x.iter()
                .zip(&self.lower)
                .all(|(v, lo)| lo.as_ref().is_none_or(|lo| v >= lo))
            && x.iter()
                .zip(&self.upper)
                .all(|(v, hi)| hi.as_ref().is_none_or(|hi| v <= hi))
            && self.constraints.iter().all(|c| {
                let lhs = dot(&c.coeffs, x);
                match c.relation {
                    Relation::Le => lhs <= c.rhs,
                    Relation::Eq => lhs == c.rhs,
                    Relation::Ge => lhs >= c.rhs,
                }
            })
    }

    fn validate(&self, limits: &Limits) -> Result<()> {
        let n = self.num_vars();
        if n > limits.lp_variables {
            return Err(Error::ScaleExceeded {
                what: format!("LP with {n} variables"),
                limit: limits.lp_variables,
            });
        }
        let m = self.constraints.len() + self.upper.iter().filter(|u| u.is_some()).count();
        if m > limits.lp_constraints {
            return Err(Error::ScaleExceeded {
                what: format!("LP with {m} rows"),
                limit: limits.lp_constraints,
            });
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.lower.len().min(self.upper.len()),
            });
        }
        if let Some(c) = self.constraints.iter().find(|c| c.coeffs.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.coeffs.len(),
            });
        }
        Ok(())
    }
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .filter(|(x, _)| !x.is_zero())
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Proof of infeasibility.
///
/// With every row read as `a·x ? b`, the multipliers satisfy: `w ≥ 0` on `≥`
/// rows, `w ≤ 0` on `≤` rows, `lower ≥ 0`, `upper ≤ 0`, and
/// `Σ w_r a_r + lower + upper = 0` while `Σ w_r b_r + lower·lo + upper·hi > 0`.
/// Summing the rows of any feasible point would then give `0 > 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Farkas {
    pub rows: Vec<Rational>,
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
}

impl Farkas {
    pub fn verify(&self, lp: &LinearProgram) -> bool {
        let n = lp.num_vars();
        if self.rows.len() != lp.constraints.len() || self.lower.len() != n || self.upper.len() != n
        {
            return false;
        }
        let signs_ok = self
            .rows
            .iter()
            .zip(&lp.constraints)
            .all(|(w, c)| match c.relation {
                Relation::Le => !w.is_positive(),
                Relation::Ge => !w.is_negative(),
                Relation::Eq => true,
            })
            && self.lower.iter().all(|u| !u.is_negative())
            && self.upper.iter().all(|v| !v.is_positive());
        if !signs_ok {
            return false;
        }
        let mut combo = vec![Rational::zero(); n];
        let mut rhs = Rational::zero();
        for (w, c) in self.rows.iter().zip(&lp.constraints) {
            if w.is_zero() {
                continue;
            }
            for (acc, a) in combo.iter_mut().zip(&c.coeffs) {
                *acc += w * a;
            }
            rhs += w * &c.rhs;
        }
        for (j, acc) in combo.iter_mut().enumerate() {
            *acc += &self.lower[j] + &self.upper[j];
            match (&lp.lower[j], self.lower[j].is_zero()) {
                (Some(lo), _) => rhs += &self.lower[j] * lo,
                (None, true) => {}
                (None, false) => return false,
            }
            match (&lp.upper[j], self.upper[j].is_zero()) {
                (Some(hi), _) => rhs += &self.upper[j] * hi,
                (None, true) => {}
                (None, false) => return false,
            }
        }
        combo.iter().all(Zero::is_zero) && rhs.is_positive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal point; for `Unbounded` a feasible point; empty if infeasible.
    pub point: Vec<Rational>,
    pub value: Rational,
    pub farkas: Option<Farkas>,
}

/// Linearly independent tight rows and bounds at a point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Basis {
    pub constraints: Vec<usize>,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
}

impl Basis {
    pub fn rank(&self) -> usize {
        self.constraints.len() + self.lower.len() + self.upper.len()
    }
}

impl LpSolution {
    /// Greedily picks a maximal independent set of constraints and bounds
    /// that are tight at `point`. For a vertex its size equals the number of
    /// variables, and solving those rows as equations reproduces the point.
    pub fn basis(&self, lp: &LinearProgram) -> Basis {
        let n = lp.num_vars();
        let mut echelon: Vec<(usize, Vec<Rational>)> = Vec::new();
        let mut basis = Basis::default();
        let try_add = |row: Vec<Rational>, echelon: &mut Vec<(usize, Vec<Rational>)>| -> bool {
            let mut row = row;
            for (pivot, e) in echelon.iter() {
                if !row[*pivot].is_zero() {
                    let f = row[*pivot].clone();
                    for (r, v) in row.iter_mut().zip(e) {
                        *r -= &f * v;
                    }
                }
            }
            match row.iter().position(|v| !v.is_zero()) {
                Some(p) => {
                    let inv = row[p].recip();
                    for v in row.iter_mut() {
                        *v *= &inv;
                    }
                    for (_, e) in echelon.iter_mut() {
                        if !e[p].is_zero() {
                            let f = e[p].clone();
                            for (x, y) in e.iter_mut().zip(&row) {
                                *x -= &f * y;
                            }
                        }
                    }
                    echelon.push((p, row));
                    true
                }
                None => false,
            }
        };
        if self.point.len() != n {
            return basis;
        }
        for (i, c) in lp.constraints.iter().enumerate() {
            if echelon.len() == n {
                break;
            }
            if dot(&c.coeffs, &self.point) == c.rhs && try_add(c.coeffs.clone(), &mut echelon) {
                basis.constraints.push(i);
            }
        }
        for j in 0..n {
            let unit = || {
                let mut u = vec![Rational::zero(); n];
                u[j] = Rational::one();
                u
            };
            if echelon.len() < n
                && lp.lower[j].as_ref() == Some(&self.point[j])
                && try_add(unit(), &mut echelon)
            {
                basis.lower.push(j);
            }
            if echelon.len() < n
                && lp.upper[j].as_ref() == Some(&self.point[j])
                && try_add(unit(), &mut echelon)
            {
                basis.upper.push(j);
            }
        }
        basis
    }
}

#[derive(Clone, Debug)]
enum VarMap {
    /// `x = lo + x'`
    Shift {
        col: usize,
        lo: Rational,
        upper_row: Option<usize>,
    },
    /// `x = hi − x'`
    Negate { col: usize, hi: Rational },
    /// `x = x⁺ − x⁻`
    Split { pos: usize, neg: usize },
}

#[derive(Clone, Copy, Debug)]
enum Origin {
    Constraint(usize),
    Upper(usize),
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    /// Reduced costs for the current phase.
    costs: Vec<Rational>,
    barred: Vec<bool>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let inv = self.rows[r][c].recip();
        let nonzero: Vec<usize> = (0..self.rows[r].len())
            .filter(|&j| !self.rows[r][j].is_zero())
            .collect();
        for &j in &nonzero {
            self.rows[r][j] *= &inv;
        }
        self.rhs[r] *= &inv;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r].clone();
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for &j in &nonzero {
                let delta = &f * &pivot_row[j];
                self.rows[i][j] -= delta;
            }
            self.rhs[i] -= &f * &pivot_rhs;
        }
        if !self.costs[c].is_zero() {
            let f = self.costs[c].clone();
            for &j in &nonzero {
                let delta = &f * &pivot_row[j];
                self.costs[j] -= delta;
            }
        }
        self.basis[r] = c;
    }

    /// Sets reduced costs from raw column costs for the current basis.
    fn price(&mut self, raw: &[Rational]) {
        let mut d = raw.to_vec();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = &raw[b];
            if cb.is_zero() {
                continue;
            }
            for (dj, a) in d.iter_mut().zip(&self.rows[i]) {
                if !a.is_zero() {
                    *dj -= cb * a;
                }
            }
        }
        self.costs = d;
    }

    /// Runs Bland's rule to optimality; returns false if unbounded.
    fn optimize(&mut self) -> bool {
        loop {
            let entering =
                (0..self.costs.len()).find(|&j| !self.barred[j] && self.costs[j].is_negative());
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[i] / a;
                let better = match &leave {
                    None => true,
                    Some((r, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*r])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution> {
    solve_with_limits(lp, &Limits::default())
}

pub fn solve_with_limits(lp: &LinearProgram, limits: &Limits) -> Result<LpSolution> {
    lp.validate(limits)?;
    let n = lp.num_vars();

    // Contradictory bounds need no tableau.
    for j in 0..n {
        if let (Some(lo), Some(hi)) = (&lp.lower[j], &lp.upper[j]) {
            if lo > hi {
                let mut farkas = Farkas {
                    rows: vec![Rational::zero(); lp.constraints.len()],
                    lower: vec![Rational::zero(); n],
                    upper: vec![Rational::zero(); n],
                };
                farkas.lower[j] = Rational::one();
                farkas.upper[j] = -Rational::one();
                return Ok(infeasible(farkas));
            }
        }
    }

    // Map variables to nonnegative structural columns.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0;
    let mut upper_rows = 0;
    for j in 0..n {
        let map = match (&lp.lower[j], &lp.upper[j]) {
            (Some(lo), hi) => {
                let upper_row = hi.as_ref().map(|_| {
                    upper_rows += 1;
                    upper_rows - 1
                });
                ncols += 1;
                VarMap::Shift {
                    col: ncols - 1,
                    lo: lo.clone(),
                    upper_row,
                }
            }
            (None, Some(hi)) => {
                ncols += 1;
                VarMap::Negate {
                    col: ncols - 1,
                    hi: hi.clone(),
                }
            }
            (None, None) => {
                ncols += 2;
                VarMap::Split {
                    pos: ncols - 2,
                    neg: ncols - 1,
                }
            }
        };
        maps.push(map);
    }

    // Rows over structural columns.
    let mut rows: Vec<(Vec<Rational>, Relation, Rational, Origin)> = Vec::new();
    for (i, c) in lp.constraints.iter().enumerate() {
        let mut row = vec![Rational::zero(); ncols];
        let mut rhs = c.rhs.clone();
        for (j, a) in c.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            match &maps[j] {
                VarMap::Shift { col, lo, .. } => {
                    row[*col] += a;
                    rhs -= a * lo;
                }
                VarMap::Negate { col, hi } => {
                    row[*col] -= a;
                    rhs -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    row[*pos] += a;
                    row[*neg] -= a;
                }
            }
        }
        rows.push((row, c.relation, rhs, Origin::Constraint(i)));
    }
    for (j, map) in maps.iter().enumerate() {
        if let VarMap::Shift {
            col,
            lo,
            upper_row: Some(_),
        } = map
        {
            let mut row = vec![Rational::zero(); ncols];
            row[*col] = Rational::one();
            let hi = lp.upper[j].as_ref().expect("upper bound");
            rows.push((row, Relation::Le, hi - lo, Origin::Upper(j)));
        }
    }

    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    // Decide per row whether the slack can start basic.
    let mut sign = Vec::with_capacity(m);
    let mut slack_col = vec![None; m];
    let mut unit_col = vec![0usize; m];
    let mut next_slack = ncols;
    let mut nart = 0;
    for (i, (_, rel, rhs, _)) in rows.iter().enumerate() {
        let s: i8 = if rhs.is_negative() { -1 } else { 1 };
        sign.push(s);
        if *rel != Relation::Eq {
            slack_col[i] = Some(next_slack);
            next_slack += 1;
        }
        let slack_is_unit = matches!((rel, s), (Relation::Le, 1) | (Relation::Ge, -1));
        if slack_is_unit {
            unit_col[i] = slack_col[i].expect("slack");
        } else {
            unit_col[i] = usize::MAX;
            nart += 1;
        }
    }
    let total = ncols + nslack + nart;
    let mut next_art = ncols + nslack;
    let mut art_cols = Vec::new();
    let mut table = Vec::with_capacity(m);
    let mut rhs_vec = Vec::with_capacity(m);
    for (i, (row, rel, rhs, _)) in rows.iter().enumerate() {
        let mut full = vec![Rational::zero(); total];
        let flip = sign[i] < 0;
        for (k, v) in row.iter().enumerate() {
            if !v.is_zero() {
                full[k] = if flip { -v.clone() } else { v.clone() };
            }
        }
        if let Some(sc) = slack_col[i] {
            let base = if *rel == Relation::Le {
                Rational::one()
            } else {
                -Rational::one()
            };
            full[sc] = if flip { -base } else { base };
        }
        if unit_col[i] == usize::MAX {
            full[next_art] = Rational::one();
            unit_col[i] = next_art;
            art_cols.push(next_art);
            next_art += 1;
        }
        table.push(full);
        rhs_vec.push(if flip { -rhs.clone() } else { rhs.clone() });
    }
    let is_art = |j: usize| j >= ncols + nslack;

    let mut t = Tableau {
        rows: table,
        rhs: rhs_vec,
        basis: unit_col.clone(),
        costs: Vec::new(),
        barred: vec![false; total],
    };

    // Phase 1.
    let phase1_raw: Vec<Rational> = (0..total)
        .map(|j| {
            if is_art(j) {
                Rational::one()
            } else {
                Rational::zero()
            }
        })
        .collect();
    t.price(&phase1_raw);
    t.optimize();
    let infeasibility = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(b, _)| is_art(**b))
        .fold(Rational::zero(), |acc, (_, v)| acc + v);
    if infeasibility.is_positive() {
        let y: Vec<Rational> = (0..m)
            .map(|i| &phase1_raw[unit_col[i]] - &t.costs[unit_col[i]])
            .collect();
        let mut farkas = Farkas {
            rows: vec![Rational::zero(); lp.constraints.len()],
            lower: vec![Rational::zero(); n],
            upper: vec![Rational::zero(); n],
        };
        let mut upper_w = vec![Rational::zero(); n];
        for (i, (_, _, _, origin)) in rows.iter().enumerate() {
            let w = if sign[i] < 0 {
                -y[i].clone()
            } else {
                y[i].clone()
            };
            match origin {
                Origin::Constraint(r) => farkas.rows[*r] = w,
                Origin::Upper(j) => upper_w[*j] = w,
            }
        }
        let mut g = vec![Rational::zero(); n];
        for (w, c) in farkas.rows.iter().zip(&lp.constraints) {
            if w.is_zero() {
                continue;
            }
            for (gj, a) in g.iter_mut().zip(&c.coeffs) {
                *gj += w * a;
            }
        }
        for (j, map) in maps.iter().enumerate() {
            match map {
                VarMap::Shift { .. } => {
                    farkas.lower[j] = -(&g[j] + &upper_w[j]);
                    farkas.upper[j] = upper_w[j].clone();
                }
                VarMap::Negate { .. } => farkas.upper[j] = -g[j].clone(),
                VarMap::Split { .. } => {}
            }
        }
        return Ok(infeasible(farkas));
    }

    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.rows.len() {
        if is_art(t.basis[i]) {
            match (0..ncols + nslack).find(|&j| !t.rows[i][j].is_zero()) {
                Some(c) => t.pivot(i, c),
                None => {
                    t.rows.remove(i);
                    t.rhs.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    for &a in &art_cols {
        t.barred[a] = true;
    }

    // Phase 2.
    let mut raw = vec![Rational::zero(); total];
    let flip_obj = lp.sense == Sense::Maximize;
    for (j, map) in maps.iter().enumerate() {
        let c = if flip_obj {
            -lp.objective[j].clone()
        } else {
            lp.objective[j].clone()
        };
        match map {
            VarMap::Shift { col, .. } => raw[*col] = c,
            VarMap::Negate { col, .. } => raw[*col] = -c,
            VarMap::Split { pos, neg } => {
                raw[*neg] = -c.clone();
                raw[*pos] = c;
            }
        }
    }
    t.price(&raw);
    let bounded = t.optimize();

    let mut cols = vec![Rational::zero(); total];
    for (i, &b) in t.basis.iter().enumerate() {
        cols[b] = t.rhs[i].clone();
    }
    let point: Vec<Rational> = maps
        .iter()
        .map(|map| match map {
            VarMap::Shift { col, lo, .. } => lo + &cols[*col],
            VarMap::Negate { col, hi } => hi - &cols[*col],
            VarMap::Split { pos, neg } => &cols[*pos] - &cols[*neg],
        })
        .collect();
    debug_assert!(lp.is_feasible_point(&point));
    let value = lp.objective_value(&point);
    Ok(LpSolution {
        status: if bounded {
            LpStatus::Optimal
        } else {
            LpStatus::Unbounded
        },
        point,
        value,
        farkas: None,
    })
}

fn infeasible(farkas: Farkas) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        point: Vec::new(),
        value: Rational::zero(),
        farkas: Some(farkas),
    }
}

/// Result of expressing a target as a convex combination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Combination {
    /// One weight per input vertex, at most `dim + 1` of them nonzero.
    Weights(Vec<Rational>),
    /// Certificate for the LP `λ ≥ 0, Σλ = 1, Σ λ_i v_i = target`, with the
    /// normalization row first.
    Infeasible(Farkas),
}

pub fn convex_combination(target: &[Rational], vertices: &[Vec<Rational>]) -> Result<Combination> {
    let d = target.len();
    if let Some(v) = vertices.iter().find(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: v.len(),
        });
    }
    let k = vertices.len();
    let mut lp = LinearProgram::new(k);
    lp.add(vec![Rational::one(); k], Relation::Eq, Rational::one());
    for coord in 0..d {
        lp.add(
            vertices.iter().map(|v| v[coord].clone()).collect(),
            Relation::Eq,
            target[coord].clone(),
        );
    }
    let sol = solve(&lp)?;
    Ok(match sol.status {
        LpStatus::Infeasible => Combination::Infeasible(sol.farkas.expect("certificate")),
        _ => Combination::Weights(sol.point),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    /// Flow on each arc, in input order.
    Feasible(Vec<Rational>),
    /// Sinks `sinks` demand more than sources `sources` can supply plus what
    /// the remaining sources can ship into them:
    /// `demand(sinks) > supply(sources) + cap(others → sinks)`.
    Infeasible {
        sources: Vec<usize>,
        sinks: Vec<usize>,
    },
}

/// Feasibility of a transportation problem with arc capacities, by
/// shortest-augmenting-path max flow.
pub fn transport_feasible(
    supplies: &[Rational],
    demands: &[Rational],
    arcs: &[(usize, usize)],
    caps: &[Rational],
) -> Result<Transport> {
    if arcs.len() != caps.len() {
        return Err(Error::DimensionMismatch {
            expected: arcs.len(),
            found: caps.len(),
        });
    }
    let supply: Rational = supplies.iter().sum();
    let demand: Rational = demands.iter().sum();
    if supply != demand {
        return Err(Error::BalanceMismatch { supply, demand });
    }
    if supplies
        .iter()
        .chain(demands)
        .chain(caps)
        .any(|v| v.is_negative())
    {
        return Err(Error::InvalidInput(
            "negative supply, demand or capacity".into(),
        ));
    }
    let (ns, nt) = (supplies.len(), demands.len());
    if let Some(&(i, j)) = arcs.iter().find(|(i, j)| *i >= ns || *j >= nt) {
        return Err(Error::InvalidInput(format!("arc ({i}, {j}) out of range")));
    }
    let source = 0;
    let sink = ns + nt + 1;
    let mut g = FlowGraph::new(ns + nt + 2);
    for (i, s) in supplies.iter().enumerate() {
        g.add_edge(source, 1 + i, s.clone());
    }
    let arc_edges: Vec<usize> = arcs
        .iter()
        .zip(caps)
        .map(|(&(i, j), c)| g.add_edge(1 + i, 1 + ns + j, c.clone()))
        .collect();
    for (j, d) in demands.iter().enumerate() {
        g.add_edge(1 + ns + j, sink, d.clone());
    }
    let value = g.max_flow(source, sink);
    if value == demand {
        return Ok(Transport::Feasible(
            arc_edges.iter().map(|&e| g.flow(e)).collect(),
        ));
    }
    let reach = g.reachable(source);
    Ok(Transport::Infeasible {
        sources: (0..ns).filter(|i| !reach[1 + i]).collect(),
        sinks: (0..nt).filter(|j| !reach[1 + ns + j]).collect(),
    })
}

struct FlowGraph {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<Rational>,
    original: Vec<Rational>,
}

impl FlowGraph {
    fn new(n: usize) -> Self {
        FlowGraph {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
            original: Vec::new(),
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: Rational) -> usize {
        let e = self.to.len();
        self.adj[u].push(e);
        self.to.push(v);
        self.cap.push(c.clone());
        self.original.push(c);
        self.adj[v].push(e + 1);
        self.to.push(u);
        self.cap.push(Rational::zero());
        self.original.push(Rational::zero());
        e
    }

    fn flow(&self, e: usize) -> Rational {
        &self.original[e] - &self.cap[e]
    }

    fn max_flow(&mut self, s: usize, t: usize) -> Rational {
        let mut total = Rational::zero();
        loop {
            let mut prev: Vec<Option<usize>> = vec![None; self.adj.len()];
            let mut seen = vec![false; self.adj.len()];
            seen[s] = true;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if !seen[v] && self.cap[e].is_positive() {
                        seen[v] = true;
                        prev[v] = Some(e);
                        queue.push_back(v);
                    }
                }
            }
            if !seen[t] {
                return total;
            }
            let mut path = Vec::new();
            let mut v = t;
            while let Some(e) = prev[v] {
                path.push(e);
                v = self.to[e ^ 1];
            }
            let push = path
                .iter()
                .map(|&e| self.cap[e].clone())
                .min()
                .expect("nonempty path");
            for &e in &path {
                self.cap[e] -= &push;
                self.cap[e ^ 1] += &push;
            }
            total += push;
        }
    }

    fn reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if !seen[v] && self.cap[e].is_positive() {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// Renders a small LP for error messages and debugging.
pub fn describe(lp: &LinearProgram) -> String {
    let mut out = String::new();
    for c in &lp.constraints {
        let terms: Vec<String> = c
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(j, a)| format!("{}*x{j}", rational::format(a)))
            .collect();
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        };
        out.push_str(&format!(
            "{} {rel} {}\n",
            terms.join(" + "),
            rational::format(&c.rhs)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    #[test]
    fn minimize_with_lower_bound_row() {
        let mut lp = LinearProgram::new(1);
        lp.set_bounds(0, None, None);
        lp.set_objective(Sense::Minimize, vec![int(1)]);
        lp.add(vec![int(1)], Relation::Ge, int(3));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.point, vec![int(3)]);
        assert_eq!(sol.basis(&lp).rank(), 1);
    }

    #[test]
    fn unbounded_maximization() {
        let mut lp = LinearProgram::new(1);
        lp.set_objective(Sense::Maximize, vec![int(1)]);
        assert_eq!(solve(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible_with_certificate() {
        let mut lp = LinearProgram::new(2);
        lp.add(vec![int(1), int(1)], Relation::Le, int(1));
        lp.add(vec![int(1), int(-1)], Relation::Ge, int(3));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(sol.farkas.unwrap().verify(&lp));
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(1);
        lp.set_bounds(0, Some(int(2)), Some(int(1)));
        let sol = solve(&lp).unwrap();
        assert!(sol.farkas.unwrap().verify(&lp));
    }

    #[test]
    fn free_and_upper_only_variables() {
        let mut lp = LinearProgram::new(2);
        lp.set_bounds(0, None, None);
        lp.set_bounds(1, None, Some(int(4)));
        lp.set_objective(Sense::Maximize, vec![int(1), int(2)]);
        lp.add(vec![int(1), int(1)], Relation::Le, ratio(11, 2));
        lp.add(vec![int(1), int(0)], Relation::Ge, int(-3));
        let sol = solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.point, vec![ratio(3, 2), int(4)]);
        assert_eq!(sol.value, ratio(19, 2));
    }

    #[test]
    fn convex_combination_examples() {
        let v1 = vec![int(1), int(0)];
        let v2 = vec![int(0), int(1)];
        assert_eq!(
            convex_combination(&v1, &[v1.clone(), v2.clone()]).unwrap(),
            Combination::Weights(vec![int(1), int(0)])
        );
        assert_eq!(
            convex_combination(&[ratio(1, 2), ratio(1, 2)], &[v1.clone(), v2.clone()]).unwrap(),
            Combination::Weights(vec![ratio(1, 2), ratio(1, 2)])
        );
        let a = vec![int(0), int(1), int(0)];
        let b = vec![int(1), int(0), int(1)];
        assert_eq!(
            convex_combination(&[ratio(1, 2), ratio(1, 2), ratio(1, 2)], &[a, b]).unwrap(),
            Combination::Weights(vec![ratio(1, 2), ratio(1, 2)])
        );
        assert!(matches!(
            convex_combination(&[int(2), int(0)], &[v1.clone(), v2]).unwrap(),
            Combination::Infeasible(_)
        ));
        assert!(matches!(
            convex_combination(&[int(1)], &[v1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn transport_examples() {
        let zero = transport_feasible(&[int(0)], &[int(0)], &[(0, 0)], &[int(1)]).unwrap();
        assert_eq!(zero, Transport::Feasible(vec![int(0)]));
        let one = transport_feasible(&[int(1)], &[int(1)], &[(0, 0)], &[int(1)]).unwrap();
        assert_eq!(one, Transport::Feasible(vec![int(1)]));
        assert!(matches!(
            transport_feasible(&[int(1)], &[int(2)], &[], &[]),
            Err(Error::BalanceMismatch { .. })
        ));
        let cut = transport_feasible(&[int(1)], &[int(1)], &[(0, 0)], &[ratio(1, 2)]).unwrap();
        assert_eq!(
            cut,
            Transport::Infeasible {
                sources: vec![],
                sinks: vec![0]
            }
        );
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-6i64..=6, 1i64..=4).prop_map(|(p, q)| ratio(p, q))
    }

    fn random_lp() -> impl Strategy<Value = LinearProgram> {
        (1usize..=4, 1usize..=4).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(small_rational(), n), m),
                proptest::collection::vec(0u8..3, m),
                proptest::collection::vec(small_rational(), m),
                proptest::collection::vec(small_rational(), n),
                proptest::collection::vec(0u8..4, n),
            )
                .prop_map(move |(a, rels, b, c, bounds)| {
                    let mut lp = LinearProgram::new(n);
                    lp.set_objective(Sense::Minimize, c);
                    for ((row, r), rhs) in a.into_iter().zip(rels).zip(b) {
                        let rel = [Relation::Le, Relation::Eq, Relation::Ge][r as usize];
                        lp.add(row, rel, rhs);
                    }
                    for (j, kind) in bounds.into_iter().enumerate() {
                        match kind {
                            0 => {}
                            1 => lp.set_bounds(j, Some(int(-1)), Some(int(2))),
                            2 => lp.set_bounds(j, None, Some(int(3))),
                            _ => lp.set_bounds(j, None, None),
                        }
                    }
                    lp
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn solutions_are_exact(lp in random_lp()) {
            let sol = solve(&lp).unwrap();
            match sol.status {
                LpStatus::Infeasible => prop_assert!(sol.farkas.as_ref().unwrap().verify(&lp)),
                LpStatus::Optimal => {
                    prop_assert!(lp.is_feasible_point(&sol.point));
                    // Maximizing -c must reach the same optimum.
                    let mut neg = lp.clone();
                    neg.set_objective(Sense::Maximize, lp.objective.iter().map(|c| -c.clone()).collect());
                    let other = solve(&neg).unwrap();
                    prop_assert_eq!(other.status, LpStatus::Optimal);
                    prop_assert_eq!(-other.value, sol.value);
                }
                LpStatus::Unbounded => prop_assert!(lp.is_feasible_point(&sol.point)),
            }
        }

        #[test]
        fn vertex_when_pointed(lp in random_lp()) {
            let pointed = lp.lower.iter().zip(&lp.upper).all(|(l, u)| l.is_some() || u.is_some());
            let sol = solve(&lp).unwrap();
            if pointed && sol.status == LpStatus::Optimal {
                prop_assert_eq!(sol.basis(&lp).rank(), lp.num_vars());
            }
        }
    }
}
