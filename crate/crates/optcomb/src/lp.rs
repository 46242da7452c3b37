//! Dense two-phase primal simplex solver and Euclidean projection onto the
//! probability simplex.
//!
//! The solver is deliberately a dense tableau implementation: the problems
//! built by [`crate::combine`] have on the order of 10^3 rows and 10^3
//! variables, where a dense tableau is simple, predictable, and fast enough.
//! Pricing uses Dantzig's rule and switches to Bland's rule after
//! `50 * (variables + rows)` iterations to guarantee termination.

use serde::Serialize;
use thiserror::Error;

/// Constraint satisfaction tolerance for the solution invariants.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Entries smaller than this (in absolute value) are never used as pivots.
pub const PIVOT_TOL: f64 = 1e-9;

/// Relation of a linear constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn flip(self) -> Relation {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        }
    }
}

/// One constraint row `coeffs . x  (rel)  rhs`.
#[derive(Clone, Debug)]
pub struct LpConstraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear program `minimize c.x` subject to constraint rows and per-variable
/// bounds. Lower bounds must be finite; upper bounds are optional.
#[derive(Clone, Debug, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<LpConstraint>,
    pub bounds: Vec<(f64, Option<f64>)>,
}

/// Termination status of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`solve_lp`]. `x`, `objective_value`, and `duals` are meaningful
/// only when `status == Optimal`; `duals` has one entry per constraint row.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    pub duals: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("LP has no variables")]
    Empty,
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    BadRowLength { row: usize, got: usize, expected: usize },
    #[error("bounds vector has length {got}, expected {expected}")]
    BadBoundsLength { got: usize, expected: usize },
    #[error("variable {var}: lower bound {lower} exceeds upper bound {upper}")]
    CrossedBounds { var: usize, lower: f64, upper: f64 },
    #[error("non-finite value in {place}")]
    NonFinite { place: &'static str },
    #[error("numerical breakdown: no progress after {budget} simplex iterations")]
    NumericalBreakdown { budget: usize },
}

impl LpProblem {
    /// Number of structural variables.
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        if n == 0 {
            return Err(LpError::Empty);
        }
        if !self.objective.iter().all(|c| c.is_finite()) {
            return Err(LpError::NonFinite { place: "objective" });
        }
        if self.bounds.len() != n {
            return Err(LpError::BadBoundsLength { got: self.bounds.len(), expected: n });
        }
        for (var, &(lo, up)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || up.is_some_and(|u| u.is_nan() || u == f64::NEG_INFINITY) {
                return Err(LpError::NonFinite { place: "bounds" });
            }
            if let Some(u) = up {
                if lo > u {
                    return Err(LpError::CrossedBounds { var, lower: lo, upper: u });
                }
            }
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::BadRowLength { row, got: c.coeffs.len(), expected: n });
            }
            if !c.rhs.is_finite() || !c.coeffs.iter().all(|v| v.is_finite()) {
                return Err(LpError::NonFinite { place: "constraints" });
            }
        }
        Ok(())
    }

    /// Plain-text dump (one constraint per line) for external cross-checking.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let term = |c: f64, j: usize| format!("{c}*x{j}");
        writeln!(
            out,
            "minimize: {}",
            self.objective
                .iter()
                .enumerate()
                .map(|(j, &c)| term(c, j))
                .collect::<Vec<_>>()
                .join(" + ")
        )
        .unwrap();
        writeln!(out, "subject to:").unwrap();
        for c in &self.constraints {
            writeln!(
                out,
                "  {} {} {}",
                c.coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| term(a, j))
                    .collect::<Vec<_>>()
                    .join(" + "),
                c.relation.symbol(),
                c.rhs
            )
            .unwrap();
        }
        writeln!(out, "bounds:").unwrap();
        for (j, &(lo, up)) in self.bounds.iter().enumerate() {
            match up {
                Some(u) => writeln!(out, "  {lo} <= x{j} <= {u}").unwrap(),
                None => writeln!(out, "  x{j} >= {lo}").unwrap(),
            }
        }
        out
    }
}

/// Internal row after lower-bound shifting, upper-bound expansion, and
/// right-hand-side normalization.
struct Row {
    coeffs: Vec<f64>,
    relation: Relation,
    rhs: f64,
    /// Index of the originating constraint (None for bound-derived rows).
    orig: Option<usize>,
    /// Whether the row was multiplied by -1 during normalization.
    flipped: bool,
}

/// Solve an LP with the two-phase dense primal simplex method.
///
/// Deterministic: identical problems produce identical solutions. Returns
/// `LpError::NumericalBreakdown` if the iteration budget is exhausted, which
/// for a correct implementation with Bland's rule indicates numerical trouble
/// rather than cycling.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    p.validate()?;
    let n = p.num_vars();
    let lowers: Vec<f64> = p.bounds.iter().map(|b| b.0).collect();

    // Shift variables to xt = x - l >= 0 and expand upper bounds into rows.
    let mut rows: Vec<Row> = Vec::with_capacity(p.constraints.len() + n);
    for (idx, c) in p.constraints.iter().enumerate() {
        let shift: f64 = crate::matrix::dot(&c.coeffs, &lowers);
        rows.push(Row {
            coeffs: c.coeffs.clone(),
            relation: c.relation,
            rhs: c.rhs - shift,
            orig: Some(idx),
            flipped: false,
        });
    }
    for (j, &(lo, up)) in p.bounds.iter().enumerate() {
        if let Some(u) = up {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push(Row {
                coeffs,
                relation: Relation::Le,
                rhs: u - lo,
                orig: None,
                flipped: false,
            });
        }
    }
    for r in rows.iter_mut() {
        if r.rhs < 0.0 {
            for v in r.coeffs.iter_mut() {
                *v = -*v;
            }
            r.rhs = -r.rhs;
            r.relation = r.relation.flip();
            r.flipped = true;
        }
    }

    let m = rows.len();
    // Column layout: structural | slack/surplus (one per Le/Ge row) | artificial.
    let mut slack_col = vec![usize::MAX; m];
    let mut art_col = vec![usize::MAX; m];
    let mut ncols = n;
    for (i, r) in rows.iter().enumerate() {
        if matches!(r.relation, Relation::Le | Relation::Ge) {
            slack_col[i] = ncols;
            ncols += 1;
        }
    }
    let art_start = ncols;
    for (i, r) in rows.iter().enumerate() {
        if matches!(r.relation, Relation::Ge | Relation::Eq) {
            art_col[i] = ncols;
            ncols += 1;
        }
    }

    let mut t = Tableau::new(m, ncols);
    for (i, r) in rows.iter().enumerate() {
        t.a.row_mut(i)[..n].copy_from_slice(&r.coeffs);
        t.b[i] = r.rhs;
        match r.relation {
            Relation::Le => {
                t.a.set(i, slack_col[i], 1.0);
                t.basis[i] = slack_col[i];
            }
            Relation::Ge => {
                t.a.set(i, slack_col[i], -1.0);
                t.a.set(i, art_col[i], 1.0);
                t.basis[i] = art_col[i];
            }
            Relation::Eq => {
                t.a.set(i, art_col[i], 1.0);
                t.basis[i] = art_col[i];
            }
        }
    }

    let budget = 20_000 + 200 * (ncols + m);
    let dantzig_limit = 50 * (ncols + m);
    let mut iterations = 0usize;

    // Phase I: minimize the sum of artificial variables.
    if art_start < ncols {
        let mut c1 = vec![0.0; ncols];
        for c in c1.iter_mut().skip(art_start) {
            *c = 1.0;
        }
        t.reset_objective(&c1);
        let status = t.iterate(&mut iterations, budget, dantzig_limit, art_start)?;
        if status == IterateStatus::Unbounded {
            // Mathematically impossible (phase I objective is bounded below by
            // zero); reaching it means the tableau has degraded numerically.
            return Err(LpError::NumericalBreakdown { budget });
        }
        if t.objective_value() > FEASIBILITY_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: vec![],
                objective_value: f64::NAN,
                iterations,
                duals: vec![],
            });
        }
        t.evict_artificials(art_start, n);
    }

    // Phase II: original objective over shifted variables.
    let mut c2 = vec![0.0; ncols];
    c2[..n].copy_from_slice(&p.objective);
    t.reset_objective(&c2);
    let status = t.iterate(&mut iterations, budget, dantzig_limit, art_start)?;
    if status == IterateStatus::Unbounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x: vec![],
            objective_value: f64::NEG_INFINITY,
            iterations,
            duals: vec![],
        });
    }

    // Recover x in the original (unshifted) space.
    let mut x = lowers.clone();
    for (i, &bj) in t.basis.iter().enumerate() {
        if t.live[i] && bj < n {
            x[bj] += t.b[i];
        }
    }
    let objective_value = crate::matrix::dot(&p.objective, &x);

    // Dual prices per original constraint row, read from the reduced costs of
    // each row's slack (Le) or artificial (Ge/Eq) column: both carry +1 in
    // exactly that row with zero phase-II cost, so r_col = -y_row.
    let mut duals = vec![0.0; p.constraints.len()];
    for (i, r) in rows.iter().enumerate() {
        let Some(orig) = r.orig else { continue };
        if !t.live[i] {
            continue; // redundant row: price 0
        }
        let col = match r.relation {
            Relation::Le => slack_col[i],
            Relation::Ge | Relation::Eq => art_col[i],
        };
        let y = -t.reduced[col];
        duals[orig] = if r.flipped { -y } else { y };
    }

    debug_assert!(
        solution_feasible(p, &x),
        "optimal solution violates constraints beyond FEASIBILITY_TOL"
    );

    Ok(LpSolution { status: LpStatus::Optimal, x, objective_value, iterations, duals })
}

fn solution_feasible(p: &LpProblem, x: &[f64]) -> bool {
    // Scale-aware feasibility check used in debug builds.
    for c in &p.constraints {
        let lhs = crate::matrix::dot(&c.coeffs, x);
        let scale = 1.0 + c.rhs.abs() + c.coeffs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let ok = match c.relation {
            Relation::Le => lhs <= c.rhs + FEASIBILITY_TOL * scale,
            Relation::Ge => lhs >= c.rhs - FEASIBILITY_TOL * scale,
            Relation::Eq => (lhs - c.rhs).abs() <= FEASIBILITY_TOL * scale,
        };
        if !ok {
            return false;
        }
    }
    p.bounds.iter().zip(x).all(|(&(lo, up), &xj)| {
        xj >= lo - FEASIBILITY_TOL && up.is_none_or(|u| xj <= u + FEASIBILITY_TOL)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum IterateStatus {
    Converged,
    Unbounded,
}

/// Simplex tableau: constraint matrix in the current basis, right-hand sides,
/// reduced-cost row, and basis bookkeeping. Rows made redundant while evicting
/// artificial variables are marked dead in `live`.
struct Tableau {
    a: crate::Matrix,
    b: Vec<f64>,
    basis: Vec<usize>,
    live: Vec<bool>,
    reduced: Vec<f64>,
    cost: Vec<f64>,
    z: f64,
}

impl Tableau {
    fn new(m: usize, ncols: usize) -> Self {
        Tableau {
            a: crate::Matrix::zeros(m, ncols),
            b: vec![0.0; m],
            basis: vec![usize::MAX; m],
            live: vec![true; m],
            reduced: vec![0.0; ncols],
            cost: vec![0.0; ncols],
            z: 0.0,
        }
    }

    fn m(&self) -> usize {
        self.b.len()
    }

    fn objective_value(&self) -> f64 {
        self.z
    }

    /// Install a new objective and recompute the reduced-cost row
    /// `r_j = c_j - c_B . (B^-1 A)_j` for the current basis.
    fn reset_objective(&mut self, c: &[f64]) {
        self.cost = c.to_vec();
        self.reduced.copy_from_slice(c);
        self.z = 0.0;
        for i in 0..self.m() {
            if !self.live[i] {
                continue;
            }
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                self.z += cb * self.b[i];
                let row = self.a.row(i);
                for (rj, &aij) in self.reduced.iter_mut().zip(row) {
                    *rj -= cb * aij;
                }
            }
        }
    }

    /// Run simplex iterations until optimal or unbounded. Columns at or past
    /// `art_start` (artificials) never enter the basis.
    fn iterate(
        &mut self,
        iterations: &mut usize,
        budget: usize,
        dantzig_limit: usize,
        art_start: usize,
    ) -> Result<IterateStatus, LpError> {
        loop {
            if *iterations >= budget {
                return Err(LpError::NumericalBreakdown { budget });
            }
            let bland = *iterations >= dantzig_limit;
            let enter = if bland {
                (0..art_start).find(|&j| self.reduced[j] < -PIVOT_TOL)
            } else {
                let mut best = None;
                let mut best_r = -PIVOT_TOL;
                for (j, &r) in self.reduced.iter().enumerate().take(art_start) {
                    if r < best_r {
                        best_r = r;
                        best = Some(j);
                    }
                }
                best
            };
            let Some(enter) = enter else {
                return Ok(IterateStatus::Converged);
            };

            // Ratio test; ties broken toward the smallest basis label, which
            // together with smallest-index entering keeps Bland's rule exact.
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m() {
                if !self.live[i] {
                    continue;
                }
                let aij = self.a.get(i, enter);
                if aij > PIVOT_TOL {
                    let ratio = self.b[i] / aij;
                    let replace = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - PIVOT_TOL
                                || (ratio <= best_ratio + PIVOT_TOL
                                    && self.basis[i] < self.basis[l])
                        }
                    };
                    if replace {
                        best_ratio = best_ratio.min(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(leave) = leave else {
                return Ok(IterateStatus::Unbounded);
            };

            self.pivot(leave, enter);
            *iterations += 1;
        }
    }

    /// Gauss-Jordan pivot on (row, col).
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.a.get(row, col);
        debug_assert!(piv.abs() > PIVOT_TOL);
        let inv = 1.0 / piv;
        {
            let r = self.a.row_mut(row);
            for v in r.iter_mut() {
                *v *= inv;
            }
            // Snap the pivot column to exactly 1 to limit drift.
            r[col] = 1.0;
        }
        self.b[row] *= inv;

        let pivot_row: Vec<f64> = self.a.row(row).to_vec();
        let pivot_b = self.b[row];
        for i in 0..self.m() {
            if i == row || !self.live[i] {
                continue;
            }
            let factor = self.a.get(i, col);
            if factor != 0.0 {
                let r = self.a.row_mut(i);
                for (v, &pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                r[col] = 0.0;
                self.b[i] -= factor * pivot_b;
                if self.b[i].abs() < 1e-13 {
                    self.b[i] = 0.0;
                }
            }
        }
        let factor = self.reduced[col];
        if factor != 0.0 {
            for (v, &pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
        self.z = self.recompute_z();
    }

    fn recompute_z(&self) -> f64 {
        let mut z = 0.0;
        for i in 0..self.m() {
            if self.live[i] {
                z += self.cost[self.basis[i]] * self.b[i];
            }
        }
        z
    }

    /// After phase I, pivot basic artificial variables out of the basis or
    /// mark their rows redundant, so phase II never reactivates them.
    fn evict_artificials(&mut self, art_start: usize, nstruct: usize) {
        for i in 0..self.m() {
            if !self.live[i] || self.basis[i] < art_start {
                continue;
            }
            debug_assert!(self.b[i].abs() <= FEASIBILITY_TOL, "basic artificial above zero");
            // Prefer structural columns, then slack/surplus, for the pivot-in.
            let found =
                (0..art_start).filter(|&j| self.a.get(i, j).abs() > 1e-7).min_by(|&x, &y| {
                    let kx = usize::from(x >= nstruct);
                    let ky = usize::from(y >= nstruct);
                    (kx, x).cmp(&(ky, y))
                });
            match found {
                Some(j) => self.pivot(i, j),
                None => self.live[i] = false,
            }
        }
    }
}

/// Euclidean projection of `v` onto the probability simplex
/// `{ w : w >= 0, sum w = 1 }` by the sort-and-threshold algorithm.
///
/// Total over finite inputs; panics on NaN/infinite entries or empty input.
/// The output sums to 1 within 1e-12 (a final residual-spreading pass pins the
/// sum without moving any coordinate by more than machine epsilon per entry).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    assert!(!v.is_empty(), "cannot project an empty vector");
    assert!(v.iter().all(|x| x.is_finite()), "project_simplex requires finite input");

    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut w: Vec<f64> = v.iter().map(|&vi| (vi - theta).max(0.0)).collect();

    let sum: f64 = w.iter().sum();
    if sum != 1.0 {
        let support = w.iter().filter(|&&x| x > 0.0).count().max(1);
        let corr = (1.0 - sum) / support as f64;
        for x in w.iter_mut() {
            if *x > 0.0 {
                *x = (*x + corr).max(0.0);
            }
        }
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn simple(objective: Vec<f64>, constraints: Vec<LpConstraint>, nvars: usize) -> LpProblem {
        LpProblem { objective, constraints, bounds: vec![(0.0, None); nvars] }
    }

    #[test]
    fn minimize_single_variable_at_zero() {
        let p = simple(vec![1.0], vec![], 1);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 0.0);
        assert_abs_diff_eq!(s.objective_value, 0.0);
    }

    #[test]
    fn two_variable_box_corner() {
        // minimize -x - y  s.t.  x + y <= 1, x,y >= 0  ->  objective -1.
        let p = simple(
            vec![-1.0, -1.0],
            vec![LpConstraint { coeffs: vec![1.0, 1.0], relation: Relation::Le, rhs: 1.0 }],
            2,
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[0] + s.x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        let p = simple(
            vec![1.0],
            vec![
                LpConstraint { coeffs: vec![1.0], relation: Relation::Ge, rhs: 1.0 },
                LpConstraint { coeffs: vec![1.0], relation: Relation::Le, rhs: 0.0 },
            ],
            1,
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction_detected() {
        let p = simple(vec![-1.0], vec![], 1);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_and_upper_bounds() {
        // minimize x0 s.t. x0 + x1 = 1, 0 <= x1 <= 0.25 -> x0 = 0.75.
        let p = LpProblem {
            objective: vec![1.0, 0.0],
            constraints: vec![LpConstraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Eq,
                rhs: 1.0,
            }],
            bounds: vec![(0.0, None), (0.0, Some(0.25))],
        };
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.x[0], 0.75, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 0.25, epsilon = 1e-9);
    }

    #[test]
    fn nonzero_lower_bounds_shift_correctly() {
        // minimize x + y s.t. x + y >= 5, x >= 1, y >= 2 -> objective 5.
        let p = LpProblem {
            objective: vec![1.0, 1.0],
            constraints: vec![LpConstraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Ge,
                rhs: 5.0,
            }],
            bounds: vec![(1.0, None), (2.0, None)],
        };
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_abs_diff_eq!(s.objective_value, 5.0, epsilon = 1e-9);
        assert!(s.x[0] >= 1.0 - 1e-9 && s.x[1] >= 2.0 - 1e-9);
    }

    #[test]
    fn duals_satisfy_strong_duality_on_le_problem() {
        // minimize -2x - 3y s.t. x + y <= 4, x + 2y <= 5, x,y >= 0.
        let p = simple(
            vec![-2.0, -3.0],
            vec![
                LpConstraint { coeffs: vec![1.0, 1.0], relation: Relation::Le, rhs: 4.0 },
                LpConstraint { coeffs: vec![1.0, 2.0], relation: Relation::Le, rhs: 5.0 },
            ],
            2,
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // Optimum at x=3, y=1: objective -9.
        assert_abs_diff_eq!(s.objective_value, -9.0, epsilon = 1e-9);
        let dual_obj = 4.0 * s.duals[0] + 5.0 * s.duals[1];
        assert_abs_diff_eq!(dual_obj, s.objective_value, epsilon = 1e-6);
        // Dual feasibility for a min problem with <= rows: y <= 0, A^T y <= c.
        for &y in &s.duals {
            assert!(y <= 1e-9);
        }
        assert!(s.duals[0] + s.duals[1] <= -2.0 + 1e-9);
        assert!(s.duals[0] + 2.0 * s.duals[1] <= -3.0 + 1e-9);
    }

    #[test]
    fn validation_rejects_malformed_problems() {
        assert!(matches!(solve_lp(&LpProblem::default()), Err(LpError::Empty)));
        let p = LpProblem {
            objective: vec![1.0],
            constraints: vec![LpConstraint {
                coeffs: vec![1.0, 2.0],
                relation: Relation::Le,
                rhs: 0.0,
            }],
            bounds: vec![(0.0, None)],
        };
        assert!(matches!(solve_lp(&p), Err(LpError::BadRowLength { .. })));
        let p =
            LpProblem { objective: vec![1.0], constraints: vec![], bounds: vec![(2.0, Some(1.0))] };
        assert!(matches!(solve_lp(&p), Err(LpError::CrossedBounds { .. })));
    }

    #[test]
    fn dump_is_readable() {
        let p = LpProblem {
            objective: vec![1.0, 2.0],
            constraints: vec![LpConstraint {
                coeffs: vec![1.0, 1.0],
                relation: Relation::Ge,
                rhs: 0.5,
            }],
            bounds: vec![(0.0, Some(1.0)), (0.0, None)],
        };
        let d = p.dump();
        assert!(d.contains("minimize: 1*x0 + 2*x1"));
        assert!(d.contains("1*x0 + 1*x1 >= 0.5"));
        assert!(d.contains("0 <= x0 <= 1"));
    }

    #[test]
    fn projection_of_simplex_member_is_identity() {
        let v = vec![0.2, 0.3, 0.5];
        let w = project_simplex(&v);
        for (a, b) in v.iter().zip(&w) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn projection_boundary_case() {
        let w = project_simplex(&[2.0, 0.0]);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_symmetric_case() {
        let w = project_simplex(&[0.6, 0.6]);
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn projection_single_element() {
        let w = project_simplex(&[-3.7]);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn projection_sums_to_one_tightly() {
        let v: Vec<f64> = (0..156).map(|i| ((i * 7919) % 100) as f64 / 25.0 - 2.0).collect();
        let w = project_simplex(&v);
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "sum was {sum}");
        assert!(w.iter().all(|&x| x >= 0.0));
    }
}
