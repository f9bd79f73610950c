//! Bounded-variable primal simplex over a dense tableau.
//!
//! Solves `min c.x` subject to sparse linear rows (`<=`, `>=`, `=`) and
//! finite bounds on every structural variable. The relaxations this crate
//! produces are small (a few hundred rows), so the tableau is kept dense and
//! updated in place; a periodic refactorization from the basis guards
//! against drift.
//!
//! Design notes, for readers poking at the pivot loop:
//!
//! * Every row `a.x {<=,>=,=} b` is stored internally as `a.x + s = b` with
//!   a slack `s` bounded by the row sense (`[0,inf)`, `(-inf,0]`, `[0,0]`).
//!   The all-slack basis is then always available as a starting point.
//! * Phase 1 does not use artificial columns. It minimizes the total bound
//!   violation of the basic variables directly, which means a warm basis
//!   with a couple of violated rows (freshly added cuts, or a branching
//!   bound the parent optimum violates) is repaired in a handful of pivots
//!   instead of being thrown away.
//! * Entering variables are picked by largest reduced cost; after a streak
//!   of degenerate steps the loop switches to Bland's rule (lowest eligible
//!   index, lowest-index leaving tie-break) until progress resumes.

use nalgebra::DMatrix;
use thiserror::Error;

/// Row activity / primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Reduced-cost optimality tolerance.
pub const REDUCED_COST_TOL: f64 = 1e-7;
/// Variable bounds are honored to this tolerance in reported solutions.
pub const BOUND_TOL: f64 = 1e-9;

/// A pivot element smaller than this is treated as zero.
const PIVOT_TOL: f64 = 1e-9;
/// Steps shorter than this count as degenerate.
const DEGEN_STEP: f64 = 1e-10;
/// Pivots between tableau refactorizations; bounds roundoff drift on long
/// runs at a few percent of runtime.
const REFRESH_EVERY: usize = 2000;
/// Consecutive degenerate steps before switching to Bland's rule.
const BLAND_AFTER: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// Sparse constraint row over structural variable indices.
#[derive(Debug, Clone)]
pub struct LpRow {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A bounded linear program: `min objective.x` subject to `rows` and
/// `bounds[j].0 <= x_j <= bounds[j].1` (all bounds finite).
#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, bounds: Vec<(f64, f64)>) -> Self {
        assert_eq!(objective.len(), bounds.len());
        LpProblem { objective, rows: Vec::new(), bounds }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(LpRow { coeffs, sense, rhs });
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values; empty when infeasible.
    pub values: Vec<f64>,
    /// `+inf` when infeasible.
    pub objective: f64,
    /// Pivots (basis changes and bound flips) spent in this solve call.
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// A snapshot of the simplex basis, reusable on a problem that differs
/// from the snapshotted one only by appended rows and/or tightened bounds.
#[derive(Debug, Clone)]
pub struct BasisState {
    n_structural: usize,
    n_rows: usize,
    statuses: Vec<ColStatus>,
    basic_cols: Vec<usize>,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed problem: {0}")]
    BadProblem(String),
    #[error("simplex iteration guard tripped after {0} pivots")]
    IterationGuard(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Basis mismatch on warm start; callers fall back to a cold solve.
#[derive(Debug, Error)]
#[error("stale basis: {0}")]
pub struct StaleBasis(String);

/// Solves a problem from scratch.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution, LpError> {
    Simplex::from_problem(p)?.solve()
}

/// Re-solves starting from a basis taken from a parent problem. The parent
/// may have had fewer rows (new rows get their slacks basic) and looser
/// bounds; any resulting infeasibility is repaired by phase 1. A basis that
/// no longer fits the problem falls back to a cold solve.
pub fn warm_start(p: &LpProblem, basis: &BasisState) -> Result<LpSolution, LpError> {
    match Simplex::from_basis(p, basis) {
        Ok(mut s) => s.solve(),
        Err(_) => solve_lp(p),
    }
}

pub struct Simplex {
    n: usize,     // structural columns
    m: usize,     // rows (== slack columns)
    ncols: usize, // n + m
    rows: Vec<LpRow>,
    b: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    tableau: Vec<Vec<f64>>, // m rows of length ncols: B^-1 [A | I]
    x: Vec<f64>,
    status: Vec<ColStatus>,
    basis: Vec<usize>,
    pivots: usize,
    degen_streak: usize,
    bland: bool,
    /// Pins Bland's rule on for the rest of the call, regardless of the
    /// degeneracy streak. Set after a from-scratch restart so the retry
    /// walks a different pivot path than the one that failed.
    force_bland: bool,
    /// Cumulative pivot count at which the next periodic refactorization is
    /// due. Shared across calls so long-lived engines refresh on schedule
    /// no matter how the pivots split over individual solves.
    refresh_at: usize,
}

enum Block {
    Row { r: usize, to_upper: bool, t: f64 },
    Flip { t: f64 },
}

impl Block {
    fn t(&self) -> f64 {
        match *self {
            Block::Row { t, .. } | Block::Flip { t } => t,
        }
    }
}

impl Simplex {
    pub fn from_problem(p: &LpProblem) -> Result<Self, LpError> {
        let n = p.objective.len();
        if p.bounds.len() != n {
            return Err(LpError::BadProblem(format!(
                "{} objective entries but {} bounds",
                n,
                p.bounds.len()
            )));
        }
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(LpError::BadProblem(format!("non-finite bounds on x{j}")));
            }
        }
        let rows: Vec<LpRow> = p.rows.iter().map(|r| canonical_row(r, n)).collect::<Result<_, _>>()?;

        let m = rows.len();
        let ncols = n + m;
        let mut lo = Vec::with_capacity(ncols);
        let mut hi = Vec::with_capacity(ncols);
        for &(l, h) in &p.bounds {
            lo.push(l);
            hi.push(h);
        }
        for row in &rows {
            let (sl, sh) = slack_bounds(row.sense);
            lo.push(sl);
            hi.push(sh);
        }
        let mut cost = p.objective.clone();
        cost.resize(ncols, 0.0);

        let mut tableau = vec![vec![0.0; ncols]; m];
        for (i, row) in rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                tableau[i][j] = a;
            }
            tableau[i][n + i] = 1.0;
        }

        let mut status = vec![ColStatus::AtLower; ncols];
        let mut x = vec![0.0; ncols];
        for j in 0..n {
            x[j] = lo[j];
        }
        let b: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
        let mut basis = Vec::with_capacity(m);
        for (i, row) in rows.iter().enumerate() {
            let mut s = b[i];
            for &(j, a) in &row.coeffs {
                s -= a * x[j];
            }
            x[n + i] = s;
            status[n + i] = ColStatus::Basic;
            basis.push(n + i);
        }

        Ok(Simplex {
            n,
            m,
            ncols,
            rows,
            b,
            cost,
            lo,
            hi,
            tableau,
            x,
            status,
            basis,
            pivots: 0,
            degen_streak: 0,
            bland: false,
            force_bland: false,
            refresh_at: REFRESH_EVERY,
        })
    }

    /// Builds an engine for `p` around a snapshotted basis (see
    /// [`warm_start`]). Fails with [`StaleBasis`] when the snapshot cannot
    /// fit `p` or its basis matrix has gone singular.
    pub fn from_basis(p: &LpProblem, bs: &BasisState) -> Result<Self, StaleBasis> {
        if bs.n_structural != p.objective.len() {
            return Err(StaleBasis("structural dimension changed".into()));
        }
        if bs.n_rows > p.rows.len() {
            return Err(StaleBasis("rows were removed".into()));
        }
        let mut s = Simplex::from_problem(p).map_err(|e| StaleBasis(e.to_string()))?;

        // Overlay the snapshot: structural statuses verbatim, old slacks
        // verbatim, new rows keep their slacks basic.
        for j in 0..s.n {
            s.status[j] = bs.statuses[j];
        }
        for k in 0..bs.n_rows {
            s.status[s.n + k] = bs.statuses[bs.n_structural + k];
        }
        let mut basis = bs.basic_cols.clone();
        for k in bs.n_rows..s.m {
            basis.push(s.n + k);
        }
        if basis.len() != s.m {
            return Err(StaleBasis("basis size mismatch".into()));
        }
        let mut seen = vec![false; s.ncols];
        for &c in &basis {
            if c >= s.ncols || seen[c] {
                return Err(StaleBasis("invalid basic column".into()));
            }
            seen[c] = true;
            s.status[c] = ColStatus::Basic;
        }
        let n_basic = s.status.iter().filter(|&&st| st == ColStatus::Basic).count();
        if n_basic != s.m {
            return Err(StaleBasis("basic column count mismatch".into()));
        }
        s.basis = basis;
        s.refactor().map_err(|e| StaleBasis(e.to_string()))?;
        Ok(s)
    }

    /// Appends a row, keeping the current basis valid by making the new
    /// slack basic. The new tableau row is the original row reduced by the
    /// existing basic columns; nothing else changes.
    pub fn add_row(&mut self, row: &LpRow) {
        let row = canonical_row(row, self.n).expect("row must index existing variables");
        let (sl, sh) = slack_bounds(row.sense);
        let slack_col = self.ncols;

        for tr in &mut self.tableau {
            tr.push(0.0);
        }
        self.lo.push(sl);
        self.hi.push(sh);
        self.cost.push(0.0);

        // Dense copy of the new row over all existing columns.
        let mut dense = vec![0.0; self.ncols + 1];
        for &(j, a) in &row.coeffs {
            dense[j] = a;
        }
        dense[slack_col] = 1.0;
        // Reduce by the current basis: subtract a_B[r] * T[r] using the
        // *original* coefficients at the basic columns (tableau rows are
        // already fully reduced, so this is a one-shot combination).
        let factors: Vec<f64> = self.basis.iter().map(|&c| dense[c]).collect();
        for (r, &f) in factors.iter().enumerate() {
            if f != 0.0 {
                for (d, &t) in dense.iter_mut().zip(self.tableau[r].iter()) {
                    *d -= f * t;
                }
            }
        }

        // Slack value from the original row at the current point.
        let mut s = row.rhs;
        for &(j, a) in &row.coeffs {
            s -= a * self.x[j];
        }
        self.x.push(s);
        self.status.push(ColStatus::Basic);
        self.basis.push(slack_col);
        self.tableau.push(dense);
        self.b.push(row.rhs);
        self.rows.push(row);
        self.m += 1;
        self.ncols += 1;
    }

    /// Replaces the bounds of every structural variable in one call,
    /// keeping the basis. Nonbasic columns are re-snapped onto their
    /// (possibly moved) bound and the basic values absorb the shift through
    /// the tableau columns; basic columns that fall outside their new range
    /// are left for phase 1 to repair. Costs O(rows) per column whose bound
    /// actually moved — no refactorization.
    pub fn set_structural_bounds(&mut self, bounds: &[(f64, f64)]) {
        assert_eq!(bounds.len(), self.n, "one bound pair per structural variable");
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if lo == self.lo[j] && hi == self.hi[j] {
                continue;
            }
            self.lo[j] = lo;
            self.hi[j] = hi;
            if self.status[j] == ColStatus::Basic {
                continue;
            }
            let target = match self.status[j] {
                ColStatus::AtLower => lo,
                ColStatus::AtUpper => hi,
                ColStatus::Basic => unreachable!(),
            };
            let delta = target - self.x[j];
            if delta == 0.0 {
                continue;
            }
            self.x[j] = target;
            for (r, &bc) in self.basis.iter().enumerate() {
                let t = self.tableau[r][j];
                if t != 0.0 {
                    self.x[bc] -= t * delta;
                }
            }
        }
    }

    pub fn basis_state(&self) -> BasisState {
        BasisState {
            n_structural: self.n,
            n_rows: self.m,
            statuses: self.status.clone(),
            basic_cols: self.basis.clone(),
        }
    }

    /// Runs phase 1 (feasibility repair) and phase 2 to optimality.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let start_pivots = self.pivots;
        for j in 0..self.n {
            if self.lo[j] > self.hi[j] + 1e-12 {
                return Ok(self.infeasible_solution(start_pivots));
            }
        }
        // Long-lived engines accumulate roundoff across calls; refresh on
        // the same cumulative-pivot schedule the phases use rather than on
        // every call (a full refactorization costs as much as hundreds of
        // pivots). A singular basis only means the refresh is unavailable
        // right now (refactor leaves the state untouched); the drifted
        // tableau is still a workable simplex state and the verification
        // below decides whether the answer can be trusted.
        if self.pivots >= self.refresh_at {
            if self.refactor().is_err() {
                log::debug!("skipping pre-solve refresh: basis numerically singular");
            }
            self.refresh_at = self.pivots + REFRESH_EVERY;
        }

        // The retry loop refactorizes and goes around again if the final
        // check finds drift; clean solves pass through once.
        self.force_bland = false;
        let mut budget = self.pivots + self.pivot_limit();
        for _attempt in 0..3 {
            if !self.phase1(budget)? {
                return Ok(self.infeasible_solution(start_pivots));
            }
            self.phase2(budget)?;

            let (bound_viol, row_resid) = self.verify();
            if bound_viol <= BOUND_TOL && row_resid <= FEASIBILITY_TOL {
                let objective = (0..self.n).map(|j| self.cost[j] * self.x[j]).sum();
                return Ok(LpSolution {
                    status: LpStatus::Optimal,
                    values: self.x[..self.n].to_vec(),
                    objective,
                    pivots: self.pivots - start_pivots,
                });
            }
            if self.refactor().is_err() {
                // The basis is numerically singular, so it can neither be
                // trusted nor cleaned up in place. Start over from the
                // slack basis with Bland's rule pinned on: slower, but it
                // walks a provably terminating path that is different from
                // the one that just drifted here.
                log::debug!("restarting from the slack basis after an unverifiable solve");
                self.reset_to_slack_basis();
                self.force_bland = true;
                budget = self.pivots + self.pivot_limit();
            }
            self.refresh_at = self.pivots + REFRESH_EVERY;
        }
        Err(LpError::Numerical("could not reach a verified optimum".into()))
    }

    fn infeasible_solution(&self, start_pivots: usize) -> LpSolution {
        LpSolution {
            status: LpStatus::Infeasible,
            values: Vec::new(),
            objective: f64::INFINITY,
            pivots: self.pivots - start_pivots,
        }
    }

    /// Minimizes the total bound violation of the basic variables.
    /// Returns false when the minimum is still positive (infeasible).
    fn phase1(&mut self, budget: usize) -> Result<bool, LpError> {
        loop {
            let (w, infeas) = self.violation_costs();
            if infeas <= FEASIBILITY_TOL {
                self.snap_residual_violations();
                return Ok(true);
            }
            if self.pivots >= budget {
                return Err(LpError::IterationGuard(self.pivots));
            }
            if self.pivots >= self.refresh_at {
                // Opportunistic accuracy step: when the basis matrix is
                // numerically singular the refresh is skipped (state is
                // untouched) and retried after the basis has moved on.
                if self.refactor().is_err() {
                    log::debug!("periodic refresh skipped: basis numerically singular");
                }
                self.refresh_at = self.pivots + REFRESH_EVERY;
            }

            // d_j = -sum_r w_r T[r][j]; eligible entering variables make the
            // violation sum decrease.
            let mut z = vec![0.0; self.ncols];
            for (r, &wr) in w.iter().enumerate() {
                if wr != 0.0 {
                    for (zj, &t) in z.iter_mut().zip(self.tableau[r].iter()) {
                        *zj += wr * t;
                    }
                }
            }
            let entering = self.select_entering(|j| -z[j], 1e-9);
            let Some(j) = entering else {
                return Ok(false); // violation minimized but positive
            };
            let sigma = self.direction(j);
            let block = self
                .ratio_test(j, sigma)
                .ok_or_else(|| LpError::Numerical("unblocked phase-1 ray".into()))?;
            self.apply_step(j, sigma, block);
        }
    }

    /// Standard bounded-variable phase 2 from a feasible basis.
    fn phase2(&mut self, budget: usize) -> Result<(), LpError> {
        loop {
            if self.pivots >= budget {
                return Err(LpError::IterationGuard(self.pivots));
            }
            if self.pivots >= self.refresh_at {
                // Same skip-on-singular policy as phase 1; see the note there.
                if self.refactor().is_err() {
                    log::debug!("periodic refresh skipped: basis numerically singular");
                }
                self.refresh_at = self.pivots + REFRESH_EVERY;
            }
            let mut z = vec![0.0; self.ncols];
            for (r, &bc) in self.basis.iter().enumerate() {
                let cb = self.cost[bc];
                if cb != 0.0 {
                    for (zj, &t) in z.iter_mut().zip(self.tableau[r].iter()) {
                        *zj += cb * t;
                    }
                }
            }
            let cost = &self.cost;
            let entering = self.select_entering(|j| cost[j] - z[j], REDUCED_COST_TOL);
            let Some(j) = entering else {
                return Ok(());
            };
            let sigma = self.direction(j);
            let block = self
                .ratio_test(j, sigma)
                .ok_or_else(|| LpError::Numerical("unbounded direction in phase 2".into()))?;
            self.apply_step(j, sigma, block);
        }
    }

    /// Phase-1 cost signs per row (+1 basic above upper bound, -1 below
    /// lower) and the total violation.
    fn violation_costs(&self) -> (Vec<f64>, f64) {
        let mut w = vec![0.0; self.m];
        let mut total = 0.0;
        for (r, &q) in self.basis.iter().enumerate() {
            let v = self.x[q];
            if v < self.lo[q] - BOUND_TOL {
                w[r] = -1.0;
                total += self.lo[q] - v;
            } else if v > self.hi[q] + BOUND_TOL {
                w[r] = 1.0;
                total += v - self.hi[q];
            }
        }
        (w, total)
    }

    /// Clamps basic variables that ended phase 1 within the feasibility
    /// tolerance of a bound onto that bound; the tiny error moves into the
    /// row residual, which the same tolerance covers.
    fn snap_residual_violations(&mut self) {
        for &q in &self.basis {
            if self.x[q] < self.lo[q] {
                self.x[q] = self.lo[q];
            } else if self.x[q] > self.hi[q] {
                self.x[q] = self.hi[q];
            }
        }
    }

    /// Picks the entering column given reduced costs, honoring Bland's rule
    /// while a degenerate streak is active.
    fn select_entering<F: Fn(usize) -> f64>(&self, d: F, tol: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            if self.status[j] == ColStatus::Basic || self.lo[j] == self.hi[j] {
                continue;
            }
            let dj = d(j);
            let score = match self.status[j] {
                ColStatus::AtLower if dj < -tol => -dj,
                ColStatus::AtUpper if dj > tol => dj,
                _ => continue,
            };
            if self.bland || self.force_bland {
                return Some(j); // lowest eligible index
            }
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        best.map(|(j, _)| j)
    }

    fn direction(&self, j: usize) -> f64 {
        match self.status[j] {
            ColStatus::AtLower => 1.0,
            ColStatus::AtUpper => -1.0,
            ColStatus::Basic => unreachable!("entering column is nonbasic"),
        }
    }

    /// Finds the blocking constraint for entering column `j` moving in
    /// direction `sigma`. Variables currently violating a bound block when
    /// they *reach* that bound (phase-1 repair); feasible variables block at
    /// whichever bound they approach. Ties prefer the lowest-index basic
    /// variable, which is what Bland's rule needs.
    fn ratio_test(&self, j: usize, sigma: f64) -> Option<Block> {
        let mut best: Option<Block> = None;
        let span = self.hi[j] - self.lo[j];
        if span.is_finite() {
            best = Some(Block::Flip { t: span });
        }
        for r in 0..self.m {
            let a = self.tableau[r][j];
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let rho = -sigma * a; // basic value rate per unit step
            let q = self.basis[r];
            let (v, lo, hi) = (self.x[q], self.lo[q], self.hi[q]);
            let (t, to_upper) = if v < lo - BOUND_TOL {
                if rho > 0.0 {
                    ((lo - v) / rho, false)
                } else {
                    continue; // moving further below; slope already priced in
                }
            } else if v > hi + BOUND_TOL {
                if rho < 0.0 {
                    ((v - hi) / -rho, true)
                } else {
                    continue;
                }
            } else if rho > 0.0 {
                if !hi.is_finite() {
                    continue;
                }
                ((hi - v) / rho, true)
            } else {
                if !lo.is_finite() {
                    continue;
                }
                ((v - lo) / -rho, false)
            };
            let t = t.max(0.0);
            // Ties keep an earlier flip (always a genuine step) and
            // otherwise prefer the lowest-index leaving variable, which is
            // the tie-break Bland's rule needs.
            let replace = match &best {
                None => true,
                Some(Block::Flip { t: bt }) => t < *bt,
                Some(Block::Row { t: bt, r: br, .. }) => {
                    t < *bt || (t == *bt && self.basis[r] < self.basis[*br])
                }
            };
            if replace {
                best = Some(Block::Row { r, to_upper, t });
            }
        }
        best
    }

    fn apply_step(&mut self, j: usize, sigma: f64, block: Block) {
        let t = block.t();
        // Move every basic variable along the direction.
        for r in 0..self.m {
            let a = self.tableau[r][j];
            if a != 0.0 {
                self.x[self.basis[r]] -= sigma * a * t;
            }
        }
        match block {
            Block::Flip { .. } => {
                // The entering variable runs to its opposite bound.
                self.status[j] = match self.status[j] {
                    ColStatus::AtLower => {
                        self.x[j] = self.hi[j];
                        ColStatus::AtUpper
                    }
                    ColStatus::AtUpper => {
                        self.x[j] = self.lo[j];
                        ColStatus::AtLower
                    }
                    ColStatus::Basic => unreachable!(),
                };
            }
            Block::Row { r, to_upper, .. } => {
                self.x[j] = self.bound_value(j) + sigma * t;
                let q = self.basis[r];
                // The leaving variable lands exactly on its bound.
                self.x[q] = if to_upper { self.hi[q] } else { self.lo[q] };
                self.status[q] = if to_upper { ColStatus::AtUpper } else { ColStatus::AtLower };
                self.status[j] = ColStatus::Basic;
                self.basis[r] = j;

                // Gaussian pivot on (r, j).
                let piv = self.tableau[r][j];
                let inv = 1.0 / piv;
                for v in self.tableau[r].iter_mut() {
                    *v *= inv;
                }
                let pivot_row = std::mem::take(&mut self.tableau[r]);
                for (rr, row) in self.tableau.iter_mut().enumerate() {
                    if rr == r {
                        continue;
                    }
                    let f = row[j];
                    if f != 0.0 {
                        for (v, &p) in row.iter_mut().zip(pivot_row.iter()) {
                            *v -= f * p;
                        }
                        row[j] = 0.0; // exact by construction
                    }
                }
                self.tableau[r] = pivot_row;
            }
        }
        self.pivots += 1;
        if t > DEGEN_STEP {
            self.degen_streak = 0;
            self.bland = false;
        } else {
            self.degen_streak += 1;
            if self.degen_streak >= BLAND_AFTER {
                self.bland = true;
            }
        }
    }

    fn bound_value(&self, j: usize) -> f64 {
        match self.status[j] {
            ColStatus::AtLower => self.lo[j],
            ColStatus::AtUpper => self.hi[j],
            ColStatus::Basic => self.x[j],
        }
    }

    /// Max bound violation and max row residual at the current point,
    /// measured against the *original* rows.
    fn verify(&self) -> (f64, f64) {
        let mut bound_viol = 0.0f64;
        for j in 0..self.ncols {
            bound_viol = bound_viol
                .max(self.lo[j] - self.x[j])
                .max(self.x[j] - self.hi[j]);
        }
        let mut resid = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = -self.b[i] + self.x[self.n + i];
            for &(j, a) in &row.coeffs {
                s += a * self.x[j];
            }
            resid = resid.max(s.abs());
        }
        (bound_viol, resid)
    }

    /// Discards all pivoting state and puts the engine back on the
    /// all-slack starting basis — the state a freshly built engine begins
    /// from. Rows, bounds, costs and the cumulative pivot count survive.
    /// This is the escape hatch for a basis that has drifted into numeric
    /// singularity: unlike [`Self::refactor`] it cannot fail.
    fn reset_to_slack_basis(&mut self) {
        let mut tableau = std::mem::take(&mut self.tableau);
        for (i, row) in self.rows.iter().enumerate() {
            let t = &mut tableau[i];
            t.iter_mut().for_each(|v| *v = 0.0);
            for &(j, a) in &row.coeffs {
                t[j] = a;
            }
            t[self.n + i] = 1.0;
        }
        self.tableau = tableau;

        for st in self.status.iter_mut() {
            *st = ColStatus::AtLower;
        }
        for j in 0..self.n {
            self.x[j] = self.lo[j];
        }
        self.basis.clear();
        for i in 0..self.m {
            let mut s = self.b[i];
            for &(j, a) in &self.rows[i].coeffs {
                s -= a * self.x[j];
            }
            self.x[self.n + i] = s;
            self.status[self.n + i] = ColStatus::Basic;
            self.basis.push(self.n + i);
        }
        self.degen_streak = 0;
        self.bland = false;
        self.refresh_at = self.pivots + REFRESH_EVERY;
    }

    /// Recomputes the tableau and basic values exactly from the recorded
    /// basis (LU factorization of the basis matrix).
    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            for j in 0..self.n {
                if self.status[j] != ColStatus::Basic {
                    self.x[j] = self.bound_value(j);
                }
            }
            return Ok(());
        }
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        let mut pos_of_col = vec![usize::MAX; self.ncols];
        for (r, &c) in self.basis.iter().enumerate() {
            pos_of_col[c] = r;
        }
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                let p = pos_of_col[j];
                if p != usize::MAX {
                    bmat[(i, p)] = a;
                }
            }
            let p = pos_of_col[self.n + i];
            if p != usize::MAX {
                bmat[(i, p)] = 1.0;
            }
        }
        let lu = bmat.lu();
        if !lu.is_invertible() {
            return Err(LpError::Numerical("singular basis matrix".into()));
        }

        // Full constraint matrix [A | I], dense.
        let mut amat = DMatrix::<f64>::zeros(m, self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                amat[(i, j)] = a;
            }
            amat[(i, self.n + i)] = 1.0;
        }
        let solved = lu
            .solve(&amat)
            .ok_or_else(|| LpError::Numerical("basis solve failed".into()))?;
        for r in 0..m {
            for j in 0..self.ncols {
                self.tableau[r][j] = solved[(r, j)];
            }
        }

        // Nonbasic variables sit on their bounds; basic values balance the rows.
        for j in 0..self.ncols {
            if self.status[j] != ColStatus::Basic {
                self.x[j] = self.bound_value(j);
            }
        }
        let mut rhs = DMatrix::<f64>::zeros(m, 1);
        for (i, row) in self.rows.iter().enumerate() {
            let mut s = self.b[i];
            for &(j, a) in &row.coeffs {
                if self.status[j] != ColStatus::Basic {
                    s -= a * self.x[j];
                }
            }
            if self.status[self.n + i] != ColStatus::Basic {
                s -= self.x[self.n + i];
            }
            rhs[(i, 0)] = s;
        }
        let xb = lu
            .solve(&rhs)
            .ok_or_else(|| LpError::Numerical("basis solve failed".into()))?;
        for (r, &c) in self.basis.iter().enumerate() {
            self.x[c] = xb[(r, 0)];
        }
        Ok(())
    }

    /// Row duals `y = c_B B^-1`, read off the slack columns of the tableau.
    pub fn duals(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        for (r, &bc) in self.basis.iter().enumerate() {
            let cb = self.cost[bc];
            if cb != 0.0 {
                for i in 0..self.m {
                    y[i] += cb * self.tableau[r][self.n + i];
                }
            }
        }
        y
    }

    /// Reduced costs of the structural variables.
    pub fn reduced_costs(&self) -> Vec<f64> {
        let mut z = vec![0.0; self.n];
        for (r, &bc) in self.basis.iter().enumerate() {
            let cb = self.cost[bc];
            if cb != 0.0 {
                for j in 0..self.n {
                    z[j] += cb * self.tableau[r][j];
                }
            }
        }
        (0..self.n).map(|j| self.cost[j] - z[j]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn n_rows(&self) -> usize {
        self.m
    }

    fn pivot_limit(&self) -> usize {
        500 + 40 * (self.m + self.ncols)
    }
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

/// Merges duplicate indices, drops zeros, and validates the row.
fn canonical_row(row: &LpRow, n: usize) -> Result<LpRow, LpError> {
    let mut dense: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
    for &(j, a) in &row.coeffs {
        if j >= n {
            return Err(LpError::BadProblem(format!("row references x{j} but n = {n}")));
        }
        if !a.is_finite() {
            return Err(LpError::BadProblem(format!("non-finite coefficient on x{j}")));
        }
        match dense.iter_mut().find(|(k, _)| *k == j) {
            Some((_, acc)) => *acc += a,
            None => dense.push((j, a)),
        }
    }
    dense.retain(|&(_, a)| a != 0.0);
    dense.sort_by_key(|&(j, _)| j);
    if !row.rhs.is_finite() {
        return Err(LpError::BadProblem("non-finite right-hand side".into()));
    }
    Ok(LpRow { coeffs: dense, sense: row.sense, rhs: row.rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// KKT certificate: primal feasibility, dual sign conditions, and
    /// complementary slackness together prove optimality.
    fn assert_optimal_certificate(p: &LpProblem, eng: &Simplex, sol: &LpSolution) {
        assert_eq!(sol.status, LpStatus::Optimal);
        let x = &sol.values;
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            assert!(
                x[j] >= lo - 1e-8 && x[j] <= hi + 1e-8,
                "x{j} = {} outside [{lo}, {hi}]",
                x[j]
            );
        }
        let y = eng.duals();
        for (i, row) in p.rows.iter().enumerate() {
            let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
            let slack = row.rhs - act;
            match row.sense {
                Sense::Le => assert!(slack >= -1e-6, "row {i} violated by {}", -slack),
                Sense::Ge => assert!(slack <= 1e-6, "row {i} violated by {slack}"),
                Sense::Eq => assert!(slack.abs() <= 1e-6, "row {i} off by {slack}"),
            }
            // Dual sign and complementary slackness. With rows written as
            // a.x + s = b and s >= 0 for <=, the dual of an inactive row
            // must vanish; active rows need the right sign.
            match row.sense {
                Sense::Le => assert!(y[i] <= 1e-6, "Le row {i} dual {}", y[i]),
                Sense::Ge => assert!(y[i] >= -1e-6, "Ge row {i} dual {}", y[i]),
                Sense::Eq => {}
            }
            if slack.abs() > 1e-6 {
                assert!(y[i].abs() <= 1e-6, "inactive row {i} has dual {}", y[i]);
            }
        }
        let d = eng.reduced_costs();
        for (j, &(lo, hi)) in p.bounds.iter().enumerate() {
            let at_lo = (x[j] - lo).abs() <= 1e-7;
            let at_hi = (x[j] - hi).abs() <= 1e-7;
            if at_lo && !at_hi {
                assert!(d[j] >= -1e-6, "x{j} at lower with d = {}", d[j]);
            } else if at_hi && !at_lo {
                assert!(d[j] <= 1e-6, "x{j} at upper with d = {}", d[j]);
            } else if !at_lo && !at_hi {
                assert!(d[j].abs() <= 1e-6, "interior x{j} with d = {}", d[j]);
            }
        }
    }

    #[test]
    fn maximizes_along_simplex_face() {
        // min -x1 - x2 with x1 + x2 <= 1 on the unit box.
        let mut p = LpProblem::new(vec![-1.0, -1.0], vec![(0.0, 1.0), (0.0, 1.0)]);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let mut eng = Simplex::from_problem(&p).unwrap();
        let sol = eng.solve().unwrap();
        assert!((sol.objective - (-1.0)).abs() < 1e-9, "objective {}", sol.objective);
        assert!((sol.values[0] + sol.values[1] - 1.0).abs() < 1e-7);
        assert_optimal_certificate(&p, &eng, &sol);
    }

    #[test]
    fn fixed_variable_without_rows() {
        let p = LpProblem::new(vec![2.0], vec![(0.5, 0.5)]);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-12);
        assert_eq!(sol.values, vec![0.5]);
    }

    #[test]
    fn certifies_infeasibility() {
        // x1 + x2 >= 1.5 cannot hold on [0, 0.5]^2.
        let mut p = LpProblem::new(vec![0.0, 0.0], vec![(0.0, 0.5), (0.0, 0.5)]);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Ge, 1.5);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert_eq!(sol.objective, f64::INFINITY);
    }

    #[test]
    fn equality_row_picks_cheap_variable() {
        let mut p = LpProblem::new(vec![1.0, 2.0], vec![(0.0, 1.0), (0.0, 1.0)]);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 1.0);
        let mut eng = Simplex::from_problem(&p).unwrap();
        let sol = eng.solve().unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.values[0] - 1.0).abs() < 1e-7);
        assert_optimal_certificate(&p, &eng, &sol);
    }

    #[test]
    fn ge_row_sets_floor() {
        let mut p = LpProblem::new(vec![1.0], vec![(0.0, 1.0)]);
        p.add_row(vec![(0, 1.0)], Sense::Ge, 0.3);
        let sol = solve_lp(&p).unwrap();
        assert!((sol.objective - 0.3).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut p = LpProblem::new(vec![1.0, 0.0], vec![(0.6, 0.6), (0.0, 1.0)]);
        // Row forces x0 <= 0.4, bounds fix it at 0.6.
        p.add_row(vec![(0, 1.0)], Sense::Le, 0.4);
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn degenerate_overlapping_rows_still_solve() {
        // Many rows active at the same vertex; exercises degenerate pivots
        // without tripping the iteration guard.
        let mut p = LpProblem::new(vec![-1.0, -1.0, -1.0], vec![(0.0, 1.0); 3]);
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    p.add_row(vec![(a, 1.0), (b, -1.0)], Sense::Le, 0.0);
                }
            }
        }
        p.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 1.5);
        let mut eng = Simplex::from_problem(&p).unwrap();
        let sol = eng.solve().unwrap();
        assert!((sol.objective - (-1.5)).abs() < 1e-7, "objective {}", sol.objective);
        assert_optimal_certificate(&p, &eng, &sol);
    }

    #[test]
    fn warm_start_on_satisfied_row_is_free() {
        let mut p = LpProblem::new(vec![-1.0, -1.0], vec![(0.0, 1.0), (0.0, 1.0)]);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let mut eng = Simplex::from_problem(&p).unwrap();
        let first = eng.solve().unwrap();
        let basis = eng.basis_state();

        // A row the optimum already satisfies: x1 + x2 <= 2.
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 2.0);
        let again = warm_start(&p, &basis).unwrap();
        assert_eq!(again.pivots, 0, "satisfied row should cost no pivots");
        assert!((again.objective - first.objective).abs() < 1e-12);
        assert_eq!(again.values, first.values);
    }

    #[test]
    fn warm_start_repairs_violated_row() {
        // Optimum of the relaxation sits at (1, 1); the added row cuts it off.
        let p0 = LpProblem::new(vec![-1.0, -1.0], vec![(0.0, 1.0), (0.0, 1.0)]);
        let mut eng = Simplex::from_problem(&p0).unwrap();
        let relaxed = eng.solve().unwrap();
        assert!((relaxed.objective - (-2.0)).abs() < 1e-9);
        let basis = eng.basis_state();

        let mut p1 = p0.clone();
        p1.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0);
        let cut = warm_start(&p1, &basis).unwrap();
        assert_eq!(cut.status, LpStatus::Optimal);
        assert!(cut.objective >= relaxed.objective - 1e-9, "cut must not improve the bound");
        assert!((cut.objective - (-1.0)).abs() < 1e-7);

        let cold = solve_lp(&p1).unwrap();
        assert!(cut.pivots <= cold.pivots, "warm {} vs cold {}", cut.pivots, cold.pivots);
    }

    #[test]
    fn warm_start_after_bound_tightening() {
        let mut p = LpProblem::new(vec![-2.0, -1.0], vec![(0.0, 1.0), (0.0, 1.0)]);
        p.add_row(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.2);
        let mut eng = Simplex::from_problem(&p).unwrap();
        let parent = eng.solve().unwrap();
        let basis = eng.basis_state();

        // Child fixes x0 = 0 even though the parent optimum uses x0 = 1.
        let mut child = p.clone();
        child.bounds[0] = (0.0, 0.0);
        let sol = warm_start(&child, &basis).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective >= parent.objective - 1e-9);
        assert!((sol.values[0]).abs() < 1e-9);
        assert!((sol.objective - (-1.0)).abs() < 1e-7);
    }

    #[test]
    fn incremental_rows_match_fresh_solves() {
        // Growing the same engine by rows must agree with cold solves of the
        // grown problem at every step.
        let mut p = LpProblem::new(
            vec![-3.0, -2.0, -1.0],
            vec![(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
        );
        let mut eng = Simplex::from_problem(&p).unwrap();
        eng.solve().unwrap();
        let cuts = vec![
            LpRow { coeffs: vec![(0, 1.0), (1, 1.0)], sense: Sense::Le, rhs: 1.4 },
            LpRow { coeffs: vec![(1, 1.0), (2, 1.0)], sense: Sense::Le, rhs: 0.9 },
            LpRow { coeffs: vec![(0, 1.0), (2, 1.0)], sense: Sense::Ge, rhs: 0.5 },
        ];
        for cut in cuts {
            eng.add_row(&cut);
            p.rows.push(cut);
            let inc = eng.solve().unwrap();
            let cold = solve_lp(&p).unwrap();
            assert_eq!(inc.status, cold.status);
            assert!(
                (inc.objective - cold.objective).abs() < 1e-7,
                "incremental {} vs cold {}",
                inc.objective,
                cold.objective
            );
        }
    }

    #[test]
    fn random_problems_carry_optimality_certificates() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut optimal = 0;
        for case in 0..60 {
            let n = rng.gen_range(2..=7);
            let m = rng.gen_range(0..=5);
            let mut p = LpProblem::new(
                (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                (0..n)
                    .map(|_| {
                        let lo = rng.gen_range(-1.0..0.5);
                        (lo, lo + rng.gen_range(0.0..1.5))
                    })
                    .collect(),
            );
            for _ in 0..m {
                let mut coeffs = Vec::new();
                for j in 0..n {
                    if rng.gen_bool(0.7) {
                        coeffs.push((j, rng.gen_range(-2.0..2.0)));
                    }
                }
                let sense = match rng.gen_range(0..3) {
                    0 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Eq,
                };
                p.add_row(coeffs, sense, rng.gen_range(-1.5..1.5));
            }
            let mut eng = Simplex::from_problem(&p).unwrap();
            let sol = eng.solve().unwrap();
            match sol.status {
                LpStatus::Optimal => {
                    assert_optimal_certificate(&p, &eng, &sol);
                    optimal += 1;
                }
                LpStatus::Infeasible => {
                    // Spot-check: no random point in the box satisfies the rows.
                    for _ in 0..200 {
                        let x: Vec<f64> = p
                            .bounds
                            .iter()
                            .map(|&(lo, hi)| rng.gen_range(lo..=hi))
                            .collect();
                        let ok = p.rows.iter().all(|row| {
                            let act: f64 =
                                row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                            match row.sense {
                                Sense::Le => act <= row.rhs + 1e-9,
                                Sense::Ge => act >= row.rhs - 1e-9,
                                Sense::Eq => (act - row.rhs).abs() <= 1e-9,
                            }
                        });
                        assert!(!ok, "case {case}: found a feasible point after Infeasible");
                    }
                }
            }
        }
        assert!(optimal >= 20, "suspiciously few optimal cases ({optimal}/60)");
    }

    #[test]
    fn repeated_solves_are_deterministic() {
        let mut p = LpProblem::new(vec![-1.0, 0.5, -0.25], vec![(0.0, 1.0); 3]);
        p.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.0);
        p.add_row(vec![(0, 1.0), (2, -1.0)], Sense::Ge, -0.5);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective, b.objective);
        assert_eq!(a.pivots, b.pivots);
    }
}
