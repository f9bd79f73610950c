//! Branch-and-cut search for the routing/landmark program.
//!
//! Nodes are explored best-first (lowest parent relaxation bound, deeper
//! node on ties, then first-queued). Each node re-solves its relaxation,
//! then alternates separation and re-solving until no subtour row is
//! violated, and finally either accepts an integer point as the new
//! incumbent or branches on the most fractional column. Subtour rows live
//! in a global pool: every node relaxation includes all rows found so far,
//! so work done anywhere in the tree benefits the whole search.
//!
//! One simplex engine is carried from node to node. Moving to the next
//! node only rewrites the variable bounds (and appends any rows found
//! since the engine last saw them), so the relaxation re-solve warm-starts
//! from wherever the previous node left the basis instead of paying for a
//! fresh factorization per node. If the engine's numerics go sour the node
//! is re-run on a freshly built one.
//!
//! Coverage rows are generated lazily the same way subtour rows are: the
//! model has one per usable edge, but most carry no mass in any given
//! relaxation, so a row enters the working LP only once a point actually
//! violates it. Dropping satisfied-anyway rows keeps the working LPs at a
//! fraction of the full model's size without changing any node bound the
//! search acts on: a subset relaxation only ever under-estimates, and the
//! cut loop re-solves until nothing (subtour or coverage) is violated.
//!
//! The search is deterministic: repeated runs on the same instance visit
//! the same nodes in the same order and return the same solution.

use std::collections::{BinaryHeap, HashSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::instance::Instance;
use crate::lp::{LpError, LpProblem, LpStatus, Sense, Simplex};
use crate::model::{
    assemble_solution, build_model_weighted, check_feasible, MilpModel, Row, RowTag, Solution,
};
use crate::separation::separate_secs_with;

/// Violation needed before an inactive coverage row is pulled into the
/// working relaxation. Matches the LP feasibility tolerance, so a point
/// that clears this scan satisfies the full model to LP accuracy.
const LAZY_ROW_TOL: f64 = 1e-7;

/// Knobs for one solve. The defaults are what the command-line tool uses.
#[derive(Debug, Clone)]
pub struct SolveParams {
    /// Columns within this distance of an integer count as integral.
    pub integrality_tol: f64,
    /// A subtour row must be short of 2 by this much to be added.
    pub cut_violation_tol: f64,
    /// Wall-clock budget; checked between nodes and rounds.
    pub time_limit: Option<Duration>,
    /// Maximum number of nodes to process.
    pub node_limit: Option<usize>,
    /// Scale factor on landmark costs in the objective.
    pub lm_weight: f64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            integrality_tol: 1e-6,
            cut_violation_tol: 1e-6,
            time_limit: None,
            node_limit: None,
            lm_weight: 1.0,
        }
    }
}

/// An unexplored branch of the search tree.
#[derive(Debug, Clone)]
pub struct Node {
    /// Bound tightenings `(col, lo, hi)` accumulated along the branch.
    pub extra_bounds: Vec<(usize, f64, f64)>,
    /// Relaxation objective of the parent; the node cannot beat it.
    pub parent_objective: f64,
    pub depth: usize,
    /// Queue admission ticket; breaks remaining ties first-in-first-out.
    seq: u64,
}

struct OpenNode(Node);

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    // BinaryHeap pops the maximum, so "better" must compare greater:
    // lower bound first, then deeper, then earlier ticket.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .0
            .parent_objective
            .total_cmp(&self.0.parent_objective)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

/// What a single relaxation/separation round concluded about a node.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeOutcome {
    /// The node relaxation has no feasible point.
    Infeasible,
    /// The relaxation bound cannot beat the incumbent.
    PrunedByBound { objective: f64 },
    /// Violated subtour rows were added; the node needs another round.
    CutsAdded { count: usize },
    /// The relaxation optimum is integral and subtour-free; the incumbent
    /// was updated if it improved.
    IntegerFeasible { objective: f64 },
    /// No cuts apply and the optimum is fractional on this column.
    Branched { col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitReached,
}

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    pub nodes: usize,
    pub branches: usize,
    pub cuts: usize,
    /// Coverage rows pulled into the working relaxations on first
    /// violation (the rest of the model's coverage rows never ran).
    pub lazy_rows: usize,
    pub lp_pivots: usize,
    pub max_depth: usize,
    /// Best proven lower bound at exit (equals the objective on optimal
    /// exits, `+inf` on infeasible ones).
    pub best_bound: f64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Best plan found; present on optimal exits and on limit exits that
    /// already had an incumbent.
    pub solution: Option<Solution>,
    pub stats: SearchStats,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// Most fractional column: smallest `|x_j - 0.5|` among fractional
/// columns, lowest index on ties (edge columns precede site columns, so
/// edges win ties against sites).
pub fn pick_branch_var(x: &[f64], integrality_tol: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &v) in x.iter().enumerate() {
        let frac = (v - v.round()).abs();
        if frac <= integrality_tol {
            continue;
        }
        let score = (v - 0.5).abs();
        if best.map_or(true, |(_, s)| score < s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

enum Round {
    Infeasible,
    Pruned { objective: f64 },
    CutsAdded { count: usize },
    Integer { x: Vec<f64>, objective: f64 },
    Fractional { col: usize, objective: f64 },
}

pub struct Search {
    inst: Instance,
    model: MilpModel,
    params: SolveParams,
    /// Globally valid subtour rows found so far, in discovery order.
    pool: Vec<Row>,
    pool_keys: HashSet<Vec<usize>>,
    /// Every row the working relaxations carry beyond the degree rows —
    /// activated coverage rows and pooled subtour rows interleaved in
    /// discovery order, so any engine's row list is a prefix of this.
    dynamic_rows: Vec<Row>,
    /// Positions of the model's coverage rows, parallel to `cov_active`.
    cov_idx: Vec<usize>,
    cov_active: Vec<bool>,
    incumbent: Option<Solution>,
    heap: BinaryHeap<OpenNode>,
    next_seq: u64,
    /// The engine carried between nodes; `None` until the first node runs
    /// or after an LP failure discarded it.
    engine: Option<Simplex>,
    /// How many of `dynamic_rows` the carried engine already contains.
    engine_rows: usize,
    pub stats: SearchStats,
    started: Instant,
}

impl Search {
    pub fn new(inst: &Instance, params: SolveParams) -> Self {
        let model = build_model_weighted(inst, params.lm_weight);
        let cov_idx: Vec<usize> = model
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r.tag, RowTag::Coverage(_)))
            .map(|(i, _)| i)
            .collect();
        let cov_active = vec![false; cov_idx.len()];
        Search {
            inst: inst.clone(),
            model,
            params,
            pool: Vec::new(),
            pool_keys: HashSet::new(),
            dynamic_rows: Vec::new(),
            cov_idx,
            cov_active,
            incumbent: None,
            heap: BinaryHeap::new(),
            next_seq: 0,
            engine: None,
            engine_rows: 0,
            stats: SearchStats { best_bound: f64::INFINITY, ..Default::default() },
            started: Instant::now(),
        }
    }

    pub fn model(&self) -> &MilpModel {
        &self.model
    }

    pub fn incumbent(&self) -> Option<&Solution> {
        self.incumbent.as_ref()
    }

    pub fn sec_pool_len(&self) -> usize {
        self.pool.len()
    }

    /// The root node: no tightenings, no parent bound.
    pub fn root(&mut self) -> Node {
        let seq = self.next_seq;
        self.next_seq += 1;
        Node {
            extra_bounds: Vec::new(),
            parent_objective: f64::NEG_INFINITY,
            depth: 0,
            seq,
        }
    }

    fn incumbent_objective(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |s| s.objective)
    }

    /// Node relaxation as the working engines see it: degree rows plus the
    /// dynamic rows discovered so far, in discovery order (so the carried
    /// engine's rows stay a prefix of any later node's rows). Coverage
    /// rows that were never violated are left out; the cut loop pulls them
    /// in if this node's points need them.
    fn node_problem(&self, node: &Node) -> LpProblem {
        let mut p = LpProblem::new(self.model.objective.clone(), self.node_bounds(node));
        for row in &self.model.rows {
            if matches!(row.tag, RowTag::Degree(_)) {
                p.rows.push(self.model.lp_row(row));
            }
        }
        for row in &self.dynamic_rows {
            p.rows.push(self.model.lp_row(row));
        }
        p
    }

    /// Per-variable bounds of the node relaxation: base model bounds with
    /// the branch tightenings intersected in.
    fn node_bounds(&self, node: &Node) -> Vec<(f64, f64)> {
        let mut bounds = self.model.bounds.clone();
        for &(col, lo, hi) in &node.extra_bounds {
            let b = &mut bounds[col];
            b.0 = b.0.max(lo);
            b.1 = b.1.min(hi);
        }
        bounds
    }

    /// Hands out the engine positioned on `node`'s relaxation: the carried
    /// engine retargeted by bound rewrites and appended pool rows when one
    /// exists (`reused` true), a freshly built one otherwise.
    fn take_engine(&mut self, node: &Node) -> Result<(Simplex, bool), LpError> {
        if let Some(mut engine) = self.engine.take() {
            for row in &self.dynamic_rows[self.engine_rows..] {
                engine.add_row(&self.model.lp_row(row));
            }
            self.engine_rows = self.dynamic_rows.len();
            engine.set_structural_bounds(&self.node_bounds(node));
            return Ok((engine, true));
        }
        let engine = Simplex::from_problem(&self.node_problem(node))?;
        self.engine_rows = self.dynamic_rows.len();
        Ok((engine, false))
    }

    /// One relaxation/separation round on a live engine.
    fn cut_round(&mut self, engine: &mut Simplex) -> Result<Round, SolveError> {
        let sol = engine.solve()?;
        self.stats.lp_pivots += sol.pivots;
        if sol.status == LpStatus::Infeasible {
            return Ok(Round::Infeasible);
        }
        if sol.objective >= self.incumbent_objective() - 1e-9 {
            return Ok(Round::Pruned { objective: sol.objective });
        }

        // Lazily activate coverage rows the point violates: the edge got
        // mass without paying for landmarks, so its row has to start
        // riding along.
        let mut added = 0;
        for slot in 0..self.cov_idx.len() {
            if self.cov_active[slot] {
                continue;
            }
            let row = &self.model.rows[self.cov_idx[slot]];
            let activity: f64 = row
                .coeffs
                .iter()
                .map(|&(v, a)| a * sol.values[self.model.col_of(v)])
                .sum();
            let violated = match row.sense {
                Sense::Ge => activity < row.rhs - LAZY_ROW_TOL,
                Sense::Le => activity > row.rhs + LAZY_ROW_TOL,
                Sense::Eq => (activity - row.rhs).abs() > LAZY_ROW_TOL,
            };
            if violated {
                engine.add_row(&self.model.lp_row(row));
                self.dynamic_rows.push(row.clone());
                self.cov_active[slot] = true;
                self.stats.lazy_rows += 1;
                added += 1;
            }
        }

        let cuts = separate_secs_with(&self.model, &sol.values, self.params.cut_violation_tol);
        let mut added_secs = 0;
        for row in cuts {
            let RowTag::Sec(key) = &row.tag else {
                return Err(SolveError::Internal("separator returned a non-subtour row".into()));
            };
            if self.pool_keys.insert(key.clone()) {
                engine.add_row(&self.model.lp_row(&row));
                self.dynamic_rows.push(row.clone());
                self.pool.push(row);
                added_secs += 1;
            }
        }
        if added + added_secs > 0 {
            self.stats.cuts += added_secs;
            return Ok(Round::CutsAdded { count: added + added_secs });
        }

        let tol = self.params.integrality_tol;
        let integral = sol.values.iter().all(|&v| (v - v.round()).abs() <= tol);
        if integral {
            return Ok(Round::Integer { x: sol.values, objective: sol.objective });
        }
        let col = pick_branch_var(&sol.values, tol)
            .ok_or_else(|| SolveError::Internal("fractional point with no branch column".into()))?;
        Ok(Round::Fractional { col, objective: sol.objective })
    }

    /// Accepts an integer relaxation optimum as the incumbent after
    /// re-checking it against the instance from scratch.
    fn install_incumbent(&mut self, x: &[f64], objective: f64) -> Result<(), SolveError> {
        let sol = assemble_solution(&self.model, x)
            .map_err(|e| SolveError::Internal(format!("integer point rejected: {e}")))?;
        if (sol.objective - objective).abs() > 1e-6 * (1.0 + objective.abs()) {
            return Err(SolveError::Internal(format!(
                "assembled objective {} disagrees with relaxation {}",
                sol.objective, objective
            )));
        }
        let verdict = check_feasible(&self.inst, &sol, self.params.lm_weight);
        if !verdict.is_feasible() {
            return Err(SolveError::Internal(format!(
                "incumbent candidate failed validation: {:?}",
                verdict.violations
            )));
        }
        log::info!(
            "incumbent improved to {:.6} (travel {:.6} + landmarks {:.6})",
            sol.objective,
            sol.travel_cost,
            sol.landmark_cost
        );
        self.incumbent = Some(sol);
        Ok(())
    }

    /// Runs one round on a fresh engine for `node` and reports what
    /// happened. Cuts and incumbent updates stick; branching does not queue
    /// children here (callers drive that — [`Search::solve`] uses the full
    /// per-node loop instead).
    pub fn evaluate_node(&mut self, node: &Node) -> Result<NodeOutcome, SolveError> {
        let mut engine = Simplex::from_problem(&self.node_problem(node))?;
        match self.cut_round(&mut engine)? {
            Round::Infeasible => Ok(NodeOutcome::Infeasible),
            Round::Pruned { objective } => Ok(NodeOutcome::PrunedByBound { objective }),
            Round::CutsAdded { count } => Ok(NodeOutcome::CutsAdded { count }),
            Round::Integer { x, objective } => {
                self.install_incumbent(&x, objective)?;
                Ok(NodeOutcome::IntegerFeasible { objective })
            }
            Round::Fractional { col, .. } => Ok(NodeOutcome::Branched { col }),
        }
    }

    fn over_time(&self) -> bool {
        self.params
            .time_limit
            .is_some_and(|lim| self.started.elapsed() >= lim)
    }

    /// Processes a node to completion: rounds of cutting until it is
    /// pruned, proven infeasible, integral, or branched into two children.
    fn process_node(&mut self, node: Node) -> Result<(), SolveError> {
        self.stats.nodes += 1;
        self.stats.max_depth = self.stats.max_depth.max(node.depth);
        let reused = self.engine.is_some();
        match self.drive_node(&node) {
            // A reused engine's numerics can go sour on hard bases; the
            // failure discarded it, so this retry runs the same node on a
            // freshly built engine, which is exact and almost always fine.
            Err(SolveError::Lp(e)) if reused => {
                log::warn!("re-solving node on a fresh engine after LP failure: {e}");
                debug_assert!(self.engine.is_none());
                self.drive_node(&node)
            }
            other => other,
        }
    }

    /// Runs the cut/branch loop for one node. The engine is taken out of
    /// `self` for the duration and handed back on every clean exit; an LP
    /// error drops it, so the next taker starts from a fresh build.
    fn drive_node(&mut self, node: &Node) -> Result<(), SolveError> {
        let (mut engine, _) = self.take_engine(node)?;
        loop {
            let round = self.cut_round(&mut engine)?;
            // Any rows cut_round appended went into both this engine and
            // the dynamic list.
            self.engine_rows = self.dynamic_rows.len();
            match round {
                Round::Infeasible | Round::Pruned { .. } => {
                    self.engine = Some(engine);
                    return Ok(());
                }
                Round::CutsAdded { .. } => {
                    if self.over_time() {
                        // Requeue this node so the driver still sees open
                        // work; dropping it here would let the search end as
                        // "exhausted" (misreported optimal or infeasible).
                        let seq = self.next_seq;
                        self.next_seq += 1;
                        self.heap.push(OpenNode(Node {
                            extra_bounds: node.extra_bounds.clone(),
                            parent_objective: node.parent_objective,
                            depth: node.depth,
                            seq,
                        }));
                        self.engine = Some(engine);
                        return Ok(());
                    }
                }
                Round::Integer { x, objective } => {
                    self.engine = Some(engine);
                    return self.install_incumbent(&x, objective);
                }
                Round::Fractional { col, objective } => {
                    for &(lo, hi) in &[(0.0, 0.0), (1.0, 1.0)] {
                        let mut bounds = node.extra_bounds.clone();
                        bounds.push((col, lo, hi));
                        let seq = self.next_seq;
                        self.next_seq += 1;
                        self.heap.push(OpenNode(Node {
                            extra_bounds: bounds,
                            parent_objective: objective,
                            depth: node.depth + 1,
                            seq,
                        }));
                    }
                    self.stats.branches += 1;
                    log::debug!(
                        "branched on column {col} at depth {} (bound {objective:.6})",
                        node.depth
                    );
                    self.engine = Some(engine);
                    return Ok(());
                }
            }
        }
    }

    /// Runs the search to completion or to a limit.
    pub fn solve(&mut self) -> Result<SolveOutcome, SolveError> {
        self.started = Instant::now();
        let root = self.root();
        self.heap.push(OpenNode(root));

        let mut limited = false;
        while let Some(OpenNode(node)) = self.heap.pop() {
            if self.params.node_limit.is_some_and(|lim| self.stats.nodes >= lim) || self.over_time()
            {
                // Restore the node so its bound still counts as open.
                self.heap.push(OpenNode(node));
                limited = true;
                break;
            }
            // The incumbent may have improved since this node was queued.
            if node.parent_objective >= self.incumbent_objective() - 1e-9 {
                continue;
            }
            if self.stats.nodes % 16 == 0 {
                log::info!(
                    "nodes {} open {} cuts {} pivots {} incumbent {:.6}",
                    self.stats.nodes,
                    self.heap.len(),
                    self.pool.len(),
                    self.stats.lp_pivots,
                    self.incumbent_objective()
                );
            }
            self.process_node(node)?;
        }

        self.stats.elapsed = self.started.elapsed();
        let status = if limited {
            self.stats.best_bound = self
                .heap
                .iter()
                .map(|n| n.0.parent_objective)
                .fold(self.incumbent_objective(), f64::min);
            SolveStatus::LimitReached
        } else if self.incumbent.is_some() {
            self.stats.best_bound = self.incumbent_objective();
            SolveStatus::Optimal
        } else {
            self.stats.best_bound = f64::INFINITY;
            SolveStatus::Infeasible
        };
        Ok(SolveOutcome { status, solution: self.incumbent.clone(), stats: self.stats.clone() })
    }
}

/// One-call solve with fresh search state.
pub fn solve(inst: &Instance, params: &SolveParams) -> Result<SolveOutcome, SolveError> {
    Search::new(inst, params.clone()).solve()
}
