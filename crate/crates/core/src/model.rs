//! The integer program tying the tour to the landmark placement.
//!
//! Columns come in two blocks: one binary variable per target-pair edge
//! (`x_e = 1` when the tour drives edge `e`), in canonical edge order,
//! followed by one binary variable per candidate site (`y_k = 1` when site
//! `k` gets a landmark). The base rows are:
//!
//! * degree: every target has exactly two incident tour edges;
//! * coverage: an edge may only be driven when at least two of the sites
//!   that see its whole length are equipped, `sum_{k in K_e} y_k >= 2 x_e`.
//!
//! Edges seen by fewer than two sites can never be driven and are fixed to
//! zero through their bounds instead of getting an unsatisfiable row.
//! Subtour elimination rows (`x(delta(S)) >= 2`) are generated on demand
//! during the search; [`MilpModel::make_sec_row`] builds them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{
    all_edges, compute_cover_sets, compute_edge_costs, edge_at, edge_index, n_edges, CoverSets,
    EdgeCosts, EdgeId, FileError, Instance,
};
use crate::lp::{LpProblem, LpRow, Sense};

/// Identifies a column of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarId {
    /// Tour edge variable.
    Edge(EdgeId),
    /// Landmark site variable.
    Site(usize),
}

/// Why a row exists.
#[derive(Debug, Clone, PartialEq)]
pub enum RowTag {
    /// Two tour edges at this target.
    Degree(usize),
    /// Landmark coverage for this edge.
    Coverage(EdgeId),
    /// Subtour elimination across this (sorted) target set.
    Sec(Vec<usize>),
}

/// A model row over [`VarId`]s; [`MilpModel::lp_row`] maps it to columns.
#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: RowTag,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("subtour set must have between 2 and n-2 targets, got {size} of {n}")]
    BadSecSize { size: usize, n: usize },
    #[error("subtour set references target {0} out of range")]
    BadSecMember(usize),
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    n_targets: usize,
    n_sites: usize,
    n_edge_cols: usize,
    /// Objective coefficients per column (edge travel costs, then weighted
    /// landmark costs).
    pub objective: Vec<f64>,
    /// `[0, 1]` for usable columns; `[0, 0]` for edges that can never be
    /// covered by two landmarks.
    pub bounds: Vec<(f64, f64)>,
    pub rows: Vec<Row>,
    cover: CoverSets,
    costs: EdgeCosts,
}

/// Builds the model with landmark costs taken at face value.
pub fn build_model(inst: &Instance) -> MilpModel {
    build_model_weighted(inst, 1.0)
}

/// Builds the model with landmark costs scaled by `lm_weight`, which trades
/// tour length against landmark count without touching the instance.
pub fn build_model_weighted(inst: &Instance, lm_weight: f64) -> MilpModel {
    let n = inst.targets.len();
    let cover = compute_cover_sets(inst);
    let costs = compute_edge_costs(inst);
    let n_edge_cols = n_edges(n);
    let n_cols = n_edge_cols + inst.sites.len();

    let mut objective = Vec::with_capacity(n_cols);
    let mut bounds = Vec::with_capacity(n_cols);
    for e in all_edges(n) {
        objective.push(costs.cost(e));
        let usable = cover.edge_cover(e).len() >= 2;
        bounds.push(if usable { (0.0, 1.0) } else { (0.0, 0.0) });
    }
    for (k, &d) in inst.landmark_cost.iter().enumerate() {
        let _ = k;
        objective.push(lm_weight * d);
        bounds.push((0.0, 1.0));
    }

    let mut rows = Vec::new();
    for v in 0..n {
        let coeffs = (0..n)
            .filter(|&u| u != v)
            .map(|u| (VarId::Edge(EdgeId::new(v, u)), 1.0))
            .collect();
        rows.push(Row { coeffs, sense: Sense::Eq, rhs: 2.0, tag: RowTag::Degree(v) });
    }
    for e in all_edges(n) {
        let ks = cover.edge_cover(e);
        if ks.len() < 2 {
            continue; // bound-fixed to zero above
        }
        let mut coeffs: Vec<(VarId, f64)> = ks.iter().map(|&k| (VarId::Site(k), 1.0)).collect();
        coeffs.push((VarId::Edge(e), -2.0));
        rows.push(Row { coeffs, sense: Sense::Ge, rhs: 0.0, tag: RowTag::Coverage(e) });
    }

    MilpModel {
        n_targets: n,
        n_sites: inst.sites.len(),
        n_edge_cols,
        objective,
        bounds,
        rows,
        cover,
        costs,
    }
}

impl MilpModel {
    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Edge columns occupy `0..n_edge_cols()`, site columns the rest.
    pub fn n_edge_cols(&self) -> usize {
        self.n_edge_cols
    }

    pub fn n_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn cover_sets(&self) -> &CoverSets {
        &self.cover
    }

    pub fn edge_costs(&self) -> &EdgeCosts {
        &self.costs
    }

    pub fn col_of(&self, v: VarId) -> usize {
        match v {
            VarId::Edge(e) => edge_index(self.n_targets, e),
            VarId::Site(k) => self.n_edge_cols + k,
        }
    }

    pub fn var_of(&self, col: usize) -> VarId {
        if col < self.n_edge_cols {
            VarId::Edge(edge_at(self.n_targets, col))
        } else {
            VarId::Site(col - self.n_edge_cols)
        }
    }

    /// Maps a model row onto LP column indices.
    pub fn lp_row(&self, row: &Row) -> LpRow {
        LpRow {
            coeffs: row.coeffs.iter().map(|&(v, a)| (self.col_of(v), a)).collect(),
            sense: row.sense,
            rhs: row.rhs,
        }
    }

    /// The continuous relaxation, with `extra` bound tightenings
    /// `(col, lo, hi)` intersected into the base bounds.
    pub fn to_lp(&self, extra: &[(usize, f64, f64)]) -> LpProblem {
        let mut p = LpProblem::new(self.objective.clone(), self.bounds.clone());
        for &(col, lo, hi) in extra {
            let b = &mut p.bounds[col];
            b.0 = b.0.max(lo);
            b.1 = b.1.min(hi);
        }
        for row in &self.rows {
            p.rows.push(self.lp_row(row));
        }
        p
    }

    /// Builds `x(delta(S)) >= 2` for a target set `S`. Only proper sets
    /// with at least two members on each side split the tour, so others are
    /// rejected.
    pub fn make_sec_row(&self, members: &[usize]) -> Result<Row, ModelError> {
        let n = self.n_targets;
        let mut s: Vec<usize> = members.to_vec();
        s.sort_unstable();
        s.dedup();
        if let Some(&bad) = s.iter().find(|&&v| v >= n) {
            return Err(ModelError::BadSecMember(bad));
        }
        if s.len() < 2 || s.len() > n - 2 {
            return Err(ModelError::BadSecSize { size: s.len(), n });
        }
        let inside = {
            let mut f = vec![false; n];
            for &v in &s {
                f[v] = true;
            }
            f
        };
        let mut coeffs = Vec::new();
        for e in all_edges(n) {
            let (i, j) = e.endpoints();
            if inside[i] != inside[j] {
                coeffs.push((VarId::Edge(e), 1.0));
            }
        }
        Ok(Row { coeffs, sense: Sense::Ge, rhs: 2.0, tag: RowTag::Sec(s) })
    }

    pub fn add_sec(&mut self, members: &[usize]) -> Result<(), ModelError> {
        let row = self.make_sec_row(members)?;
        self.rows.push(row);
        Ok(())
    }
}

/// A tour plus landmark selection, in the on-disk shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Targets in visit order, starting and ending at target 0.
    #[serde(rename = "order")]
    pub visit_order: Vec<usize>,
    /// Tour edges as index pairs (lower index first).
    pub edges: Vec<(usize, usize)>,
    /// Equipped candidate sites, ascending.
    #[serde(rename = "sites")]
    pub chosen_sites: Vec<usize>,
    pub travel_cost: f64,
    pub landmark_cost: f64,
    /// `travel_cost + landmark_cost` as optimized (landmark part includes
    /// any weighting applied at solve time).
    pub objective: f64,
}

impl Solution {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, FileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), FileError> {
        Ok(std::fs::write(path, self.to_json())?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, FileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Error)]
pub enum SolutionError {
    #[error("column {col} has fractional value {value}")]
    NonIntegral { col: usize, value: f64 },
    #[error("target {target} has {degree} chosen edges, expected 2")]
    NotTwoRegular { target: usize, degree: usize },
    #[error("tour through target 0 visits {reached} of {expected} targets")]
    Subtour { reached: usize, expected: usize },
}

/// Reads a rounded integer point off the model columns and walks the tour.
/// The walk starts at target 0 and takes the lower-indexed neighbor first,
/// so the orientation is deterministic.
pub fn assemble_solution(
    model: &MilpModel,
    x: &[f64],
) -> Result<Solution, SolutionError> {
    let n = model.n_targets;
    for (col, &v) in x.iter().enumerate() {
        if (v - v.round()).abs() > 1e-4 {
            return Err(SolutionError::NonIntegral { col, value: v });
        }
    }
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut edges = Vec::new();
    for e in all_edges(n) {
        if x[model.col_of(VarId::Edge(e))].round() == 1.0 {
            let (i, j) = e.endpoints();
            adj[i].push(j);
            adj[j].push(i);
            edges.push((i, j));
        }
    }
    for (v, nb) in adj.iter().enumerate() {
        if nb.len() != 2 {
            return Err(SolutionError::NotTwoRegular { target: v, degree: nb.len() });
        }
    }

    let mut order = vec![0usize];
    let mut prev = usize::MAX;
    let mut cur = 0usize;
    loop {
        let nb = &adj[cur];
        let next = if nb[0] != prev { nb[0].min(if nb[1] != prev { nb[1] } else { nb[0] }) } else { nb[1] };
        prev = cur;
        cur = next;
        order.push(cur);
        if cur == 0 {
            break;
        }
        if order.len() > n + 1 {
            return Err(SolutionError::Subtour { reached: order.len() - 1, expected: n });
        }
    }
    if order.len() != n + 1 {
        return Err(SolutionError::Subtour { reached: order.len() - 1, expected: n });
    }

    let mut chosen_sites = Vec::new();
    for k in 0..model.n_sites {
        if x[model.col_of(VarId::Site(k))].round() == 1.0 {
            chosen_sites.push(k);
        }
    }

    let travel_cost: f64 = edges
        .iter()
        .map(|&(i, j)| model.objective[model.col_of(VarId::Edge(EdgeId::new(i, j)))])
        .sum();
    let landmark_cost: f64 = chosen_sites
        .iter()
        .map(|&k| model.objective[model.col_of(VarId::Site(k))])
        .sum();
    Ok(Solution {
        visit_order: order,
        edges,
        chosen_sites,
        travel_cost,
        landmark_cost,
        objective: travel_cost + landmark_cost,
    })
}

/// One reason a claimed solution is not a valid plan for an instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Visit order does not start and end at target 0.
    OrderNotClosed,
    /// Visit order has the wrong length for the instance.
    OrderWrongLength { got: usize, expected: usize },
    /// A target is visited more or fewer than exactly once.
    VisitCount { target: usize, count: usize },
    /// The edge list disagrees with the consecutive pairs of the order.
    EdgesMismatchOrder,
    /// A referenced site index does not exist (or repeats).
    BadSite { site: usize },
    /// A tour edge is watched by fewer than two chosen landmarks.
    UncoveredEdge { edge: (usize, usize), covered_by: usize },
    /// A stored cost disagrees with the recomputed value.
    CostMismatch { field: &'static str, stored: f64, actual: f64 },
}

#[derive(Debug, Clone)]
pub struct FeasibilityVerdict {
    pub violations: Vec<Violation>,
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when only the stored costs are off, i.e. the route and the
    /// landmark selection themselves are valid.
    pub fn structurally_feasible(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::CostMismatch { .. }))
    }
}

/// Checks a solution against an instance from scratch: tour structure,
/// two-landmark coverage of every driven edge (strictly inside the sensing
/// range), and the stored costs under landmark weight `lm_weight`.
pub fn check_feasible(inst: &Instance, sol: &Solution, lm_weight: f64) -> FeasibilityVerdict {
    let n = inst.targets.len();
    let mut violations = Vec::new();

    let order = &sol.visit_order;
    if order.first() != Some(&0) || order.last() != Some(&0) {
        violations.push(Violation::OrderNotClosed);
    }
    if order.len() != n + 1 {
        violations.push(Violation::OrderWrongLength { got: order.len(), expected: n + 1 });
    }
    let mut counts = vec![0usize; n];
    for &v in order.iter().take(order.len().saturating_sub(1)) {
        if v >= n {
            violations.push(Violation::VisitCount { target: v, count: 0 });
        } else {
            counts[v] += 1;
        }
    }
    for (t, &c) in counts.iter().enumerate() {
        if c != 1 {
            violations.push(Violation::VisitCount { target: t, count: c });
        }
    }

    // The edge list must be exactly the consecutive pairs of the order.
    let mut from_order: Vec<EdgeId> = order
        .windows(2)
        .filter(|w| w[0] < n && w[1] < n && w[0] != w[1])
        .map(|w| EdgeId::new(w[0], w[1]))
        .collect();
    from_order.sort();
    let mut listed: Vec<EdgeId> = sol
        .edges
        .iter()
        .filter(|&&(i, j)| i < n && j < n && i != j)
        .map(|&(i, j)| EdgeId::new(i, j))
        .collect();
    listed.sort();
    if from_order != listed || listed.len() != sol.edges.len() {
        violations.push(Violation::EdgesMismatchOrder);
    }

    let mut site_ok = vec![false; inst.sites.len()];
    let mut sites_valid = true;
    for &k in &sol.chosen_sites {
        if k >= inst.sites.len() || site_ok[k] {
            violations.push(Violation::BadSite { site: k });
            sites_valid = false;
        } else {
            site_ok[k] = true;
        }
    }

    if sites_valid {
        for &(i, j) in &sol.edges {
            if i >= n || j >= n {
                continue;
            }
            let covered = sol
                .chosen_sites
                .iter()
                .filter(|&&k| {
                    let s = inst.sites[k];
                    s.dist(&inst.targets[i]) < inst.sensing_range
                        && s.dist(&inst.targets[j]) < inst.sensing_range
                })
                .count();
            if covered < 2 {
                violations.push(Violation::UncoveredEdge { edge: (i, j), covered_by: covered });
            }
        }
    }

    let travel: f64 = sol
        .edges
        .iter()
        .filter(|&&(i, j)| i < n && j < n)
        .map(|&(i, j)| inst.targets[i].dist(&inst.targets[j]))
        .sum();
    let landmark: f64 = if sites_valid {
        sol.chosen_sites.iter().map(|&k| lm_weight * inst.landmark_cost[k]).sum()
    } else {
        f64::NAN
    };
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + b.abs());
    if !close(sol.travel_cost, travel) {
        violations.push(Violation::CostMismatch {
            field: "travel_cost",
            stored: sol.travel_cost,
            actual: travel,
        });
    }
    if sites_valid && !close(sol.landmark_cost, landmark) {
        violations.push(Violation::CostMismatch {
            field: "landmark_cost",
            stored: sol.landmark_cost,
            actual: landmark,
        });
    }
    if !close(sol.objective, sol.travel_cost + sol.landmark_cost) {
        violations.push(Violation::CostMismatch {
            field: "objective",
            stored: sol.objective,
            actual: sol.travel_cost + sol.landmark_cost,
        });
    }

    FeasibilityVerdict { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point2;
    use crate::instance::GenConfig;

    /// Four targets on a unit square with a generous ring of sites, so all
    /// edges are usable. Depot corner at the origin.
    fn square_instance() -> Instance {
        Instance {
            targets: vec![
                Point2 { x: 0.0, y: 0.0 },
                Point2 { x: 1.0, y: 0.0 },
                Point2 { x: 1.0, y: 1.0 },
                Point2 { x: 0.0, y: 1.0 },
            ],
            sites: vec![
                Point2 { x: 0.5, y: 0.5 },
                Point2 { x: 0.4, y: 0.5 },
                Point2 { x: 0.6, y: 0.5 },
            ],
            sensing_range: 10.0,
            landmark_cost: vec![1.0, 1.0, 1.0],
            seed: 0,
        }
    }

    #[test]
    fn columns_are_edges_then_sites() {
        let m = build_model(&square_instance());
        assert_eq!(m.n_cols(), 6 + 3);
        assert_eq!(m.n_edge_cols(), 6);
        for col in 0..m.n_cols() {
            let v = m.var_of(col);
            assert_eq!(m.col_of(v), col);
            match v {
                VarId::Edge(_) => assert!(col < 6),
                VarId::Site(_) => assert!(col >= 6),
            }
        }
    }

    #[test]
    fn degree_rows_demand_two_edges_each() {
        let m = build_model(&square_instance());
        let degree: Vec<&Row> = m
            .rows
            .iter()
            .filter(|r| matches!(r.tag, RowTag::Degree(_)))
            .collect();
        assert_eq!(degree.len(), 4);
        for row in degree {
            assert_eq!(row.coeffs.len(), 3); // n-1 incident edges
            assert!(row.coeffs.iter().all(|&(_, a)| a == 1.0));
            assert_eq!(row.sense, Sense::Eq);
            assert_eq!(row.rhs, 2.0);
        }
    }

    #[test]
    fn coverage_rows_pay_two_sites_per_edge() {
        let m = build_model(&square_instance());
        let coverage: Vec<&Row> = m
            .rows
            .iter()
            .filter(|r| matches!(r.tag, RowTag::Coverage(_)))
            .collect();
        assert_eq!(coverage.len(), 6); // every edge is seen by all 3 sites
        for row in coverage {
            let RowTag::Coverage(e) = row.tag else { unreachable!() };
            let edge_terms: Vec<_> =
                row.coeffs.iter().filter(|(v, _)| *v == VarId::Edge(e)).collect();
            assert_eq!(edge_terms.len(), 1);
            assert_eq!(edge_terms[0].1, -2.0);
            let site_terms = row.coeffs.iter().filter(|(v, _)| matches!(v, VarId::Site(_)));
            assert!(site_terms.clone().count() >= 2);
            assert!(site_terms.clone().all(|&(_, a)| a == 1.0));
            assert_eq!(row.sense, Sense::Ge);
            assert_eq!(row.rhs, 0.0);
        }
    }

    #[test]
    fn unwatchable_edges_are_fixed_to_zero() {
        // Two far-apart clusters; only within-cluster edges see two sites.
        let inst = Instance {
            targets: vec![
                Point2 { x: 0.0, y: 0.0 },
                Point2 { x: 1.0, y: 0.0 },
                Point2 { x: 100.0, y: 0.0 },
                Point2 { x: 101.0, y: 0.0 },
            ],
            sites: vec![
                Point2 { x: 0.5, y: 1.0 },
                Point2 { x: 0.5, y: -1.0 },
                Point2 { x: 100.5, y: 1.0 },
                Point2 { x: 100.5, y: -1.0 },
            ],
            sensing_range: 5.0,
            landmark_cost: vec![1.0; 4],
            seed: 0,
        };
        let m = build_model(&inst);
        let within = m.col_of(VarId::Edge(EdgeId::new(0, 1)));
        let across = m.col_of(VarId::Edge(EdgeId::new(1, 2)));
        assert_eq!(m.bounds[within], (0.0, 1.0));
        assert_eq!(m.bounds[across], (0.0, 0.0));
        // No coverage row for the unusable edge.
        assert!(m
            .rows
            .iter()
            .all(|r| r.tag != RowTag::Coverage(EdgeId::new(1, 2))));
    }

    #[test]
    fn lm_weight_scales_only_site_costs() {
        let inst = square_instance();
        let base = build_model(&inst);
        let heavy = build_model_weighted(&inst, 4.0);
        for col in 0..base.n_cols() {
            match base.var_of(col) {
                VarId::Edge(_) => assert_eq!(base.objective[col], heavy.objective[col]),
                VarId::Site(_) => {
                    assert_eq!(4.0 * base.objective[col], heavy.objective[col])
                }
            }
        }
    }

    #[test]
    fn sec_row_counts_crossing_edges() {
        // Six targets; S = {0, 1, 2} crosses to {3, 4, 5} over 3 * 3 edges.
        let inst = Instance {
            targets: (0..6)
                .map(|i| Point2 { x: i as f64, y: 0.0 })
                .collect(),
            sites: vec![Point2 { x: 2.5, y: 1.0 }, Point2 { x: 2.5, y: -1.0 }],
            sensing_range: 50.0,
            landmark_cost: vec![1.0, 1.0],
            seed: 0,
        };
        let m = build_model(&inst);
        let row = m.make_sec_row(&[0, 1, 2]).unwrap();
        assert_eq!(row.coeffs.len(), 9);
        assert_eq!(row.sense, Sense::Ge);
        assert_eq!(row.rhs, 2.0);
        assert!(row
            .coeffs
            .iter()
            .all(|&(v, a)| a == 1.0 && matches!(v, VarId::Edge(_))));
        assert_eq!(row.tag, RowTag::Sec(vec![0, 1, 2]));

        // The complement set cuts the same edges.
        let comp = m.make_sec_row(&[3, 4, 5]).unwrap();
        let mut a: Vec<_> = row.coeffs.iter().map(|&(v, _)| v).collect();
        let mut b: Vec<_> = comp.coeffs.iter().map(|&(v, _)| v).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn sec_row_rejects_degenerate_sets() {
        let m = build_model(&square_instance());
        assert!(matches!(
            m.make_sec_row(&[1]),
            Err(ModelError::BadSecSize { size: 1, n: 4 })
        ));
        assert!(matches!(
            m.make_sec_row(&[0, 1, 2]),
            Err(ModelError::BadSecSize { size: 3, n: 4 })
        ));
        assert!(matches!(m.make_sec_row(&[0, 9]), Err(ModelError::BadSecMember(9))));
        assert!(m.make_sec_row(&[1, 3]).is_ok());
    }

    #[test]
    fn to_lp_intersects_extra_bounds() {
        let m = build_model(&square_instance());
        let p = m.to_lp(&[(0, 1.0, 1.0), (6, 0.0, 0.0)]);
        assert_eq!(p.bounds[0], (1.0, 1.0));
        assert_eq!(p.bounds[6], (0.0, 0.0));
        assert_eq!(p.bounds[1], (0.0, 1.0));
        assert_eq!(p.rows.len(), m.rows.len());
    }

    fn unit_square_solution_vector(m: &MilpModel) -> Vec<f64> {
        let mut x = vec![0.0; m.n_cols()];
        for &(i, j) in &[(0, 1), (1, 2), (2, 3), (0, 3)] {
            x[m.col_of(VarId::Edge(EdgeId::new(i, j)))] = 1.0;
        }
        for k in 0..2 {
            x[m.col_of(VarId::Site(k))] = 1.0;
        }
        x
    }

    #[test]
    fn assemble_walks_the_square() {
        let inst = square_instance();
        let m = build_model(&inst);
        let sol = assemble_solution(&m, &unit_square_solution_vector(&m)).unwrap();
        assert_eq!(sol.visit_order, vec![0, 1, 2, 3, 0]);
        assert_eq!(sol.edges, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
        assert_eq!(sol.chosen_sites, vec![0, 1]);
        assert!((sol.travel_cost - 4.0).abs() < 1e-12);
        assert!((sol.landmark_cost - 2.0).abs() < 1e-12);
        assert!((sol.objective - 6.0).abs() < 1e-12);
    }

    #[test]
    fn assemble_rejects_two_triangles() {
        let inst = Instance {
            targets: (0..6)
                .map(|i| Point2 { x: (i % 3) as f64, y: (i / 3) as f64 * 10.0 })
                .collect(),
            sites: vec![Point2 { x: 1.0, y: 5.0 }],
            sensing_range: 100.0,
            landmark_cost: vec![1.0],
            seed: 0,
        };
        let m = build_model(&inst);
        let mut x = vec![0.0; m.n_cols()];
        for &(i, j) in &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)] {
            x[m.col_of(VarId::Edge(EdgeId::new(i, j)))] = 1.0;
        }
        assert!(matches!(
            assemble_solution(&m, &x),
            Err(SolutionError::Subtour { reached: 3, expected: 6 })
        ));
    }

    #[test]
    fn assemble_rejects_fractional_points() {
        let m = build_model(&square_instance());
        let mut x = vec![0.0; m.n_cols()];
        x[0] = 0.5;
        assert!(matches!(
            assemble_solution(&m, &x),
            Err(SolutionError::NonIntegral { col: 0, .. })
        ));
    }

    #[test]
    fn solution_json_wire_shape() {
        let sol = Solution {
            visit_order: vec![0, 1, 2, 0],
            edges: vec![(0, 1), (1, 2), (0, 2)],
            chosen_sites: vec![3],
            travel_cost: 5.0,
            landmark_cost: 1.5,
            objective: 6.5,
        };
        let text = sol.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["order"], serde_json::json!([0, 1, 2, 0]));
        assert_eq!(v["edges"][0], serde_json::json!([0, 1]));
        assert_eq!(v["sites"], serde_json::json!([3]));
        assert_eq!(v["travel_cost"], serde_json::json!(5.0));
        assert_eq!(v["landmark_cost"], serde_json::json!(1.5));
        assert_eq!(v["objective"], serde_json::json!(6.5));
        assert_eq!(Solution::from_json(&text).unwrap(), sol);
    }

    #[test]
    fn checker_accepts_assembled_square() {
        let inst = square_instance();
        let m = build_model(&inst);
        let sol = assemble_solution(&m, &unit_square_solution_vector(&m)).unwrap();
        let verdict = check_feasible(&inst, &sol, 1.0);
        assert!(verdict.is_feasible(), "unexpected violations: {:?}", verdict.violations);
    }

    #[test]
    fn checker_spots_uncovered_edge() {
        let inst = square_instance();
        let m = build_model(&inst);
        let mut sol = assemble_solution(&m, &unit_square_solution_vector(&m)).unwrap();
        sol.chosen_sites = vec![0]; // one landmark cannot cover any edge
        sol.landmark_cost = 1.0;
        sol.objective = sol.travel_cost + 1.0;
        let verdict = check_feasible(&inst, &sol, 1.0);
        assert!(!verdict.is_feasible());
        assert!(verdict
            .violations
            .iter()
            .all(|v| matches!(v, Violation::UncoveredEdge { covered_by: 1, .. })));
        assert_eq!(verdict.violations.len(), 4);
    }

    #[test]
    fn checker_spots_broken_order_and_costs() {
        let inst = square_instance();
        let m = build_model(&inst);
        let good = assemble_solution(&m, &unit_square_solution_vector(&m)).unwrap();

        let mut reordered = good.clone();
        reordered.visit_order = vec![0, 2, 1, 3, 0];
        let verdict = check_feasible(&inst, &reordered, 1.0);
        assert!(verdict.violations.contains(&Violation::EdgesMismatchOrder));
        assert!(!verdict.structurally_feasible());

        let mut padded = good.clone();
        padded.travel_cost += 0.5;
        padded.objective += 0.5;
        let verdict = check_feasible(&inst, &padded, 1.0);
        assert!(!verdict.is_feasible());
        assert!(verdict.structurally_feasible());
        assert!(matches!(
            verdict.violations[0],
            Violation::CostMismatch { field: "travel_cost", .. }
        ));
    }

    #[test]
    fn checker_honors_lm_weight() {
        let inst = square_instance();
        let m = build_model_weighted(&inst, 3.0);
        let sol = assemble_solution(&m, &unit_square_solution_vector(&m)).unwrap();
        assert!((sol.landmark_cost - 6.0).abs() < 1e-12);
        assert!(check_feasible(&inst, &sol, 3.0).is_feasible());
        assert!(!check_feasible(&inst, &sol, 1.0).is_feasible());
    }

    #[test]
    fn generated_instances_build_consistent_models() {
        for seed in 0..5 {
            let inst = crate::instance::generate_instance(8, seed, &GenConfig::default()).unwrap();
            let m = build_model(&inst);
            assert_eq!(m.n_cols(), n_edges(8) + inst.sites.len());
            let p = m.to_lp(&[]);
            assert_eq!(p.n_vars(), m.n_cols());
            // Degree rows reference exactly the incident edges; coverage
            // rows only exist for edges with a two-site cover.
            for row in &m.rows {
                match &row.tag {
                    RowTag::Degree(v) => {
                        assert_eq!(row.coeffs.len(), 7);
                        assert!(row.coeffs.iter().all(|(var, _)| match var {
                            VarId::Edge(e) => e.touches(*v),
                            _ => false,
                        }));
                    }
                    RowTag::Coverage(e) => {
                        assert!(m.cover_sets().edge_cover(*e).len() >= 2);
                    }
                    RowTag::Sec(_) => unreachable!("base model has no subtour rows"),
                }
            }
        }
    }
}
