//! Finds violated subtour rows at a relaxation point.
//!
//! The support graph keeps every edge whose value exceeds a small
//! threshold. If it falls apart into several components, each component is
//! a subtour witness on its own. If it is connected, the Stoer-Wagner
//! algorithm finds the global minimum cut; any cut lighter than 2 yields a
//! violated `x(delta(S)) >= 2` row. Both paths are deterministic: ties in
//! the maximum-adjacency sweep go to the lowest vertex index, and the first
//! minimum found is kept.

use thiserror::Error;

use crate::instance::all_edges;
use crate::model::{MilpModel, Row, VarId};

/// Edge values at or below this are treated as absent from the support.
pub const SUPPORT_EPS: f64 = 1e-7;

/// Dense symmetric weighted graph over the targets.
#[derive(Debug, Clone)]
pub struct SupportGraph {
    n: usize,
    w: Vec<Vec<f64>>,
}

impl SupportGraph {
    /// Thresholded edge values of a relaxation point over model columns.
    pub fn from_point(model: &MilpModel, x: &[f64]) -> Self {
        let n = model.n_targets();
        let mut w = vec![vec![0.0; n]; n];
        for e in all_edges(n) {
            let v = x[model.col_of(VarId::Edge(e))];
            if v > SUPPORT_EPS {
                let (i, j) = e.endpoints();
                w[i][j] = v;
                w[j][i] = v;
            }
        }
        SupportGraph { n, w }
    }

    /// Builds a graph from explicit weighted edges (tests and tooling).
    pub fn from_weights(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut w = vec![vec![0.0; n]; n];
        for &(i, j, v) in edges {
            assert!(i < n && j < n && i != j);
            w[i][j] = v;
            w[j][i] = v;
        }
        SupportGraph { n, w }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i][j]
    }
}

/// Connected components with positive-weight adjacency, each sorted, in
/// order of their smallest member.
pub fn connected_components(g: &SupportGraph) -> Vec<Vec<usize>> {
    let mut seen = vec![false; g.n];
    let mut comps = Vec::new();
    for start in 0..g.n {
        if seen[start] {
            continue;
        }
        let mut comp = vec![start];
        let mut queue = vec![start];
        seen[start] = true;
        while let Some(v) = queue.pop() {
            for u in 0..g.n {
                if !seen[u] && g.w[v][u] > 0.0 {
                    seen[u] = true;
                    comp.push(u);
                    queue.push(u);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// One side of a cut and its total crossing weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub members: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Error)]
#[error("support graph is disconnected; separate on its components instead")]
pub struct Disconnected;

/// Global minimum cut of a connected graph (Stoer-Wagner). Requires at
/// least two vertices.
pub fn global_min_cut(g: &SupportGraph) -> Result<CutResult, Disconnected> {
    let n = g.n;
    assert!(n >= 2, "a cut needs two vertices");
    if connected_components(g).len() > 1 {
        return Err(Disconnected);
    }

    let mut w = g.w.clone();
    let mut members: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    let mut active: Vec<usize> = (0..n).collect();
    let mut best: Option<CutResult> = None;

    while active.len() > 1 {
        // Maximum-adjacency sweep from the lowest active vertex. The vertex
        // added last, together with everything merged into it, is one side
        // of the cut-of-the-phase.
        let start = active[0];
        let mut in_a = vec![false; n];
        in_a[start] = true;
        let mut conn = vec![0.0; n];
        for &v in &active {
            if v != start {
                conn[v] = w[start][v];
            }
        }
        let mut order = vec![start];
        while order.len() < active.len() {
            let mut pick = usize::MAX;
            let mut pc = f64::NEG_INFINITY;
            for &v in &active {
                if !in_a[v] && conn[v] > pc {
                    pc = conn[v];
                    pick = v;
                }
            }
            in_a[pick] = true;
            order.push(pick);
            for &v in &active {
                if !in_a[v] {
                    conn[v] += w[pick][v];
                }
            }
        }
        let t = *order.last().unwrap();
        let s = order[order.len() - 2];
        let phase_cut = CutResult { members: members[t].clone(), value: conn[t] };
        if best.as_ref().map_or(true, |b| phase_cut.value < b.value) {
            best = Some(phase_cut);
        }

        // Contract t into s.
        for &v in &active {
            if v != s && v != t {
                w[s][v] += w[t][v];
                w[v][s] = w[s][v];
            }
        }
        w[s][t] = 0.0;
        w[t][s] = 0.0;
        let absorbed = std::mem::take(&mut members[t]);
        members[s].extend(absorbed);
        members[s].sort_unstable();
        active.retain(|&v| v != t);
    }

    let mut b = best.expect("at least one phase ran");
    b.members.sort_unstable();
    Ok(b)
}

/// Violated subtour rows at a relaxation point, using the default
/// violation threshold.
pub fn separate_secs(model: &MilpModel, x: &[f64]) -> Vec<Row> {
    separate_secs_with(model, x, 1e-6)
}

/// Violated subtour rows at a relaxation point. A connected support graph
/// contributes at most one row (its global minimum cut, if lighter than
/// `2 - min_violation`); a disconnected one contributes a row per
/// component. Sets that cannot form a proper subtour side are skipped.
pub fn separate_secs_with(model: &MilpModel, x: &[f64], min_violation: f64) -> Vec<Row> {
    let n = model.n_targets();
    if n < 4 {
        // Proper two-sided subtour sets need 2 <= |S| <= n - 2.
        return Vec::new();
    }
    let g = SupportGraph::from_point(model, x);
    let comps = connected_components(&g);
    let mut rows = Vec::new();
    if comps.len() >= 2 {
        for comp in &comps {
            if comp.len() >= 2 && comp.len() <= n - 2 {
                rows.push(model.make_sec_row(comp).expect("component set was validated"));
            }
        }
        return rows;
    }
    let cut = global_min_cut(&g).expect("single component is connected");
    if cut.value < 2.0 - min_violation {
        let side = if cut.members.len() >= 2 && cut.members.len() <= n - 2 {
            Some(cut.members)
        } else {
            // Take the complement when the reported side is degenerate.
            let inside: Vec<usize> =
                (0..n).filter(|v| !cut.members.contains(v)).collect();
            (inside.len() >= 2 && inside.len() <= n - 2).then_some(inside)
        };
        if let Some(s) = side {
            rows.push(model.make_sec_row(&s).expect("cut side was validated"));
        }
    }
    rows
}
