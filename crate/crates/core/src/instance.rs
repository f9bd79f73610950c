//! Problem instances: target and candidate-site geometry, cover sets, edge
//! costs, random generation, and the instance file format.
//!
//! An instance is a set of `targets` the vehicle must tour, a set of
//! candidate landmark `sites`, a `sensing_range` within which a landmark is
//! usable, and a placement cost per site. Sites cover a target when they are
//! *strictly* closer than the sensing range; an edge between two targets is
//! covered by the sites that cover both endpoints.

use crate::geom::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

pub const DEFAULT_GRID_SIDE: f64 = 100.0;
pub const DEFAULT_SITE_FACTOR: usize = 5;
pub const DEFAULT_SENSING_RANGE: f64 = 35.0;
pub const DEFAULT_LANDMARK_COST: f64 = 1.0;

/// Undirected edge between two target indices, stored with the smaller
/// index first. Serializes as `[i, j]`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct EdgeId(pub usize, pub usize);

impl EdgeId {
    /// Canonical constructor: orders the endpoints. Panics on a loop edge.
    pub fn new(i: usize, j: usize) -> Self {
        assert_ne!(i, j, "loop edges are not part of the tour graph");
        if i < j {
            EdgeId(i, j)
        } else {
            EdgeId(j, i)
        }
    }

    pub fn endpoints(&self) -> (usize, usize) {
        (self.0, self.1)
    }

    pub fn touches(&self, v: usize) -> bool {
        self.0 == v || self.1 == v
    }

    /// Given one endpoint, returns the other.
    pub fn other(&self, v: usize) -> usize {
        debug_assert!(self.touches(v));
        if self.0 == v {
            self.1
        } else {
            self.0
        }
    }
}

/// Number of undirected edges on `n` vertices.
pub fn n_edges(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Position of an edge in the lexicographic edge ordering
/// (0,1), (0,2), ..., (0,n-1), (1,2), ...
pub fn edge_index(n: usize, e: EdgeId) -> usize {
    let (i, j) = (e.0, e.1);
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Inverse of [`edge_index`].
pub fn edge_at(n: usize, mut idx: usize) -> EdgeId {
    for i in 0..n {
        let row = n - 1 - i;
        if idx < row {
            return EdgeId(i, i + 1 + idx);
        }
        idx -= row;
    }
    panic!("edge index out of range");
}

/// All edges on `n` vertices in index order.
pub fn all_edges(n: usize) -> impl Iterator<Item = EdgeId> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| EdgeId(i, j)))
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("an instance needs at least 2 targets, got {0}")]
    TooFewTargets(usize),
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("{what}[{index}] is not finite")]
    NonFinite { what: &'static str, index: usize },
    #[error("landmark_cost[{index}] is negative ({value})")]
    NegativeCost { index: usize, value: f64 },
    #[error("landmark_cost has {costs} entries but there are {sites} sites")]
    CostLength { costs: usize, sites: usize },
}

/// Errors from reading or writing instance/solution files.
#[derive(Debug, Error)]
pub enum FileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(#[from] InstanceError),
}

/// A routing-with-landmarks instance.
///
/// The struct field names match the on-disk JSON exactly:
/// `{"targets":[[x,y],...],"sites":[[x,y],...],"sensing_range":r,
///   "landmark_cost":[...],"seed":s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub targets: Vec<Point2>,
    pub sites: Vec<Point2>,
    pub sensing_range: f64,
    pub landmark_cost: Vec<f64>,
    pub seed: u64,
}

impl Instance {
    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> {
        all_edges(self.targets.len())
    }

    /// Structural sanity checks; run on every instance loaded from disk.
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.targets.len() < 2 {
            return Err(InstanceError::TooFewTargets(self.targets.len()));
        }
        if !(self.sensing_range > 0.0) {
            return Err(InstanceError::NonPositive {
                what: "sensing_range",
                value: self.sensing_range,
            });
        }
        for (i, p) in self.targets.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(InstanceError::NonFinite { what: "targets", index: i });
            }
        }
        for (i, p) in self.sites.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(InstanceError::NonFinite { what: "sites", index: i });
            }
        }
        if self.landmark_cost.len() != self.sites.len() {
            return Err(InstanceError::CostLength {
                costs: self.landmark_cost.len(),
                sites: self.sites.len(),
            });
        }
        for (i, &d) in self.landmark_cost.iter().enumerate() {
            if !d.is_finite() {
                return Err(InstanceError::NonFinite { what: "landmark_cost", index: i });
            }
            if d < 0.0 {
                return Err(InstanceError::NegativeCost { index: i, value: d });
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, FileError> {
        let inst: Instance = serde_json::from_str(s)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<(), FileError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Knobs for [`generate_instance`] besides the target count and seed.
#[derive(Debug, Clone)]
pub struct GenConfig {
    pub grid_side: f64,
    /// Number of candidate sites per target.
    pub site_factor: usize,
    pub sensing_range: f64,
    /// Uniform placement cost applied to every site.
    pub landmark_cost: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            grid_side: DEFAULT_GRID_SIDE,
            site_factor: DEFAULT_SITE_FACTOR,
            sensing_range: DEFAULT_SENSING_RANGE,
            landmark_cost: DEFAULT_LANDMARK_COST,
        }
    }
}

/// Draws a random instance: `n_targets` targets and
/// `site_factor * n_targets` candidate sites, uniform on the square
/// `[0, grid_side]^2`.
///
/// Reproducibility: the generator is ChaCha8 keyed by `seed`, with targets
/// and sites drawn from separate ChaCha streams. Changing the site factor
/// therefore never perturbs the target draws for a given seed.
pub fn generate_instance(
    n_targets: usize,
    seed: u64,
    cfg: &GenConfig,
) -> Result<Instance, InstanceError> {
    if n_targets < 2 {
        return Err(InstanceError::TooFewTargets(n_targets));
    }
    if !(cfg.grid_side > 0.0) {
        return Err(InstanceError::NonPositive { what: "grid_side", value: cfg.grid_side });
    }
    if !(cfg.sensing_range > 0.0) {
        return Err(InstanceError::NonPositive {
            what: "sensing_range",
            value: cfg.sensing_range,
        });
    }
    if cfg.landmark_cost < 0.0 {
        return Err(InstanceError::NegativeCost { index: 0, value: cfg.landmark_cost });
    }

    let draw = |stream: u64, count: usize| -> Vec<Point2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..count)
            .map(|_| {
                let x = rng.gen_range(0.0..=cfg.grid_side);
                let y = rng.gen_range(0.0..=cfg.grid_side);
                Point2::new(x, y)
            })
            .collect()
    };

    let targets = draw(0, n_targets);
    let n_sites = cfg.site_factor * n_targets;
    let sites = draw(1, n_sites);

    Ok(Instance {
        targets,
        sites,
        sensing_range: cfg.sensing_range,
        landmark_cost: vec![cfg.landmark_cost; n_sites],
        seed,
    })
}

/// Which sites can serve each target, and each edge.
///
/// `per_target[v]` lists sites strictly within the sensing range of target
/// `v`; `per_edge[e]` is the intersection of the two endpoint lists. Both
/// are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSets {
    pub per_target: Vec<Vec<usize>>,
    pub per_edge: BTreeMap<EdgeId, Vec<usize>>,
}

impl CoverSets {
    pub fn edge_cover(&self, e: EdgeId) -> &[usize] {
        self.per_edge.get(&e).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn compute_cover_sets(inst: &Instance) -> CoverSets {
    let per_target: Vec<Vec<usize>> = inst
        .targets
        .iter()
        .map(|t| {
            inst.sites
                .iter()
                .enumerate()
                .filter(|(_, s)| t.dist(s) < inst.sensing_range)
                .map(|(k, _)| k)
                .collect()
        })
        .collect();

    let mut per_edge = BTreeMap::new();
    for e in inst.edges() {
        let (i, j) = e.endpoints();
        per_edge.insert(e, sorted_intersection(&per_target[i], &per_target[j]));
    }
    CoverSets { per_target, per_edge }
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[ia]);
                ia += 1;
                ib += 1;
            }
        }
    }
    out
}

/// Euclidean travel cost per edge, indexed by [`edge_index`].
#[derive(Debug, Clone)]
pub struct EdgeCosts {
    n: usize,
    by_index: Vec<f64>,
}

impl EdgeCosts {
    pub fn cost(&self, e: EdgeId) -> f64 {
        self.by_index[edge_index(self.n, e)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.by_index
    }
}

pub fn compute_edge_costs(inst: &Instance) -> EdgeCosts {
    let n = inst.n_targets();
    let by_index = all_edges(n)
        .map(|e| inst.targets[e.0].dist(&inst.targets[e.1]))
        .collect();
    EdgeCosts { n, by_index }
}

/// Cheap pre-solve screen: a tour must enter and leave every target, so a
/// target with fewer than two incident edges that can be 2-covered makes
/// the whole instance infeasible.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Per target: number of incident edges whose cover set has >= 2 sites.
    pub coverable_degree: Vec<usize>,
    /// Targets with coverable degree < 2.
    pub flagged: Vec<usize>,
}

impl ValidationReport {
    pub fn infeasible_certain(&self) -> bool {
        !self.flagged.is_empty()
    }
}

pub fn validate_instance(inst: &Instance, cov: &CoverSets) -> ValidationReport {
    let n = inst.n_targets();
    let mut coverable_degree = vec![0usize; n];
    for (e, ks) in &cov.per_edge {
        if ks.len() >= 2 {
            coverable_degree[e.0] += 1;
            coverable_degree[e.1] += 1;
        }
    }
    let flagged = (0..n).filter(|&v| coverable_degree[v] < 2).collect();
    ValidationReport { coverable_degree, flagged }
}
