//! Differential edge sets from block estimates, and the per-time-point
//! majority-vote baseline that ignores the functional structure.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::{center_columns, ScoreCovariance};
use crate::funcdata::CurvePanel;
use crate::solver::{fit, lambda_path, DeltaEstimate, SolverConfig};

/// Undirected edges over `p` nodes, stored as `(min, max)` pairs (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeSet {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl EdgeSet {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            edges: BTreeSet::new(),
        }
    }

    pub fn from_pairs(p: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = Self::new(p);
        for (j, l) in pairs {
            set.insert(j, l)?;
        }
        Ok(set)
    }

    /// Adds `{j, l}`; returns whether it was new.
    pub fn insert(&mut self, j: usize, l: usize) -> Result<bool> {
        if j == l {
            return Err(Error::InvalidArgument(format!("self-loop at node {j}")));
        }
        if j >= self.p || l >= self.p {
            return Err(Error::InvalidArgument(format!(
                "edge ({j},{l}) out of range for p={}",
                self.p
            )));
        }
        Ok(self.edges.insert((j.min(l), j.max(l))))
    }

    pub fn contains(&self, j: usize, l: usize) -> bool {
        self.edges.contains(&(j.min(l), j.max(l)))
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.edges.is_subset(&other.edges)
    }

    /// Number of unordered node pairs, `p(p-1)/2`.
    pub fn pair_count(&self) -> usize {
        self.p * self.p.saturating_sub(1) / 2
    }
}

/// `{(j,l) : ||D_jl||_F > eps or ||D_lj||_F > eps}`.
pub fn threshold_edges(delta: &DeltaEstimate, eps: f64) -> EdgeSet {
    let mut set = EdgeSet::new(delta.p);
    for j in 0..delta.p {
        for l in j + 1..delta.p {
            if delta.block_norm(j, l) > eps || delta.block_norm(l, j) > eps {
                set.edges.insert((j, l));
            }
        }
    }
    set
}

/// Symmetric edge scores `max(||D_jl||_F, ||D_lj||_F)` with a zero diagonal.
pub fn block_norms(delta: &DeltaEstimate) -> DMatrix<f64> {
    let p = delta.p;
    let mut out = DMatrix::zeros(p, p);
    for j in 0..p {
        for l in j + 1..p {
            let s = delta.block_norm(j, l).max(delta.block_norm(l, j));
            out[(j, l)] = s;
            out[(l, j)] = s;
        }
    }
    out
}

/// Pairs whose score exceeds `cut`.
pub fn edges_above(scores: &DMatrix<f64>, cut: f64) -> EdgeSet {
    let p = scores.nrows();
    let mut set = EdgeSet::new(p);
    for j in 0..p {
        for l in j + 1..p {
            if scores[(j, l)].max(scores[(l, j)]) > cut {
                set.edges.insert((j, l));
            }
        }
    }
    set
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteConfig {
    /// Number of equally spaced grid indices, endpoints included.
    pub time_points: usize,
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self { time_points: 15 }
    }
}

/// Grid indices `round(g (G-1) / (T-1))`, `g = 0..T`; the middle index when `T = 1`.
pub fn vote_time_indices(grid_len: usize, time_points: usize) -> Result<Vec<usize>> {
    if time_points == 0 {
        return Err(Error::InvalidArgument("need at least one time point".into()));
    }
    if time_points > grid_len {
        return Err(Error::InvalidArgument(format!(
            "{time_points} time points exceed the {grid_len}-point grid"
        )));
    }
    if time_points == 1 {
        return Ok(vec![(grid_len - 1) / 2]);
    }
    Ok((0..time_points)
        .map(|g| (g as f64 * (grid_len - 1) as f64 / (time_points - 1) as f64).round() as usize)
        .collect())
}

/// Sample covariance (divisor `n`) of the p-vectors observed at grid index `k`.
fn cross_section_cov(panel: &CurvePanel, k: usize) -> Result<ScoreCovariance> {
    let x = center_columns(&panel.cross_section(k));
    let s = x.transpose() * &x / panel.n() as f64;
    let s = (&s + s.transpose()) * 0.5;
    ScoreCovariance::new(panel.p(), 1, s)
}

fn check_pair(x: &CurvePanel, y: &CurvePanel, cfg: &VoteConfig) -> Result<Vec<usize>> {
    if x.p() != y.p() {
        return Err(Error::Shape(format!("p differs: {} vs {}", x.p(), y.p())));
    }
    if !x.grid().matches(y.grid()) {
        return Err(Error::GridMismatch("populations observed on different grids".into()));
    }
    for panel in [x, y] {
        if panel.n() < 2 {
            return Err(Error::InsufficientSample {
                needed: 2,
                got: panel.n(),
            });
        }
    }
    vote_time_indices(x.grid().len(), cfg.time_points)
}

/// Per-pair counts of how many time points include each edge, for every penalty on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteTally {
    pub p: usize,
    pub time_points: usize,
    pub lambdas: Vec<f64>,
    /// `counts[i]` is a `p x p` symmetric count matrix for `lambdas[i]`.
    pub counts: Vec<DMatrix<u32>>,
}

impl VoteTally {
    /// Edges included at strictly more than half of the time points.
    pub fn voted(&self, index: usize) -> EdgeSet {
        majority(&self.counts[index], self.time_points)
    }
}

fn majority(counts: &DMatrix<u32>, time_points: usize) -> EdgeSet {
    let p = counts.nrows();
    let mut set = EdgeSet::new(p);
    for j in 0..p {
        for l in j + 1..p {
            if 2 * counts[(j, l)] as usize > time_points {
                set.edges.insert((j, l));
            }
        }
    }
    set
}

fn add_votes(counts: &mut DMatrix<u32>, edges: &EdgeSet) {
    for (j, l) in edges.iter() {
        counts[(j, l)] += 1;
        counts[(l, j)] += 1;
    }
}

/// Majority vote over per-time-point scalar direct estimates at one penalty.
pub fn majority_vote_estimate(
    x: &CurvePanel,
    y: &CurvePanel,
    cfg: &VoteConfig,
    lambda: f64,
    solver: &SolverConfig,
) -> Result<EdgeSet> {
    let indices = check_pair(x, y, cfg)?;
    let local = SolverConfig {
        lambda,
        ..solver.clone()
    };
    let per_time: Vec<EdgeSet> = indices
        .par_iter()
        .map(|&k| {
            let tag = |e| Error::AtTimeIndex {
                index: k,
                source: Box::new(e),
            };
            let sx = cross_section_cov(x, k).map_err(tag)?;
            let sy = cross_section_cov(y, k).map_err(tag)?;
            let (delta, _) = fit(&sx, &sy, &local).map_err(tag)?;
            Ok(threshold_edges(&delta, 0.0))
        })
        .collect::<Result<_>>()?;
    let mut counts = DMatrix::zeros(x.p(), x.p());
    for edges in &per_time {
        add_votes(&mut counts, edges);
    }
    Ok(majority(&counts, indices.len()))
}

/// Largest per-time-point null penalty, i.e. the smallest penalty at which
/// every time point's estimate is zero.
pub fn vote_lambda_max(x: &CurvePanel, y: &CurvePanel, cfg: &VoteConfig) -> Result<f64> {
    let indices = check_pair(x, y, cfg)?;
    let mut best = 0.0f64;
    for k in indices {
        let sx = cross_section_cov(x, k)?;
        let sy = cross_section_cov(y, k)?;
        best = best.max(crate::solver::lambda_max_bound(&sx, &sy)?);
    }
    Ok(best)
}

/// Vote counts for every penalty of a descending grid (warm-started per time point).
pub fn vote_tally(
    x: &CurvePanel,
    y: &CurvePanel,
    cfg: &VoteConfig,
    lambdas: &[f64],
    solver: &SolverConfig,
) -> Result<VoteTally> {
    let indices = check_pair(x, y, cfg)?;
    let per_time: Vec<Vec<EdgeSet>> = indices
        .par_iter()
        .map(|&k| {
            let tag = |e| Error::AtTimeIndex {
                index: k,
                source: Box::new(e),
            };
            let sx = cross_section_cov(x, k).map_err(tag)?;
            let sy = cross_section_cov(y, k).map_err(tag)?;
            let path = lambda_path(&sx, &sy, lambdas, solver).map_err(tag)?;
            Ok(path.iter().map(|(d, _)| threshold_edges(d, 0.0)).collect())
        })
        .collect::<Result<_>>()?;
    let p = x.p();
    let counts = (0..lambdas.len())
        .map(|i| {
            let mut c = DMatrix::zeros(p, p);
            for edges in &per_time {
                add_votes(&mut c, &edges[i]);
            }
            c
        })
        .collect();
    Ok(VoteTally {
        p,
        time_points: indices.len(),
        lambdas: lambdas.to_vec(),
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta_with_blocks(p: usize, m: usize, blocks: &[((usize, usize), f64)]) -> DeltaEstimate {
        let mut d = DeltaEstimate::zeros(p, m);
        for &((j, l), nrm) in blocks {
            // spread the norm evenly over the block entries
            let v = nrm / m as f64;
            d.matrix.view_mut((j * m, l * m), (m, m)).fill(v);
        }
        d
    }

    #[test]
    fn zero_delta_has_no_edges() {
        assert!(threshold_edges(&DeltaEstimate::zeros(4, 2), 0.0).is_empty());
        assert!(block_norms(&DeltaEstimate::zeros(4, 2)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_block_edge() {
        let d = delta_with_blocks(3, 2, &[((0, 1), 0.3)]);
        let e = threshold_edges(&d, 0.1);
        assert_eq!(e.iter().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn or_rule_over_transposed_blocks() {
        let d = delta_with_blocks(3, 2, &[((0, 1), 0.05), ((1, 0), 0.2)]);
        let e = threshold_edges(&d, 0.1);
        assert!(e.contains(0, 1));
        assert_eq!(e.len(), 1);
        let s = block_norms(&d);
        assert!((s[(0, 1)] - 0.2).abs() < 1e-12);
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn diagonal_blocks_are_not_edges() {
        let d = delta_with_blocks(3, 2, &[((0, 0), 1.0), ((1, 1), 1.0), ((2, 2), 1.0)]);
        assert!(threshold_edges(&d, 0.0).is_empty());
        let s = block_norms(&d);
        assert!(s.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn edge_set_rejects_self_loops_and_canonicalizes() {
        let mut e = EdgeSet::new(4);
        assert!(e.insert(2, 2).is_err());
        assert!(e.insert(3, 1).unwrap());
        assert!(!e.insert(1, 3).unwrap());
        assert_eq!(e.iter().collect::<Vec<_>>(), vec![(1, 3)]);
        assert!(e.insert(0, 4).is_err());
    }

    #[test]
    fn strict_majority_from_tallies() {
        let mut counts = DMatrix::zeros(3, 3);
        counts[(0, 1)] = 8;
        counts[(1, 0)] = 8;
        counts[(1, 2)] = 7;
        counts[(2, 1)] = 7;
        let e = majority(&counts, 15);
        assert!(e.contains(0, 1));
        assert!(!e.contains(1, 2));
        // ties with an even number of time points are excluded
        let mut counts = DMatrix::zeros(2, 2);
        counts[(0, 1)] = 2;
        assert!(majority(&counts, 4).is_empty());
    }

    #[test]
    fn time_indices_include_both_endpoints() {
        assert_eq!(vote_time_indices(200, 15).unwrap()[0], 0);
        assert_eq!(*vote_time_indices(200, 15).unwrap().last().unwrap(), 199);
        assert_eq!(vote_time_indices(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(vote_time_indices(200, 1).unwrap(), vec![99]);
        assert!(vote_time_indices(10, 11).is_err());
        assert!(vote_time_indices(10, 0).is_err());
    }
}
