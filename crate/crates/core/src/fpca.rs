//! Functional principal component analysis: per-node covariance functions,
//! their eigenpairs under trapezoid quadrature, and principal component scores.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcdata::{argmin_prefer_small, SmoothedPanel, TimeGrid};

/// Grid values `K(s_a, t_b)` of one node's covariance function.
#[derive(Debug, Clone, PartialEq)]
pub struct CovFunction {
    pub node: usize,
    pub grid: TimeGrid,
    pub values: DMatrix<f64>,
}

/// Leading eigenpairs of a covariance operator.
///
/// Eigenfunctions are stored as the columns of a `G x M` matrix, each with
/// unit trapezoid L2 norm and its largest-magnitude entry positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub node: usize,
    pub grid: TimeGrid,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: DMatrix<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// `n x (p*M)` principal component scores, node-major: the `M` scores of
/// node `j` occupy columns `j*M .. (j+1)*M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub p: usize,
    pub m: usize,
    pub data: DMatrix<f64>,
}

impl ScoreMatrix {
    pub fn new(p: usize, m: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.ncols() != p * m {
            return Err(Error::Shape(format!(
                "score matrix has {} columns, expected p*M = {}",
                data.ncols(),
                p * m
            )));
        }
        Ok(Self { p, m, data })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Copy with every column centered to mean zero.
    pub fn centered(&self) -> Self {
        Self {
            p: self.p,
            m: self.m,
            data: center_columns(&self.data),
        }
    }
}

/// Symmetric `pM x pM` score covariance with `M x M` block access.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCovariance {
    pub p: usize,
    pub m: usize,
    pub matrix: DMatrix<f64>,
}

impl ScoreCovariance {
    pub fn new(p: usize, m: usize, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != p * m || matrix.ncols() != p * m {
            return Err(Error::Shape(format!(
                "covariance is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                p * m,
                p * m
            )));
        }
        Ok(Self { p, m, matrix })
    }

    pub fn dim(&self) -> usize {
        self.p * self.m
    }

    pub fn block(&self, j: usize, l: usize) -> DMatrix<f64> {
        self.matrix
            .view((j * self.m, l * self.m), (self.m, self.m))
            .into_owned()
    }
}

/// How eigenfunctions are obtained for the two populations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisMode {
    /// Each population gets the eigenbasis of its own covariance function.
    #[default]
    Separate,
    /// Both populations are projected on the eigenbasis of the pooled
    /// (within-population centered) covariance function.
    Pooled,
}

pub(crate) fn center_columns(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    m += t;
    m *= 0.5;
    m
}

/// Covariance of the rows of several `n_i x G` blocks, each centered by its own mean,
/// with divisor equal to the total row count.
fn pooled_row_covariance(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let g = blocks[0].ncols();
    let total: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut k = DMatrix::zeros(g, g);
    for b in blocks {
        let c = center_columns(b);
        k += c.transpose() * &c;
    }
    symmetrize(k / total as f64)
}

/// Empirical covariance function of one node, divisor `n`.
pub fn empirical_cov(panel: &SmoothedPanel, node: usize) -> Result<CovFunction> {
    empirical_cov_pooled(&[panel], node)
}

/// Covariance function pooled over populations: each population is centered
/// by its own mean and the cross products are divided by the total sample size.
pub fn empirical_cov_pooled(panels: &[&SmoothedPanel], node: usize) -> Result<CovFunction> {
    let first = panels
        .first()
        .ok_or_else(|| Error::InvalidArgument("no panels to pool".into()))?;
    for panel in panels {
        if panel.n() < 2 {
            return Err(Error::InsufficientSample {
                needed: 2,
                got: panel.n(),
            });
        }
        if !panel.grid().matches(first.grid()) {
            return Err(Error::GridMismatch("pooled panels use different grids".into()));
        }
        if node >= panel.p() {
            return Err(Error::InvalidArgument(format!(
                "node {node} out of range for p={}",
                panel.p()
            )));
        }
    }
    let blocks: Vec<DMatrix<f64>> = panels.iter().map(|p| p.node_values(node)).collect();
    Ok(CovFunction {
        node,
        grid: first.grid().clone(),
        values: pooled_row_covariance(&blocks),
    })
}

/// Top-`m` eigenpairs of the integral operator with kernel `cov`.
///
/// The operator is discretized as `W^{1/2} K W^{1/2}` with trapezoid weights
/// `W`; eigenvectors are mapped back through `W^{-1/2}`.
pub fn eigendecompose(cov: &CovFunction, m: usize) -> Result<EigenSystem> {
    let g = cov.grid.len();
    if cov.values.nrows() != g || cov.values.ncols() != g {
        return Err(Error::Shape(format!(
            "covariance is {}x{} on a {g}-point grid",
            cov.values.nrows(),
            cov.values.ncols()
        )));
    }
    if m > g {
        return Err(Error::InvalidArgument(format!(
            "requested {m} components from a {g}-point grid"
        )));
    }
    if cov.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "covariance of node {} has non-finite entries",
            cov.node
        )));
    }
    let w = cov.grid.trapezoid_weights();
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let weighted = DMatrix::from_fn(g, g, |a, b| sw[a] * cov.values[(a, b)] * sw[b]);
    let eig = SymmetricEigen::new(symmetrize(weighted));

    let mut order: Vec<usize> = (0..g).collect();
    // stable: equal values keep ascending solver index
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(m);
    let mut eigenfunctions = DMatrix::zeros(g, m);
    for (c, &idx) in order.iter().take(m).enumerate() {
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
        let v = eig.eigenvectors.column(idx);
        let mut phi: Vec<f64> = (0..g).map(|k| v[k] / sw[k]).collect();
        let norm = phi
            .iter()
            .zip(&w)
            .map(|(f, wk)| wk * f * f)
            .sum::<f64>()
            .sqrt();
        if norm > 0.0 {
            phi.iter_mut().for_each(|f| *f /= norm);
        }
        let lead = phi
            .iter()
            .copied()
            .fold(0.0f64, |acc, f| if f.abs() > acc.abs() { f } else { acc });
        if lead < 0.0 {
            phi.iter_mut().for_each(|f| *f = -*f);
        }
        eigenfunctions.set_column(c, &nalgebra::DVector::from_vec(phi));
    }
    Ok(EigenSystem {
        node: cov.node,
        grid: cov.grid.clone(),
        eigenvalues,
        eigenfunctions,
    })
}

/// Eigensystems for every node of one panel (or of the pooled panels).
pub fn node_eigensystems(panels: &[&SmoothedPanel], m: usize) -> Result<Vec<EigenSystem>> {
    let p = panels
        .first()
        .ok_or_else(|| Error::InvalidArgument("no panels".into()))?
        .p();
    if panels.iter().any(|x| x.p() != p) {
        return Err(Error::Shape("panels disagree on p".into()));
    }
    (0..p)
        .into_par_iter()
        .map(|j| eigendecompose(&empirical_cov_pooled(panels, j)?, m))
        .collect()
}

/// Trapezoid inner products of every curve with the first `m` eigenfunctions of its node.
pub fn scores(panel: &SmoothedPanel, systems: &[EigenSystem], m: usize) -> Result<ScoreMatrix> {
    if systems.len() != panel.p() {
        return Err(Error::Shape(format!(
            "{} eigensystems for {} nodes",
            systems.len(),
            panel.p()
        )));
    }
    let w = panel.grid().trapezoid_weights();
    let mut data = DMatrix::zeros(panel.n(), panel.p() * m);
    for (j, sys) in systems.iter().enumerate() {
        if !sys.grid.matches(panel.grid()) {
            return Err(Error::GridMismatch(format!(
                "eigensystem of node {j} lives on a different grid"
            )));
        }
        if sys.len() < m {
            return Err(Error::InvalidArgument(format!(
                "node {j} has {} components, need {m}",
                sys.len()
            )));
        }
        let weighted = DMatrix::from_fn(w.len(), m, |k, c| w[k] * sys.eigenfunctions[(k, c)]);
        let block = panel.node_values(j) * weighted;
        data.view_mut((0, j * m), (panel.n(), m)).copy_from(&block);
    }
    ScoreMatrix::new(panel.p(), m, data)
}

/// Centered sample covariance of the score rows, divisor `n`.
pub fn score_cov(scores: &ScoreMatrix) -> Result<ScoreCovariance> {
    let n = scores.n();
    if n < 2 {
        return Err(Error::InsufficientSample { needed: 2, got: n });
    }
    let c = center_columns(&scores.data);
    let s = symmetrize(c.transpose() * &c / n as f64);
    ScoreCovariance::new(scores.p, scores.m, s)
}

/// Mean held-out L2 reconstruction error for each candidate truncation level,
/// together with the mean held-out total variance.
///
/// Curves (samples) are dealt into folds by `i mod folds`; eigenfunctions come
/// from the training folds and held-out curves are centered by the training mean.
pub fn cv_loss_m(
    panel: &SmoothedPanel,
    candidates: &[usize],
    folds: usize,
) -> Result<(Vec<(usize, f64)>, f64)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate truncation levels".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let n = panel.n();
    if n < folds {
        return Err(Error::InsufficientSample { needed: folds, got: n });
    }
    let max_m = *candidates.iter().max().expect("nonempty");
    let w = panel.grid().trapezoid_weights();
    let mut err = vec![0.0; candidates.len()];
    let mut total = 0.0;
    let mut count = 0usize;

    for fold in 0..folds {
        let train: Vec<usize> = (0..n).filter(|i| i % folds != fold).collect();
        let test: Vec<usize> = (0..n).filter(|i| i % folds == fold).collect();
        if train.len() < 2 {
            return Err(Error::InsufficientSample { needed: 2, got: train.len() });
        }
        let train_panel = panel.select_samples(&train)?;
        for j in 0..panel.p() {
            let train_vals = train_panel.node_values(j);
            let mean: Vec<f64> = train_vals
                .column_iter()
                .map(|c| c.sum() / train.len() as f64)
                .collect();
            let cov = CovFunction {
                node: j,
                grid: panel.grid().clone(),
                values: pooled_row_covariance(&[train_vals]),
            };
            let sys = eigendecompose(&cov, max_m)?;
            for &i in &test {
                let resid: Vec<f64> = panel
                    .curve_values(i, j)
                    .iter()
                    .zip(&mean)
                    .map(|(x, mu)| x - mu)
                    .collect();
                let coords: Vec<f64> = (0..max_m)
                    .map(|c| {
                        (0..w.len())
                            .map(|k| w[k] * resid[k] * sys.eigenfunctions[(k, c)])
                            .sum()
                    })
                    .collect();
                total += w.iter().zip(&resid).map(|(wk, r)| wk * r * r).sum::<f64>();
                for (slot, &mc) in candidates.iter().enumerate() {
                    let e: f64 = (0..w.len())
                        .map(|k| {
                            let approx: f64 =
                                (0..mc).map(|c| coords[c] * sys.eigenfunctions[(k, c)]).sum();
                            let d = resid[k] - approx;
                            w[k] * d * d
                        })
                        .sum();
                    err[slot] += e;
                }
                count += 1;
            }
        }
    }
    let table = candidates
        .iter()
        .zip(err)
        .map(|(&c, e)| (c, e / count as f64))
        .collect();
    Ok((table, total / count as f64))
}

/// Smallest candidate whose CV reconstruction error is within
/// `tie_tol * (held-out variance)` of the best candidate.
pub fn select_m_cv(
    panel: &SmoothedPanel,
    candidates: &[usize],
    folds: usize,
    tie_tol: f64,
) -> Result<usize> {
    let (table, total) = cv_loss_m(panel, candidates, folds)?;
    Ok(argmin_prefer_small(&table, tie_tol * total))
}

/// Default relative tolerance used when comparing truncation levels.
pub const DEFAULT_M_TIE_TOL: f64 = 1e-3;

/// Scores of both populations under the chosen basis mode.
pub fn population_scores(
    x: &SmoothedPanel,
    y: &SmoothedPanel,
    m: usize,
    mode: BasisMode,
) -> Result<(ScoreMatrix, ScoreMatrix)> {
    if x.p() != y.p() {
        return Err(Error::Shape(format!("p differs: {} vs {}", x.p(), y.p())));
    }
    if !x.grid().matches(y.grid()) {
        return Err(Error::GridMismatch("populations observed on different grids".into()));
    }
    match mode {
        BasisMode::Separate => {
            let sx = node_eigensystems(&[x], m)?;
            let sy = node_eigensystems(&[y], m)?;
            Ok((scores(x, &sx, m)?, scores(y, &sy, m)?))
        }
        BasisMode::Pooled => {
            let sys = node_eigensystems(&[x, y], m)?;
            Ok((scores(x, &sys, m)?, scores(y, &sys, m)?))
        }
    }
}
