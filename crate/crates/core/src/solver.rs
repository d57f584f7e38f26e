//! Group-lasso penalized estimation of the precision-matrix difference by
//! proximal gradient descent.
//!
//! The smooth part of the objective is
//! `L(D) = tr[ 1/2 Sy D^T Sx D - D^T (Sy - Sx) ]` with gradient
//! `Sx D Sy - (Sy - Sx)`; the penalty is `lambda * sum_{j,l} ||D_jl||_F` over
//! all `p^2` blocks of size `M x M`. Each iteration takes a gradient step and
//! then soft-thresholds every block by `lambda * step`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpca::ScoreCovariance;

/// Blockwise estimate of `Theta_X - Theta_Y` in score coordinates (`pM x pM`).
///
/// Not necessarily symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEstimate {
    pub p: usize,
    pub m: usize,
    pub matrix: DMatrix<f64>,
}

impl DeltaEstimate {
    pub fn zeros(p: usize, m: usize) -> Self {
        Self {
            p,
            m,
            matrix: DMatrix::zeros(p * m, p * m),
        }
    }

    pub fn new(p: usize, m: usize, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != p * m || matrix.ncols() != p * m {
            return Err(Error::Shape(format!(
                "delta is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                p * m,
                p * m
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("delta has non-finite entries".into()));
        }
        Ok(Self { p, m, matrix })
    }

    pub fn block(&self, j: usize, l: usize) -> DMatrix<f64> {
        self.matrix
            .view((j * self.m, l * self.m), (self.m, self.m))
            .into_owned()
    }

    pub fn block_norm(&self, j: usize, l: usize) -> f64 {
        block_norm(&self.matrix, self.m, j, l)
    }

    /// Number of blocks that are not identically zero.
    pub fn nonzero_blocks(&self) -> usize {
        let mut count = 0;
        for j in 0..self.p {
            for l in 0..self.p {
                if self.block_norm(j, l) > 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Sum of block Frobenius norms.
    pub fn group_norm(&self) -> f64 {
        group_norm(&self.matrix, self.p, self.m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSize {
    /// `1 / (lambda_max(Sx) * lambda_max(Sy))`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_step")]
    pub step: StepSize,
    /// Stop once the relative change of the penalized objective drops below this.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Nesterov momentum with objective-based restarts. Off by default.
    #[serde(default)]
    pub accelerate: bool,
    #[serde(default)]
    pub record_trace: bool,
}

fn default_step() -> StepSize {
    StepSize::Auto
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    10_000
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            step: StepSize::Auto,
            tol: default_tol(),
            max_iters: default_max_iters(),
            accelerate: false,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if let StepSize::Fixed(eta) = self.step {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "step size must be positive, got {eta}"
                )));
            }
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be >= 0, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub objective: f64,
    pub converged: bool,
    pub step: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
}

fn check_layout(delta: &DeltaEstimate, sx: &ScoreCovariance, sy: &ScoreCovariance) -> Result<()> {
    if delta.p != sx.p || delta.m != sx.m {
        return Err(Error::Shape(format!(
            "delta has p={} M={}, covariances have p={} M={}",
            delta.p, delta.m, sx.p, sx.m
        )));
    }
    check_shapes(&delta.matrix, sx, sy)
}

fn check_shapes(delta: &DMatrix<f64>, sx: &ScoreCovariance, sy: &ScoreCovariance) -> Result<()> {
    let d = sx.dim();
    if sy.dim() != d || sx.p != sy.p || sx.m != sy.m {
        return Err(Error::Shape(format!(
            "covariances disagree: p={} M={} vs p={} M={}",
            sx.p, sx.m, sy.p, sy.m
        )));
    }
    if delta.nrows() != d || delta.ncols() != d {
        return Err(Error::Shape(format!(
            "delta is {}x{}, covariances are {d}x{d}",
            delta.nrows(),
            delta.ncols()
        )));
    }
    Ok(())
}

/// Smooth loss `tr[ 1/2 Sy D^T Sx D - D^T (Sy - Sx) ]`.
pub fn loss(delta: &DeltaEstimate, sx: &ScoreCovariance, sy: &ScoreCovariance) -> Result<f64> {
    check_layout(delta, sx, sy)?;
    let d = &delta.matrix;
    let quad = (&sy.matrix * d.transpose() * &sx.matrix * d).trace();
    let lin = (d.transpose() * (&sy.matrix - &sx.matrix)).trace();
    Ok(0.5 * quad - lin)
}

/// Gradient `Sx D Sy - (Sy - Sx)` of the smooth loss.
pub fn gradient(
    delta: &DeltaEstimate,
    sx: &ScoreCovariance,
    sy: &ScoreCovariance,
) -> Result<DMatrix<f64>> {
    check_layout(delta, sx, sy)?;
    Ok(&sx.matrix * &delta.matrix * &sy.matrix - (&sy.matrix - &sx.matrix))
}

pub(crate) fn block_norm(a: &DMatrix<f64>, m: usize, j: usize, l: usize) -> f64 {
    a.view((j * m, l * m), (m, m)).norm()
}

/// `sum_{j,l} ||A_jl||_F`.
pub fn group_norm(a: &DMatrix<f64>, p: usize, m: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..p {
        for l in 0..p {
            s += block_norm(a, m, j, l);
        }
    }
    s
}

/// Dual of the group norm: the largest block Frobenius norm.
pub fn dual_group_norm(a: &DMatrix<f64>, p: usize, m: usize) -> f64 {
    let mut best = 0.0f64;
    for j in 0..p {
        for l in 0..p {
            best = best.max(block_norm(a, m, j, l));
        }
    }
    best
}

/// A unit-group-norm matrix attaining the dual norm of `v`: the normalized
/// largest block of `v` with every other block zero (first block on ties).
pub fn dual_maximizer(v: &DMatrix<f64>, p: usize, m: usize) -> DMatrix<f64> {
    let mut best = (0, 0, -1.0);
    for j in 0..p {
        for l in 0..p {
            let nrm = block_norm(v, m, j, l);
            if nrm > best.2 {
                best = (j, l, nrm);
            }
        }
    }
    let mut u = DMatrix::zeros(p * m, p * m);
    let (j, l, nrm) = best;
    if nrm > 0.0 {
        let block = v.view((j * m, l * m), (m, m)) / nrm;
        u.view_mut((j * m, l * m), (m, m)).copy_from(&block);
    } else {
        u[(j * m, l * m)] = 1.0;
    }
    u
}

/// Blockwise soft-threshold: each `M x M` block is scaled by
/// `max(0, (||A_jl||_F - t) / ||A_jl||_F)`.
pub fn prox_group(a: &DMatrix<f64>, threshold: f64, p: usize, m: usize) -> DMatrix<f64> {
    let mut out = a.clone();
    prox_group_in_place(&mut out, threshold, p, m);
    out
}

fn prox_group_in_place(a: &mut DMatrix<f64>, threshold: f64, p: usize, m: usize) {
    for j in 0..p {
        for l in 0..p {
            let mut block = a.view_mut((j * m, l * m), (m, m));
            let nrm = block.norm();
            if nrm <= threshold || nrm == 0.0 {
                block.fill(0.0);
            } else {
                block *= (nrm - threshold) / nrm;
            }
        }
    }
}

/// Largest eigenvalue of a symmetric matrix.
fn lambda_max(s: &DMatrix<f64>) -> f64 {
    s.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Step size `1 / (lambda_max(Sx) * lambda_max(Sy))`.
pub fn auto_step(sx: &ScoreCovariance, sy: &ScoreCovariance) -> f64 {
    let lip = lambda_max(&sx.matrix) * lambda_max(&sy.matrix);
    if lip > 0.0 && lip.is_finite() {
        1.0 / lip
    } else {
        1.0
    }
}

/// Smallest penalty at which the zero matrix is optimal: `max_{j,l} ||(Sy - Sx)_jl||_F`.
pub fn lambda_max_bound(sx: &ScoreCovariance, sy: &ScoreCovariance) -> Result<f64> {
    check_shapes(&DMatrix::zeros(sx.dim(), sx.dim()), sx, sy)?;
    Ok(dual_group_norm(&(&sy.matrix - &sx.matrix), sx.p, sx.m))
}

/// `count` log-spaced values from `max` down to `max * ratio`.
pub fn log_lambda_grid(max: f64, count: usize, ratio: f64) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![max],
        _ => (0..count)
            .map(|i| max * ratio.powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// Worst violation of the blockwise optimality conditions at `delta`:
/// `||G_jl + lambda D_jl / ||D_jl|| ||_F` on nonzero blocks and
/// `max(0, ||G_jl||_F - lambda)` on zero blocks, `G` the loss gradient.
pub fn kkt_violation(
    delta: &DeltaEstimate,
    sx: &ScoreCovariance,
    sy: &ScoreCovariance,
    lambda: f64,
) -> Result<f64> {
    let g = gradient(delta, sx, sy)?;
    let m = delta.m;
    let mut worst = 0.0f64;
    for j in 0..delta.p {
        for l in 0..delta.p {
            let gb = g.view((j * m, l * m), (m, m));
            let db = delta.matrix.view((j * m, l * m), (m, m));
            let dn = db.norm();
            let v = if dn > 0.0 {
                (gb + db * (lambda / dn)).norm()
            } else {
                (gb.norm() - lambda).max(0.0)
            };
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

/// Minimizes the penalized objective from `Delta = 0`.
pub fn fit(
    sx: &ScoreCovariance,
    sy: &ScoreCovariance,
    cfg: &SolverConfig,
) -> Result<(DeltaEstimate, SolveReport)> {
    fit_from(sx, sy, cfg, None)
}

/// Minimizes the penalized objective starting from `init` (zero when `None`).
pub fn fit_from(
    sx: &ScoreCovariance,
    sy: &ScoreCovariance,
    cfg: &SolverConfig,
    init: Option<&DeltaEstimate>,
) -> Result<(DeltaEstimate, SolveReport)> {
    cfg.validate()?;
    let (p, m) = (sx.p, sx.m);
    let start = match init {
        Some(d) => {
            check_layout(d, sx, sy)?;
            d.matrix.clone()
        }
        None => DMatrix::zeros(p * m, p * m),
    };
    check_shapes(&start, sx, sy)?;
    if sx.matrix.iter().chain(sy.matrix.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("score covariance has non-finite entries".into()));
    }

    let eta = match cfg.step {
        StepSize::Auto => auto_step(sx, sy),
        StepSize::Fixed(e) => e,
    };
    let lambda = cfg.lambda;
    let diff = &sy.matrix - &sx.matrix;

    // objective pieces share the product Sx D Sy with the next gradient
    let eval = |d: &DMatrix<f64>| -> (DMatrix<f64>, f64) {
        let sds = &sx.matrix * d * &sy.matrix;
        let obj = 0.5 * d.dot(&sds) - d.dot(&diff) + lambda * group_norm(d, p, m);
        (sds, obj)
    };

    let mut delta = start;
    let (mut sds, mut obj) = eval(&delta);
    let mut trace = Vec::new();
    if cfg.record_trace {
        trace.push(obj);
    }

    // momentum state (only used when accelerating)
    let mut extrap = delta.clone();
    let mut extrap_sds = sds.clone();
    let mut theta = 1.0f64;

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let (base, base_sds) = if cfg.accelerate {
            (&extrap, &extrap_sds)
        } else {
            (&delta, &sds)
        };
        let mut a = base - (base_sds - &diff) * eta;
        prox_group_in_place(&mut a, lambda * eta, p, m);
        let (new_sds, new_obj) = eval(&a);
        if !new_obj.is_finite() {
            return Err(Error::Divergence {
                iteration: iterations,
                value: new_obj,
            });
        }

        if cfg.accelerate {
            if new_obj > obj {
                // restart momentum from the current iterate
                theta = 1.0;
                extrap = delta.clone();
                extrap_sds = sds.clone();
                continue;
            }
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            extrap = &a + (&a - &delta) * beta;
            extrap_sds = &new_sds + (&new_sds - &sds) * beta;
            theta = theta_next;
        }

        let change = (obj - new_obj).abs();
        let scale = obj.abs().max(new_obj.abs());
        delta = a;
        sds = new_sds;
        obj = new_obj;
        if cfg.record_trace {
            trace.push(obj);
        }
        if change == 0.0 || change <= cfg.tol * scale {
            converged = true;
            break;
        }
    }

    Ok((
        DeltaEstimate { p, m, matrix: delta },
        SolveReport {
            iterations,
            objective: obj,
            converged,
            step: eta,
            trace,
        },
    ))
}

/// A penalty grid must be nonempty, finite, positive and descending.
pub fn check_lambda_grid(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if lambdas.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument("lambda grid must be positive".into()));
    }
    if lambdas.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("lambda grid must be sorted descending".into()));
    }
    Ok(())
}

/// Solves a descending sequence of penalties, each warm-started from the previous solution.
pub fn lambda_path(
    sx: &ScoreCovariance,
    sy: &ScoreCovariance,
    lambdas: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<(DeltaEstimate, SolveReport)>> {
    check_lambda_grid(lambdas)?;
    let mut out: Vec<(DeltaEstimate, SolveReport)> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let local = SolverConfig {
            lambda,
            ..cfg.clone()
        };
        let init = out.last().map(|(d, _)| d);
        let solved = fit_from(sx, sy, &local, init).map_err(|e| Error::AtLambda {
            lambda,
            source: Box::new(e),
        })?;
        out.push(solved);
    }
    Ok(out)
}
