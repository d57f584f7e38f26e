//! End-to-end estimation from two curve panels: smoothing, FPCA, score
//! covariances and a warm-started penalty path.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diffgraph::{block_norms, threshold_edges, EdgeSet};
use crate::error::{Error, Result};
use crate::fpca::{cv_loss_m, population_scores, score_cov, BasisMode, ScoreCovariance, ScoreMatrix, DEFAULT_M_TIE_TOL};
use crate::funcdata::{argmin_prefer_small, cv_loss_l, smooth, BasisSpec, CurvePanel, SmoothedPanel};
use crate::solver::{check_lambda_grid, fit_from, lambda_max_bound, log_lambda_grid, DeltaEstimate, SolveReport, SolverConfig};

/// Cubic B-spline dimension: fixed, or chosen by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SmoothingChoice {
    Fixed(usize),
    Cv { candidates: Vec<usize>, folds: usize },
}

/// Number of principal components per node: fixed, or chosen by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TruncationChoice {
    Fixed(usize),
    Cv {
        candidates: Vec<usize>,
        folds: usize,
        #[serde(default = "default_tie_tol")]
        tie_tol: f64,
    },
}

fn default_tie_tol() -> f64 {
    DEFAULT_M_TIE_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum LambdaGrid {
    /// Explicit penalties, sorted descending.
    Explicit(Vec<f64>),
    /// `count` log-spaced values from the null penalty down to `ratio` times it.
    Auto { count: usize, ratio: f64 },
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            count: 30,
            ratio: 1e-3,
        }
    }
}

impl LambdaGrid {
    pub fn validate(&self) -> Result<()> {
        match self {
            LambdaGrid::Explicit(v) => check_lambda_grid(v),
            LambdaGrid::Auto { count, ratio } => {
                if *count == 0 || !(*ratio > 0.0 && *ratio <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "auto lambda grid needs count >= 1 and 0 < ratio <= 1 (count={count}, ratio={ratio})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn resolve(&self, lambda_max: f64) -> Result<Vec<f64>> {
        let grid = match self {
            LambdaGrid::Explicit(v) => v.clone(),
            LambdaGrid::Auto { count, ratio } => {
                self.validate()?;
                if !(lambda_max > 0.0) {
                    // identical covariances: every penalty gives the zero estimate
                    return Ok(vec![f64::MIN_POSITIVE]);
                }
                log_lambda_grid(lambda_max, *count, *ratio)
            }
        };
        check_lambda_grid(&grid)?;
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default = "default_smoothing")]
    pub smoothing: SmoothingChoice,
    #[serde(default = "default_truncation")]
    pub truncation: TruncationChoice,
    #[serde(default)]
    pub basis_mode: BasisMode,
    #[serde(default)]
    pub lambdas: LambdaGrid,
    /// Solver settings; the penalty field is ignored in favour of the grid.
    #[serde(default)]
    pub solver: SolverConfig,
    /// Edge threshold on block norms.
    #[serde(default)]
    pub epsilon: f64,
    /// Skip the rest of the grid once every pair is an edge.
    #[serde(default = "default_true")]
    pub stop_at_saturation: bool,
}

fn default_true() -> bool {
    true
}

fn default_smoothing() -> SmoothingChoice {
    SmoothingChoice::Cv {
        candidates: vec![10, 15, 20, 25, 30],
        folds: 5,
    }
}

fn default_truncation() -> TruncationChoice {
    TruncationChoice::Cv {
        candidates: (1..=8).collect(),
        folds: 5,
        tie_tol: DEFAULT_M_TIE_TOL,
    }
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            smoothing: default_smoothing(),
            truncation: default_truncation(),
            basis_mode: BasisMode::default(),
            lambdas: LambdaGrid::default(),
            solver: SolverConfig::default(),
            epsilon: 0.0,
            stop_at_saturation: true,
        }
    }
}

impl EstimateConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.smoothing {
            SmoothingChoice::Fixed(l) => BasisSpec::cubic_bspline(*l).validate()?,
            SmoothingChoice::Cv { candidates, folds } => {
                if candidates.is_empty() || *folds < 2 {
                    return Err(Error::InvalidArgument(
                        "smoothing CV needs candidates and at least 2 folds".into(),
                    ));
                }
                for &l in candidates {
                    BasisSpec::cubic_bspline(l).validate()?;
                }
            }
        }
        match &self.truncation {
            TruncationChoice::Fixed(m) => {
                if *m == 0 {
                    return Err(Error::InvalidArgument("M must be positive".into()));
                }
            }
            TruncationChoice::Cv {
                candidates,
                folds,
                tie_tol,
            } => {
                if candidates.is_empty() || candidates.contains(&0) || *folds < 2 || !(*tie_tol >= 0.0) {
                    return Err(Error::InvalidArgument(
                        "truncation CV needs positive candidates, at least 2 folds and tie_tol >= 0".into(),
                    ));
                }
            }
        }
        self.lambdas.validate()?;
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument("epsilon must be >= 0".into()));
        }
        self.solver.validate()
    }
}

/// One solved point of the penalty path.
#[derive(Debug, Clone)]
pub struct PathPoint {
    pub lambda: f64,
    pub delta: DeltaEstimate,
    pub report: SolveReport,
    pub edges: EdgeSet,
    pub scores: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub basis_dim: usize,
    pub m: usize,
    pub scores_x: ScoreMatrix,
    pub scores_y: ScoreMatrix,
    pub cov_x: ScoreCovariance,
    pub cov_y: ScoreCovariance,
    pub lambda_max: f64,
    /// Full penalty grid; `path` may stop early at saturation.
    pub lambdas: Vec<f64>,
    pub path: Vec<PathPoint>,
}

impl EstimateOutput {
    /// Block-norm scores of the least penalized (densest) solution.
    pub fn densest_scores(&self) -> &DMatrix<f64> {
        &self.path.last().expect("nonempty path").scores
    }
}

fn check_panels(x: &CurvePanel, y: &CurvePanel) -> Result<()> {
    if x.p() != y.p() {
        return Err(Error::Shape(format!(
            "populations have different node counts: {} vs {}",
            x.p(),
            y.p()
        )));
    }
    if !x.grid().matches(y.grid()) {
        return Err(Error::GridMismatch("populations observed on different grids".into()));
    }
    Ok(())
}

/// Chooses the smoothing dimension, summing CV losses over both populations.
pub fn choose_basis_dim(x: &CurvePanel, y: &CurvePanel, choice: &SmoothingChoice) -> Result<usize> {
    match choice {
        SmoothingChoice::Fixed(l) => Ok(*l),
        SmoothingChoice::Cv { candidates, folds } => {
            let tx = cv_loss_l(x, candidates, *folds)?;
            let ty = cv_loss_l(y, candidates, *folds)?;
            let table: Vec<(usize, f64)> = tx.iter().zip(&ty).map(|(a, b)| (a.0, a.1 + b.1)).collect();
            Ok(argmin_prefer_small(&table, 0.0))
        }
    }
}

/// Chooses the truncation level, summing CV losses over both populations.
pub fn choose_truncation(x: &SmoothedPanel, y: &SmoothedPanel, choice: &TruncationChoice) -> Result<usize> {
    match choice {
        TruncationChoice::Fixed(m) => Ok(*m),
        TruncationChoice::Cv {
            candidates,
            folds,
            tie_tol,
        } => {
            let (tx, vx) = cv_loss_m(x, candidates, *folds)?;
            let (ty, vy) = cv_loss_m(y, candidates, *folds)?;
            let table: Vec<(usize, f64)> = tx.iter().zip(&ty).map(|(a, b)| (a.0, a.1 + b.1)).collect();
            Ok(argmin_prefer_small(&table, tie_tol * (vx + vy)))
        }
    }
}

/// Smooths both panels, computes FPCA score covariances and solves the penalty path.
pub fn estimate(x: &CurvePanel, y: &CurvePanel, cfg: &EstimateConfig) -> Result<EstimateOutput> {
    cfg.validate()?;
    check_panels(x, y)?;
    let basis_dim = choose_basis_dim(x, y, &cfg.smoothing)?;
    let spec = BasisSpec::cubic_bspline(basis_dim);
    let sx_panel = smooth(x, &spec)?;
    let sy_panel = smooth(y, &spec)?;
    let m = choose_truncation(&sx_panel, &sy_panel, &cfg.truncation)?;
    if m > basis_dim {
        return Err(Error::InvalidArgument(format!(
            "M={m} exceeds the smoothing dimension L={basis_dim}"
        )));
    }
    let (scores_x, scores_y) = population_scores(&sx_panel, &sy_panel, m, cfg.basis_mode)?;
    let cov_x = score_cov(&scores_x)?;
    let cov_y = score_cov(&scores_y)?;
    let lambda_max = lambda_max_bound(&cov_x, &cov_y)?;
    let lambdas = cfg.lambdas.resolve(lambda_max)?;
    let path = solve_path(&cov_x, &cov_y, &lambdas, cfg)?;
    Ok(EstimateOutput {
        basis_dim,
        m,
        scores_x,
        scores_y,
        cov_x,
        cov_y,
        lambda_max,
        lambdas,
        path,
    })
}

/// Warm-started path over a descending grid, thresholding each solution.
pub fn solve_path(
    cov_x: &ScoreCovariance,
    cov_y: &ScoreCovariance,
    lambdas: &[f64],
    cfg: &EstimateConfig,
) -> Result<Vec<PathPoint>> {
    check_lambda_grid(lambdas)?;
    let mut path: Vec<PathPoint> = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let local = SolverConfig {
            lambda,
            ..cfg.solver.clone()
        };
        let init = path.last().map(|pt| &pt.delta);
        let (delta, report) = fit_from(cov_x, cov_y, &local, init).map_err(|e| Error::AtLambda {
            lambda,
            source: Box::new(e),
        })?;
        let edges = threshold_edges(&delta, cfg.epsilon);
        let saturated = edges.len() == edges.pair_count();
        path.push(PathPoint {
            lambda,
            scores: block_norms(&delta),
            edges,
            delta,
            report,
        });
        if saturated && cfg.stop_at_saturation {
            break;
        }
    }
    Ok(path)
}
