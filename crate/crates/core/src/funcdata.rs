//! Discretely observed functional data, basis systems and least-squares
//! smoothing onto a finite basis.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative singular-value floor below which a design matrix counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

/// An ordered set of observation times shared by every curve in a panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "time grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("time grid has non-finite points".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "time grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `len` evenly spaced points from `start` to `end` inclusive.
    pub fn uniform(len: usize, start: f64, end: f64) -> Result<Self> {
        if len < 2 || !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "uniform grid needs len >= 2 and end > start (len={len}, [{start}, {end}])"
            )));
        }
        let step = (end - start) / (len - 1) as f64;
        let mut points: Vec<f64> = (0..len).map(|k| start + step * k as f64).collect();
        points[len - 1] = end;
        Self::new(points)
    }

    /// 200 evenly spaced points on [0, 1].
    pub fn standard() -> Self {
        Self::uniform(200, 0.0, 1.0).expect("static grid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Trapezoid quadrature weights: `sum_k w_k f(t_k)` approximates the integral of `f`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let t = &self.points;
        let g = t.len();
        let mut w = vec![0.0; g];
        for k in 0..g - 1 {
            let h = 0.5 * (t[k + 1] - t[k]);
            w[k] += h;
            w[k + 1] += h;
        }
        w
    }

    /// Trapezoid integral of `f` sampled on this grid.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.points
            .windows(2)
            .zip(f.windows(2))
            .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Approximate equality used to check that two panels share a grid.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs()))
    }
}

impl TryFrom<Vec<f64>> for TimeGrid {
    type Error = Error;

    fn try_from(points: Vec<f64>) -> Result<Self> {
        Self::new(points)
    }
}

impl From<TimeGrid> for Vec<f64> {
    fn from(grid: TimeGrid) -> Self {
        grid.points
    }
}

/// A sample of `n` p-variate curves observed on a common grid.
///
/// Values are stored sample-major, then node, then time: the observation of
/// curve `j` of sample `i` at grid index `k` lives at `(i * p + j) * G + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePanel {
    n: usize,
    p: usize,
    grid: TimeGrid,
    values: Vec<f64>,
}

impl CurvePanel {
    pub fn new(n: usize, p: usize, grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::InvalidArgument(format!(
                "panel dimensions must be positive (n={n}, p={p})"
            )));
        }
        let expected = n * p * grid.len();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "panel expects {expected} values (n={n}, p={p}, G={}), got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite panel value at offset {pos}")));
        }
        Ok(Self { n, p, grid, values })
    }

    pub fn zeros(n: usize, p: usize, grid: TimeGrid) -> Result<Self> {
        let len = n * p * grid.len();
        Self::new(n, p, grid, vec![0.0; len])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn curve(&self, sample: usize, node: usize) -> &[f64] {
        let g = self.grid.len();
        let start = (sample * self.p + node) * g;
        &self.values[start..start + g]
    }

    pub fn curve_mut(&mut self, sample: usize, node: usize) -> &mut [f64] {
        let g = self.grid.len();
        let start = (sample * self.p + node) * g;
        &mut self.values[start..start + g]
    }

    /// The `n x p` cross-section of all curves at grid index `k`.
    pub fn cross_section(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.p, |i, j| self.curve(i, j)[k])
    }

    /// Keeps only the listed samples, in the given order.
    pub fn select_samples(&self, samples: &[usize]) -> Result<Self> {
        let g = self.grid.len();
        let mut values = Vec::with_capacity(samples.len() * self.p * g);
        for &i in samples {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!(
                    "sample index {i} out of range for n={}",
                    self.n
                )));
            }
            let start = i * self.p * g;
            values.extend_from_slice(&self.values[start..start + self.p * g]);
        }
        Self::new(samples.len(), self.p, self.grid.clone(), values)
    }
}

/// A finite basis system on the observation interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BasisSpec {
    /// Clamped B-splines with uniform interior knots.
    Bspline { dim: usize, degree: usize },
    /// `1, sqrt(2) sin(2 pi k t), sqrt(2) cos(2 pi k t), ...`, orthonormal over the interval.
    Fourier { dim: usize },
    /// Five cosine bumps, bump `k` supported on `[(k-1)/5, k/5)`.
    DisjointCosine,
}

impl BasisSpec {
    pub fn cubic_bspline(dim: usize) -> Self {
        BasisSpec::Bspline { dim, degree: 3 }
    }

    pub fn dim(&self) -> usize {
        match *self {
            BasisSpec::Bspline { dim, .. } | BasisSpec::Fourier { dim } => dim,
            BasisSpec::DisjointCosine => 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| {
            Err(Error::InvalidSpec {
                spec: self.to_string(),
                reason: reason.to_string(),
            })
        };
        match *self {
            BasisSpec::Bspline { dim, degree } => {
                if dim == 0 {
                    return invalid("dimension must be at least 1");
                }
                if degree >= dim {
                    return invalid("degree must be smaller than the basis dimension");
                }
            }
            BasisSpec::Fourier { dim } => {
                if dim == 0 {
                    return invalid("dimension must be at least 1");
                }
            }
            BasisSpec::DisjointCosine => {}
        }
        Ok(())
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisSpec::Bspline { dim, degree } => write!(f, "bspline(L={dim}, degree={degree})"),
            BasisSpec::Fourier { dim } => write!(f, "fourier(L={dim})"),
            BasisSpec::DisjointCosine => write!(f, "disjoint-cosine(5)"),
        }
    }
}

/// Evaluates every basis function on the grid; column `k` holds `b_k(t)`.
pub fn eval_basis(spec: &BasisSpec, grid: &TimeGrid) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let t = grid.points();
    let out = match *spec {
        BasisSpec::Bspline { dim, degree } => bspline_matrix(t, dim, degree, grid.start(), grid.end()),
        BasisSpec::Fourier { dim } => {
            let (a, b) = (grid.start(), grid.end());
            let period = b - a;
            DMatrix::from_fn(t.len(), dim, |r, c| fourier_value(c, (t[r] - a) / period, period))
        }
        BasisSpec::DisjointCosine => DMatrix::from_fn(t.len(), 5, |r, c| disjoint_cosine(c + 1, t[r])),
    };
    Ok(out)
}

/// The `k`-th (1-based) disjoint cosine bump at `x`.
pub fn disjoint_cosine(k: usize, x: f64) -> f64 {
    let lo = (k as f64 - 1.0) / 5.0;
    let hi = k as f64 / 5.0;
    if x >= lo && x < hi {
        (10.0 * PI * (x - (2.0 * k as f64 - 1.0) / 10.0)).cos() + 1.0
    } else {
        0.0
    }
}

fn fourier_value(index: usize, u: f64, period: f64) -> f64 {
    let scale = 1.0 / period.sqrt();
    if index == 0 {
        return scale;
    }
    let freq = ((index + 1) / 2) as f64;
    let arg = 2.0 * PI * freq * u;
    if index % 2 == 1 {
        scale * 2f64.sqrt() * arg.sin()
    } else {
        scale * 2f64.sqrt() * arg.cos()
    }
}

fn bspline_matrix(t: &[f64], dim: usize, degree: usize, a: f64, b: f64) -> DMatrix<f64> {
    // clamped knot vector: degree+1 copies of each end, dim-degree-1 uniform interior knots
    let interior = dim - degree - 1;
    let mut knots = Vec::with_capacity(dim + degree + 1);
    knots.extend(std::iter::repeat_n(a, degree + 1));
    for i in 1..=interior {
        knots.push(a + (b - a) * i as f64 / (interior + 1) as f64);
    }
    knots.extend(std::iter::repeat_n(b, degree + 1));

    let mut out = DMatrix::zeros(t.len(), dim);
    let mut work = vec![0.0; knots.len() - 1];
    for (r, &x) in t.iter().enumerate() {
        // degree-0 indicators; the right end belongs to the last nonempty span
        work.iter_mut().for_each(|w| *w = 0.0);
        let span = if x >= b {
            dim - 1
        } else {
            let mut s = degree;
            while s < dim - 1 && x >= knots[s + 1] {
                s += 1;
            }
            s
        };
        work[span] = 1.0;
        for d in 1..=degree {
            for i in 0..knots.len() - 1 - d {
                let left = {
                    let den = knots[i + d] - knots[i];
                    if den > 0.0 {
                        (x - knots[i]) / den * work[i]
                    } else {
                        0.0
                    }
                };
                let right = {
                    let den = knots[i + d + 1] - knots[i + 1];
                    if den > 0.0 {
                        (knots[i + d + 1] - x) / den * work[i + 1]
                    } else {
                        0.0
                    }
                };
                work[i] = left + right;
            }
        }
        for c in 0..dim {
            out[(r, c)] = work[c];
        }
    }
    out
}

/// Moore-Penrose pseudo-inverse of a full-column-rank design, or a rank error.
fn design_pinv(design: &DMatrix<f64>, spec: &BasisSpec) -> Result<DMatrix<f64>> {
    let rank_err = || Error::RankDeficient {
        spec: spec.to_string(),
        grid_len: design.nrows(),
    };
    if design.nrows() < design.ncols() {
        return Err(rank_err());
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= RANK_TOL * smax {
        return Err(rank_err());
    }
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    Ok(vt.transpose() * inv * u.transpose())
}

/// Curves represented by basis coefficients.
///
/// Coefficients are stored like panel values: `(i * p + j) * L + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedPanel {
    n: usize,
    p: usize,
    basis: BasisSpec,
    coefs: Vec<f64>,
    grid: TimeGrid,
    basis_values: DMatrix<f64>,
}

impl SmoothedPanel {
    pub fn from_coefs(
        n: usize,
        p: usize,
        basis: BasisSpec,
        coefs: Vec<f64>,
        grid: TimeGrid,
    ) -> Result<Self> {
        let basis_values = eval_basis(&basis, &grid)?;
        if coefs.len() != n * p * basis.dim() {
            return Err(Error::Shape(format!(
                "expected {} coefficients, got {}",
                n * p * basis.dim(),
                coefs.len()
            )));
        }
        if n == 0 || p == 0 {
            return Err(Error::InvalidArgument("empty smoothed panel".into()));
        }
        Ok(Self {
            n,
            p,
            basis,
            coefs,
            grid,
            basis_values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    pub fn coef(&self, sample: usize, node: usize) -> &[f64] {
        let l = self.basis.dim();
        let start = (sample * self.p + node) * l;
        &self.coefs[start..start + l]
    }

    /// Basis values on the retained grid, `G x L`.
    pub fn basis_values(&self) -> &DMatrix<f64> {
        &self.basis_values
    }

    /// Grid values of one curve.
    pub fn curve_values(&self, sample: usize, node: usize) -> Vec<f64> {
        let c = DVector::from_column_slice(self.coef(sample, node));
        (&self.basis_values * c).as_slice().to_vec()
    }

    /// All curves of one node evaluated on the grid, `n x G`.
    pub fn node_values(&self, node: usize) -> DMatrix<f64> {
        let l = self.basis.dim();
        let coefs = DMatrix::from_fn(self.n, l, |i, k| self.coef(i, node)[k]);
        coefs * self.basis_values.transpose()
    }

    /// Evaluates every curve on the grid.
    pub fn to_panel(&self) -> CurvePanel {
        let g = self.grid.len();
        let mut values = Vec::with_capacity(self.n * self.p * g);
        for i in 0..self.n {
            for j in 0..self.p {
                values.extend(self.curve_values(i, j));
            }
        }
        CurvePanel::new(self.n, self.p, self.grid.clone(), values)
            .expect("finite coefficients give finite curves")
    }

    /// Keeps only the listed samples, in the given order.
    pub fn select_samples(&self, samples: &[usize]) -> Result<Self> {
        let l = self.basis.dim();
        let mut coefs = Vec::with_capacity(samples.len() * self.p * l);
        for &i in samples {
            if i >= self.n {
                return Err(Error::InvalidArgument(format!(
                    "sample index {i} out of range for n={}",
                    self.n
                )));
            }
            let start = i * self.p * l;
            coefs.extend_from_slice(&self.coefs[start..start + self.p * l]);
        }
        Ok(Self {
            n: samples.len(),
            p: self.p,
            basis: self.basis,
            coefs,
            grid: self.grid.clone(),
            basis_values: self.basis_values.clone(),
        })
    }
}

/// Per-curve least-squares projection of the observations onto the basis.
pub fn smooth(panel: &CurvePanel, spec: &BasisSpec) -> Result<SmoothedPanel> {
    let design = eval_basis(spec, panel.grid())?;
    let pinv = design_pinv(&design, spec)?;
    let g = panel.grid().len();
    let curves = panel.n() * panel.p();
    // every curve is a column; one product fits them all
    let obs = DMatrix::from_column_slice(g, curves, panel.values());
    let coefs = &pinv * obs;
    Ok(SmoothedPanel {
        n: panel.n(),
        p: panel.p(),
        basis: *spec,
        coefs: coefs.as_slice().to_vec(),
        grid: panel.grid().clone(),
        basis_values: design,
    })
}

/// Held-out squared error of cubic B-spline smoothing for each candidate dimension.
///
/// Grid indices are dealt into `folds` interleaved groups (`k mod folds`);
/// each group is predicted from a fit to the remaining points of the same curve.
pub fn cv_loss_l(panel: &CurvePanel, candidates: &[usize], folds: usize) -> Result<Vec<(usize, f64)>> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate basis dimensions".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let g = panel.grid().len();
    if folds > g {
        return Err(Error::InvalidArgument(format!(
            "{folds} folds exceed the {g}-point grid"
        )));
    }
    let train_min = g - g.div_ceil(folds);
    let curves = panel.n() * panel.p();
    let obs = DMatrix::from_column_slice(g, curves, panel.values());

    let mut table = Vec::with_capacity(candidates.len());
    for &dim in candidates {
        let spec = BasisSpec::cubic_bspline(dim);
        spec.validate()?;
        if dim > train_min {
            return Err(Error::InvalidArgument(format!(
                "candidate L={dim} exceeds the {train_min} training points per fold"
            )));
        }
        let design = eval_basis(&spec, panel.grid())?;
        let mut sse = 0.0;
        for fold in 0..folds {
            let train: Vec<usize> = (0..g).filter(|k| k % folds != fold).collect();
            let test: Vec<usize> = (0..g).filter(|k| k % folds == fold).collect();
            let pinv = design_pinv(&design.select_rows(&train), &spec)?;
            let coefs = pinv * obs.select_rows(&train);
            let pred = design.select_rows(&test) * coefs;
            let held = obs.select_rows(&test);
            sse += (held - pred).norm_squared();
        }
        table.push((dim, sse / (g * curves) as f64));
    }
    Ok(table)
}

/// Picks the candidate with the smallest held-out error, breaking ties toward smaller `L`.
pub fn select_l_cv(panel: &CurvePanel, candidates: &[usize], folds: usize) -> Result<usize> {
    let table = cv_loss_l(panel, candidates, folds)?;
    Ok(argmin_prefer_small(&table, 0.0))
}

/// Smallest candidate whose loss is within `slack` of the minimum loss
/// (exact ties are resolved with a 1e-12 relative tolerance).
pub(crate) fn argmin_prefer_small(table: &[(usize, f64)], slack: f64) -> usize {
    let best = table.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
    let cut = best + slack.max(1e-12 * best.abs());
    table
        .iter()
        .filter(|&&(_, v)| v <= cut)
        .map(|&(c, _)| c)
        .min()
        .expect("nonempty table")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid200() -> TimeGrid {
        TimeGrid::standard()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 1.0]).is_ok());
        let g = grid200();
        assert_eq!(g.len(), 200);
        assert_eq!(g.start(), 0.0);
        assert_eq!(g.end(), 1.0);
        let w: f64 = g.trapezoid_weights().iter().sum();
        assert!((w - 1.0).abs() < 1e-14);
    }

    #[test]
    fn disjoint_cosine_peaks() {
        let grid = TimeGrid::new(vec![0.1, 0.5, 0.99]).unwrap();
        let b = eval_basis(&BasisSpec::DisjointCosine, &grid).unwrap();
        assert!((b[(0, 0)] - 2.0).abs() < 1e-15);
        for k in 1..5 {
            assert_eq!(b[(0, k)], 0.0);
        }
        assert!((b[(1, 2)] - 2.0).abs() < 1e-15);
        for k in [0, 1, 3, 4] {
            assert_eq!(b[(1, k)], 0.0);
        }
    }

    #[test]
    fn disjoint_cosine_supports_do_not_overlap() {
        let b = eval_basis(&BasisSpec::DisjointCosine, &grid200()).unwrap();
        for r in 0..b.nrows() {
            let nonzero = (0..5).filter(|&k| b[(r, k)] != 0.0).count();
            assert!(nonzero <= 1, "row {r} has {nonzero} nonzero bumps");
        }
    }

    #[test]
    fn fourier_at_zero() {
        let grid = TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap();
        let b = eval_basis(&BasisSpec::Fourier { dim: 5 }, &grid).unwrap();
        assert_eq!(b[(0, 0)], 1.0);
        assert_eq!(b[(0, 1)], 0.0);
        assert_eq!(b[(0, 3)], 0.0);
        assert!((b[(0, 2)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fourier_is_orthonormal_under_quadrature() {
        let grid = TimeGrid::uniform(401, 0.0, 1.0).unwrap();
        let b = eval_basis(&BasisSpec::Fourier { dim: 7 }, &grid).unwrap();
        let w = grid.trapezoid_weights();
        for a in 0..7 {
            for c in 0..7 {
                let ip: f64 = (0..grid.len()).map(|k| w[k] * b[(k, a)] * b[(k, c)]).sum();
                let want = if a == c { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-10, "({a},{c}) -> {ip}");
            }
        }
    }

    #[test]
    fn bspline_partition_of_unity() {
        let b = eval_basis(&BasisSpec::cubic_bspline(12), &grid200()).unwrap();
        for r in 0..b.nrows() {
            let s: f64 = b.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "row {r} sums to {s}");
            assert!(b.row(r).iter().all(|&v| v >= -1e-15));
        }
        // clamped ends
        assert!((b[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((b[(199, 11)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bspline_degree_must_be_below_dim() {
        let err = eval_basis(&BasisSpec::Bspline { dim: 3, degree: 3 }, &grid200()).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec { .. }));
    }

    #[test]
    fn rank_deficient_design_is_reported() {
        // a 5-point grid cannot support 8 basis functions
        let grid = TimeGrid::uniform(5, 0.0, 1.0).unwrap();
        let panel = CurvePanel::zeros(1, 1, grid).unwrap();
        let err = smooth(&panel, &BasisSpec::cubic_bspline(8)).unwrap_err();
        match err {
            Error::RankDeficient { spec, .. } => assert!(spec.contains("bspline")),
            other => panic!("unexpected {other:?}"),
        }
        // the cosine bumps on a coarse grid that misses one bump entirely
        let grid = TimeGrid::new(vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.75]).unwrap();
        let panel = CurvePanel::zeros(1, 1, grid).unwrap();
        assert!(matches!(
            smooth(&panel, &BasisSpec::DisjointCosine),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn smoothing_recovers_coefficients_in_span() {
        let grid = grid200();
        let spec = BasisSpec::cubic_bspline(9);
        let b = eval_basis(&spec, &grid).unwrap();
        let c: Vec<f64> = (0..9).map(|k| (k as f64 * 0.7).sin() + 0.3).collect();
        let curve = &b * DVector::from_vec(c.clone());
        let panel = CurvePanel::new(1, 1, grid, curve.as_slice().to_vec()).unwrap();
        let sm = smooth(&panel, &spec).unwrap();
        for (got, want) in sm.coef(0, 0).iter().zip(&c) {
            assert!((got - want).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_panel_gives_zero_coefficients() {
        let panel = CurvePanel::zeros(3, 2, grid200()).unwrap();
        let sm = smooth(&panel, &BasisSpec::Fourier { dim: 5 }).unwrap();
        assert!(sm.coefs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn singleton_candidate_is_returned() {
        let panel = CurvePanel::zeros(2, 1, grid200()).unwrap();
        assert_eq!(select_l_cv(&panel, &[7], 5).unwrap(), 7);
        assert!(matches!(
            select_l_cv(&panel, &[], 5),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn argmin_prefers_smaller_on_ties() {
        let table = [(8, 1.0), (3, 1.0), (5, 2.0)];
        assert_eq!(argmin_prefer_small(&table, 0.0), 3);
        let table = [(3, 1.05), (5, 1.0)];
        assert_eq!(argmin_prefer_small(&table, 0.1), 3);
        assert_eq!(argmin_prefer_small(&table, 0.01), 5);
    }
}
