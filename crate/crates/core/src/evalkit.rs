//! ROC/AUC for differential edge recovery and the replicate experiment harness.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgraph::{vote_lambda_max, vote_tally, EdgeSet, VoteConfig, VoteTally};
use crate::error::{Error, Result};
use crate::pipeline::{estimate, EstimateConfig, EstimateOutput, LambdaGrid};
use crate::simgen::{simulate, SimModel, SimModelSpec};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// `(FPR, TPR)` sorted by FPR, anchored at `(0,0)` and `(1,1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

impl RocCurve {
    fn from_points(mut points: Vec<(f64, f64)>) -> Self {
        points.push((0.0, 0.0));
        points.push((1.0, 1.0));
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        points.dedup();
        let auc = trapezoid(&points);
        RocCurve { points, auc }
    }

    /// TPR at `fpr`, linear between stored points, upper value on vertical segments.
    pub fn tpr_at(&self, fpr: f64) -> f64 {
        let pts = &self.points;
        let mut best: f64 = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if fpr < a.0 || fpr > b.0 {
                continue;
            }
            let v = if b.0 > a.0 {
                a.1 + (b.1 - a.1) * (fpr - a.0) / (b.0 - a.0)
            } else {
                a.1.max(b.1)
            };
            best = best.max(v);
        }
        best
    }
}

/// Trapezoid integral over points sorted by the first coordinate.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

fn check_truth(truth: &EdgeSet) -> Result<(usize, usize)> {
    let pairs = truth.pair_count();
    let pos = truth.len();
    if pos == 0 || pos == pairs {
        return Err(Error::DegenerateTruth(format!(
            "truth has {pos} of {pairs} pairs; AUC is undefined"
        )));
    }
    Ok((pos, pairs - pos))
}

/// ROC from a cut swept over symmetrized pair scores `max(s_jl, s_lj)`.
pub fn roc_from_scores(scores: &DMatrix<f64>, truth: &EdgeSet) -> Result<RocCurve> {
    let p = truth.p();
    if scores.nrows() != p || scores.ncols() != p {
        return Err(Error::Shape(format!(
            "scores are {}x{}, truth has p={p}",
            scores.nrows(),
            scores.ncols()
        )));
    }
    let (pos, neg) = check_truth(truth)?;
    let mut ranked = Vec::with_capacity(truth.pair_count());
    for j in 0..p {
        for l in j + 1..p {
            let s = scores[(j, l)].max(scores[(l, j)]);
            if s.is_nan() {
                return Err(Error::Numeric(format!("NaN score at pair ({j},{l})")));
            }
            ranked.push((s, truth.contains(j, l)));
        }
    }
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let cut = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == cut {
            if ranked[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve::from_points(points))
}

/// ROC through one point per estimated edge set.
pub fn roc_from_edge_sets<'a>(sets: impl IntoIterator<Item = &'a EdgeSet>, truth: &EdgeSet) -> Result<RocCurve> {
    let (pos, neg) = check_truth(truth)?;
    let mut points = Vec::new();
    for set in sets {
        if set.p() != truth.p() {
            return Err(Error::Shape(format!("edge set has p={}, truth has p={}", set.p(), truth.p())));
        }
        let tp = set.iter().filter(|&(j, l)| truth.contains(j, l)).count();
        let fp = set.len() - tp;
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    Ok(RocCurve::from_points(points))
}

/// ROC of the majority-vote edge sets over the tally's penalty grid.
pub fn roc_from_votes(tally: &VoteTally, truth: &EdgeSet) -> Result<RocCurve> {
    let sets: Vec<EdgeSet> = (0..tally.lambdas.len()).map(|i| tally.voted(i)).collect();
    roc_from_edge_sets(&sets, truth)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fudge,
    Multiple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: SimModel,
    pub p: usize,
    pub n: usize,
    pub replicates: usize,
    /// Replicate `r` uses seed `seed + r`.
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    #[serde(default = "default_grid_len")]
    pub grid_len: usize,
    #[serde(default)]
    pub estimate: EstimateConfig,
    #[serde(default)]
    pub vote: VoteConfig,
    #[serde(default)]
    pub vote_lambdas: LambdaGrid,
    #[serde(default)]
    pub vote_solver: SolverConfig,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Fudge, Method::Multiple]
}

fn default_noise() -> f64 {
    0.5
}

fn default_grid_len() -> usize {
    200
}

impl ExperimentConfig {
    pub fn new(model: SimModel, p: usize, n: usize, replicates: usize, seed: u64) -> Self {
        Self {
            model,
            p,
            n,
            replicates,
            seed,
            methods: default_methods(),
            noise_sd: default_noise(),
            grid_len: default_grid_len(),
            estimate: EstimateConfig::default(),
            vote: VoteConfig::default(),
            vote_lambdas: LambdaGrid::default(),
            vote_solver: SolverConfig::default(),
        }
    }

    pub fn replicate_spec(&self, r: usize) -> SimModelSpec {
        SimModelSpec {
            model: self.model,
            p: self.p,
            n: self.n,
            noise_sd: self.noise_sd,
            grid_len: self.grid_len,
            seed: self.seed.wrapping_add(r as u64),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods selected".into()));
        }
        self.replicate_spec(0).validate()?;
        self.estimate.validate()?;
        self.vote_solver.validate()?;
        crate::diffgraph::vote_time_indices(self.grid_len, self.vote.time_points)?;
        self.vote_lambdas.validate()
    }

    fn has(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FudgeReplicate {
    pub basis_dim: usize,
    pub m: usize,
    /// One point per penalty on the path.
    pub path_roc: RocCurve,
    /// Cut swept over block norms of the densest path solution.
    pub score_roc: RocCurve,
    pub unconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub fudge: Option<FudgeReplicate>,
    pub multiple: Option<RocCurve>,
    pub errors: Vec<String>,
}

impl ReplicateResult {
    pub fn failed(&self) -> bool {
        !self.errors.is_empty()
    }
}

/// Mean AUC of one metric with its sample SD and `SD / sqrt(count)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    pub count: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

impl Summary {
    pub fn from_values(metric: &str, values: &[f64]) -> Self {
        let count = values.len();
        let mean = (count > 0).then(|| values.iter().sum::<f64>() / count as f64);
        let sd = match (mean, count) {
            (Some(mu), c) if c > 1 => {
                Some((values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (c - 1) as f64).sqrt())
            }
            _ => None,
        };
        Summary {
            metric: metric.to_string(),
            count,
            mean,
            sd,
            se: sd.map(|s| s / (count as f64).sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub replicates: Vec<ReplicateResult>,
    pub failures: usize,
    pub summaries: Vec<Summary>,
}

pub const METRIC_FUDGE: &str = "fudge";
pub const METRIC_FUDGE_SCORE: &str = "fudge-score";
pub const METRIC_MULTIPLE: &str = "multiple";

impl ExperimentResult {
    pub fn summary(&self, metric: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.metric == metric)
    }

    pub fn mean_auc(&self, metric: &str) -> Option<f64> {
        self.summary(metric).and_then(|s| s.mean)
    }

    pub fn successes(&self) -> usize {
        self.replicates.len() - self.failures
    }

    /// Per-metric curves for every successful replicate.
    pub fn curves(&self, metric: &str) -> Vec<&RocCurve> {
        self.replicates
            .iter()
            .filter(|r| !r.failed())
            .filter_map(|r| match metric {
                METRIC_FUDGE => r.fudge.as_ref().map(|f| &f.path_roc),
                METRIC_FUDGE_SCORE => r.fudge.as_ref().map(|f| &f.score_roc),
                METRIC_MULTIPLE => r.multiple.as_ref(),
                _ => None,
            })
            .collect()
    }

    pub fn metrics(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.config.has(Method::Fudge) {
            out.push(METRIC_FUDGE);
            out.push(METRIC_FUDGE_SCORE);
        }
        if self.config.has(Method::Multiple) {
            out.push(METRIC_MULTIPLE);
        }
        out
    }
}

fn summarize(config: &ExperimentConfig, replicates: &[ReplicateResult]) -> Vec<Summary> {
    let ok: Vec<&ReplicateResult> = replicates.iter().filter(|r| !r.failed()).collect();
    let mut out = Vec::new();
    if config.has(Method::Fudge) {
        let path: Vec<f64> = ok.iter().filter_map(|r| r.fudge.as_ref().map(|f| f.path_roc.auc)).collect();
        let score: Vec<f64> = ok.iter().filter_map(|r| r.fudge.as_ref().map(|f| f.score_roc.auc)).collect();
        out.push(Summary::from_values(METRIC_FUDGE, &path));
        out.push(Summary::from_values(METRIC_FUDGE_SCORE, &score));
    }
    if config.has(Method::Multiple) {
        let vals: Vec<f64> = ok.iter().filter_map(|r| r.multiple.as_ref().map(|c| c.auc)).collect();
        out.push(Summary::from_values(METRIC_MULTIPLE, &vals));
    }
    out
}

fn fudge_replicate(out: &EstimateOutput, truth: &EdgeSet) -> Result<FudgeReplicate> {
    Ok(FudgeReplicate {
        basis_dim: out.basis_dim,
        m: out.m,
        path_roc: roc_from_edge_sets(out.path.iter().map(|pt| &pt.edges), truth)?,
        score_roc: roc_from_scores(out.densest_scores(), truth)?,
        unconverged: out.path.iter().filter(|pt| !pt.report.converged).count(),
    })
}

/// Runs one replicate; stage failures are recorded rather than propagated.
pub fn run_replicate(config: &ExperimentConfig, r: usize) -> ReplicateResult {
    let spec = config.replicate_spec(r);
    let mut result = ReplicateResult {
        index: r,
        seed: spec.seed,
        fudge: None,
        multiple: None,
        errors: Vec::new(),
    };
    let (pair, x, y) = match simulate(&spec) {
        Ok(v) => v,
        Err(e) => {
            result.errors.push(format!("simulate: {e}"));
            return result;
        }
    };
    if config.has(Method::Fudge) {
        match estimate(&x, &y, &config.estimate).and_then(|out| fudge_replicate(&out, &pair.true_edges)) {
            Ok(f) => result.fudge = Some(f),
            Err(e) => result.errors.push(format!("fudge: {e}")),
        }
    }
    if config.has(Method::Multiple) {
        let roc = vote_lambda_max(&x, &y, &config.vote)
            .and_then(|lmax| config.vote_lambdas.resolve(lmax))
            .and_then(|grid| vote_tally(&x, &y, &config.vote, &grid, &config.vote_solver))
            .and_then(|tally| roc_from_votes(&tally, &pair.true_edges));
        match roc {
            Ok(c) => result.multiple = Some(c),
            Err(e) => result.errors.push(format!("multiple: {e}")),
        }
    }
    result
}

/// Runs all replicates (in parallel on the current rayon pool) and aggregates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let replicates: Vec<ReplicateResult> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect();
    let failures = replicates.iter().filter(|r| r.failed()).count();
    let summaries = summarize(config, &replicates);
    Ok(ExperimentResult {
        config: config.clone(),
        replicates,
        failures,
        summaries,
    })
}

/// Vertical average of curves at `steps + 1` equally spaced FPR values.
pub fn mean_roc(curves: &[&RocCurve], steps: usize) -> Vec<(f64, f64)> {
    if curves.is_empty() || steps == 0 {
        return Vec::new();
    }
    (0..=steps)
        .map(|i| {
            let f = i as f64 / steps as f64;
            let t = curves.iter().map(|c| c.tpr_at(f)).sum::<f64>() / curves.len() as f64;
            (f, t)
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "NA".to_string())
}

/// `replicate,seed,status,L,M,<metric AUC columns>,error`.
pub fn replicates_csv(result: &ExperimentResult) -> String {
    let metrics = result.metrics();
    let mut s = String::from("replicate,seed,status,L,M");
    for m in &metrics {
        let _ = write!(s, ",auc_{}", m.replace('-', "_"));
    }
    s.push_str(",error\n");
    for r in &result.replicates {
        let status = if r.failed() { "failed" } else { "ok" };
        let (l, m) = r
            .fudge
            .as_ref()
            .map(|f| (f.basis_dim.to_string(), f.m.to_string()))
            .unwrap_or_else(|| ("NA".into(), "NA".into()));
        let _ = write!(s, "{},{},{status},{l},{m}", r.index, r.seed);
        for metric in &metrics {
            let v = match *metric {
                METRIC_FUDGE => r.fudge.as_ref().map(|f| f.path_roc.auc),
                METRIC_FUDGE_SCORE => r.fudge.as_ref().map(|f| f.score_roc.auc),
                _ => r.multiple.as_ref().map(|c| c.auc),
            };
            let _ = write!(s, ",{}", opt(v));
        }
        let err = r.errors.join("; ").replace(['"', '\n', ','], " ");
        let _ = writeln!(s, ",{err}");
    }
    s
}

/// One row per metric: `model,p,n,replicates,method,mean_auc,sd,se,successes,failures`.
pub fn aggregate_csv(result: &ExperimentResult) -> String {
    let c = &result.config;
    let mut s = String::from("model,p,n,replicates,method,mean_auc,sd,se,successes,failures\n");
    for sm in &result.summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            c.model,
            c.p,
            c.n,
            c.replicates,
            sm.metric,
            opt(sm.mean),
            opt(sm.sd),
            opt(sm.se),
            sm.count,
            result.failures
        );
    }
    s
}

/// Raw per-replicate curve points: `replicate,fpr,tpr`.
pub fn roc_points_csv(result: &ExperimentResult, metric: &str) -> String {
    let mut s = String::from("replicate,fpr,tpr\n");
    for r in result.replicates.iter().filter(|r| !r.failed()) {
        let curve = match metric {
            METRIC_FUDGE => r.fudge.as_ref().map(|f| &f.path_roc),
            METRIC_FUDGE_SCORE => r.fudge.as_ref().map(|f| &f.score_roc),
            _ => r.multiple.as_ref(),
        };
        if let Some(c) = curve {
            for (f, t) in &c.points {
                let _ = writeln!(s, "{},{f},{t}", r.index);
            }
        }
    }
    s
}

const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Standalone SVG with the vertically averaged ROC curve of each metric.
pub fn mean_roc_svg(result: &ExperimentResult) -> String {
    let (w, h, pad) = (420.0, 420.0, 50.0);
    let side = w - 2.0 * pad;
    let px = |f: f64| pad + f * side;
    let py = |t: f64| h - pad - t * side;
    let c = &result.config;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle">{} p={} n={}</text>"#,
        w / 2.0,
        c.model,
        c.p,
        c.n
    );
    let _ = writeln!(
        s,
        r#"<rect x="{pad}" y="{pad}" width="{side}" height="{side}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#999" stroke-dasharray="4 4"/>"##,
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for i in 0..=4 {
        let v = i as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{v}</text>"#, px(v), h - pad + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{v}</text>"#, pad - 6.0, py(v) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">FPR</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">TPR</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (k, metric) in result.metrics().iter().enumerate() {
        let pts = mean_roc(&result.curves(metric), 100);
        if pts.is_empty() {
            continue;
        }
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = pts.iter().map(|&(f, t)| format!("{:.2},{:.2}", px(f), py(t))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
        let auc = opt(result.mean_auc(metric).map(|a| (a * 1000.0).round() / 1000.0));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{metric} (AUC {auc})</text>"#,
            pad + side * 0.45,
            py(0.0) - 10.0 - 16.0 * k as f64
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `replicates.csv`, `aggregate.csv`, `roc_<metric>.csv` and `roc.svg` into `dir`.
pub fn write_experiment(result: &ExperimentResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![
        ("replicates.csv".to_string(), replicates_csv(result)),
        ("aggregate.csv".to_string(), aggregate_csv(result)),
    ];
    for metric in result.metrics() {
        files.push((format!("roc_{}.csv", metric.replace('-', "_")), roc_points_csv(result, metric)));
    }
    files.push(("roc.svg".to_string(), mean_roc_svg(result)));
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
