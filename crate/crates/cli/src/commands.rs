use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use fudge::evalkit::{run_experiment, write_experiment, ExperimentConfig};
use fudge::io;
use fudge::pipeline::{estimate as run_estimate, EstimateConfig, EstimateOutput};
use fudge::simgen::simulate as run_simulate;
use fudge::theory::{check_conditions, compute_constants, ConditionReport, TheoryInputs};
use fudge::{SimModelSpec, TheoryConstants};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{file_digest, load_object, parse, set, CliError, InputFile, RunManifest, EXIT_NUMERIC, EXIT_PARTIAL};
use crate::{EstimateArgs, EvaluateArgs, SimulateArgs, TheoryArgs};

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))
}

#[derive(Serialize)]
struct GenerationRecord<'a> {
    meta: &'a fudge::simgen::GenerationMeta,
    true_edges: Vec<(usize, usize)>,
}

pub fn simulate(a: &SimulateArgs) -> Result<ExitCode, CliError> {
    let mut obj = load_object(a.config.as_deref())?;
    set(&mut obj, "model", a.model.clone());
    set(&mut obj, "p", a.p);
    set(&mut obj, "n", a.n);
    set(&mut obj, "seed", a.seed);
    set(&mut obj, "noise_sd", a.noise_sd);
    set(&mut obj, "grid_len", a.grid_len);
    let spec: SimModelSpec = parse(&obj, "simulate")?;
    spec.validate()?;
    let (pair, x, y) = run_simulate(&spec)?;
    create_dir(&a.out)?;
    io::write_panel(&a.out.join("x.csv"), &x)?;
    io::write_panel(&a.out.join("y.csv"), &y)?;
    io::write_edges(&a.out.join("truth.csv"), &pair.true_edges, 0.0, None)?;
    let record = GenerationRecord {
        meta: &pair.meta,
        true_edges: pair.true_edges.iter().map(|(j, l)| (j + 1, l + 1)).collect(),
    };
    io::write_json(&a.out.join("generation.json"), &record)?;
    let mut manifest = RunManifest::new("simulate", &spec);
    manifest.seeds = vec![spec.seed];
    manifest.write(&a.out)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateRun {
    x: PathBuf,
    y: PathBuf,
    #[serde(default)]
    estimate: EstimateConfig,
}

#[derive(Serialize)]
struct Selection<'a> {
    #[serde(rename = "L")]
    basis_dim: usize,
    #[serde(rename = "M")]
    m: usize,
    lambda_max: f64,
    lambdas: &'a [f64],
    solved: usize,
}

fn path_csv(out: &EstimateOutput) -> String {
    let mut s = String::from("index,lambda,edges,nonzero_blocks,iterations,converged,objective\n");
    for (k, pt) in out.path.iter().enumerate() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            k + 1,
            pt.lambda,
            pt.edges.len(),
            pt.delta.nonzero_blocks(),
            pt.report.iterations,
            pt.report.converged,
            pt.report.objective
        );
    }
    s
}

fn write_estimate(dir: &Path, out: &EstimateOutput, epsilon: f64) -> Result<(), CliError> {
    io::write_text(&dir.join("path.csv"), &path_csv(out))?;
    io::write_blocked(&dir.join("scores_x.csv"), out.scores_x.p, out.scores_x.m, &out.scores_x.data)?;
    io::write_blocked(&dir.join("scores_y.csv"), out.scores_y.p, out.scores_y.m, &out.scores_y.data)?;
    io::write_blocked(&dir.join("cov_x.csv"), out.cov_x.p, out.cov_x.m, &out.cov_x.matrix)?;
    io::write_blocked(&dir.join("cov_y.csv"), out.cov_y.p, out.cov_y.m, &out.cov_y.matrix)?;
    for (k, pt) in out.path.iter().enumerate() {
        let tag = format!("{:03}", k + 1);
        io::write_delta(&dir.join(format!("delta_{tag}.csv")), &pt.delta, pt.lambda, &pt.report)?;
        io::write_edges(&dir.join(format!("edges_{tag}.csv")), &pt.edges, epsilon, Some(pt.lambda))?;
        io::write_text(&dir.join(format!("block_norms_{tag}.csv")), &io::pair_scores_csv(&pt.scores))?;
    }
    let sel = Selection {
        basis_dim: out.basis_dim,
        m: out.m,
        lambda_max: out.lambda_max,
        lambdas: &out.lambdas,
        solved: out.path.len(),
    };
    io::write_json(&dir.join("selection.json"), &sel)?;
    Ok(())
}

pub fn estimate(a: &EstimateArgs) -> Result<ExitCode, CliError> {
    let mut obj = load_object(a.config.as_deref())?;
    set(&mut obj, "x", a.x.clone());
    set(&mut obj, "y", a.y.clone());
    set(&mut obj, "estimate.truncation", a.m.map(|m| json!({ "fixed": m })));
    set(&mut obj, "estimate.smoothing", a.l.map(|l| json!({ "fixed": l })));
    set(&mut obj, "estimate.lambdas", a.lambdas.clone().map(|v| json!({ "explicit": v })));
    set(&mut obj, "estimate.epsilon", a.epsilon);
    set(&mut obj, "estimate.basis_mode", a.basis_mode.clone());
    let run: EstimateRun = parse(&obj, "estimate")?;
    run.estimate.validate()?;
    let x = io::read_panel(&run.x)?;
    let y = io::read_panel(&run.y)?;
    let out = run_estimate(&x, &y, &run.estimate)?;
    create_dir(&a.out)?;
    write_estimate(&a.out, &out, run.estimate.epsilon)?;
    let mut manifest = RunManifest::new("estimate", &run);
    for path in [&run.x, &run.y] {
        manifest.inputs.push(InputFile {
            path: path.clone(),
            sha256: file_digest(path)?,
        });
    }
    manifest.write(&a.out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<ExitCode, CliError> {
    let mut obj = load_object(a.config.as_deref())?;
    set(&mut obj, "model", a.model.clone());
    set(&mut obj, "p", a.p);
    set(&mut obj, "n", a.n);
    set(&mut obj, "replicates", a.replicates);
    set(&mut obj, "seed", a.seed);
    set(&mut obj, "methods", a.methods.clone());
    let cfg: ExperimentConfig = parse(&obj, "evaluate")?;
    cfg.validate()?;
    let result = run_experiment(&cfg)?;
    create_dir(&a.out)?;
    write_experiment(&result, &a.out)?;
    let mut manifest = RunManifest::new("evaluate", &cfg);
    manifest.seeds = result.replicates.iter().map(|r| r.seed).collect();
    manifest.write(&a.out)?;
    for r in result.replicates.iter().filter(|r| r.failed()) {
        eprintln!("replicate {} (seed {}) failed: {}", r.index, r.seed, r.errors.join("; "));
    }
    if result.successes() == 0 {
        eprintln!("error: no replicate succeeded; aggregate is empty");
        return Ok(ExitCode::from(EXIT_NUMERIC));
    }
    if result.failures > 0 {
        eprintln!("{} of {} replicates failed", result.failures, result.replicates.len());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TheoryReport<'a> {
    inputs: &'a TheoryInputs,
    constants: TheoryConstants,
    conditions: ConditionReport,
}

pub fn theory(a: &TheoryArgs) -> Result<ExitCode, CliError> {
    let obj = load_object(Some(&a.config))?;
    let inputs: TheoryInputs = parse(&obj, "theory")?;
    let report = TheoryReport {
        constants: compute_constants(&inputs)?,
        conditions: check_conditions(&inputs)?,
        inputs: &inputs,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(out) = &a.out {
        io::write_text(out, &(text + "\n"))?;
    }
    Ok(ExitCode::SUCCESS)
}
