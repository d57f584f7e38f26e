//! CSV and JSON file formats. Indices in files are 1-based; numbers use the
//! shortest round-trip decimal form; lines end with LF.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::diffgraph::EdgeSet;
use crate::error::{Error, Result};
use crate::funcdata::{CurvePanel, TimeGrid};
use crate::solver::{DeltaEstimate, SolveReport};

/// JSON sidecar of a panel CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelManifest {
    pub n: usize,
    pub p: usize,
    pub grid: TimeGrid,
}

/// JSON sidecar of a score, covariance or delta CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixManifest {
    pub p: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub layout: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<SolveReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeManifest {
    pub p: usize,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

pub const NODE_MAJOR: &str = "node-major";

/// `<path>` with its extension replaced by `json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    body.push('\n');
    write_text(path, &body)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&body).map_err(|e| Error::format(path, e.to_string()))
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

fn parse_f64(path: &Path, row: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::format(path, format!("row {row}: cannot parse number {s:?}")))
}

fn parse_index(path: &Path, row: usize, s: &str, max: usize) -> Result<usize> {
    let v: usize = s
        .trim()
        .parse()
        .map_err(|_| Error::format(path, format!("row {row}: cannot parse index {s:?}")))?;
    if v == 0 || v > max {
        return Err(Error::format(path, format!("row {row}: index {v} outside 1..={max}")));
    }
    Ok(v - 1)
}

/// `sample,node,t_1..t_G` with one row per curve, plus a `{n, p, grid}` sidecar.
pub fn panel_csv(panel: &CurvePanel) -> String {
    let g = panel.grid().len();
    let mut s = String::from("sample,node");
    for k in 1..=g {
        let _ = write!(s, ",t_{k}");
    }
    s.push('\n');
    for i in 0..panel.n() {
        for j in 0..panel.p() {
            let _ = write!(s, "{},{}", i + 1, j + 1);
            for v in panel.curve(i, j) {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
    }
    s
}

pub fn write_panel(path: &Path, panel: &CurvePanel) -> Result<()> {
    write_text(path, &panel_csv(panel))?;
    write_json(
        &sidecar(path),
        &PanelManifest {
            n: panel.n(),
            p: panel.p(),
            grid: panel.grid().clone(),
        },
    )
}

pub fn read_panel(path: &Path) -> Result<CurvePanel> {
    let man: PanelManifest = read_json(&sidecar(path))?;
    let g = man.grid.len();
    let mut values = vec![f64::NAN; man.n * man.p * g];
    let mut seen = vec![false; man.n * man.p];
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?;
    if headers.len() != g + 2 {
        return Err(Error::format(
            path,
            format!("expected {} columns for a {g}-point grid, got {}", g + 2, headers.len()),
        ));
    }
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        let i = parse_index(path, row + 1, &rec[0], man.n)?;
        let j = parse_index(path, row + 1, &rec[1], man.p)?;
        let slot = i * man.p + j;
        if seen[slot] {
            return Err(Error::format(path, format!("duplicate curve sample={} node={}", i + 1, j + 1)));
        }
        seen[slot] = true;
        for k in 0..g {
            values[slot * g + k] = parse_f64(path, row + 1, &rec[k + 2])?;
        }
    }
    if let Some(slot) = seen.iter().position(|s| !s) {
        return Err(Error::format(
            path,
            format!("missing curve sample={} node={}", slot / man.p + 1, slot % man.p + 1),
        ));
    }
    CurvePanel::new(man.n, man.p, man.grid, values)
}

/// Dense matrix with header `c_1..c_d`.
pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = (1..=m.ncols()).map(|c| format!("c_{c}")).collect::<Vec<_>>().join(",");
    s.push('\n');
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = reader(path)?;
    let cols = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if rec.len() != cols {
            return Err(Error::format(path, format!("row {} has {} fields", row + 1, rec.len())));
        }
        for f in rec.iter() {
            data.push(parse_f64(path, row + 1, f)?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// Writes a `pM`-column node-major matrix and its `{p, M, layout}` sidecar.
pub fn write_blocked(path: &Path, p: usize, m: usize, matrix: &DMatrix<f64>) -> Result<()> {
    write_text(path, &matrix_csv(matrix))?;
    write_json(
        &sidecar(path),
        &MatrixManifest {
            p,
            m,
            layout: NODE_MAJOR.into(),
            lambda: None,
            report: None,
        },
    )
}

pub fn write_delta(path: &Path, delta: &DeltaEstimate, lambda: f64, report: &SolveReport) -> Result<()> {
    write_text(path, &matrix_csv(&delta.matrix))?;
    write_json(
        &sidecar(path),
        &MatrixManifest {
            p: delta.p,
            m: delta.m,
            layout: NODE_MAJOR.into(),
            lambda: Some(lambda),
            report: Some(SolveReport {
                trace: Vec::new(),
                ..report.clone()
            }),
        },
    )
}

pub fn read_delta(path: &Path) -> Result<(DeltaEstimate, MatrixManifest)> {
    let man: MatrixManifest = read_json(&sidecar(path))?;
    let d = DeltaEstimate::new(man.p, man.m, read_matrix(path)?)?;
    Ok((d, man))
}

/// `j,l` pairs with `j < l`.
pub fn edges_csv(edges: &EdgeSet) -> String {
    let mut s = String::from("j,l\n");
    for (j, l) in edges.iter() {
        let _ = writeln!(s, "{},{}", j + 1, l + 1);
    }
    s
}

pub fn write_edges(path: &Path, edges: &EdgeSet, epsilon: f64, lambda: Option<f64>) -> Result<()> {
    write_text(path, &edges_csv(edges))?;
    write_json(
        &sidecar(path),
        &EdgeManifest {
            p: edges.p(),
            epsilon,
            lambda,
        },
    )
}

pub fn read_edges(path: &Path) -> Result<EdgeSet> {
    let man: EdgeManifest = read_json(&sidecar(path))?;
    let mut set = EdgeSet::new(man.p);
    let mut rdr = reader(path)?;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
        if rec.len() != 2 {
            return Err(Error::format(path, format!("row {}: expected 2 fields", row + 1)));
        }
        let j = parse_index(path, row + 1, &rec[0], man.p)?;
        let l = parse_index(path, row + 1, &rec[1], man.p)?;
        set.insert(j, l).map_err(|e| Error::format(path, e.to_string()))?;
    }
    Ok(set)
}

/// Upper-triangle pair scores `j,l,score`.
pub fn pair_scores_csv(scores: &DMatrix<f64>) -> String {
    let mut s = String::from("j,l,score\n");
    let p = scores.nrows();
    for j in 0..p {
        for l in j + 1..p {
            let _ = writeln!(s, "{},{},{}", j + 1, l + 1, scores[(j, l)].max(scores[(l, j)]));
        }
    }
    s
}
