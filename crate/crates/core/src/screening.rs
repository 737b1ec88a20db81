//! Batch screening: CSV ingestion, per-row solving, reports and summaries.
//!
//! Input rows carry positions (km), the upper triangle of each covariance
//! (km²) and the hard-body radii (km):
//!
//! ```text
//! id,cx,cy,cz,cxx,cxy,cxz,cyy,cyz,czz,tx,ty,tz,txx,txy,txz,tyy,tyz,tzz,cr,tr,risk
//! ```
//!
//! A conjunction is a concern when its margin is below the sum of the radii.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fista::{solve_fista, FistaOptions};
use crate::frank_wolfe::{solve_fw, FwOptions};
use crate::geometry::{Conjunction, Ellipsoid, MarginResult, Method};
use crate::linalg::{SymMat3, Vec3};
use crate::oracle::{relative_error, solve_oracle, OracleOptions};
use crate::rimon_boyd::rb_margin;

pub const CSV_HEADER: [&str; 22] = [
    "id", "cx", "cy", "cz", "cxx", "cxy", "cxz", "cyy", "cyz", "czz", "tx", "ty", "tz", "txx", "txy", "txz", "tyy",
    "tyz", "tzz", "cr", "tr", "risk",
];

/// Slack for the `margin <= miss distance` check (km).
pub const MISS_DISTANCE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct RowError {
    pub line: u64,
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub conjunctions: Vec<Conjunction>,
    pub errors: Vec<RowError>,
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Ingested, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::Io { path: path.display().to_string(), message: e.to_string() })?;
    ingest_reader(file)
}

pub fn ingest_reader<R: Read>(reader: R) -> Result<Ingested, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| IngestError::Schema(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::Schema(format!(
            "header must be `{}`, got `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Ingested::default();
    for record in rdr.records() {
        match record {
            Ok(rec) => {
                let line = rec.position().map(|p| p.line()).unwrap_or(0);
                match parse_record(&rec) {
                    Ok(c) => out.conjunctions.push(c),
                    Err(message) => {
                        out.errors.push(RowError { line, id: rec.get(0).map(str::to_owned), message });
                    }
                }
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                out.errors.push(RowError { line, id: None, message: e.to_string() });
            }
        }
    }
    Ok(out)
}

fn parse_record(rec: &csv::StringRecord) -> Result<Conjunction, String> {
    if rec.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, found {}", CSV_HEADER.len(), rec.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        let field = &rec[i];
        let v: f64 = field.parse().map_err(|_| format!("{}: not a number: {field:?}", CSV_HEADER[i]))?;
        if !v.is_finite() {
            return Err(format!("{}: not finite", CSV_HEADER[i]));
        }
        Ok(v)
    };
    let ellipsoid = |base: usize, label: &str| -> Result<Ellipsoid, String> {
        let center = Vec3::new(num(base)?, num(base + 1)?, num(base + 2)?);
        let cov = SymMat3::new(num(base + 3)?, num(base + 4)?, num(base + 5)?, num(base + 6)?, num(base + 7)?, num(base + 8)?);
        Ellipsoid::from_covariance(center, cov).map_err(|e| format!("{label}: {e}"))
    };
    let chaser = ellipsoid(1, "chaser")?;
    let target = ellipsoid(10, "target")?;
    let risk = if rec[21].is_empty() { None } else { Some(num(21)?) };
    Conjunction::new(&rec[0], chaser, target, num(19)?, num(20)?, risk).map_err(|e| e.to_string())
}

/// Writes conjunctions in the ingestion schema. Floats use shortest
/// round-trip formatting, so re-ingesting reproduces them exactly.
pub fn write_csv<W: Write>(writer: W, conjunctions: &[Conjunction]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for c in conjunctions {
        let mut fields = vec![c.id.clone()];
        for e in [&c.chaser, &c.target] {
            fields.extend(e.center().0.iter().map(f64::to_string));
            fields.extend(e.covariance().entries().iter().map(f64::to_string));
        }
        fields.push(c.chaser_radius.to_string());
        fields.push(c.target_radius.to_string());
        fields.push(c.risk.map(|r| r.to_string()).unwrap_or_default());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Solver {
    #[default]
    FrankWolfe,
    Fista,
    RimonBoyd,
    Oracle,
}

impl Solver {
    pub fn method(self) -> Method {
        match self {
            Solver::FrankWolfe => Method::FrankWolfe,
            Solver::Fista => Method::Fista,
            Solver::RimonBoyd => Method::RimonBoyd,
            Solver::Oracle => Method::Oracle,
        }
    }
}

impl FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fw" | "frank-wolfe" | "frank_wolfe" => Ok(Solver::FrankWolfe),
            "fista" => Ok(Solver::Fista),
            "rimon-boyd" | "rimon_boyd" | "rb" => Ok(Solver::RimonBoyd),
            "oracle" => Ok(Solver::Oracle),
            other => Err(format!("unknown method {other:?} (expected fw, fista, rimon-boyd or oracle)")),
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solver::FrankWolfe => "fw",
            Solver::Fista => "fista",
            Solver::RimonBoyd => "rimon-boyd",
            Solver::Oracle => "oracle",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningOptions {
    pub solver: Solver,
    pub sigma: f64,
    /// Step tolerance (km); each solver's own default when unset.
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub oracle_check: bool,
    /// Suppress wall-clock fields so reports are reproducible byte for byte.
    pub deterministic: bool,
    /// Worker threads; rayon's default when unset.
    pub threads: Option<usize>,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        ScreeningOptions {
            solver: Solver::FrankWolfe,
            sigma: 1.0,
            tol: None,
            max_iter: None,
            oracle_check: false,
            deterministic: false,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningRow {
    pub id: String,
    pub miss_distance: f64,
    pub margin: Option<f64>,
    pub method: String,
    pub converged: bool,
    pub overlap: bool,
    pub iterations: usize,
    /// Solver wall time (ms).
    pub wall_time: Option<f64>,
    pub concern: bool,
    pub risk: Option<f64>,
    pub error_vs_oracle: Option<f64>,
    pub error: Option<String>,
}

/// Dispatches to the selected solver with the given overrides.
pub fn solve(c: &Conjunction, solver: Solver, tol: Option<f64>, max_iter: Option<usize>) -> Result<MarginResult, String> {
    match solver {
        Solver::FrankWolfe => {
            let d = FwOptions::default();
            let opts = FwOptions { tol_step: tol.unwrap_or(d.tol_step), max_iter: max_iter.unwrap_or(d.max_iter) };
            solve_fw(c, &opts).map_err(|e| e.to_string())
        }
        Solver::Fista => {
            let d = FistaOptions::default();
            let opts = FistaOptions {
                tol_step: tol.unwrap_or(d.tol_step),
                max_iter: max_iter.map(|m| m as u64).unwrap_or(d.max_iter),
            };
            solve_fista(c, &opts).map_err(|e| e.to_string())
        }
        Solver::RimonBoyd => rb_margin(c).map_err(|e| e.to_string()),
        Solver::Oracle => {
            let d = OracleOptions::default();
            let opts = OracleOptions { tol: tol.unwrap_or(d.tol), max_iter: max_iter.unwrap_or(d.max_iter), ..d };
            solve_oracle(c, &opts).map_err(|e| e.to_string())
        }
    }
}

pub fn screen_one(c: &Conjunction, opts: &ScreeningOptions) -> ScreeningRow {
    let mut row = ScreeningRow {
        id: c.id.clone(),
        miss_distance: c.miss_distance(),
        margin: None,
        method: opts.solver.method().to_string(),
        converged: false,
        overlap: false,
        iterations: 0,
        wall_time: None,
        concern: false,
        risk: c.risk,
        error_vs_oracle: None,
        error: None,
    };
    let scaled = match c.scale_sigma(opts.sigma) {
        Ok(s) => s,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let start = Instant::now();
    let result = solve(&scaled, opts.solver, opts.tol, opts.max_iter);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    if !opts.deterministic {
        row.wall_time = Some(elapsed_ms);
    }
    let r = match result {
        Ok(r) => r,
        Err(e) => {
            row.error = Some(e);
            return row;
        }
    };
    row.method = r.method.to_string();
    row.converged = r.converged;
    row.overlap = r.overlap;
    row.iterations = r.iterations;
    if !r.margin.is_finite() {
        row.error = Some("solver produced no finite margin".into());
        return row;
    }
    row.margin = Some(r.margin);
    row.concern = r.margin < c.combined_radius();
    if opts.oracle_check {
        match solve_oracle(&scaled, &OracleOptions::default()) {
            Ok(o) => row.error_vs_oracle = Some(relative_error(r.margin, o.margin)),
            Err(e) => row.error = Some(format!("oracle check failed: {e}")),
        }
    }
    row
}

/// Absolute-error decades: `[0, 1e-9)`, `[1e-9, 1e-6)`, `[1e-6, 1e-3)`,
/// `[1e-3, 1)`, `[1, ∞)` km.
pub const ERROR_BIN_EDGES: [f64; 4] = [1e-9, 1e-6, 1e-3, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorHistogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub max_abs: f64,
    pub mean: f64,
}

/// Concern counts per unit-wide bin of log₁₀ risk, `[floor, floor + 1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskBin {
    pub risk_floor: i32,
    pub total: usize,
    pub concern: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub errors: usize,
    pub concern: usize,
    pub overlap: usize,
    pub not_converged: usize,
    /// Rimon-Boyd rows whose margin exceeds the miss distance or is not finite.
    pub rb_pathologies: usize,
    pub error_histogram: Option<ErrorHistogram>,
    pub risk_histogram: Option<Vec<RiskBin>>,
    pub wall_time_s: Option<f64>,
    pub throughput_per_min: Option<f64>,
}

pub fn summarize(rows: &[ScreeningRow], solver: Solver, wall_time_s: Option<f64>) -> Summary {
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.error_vs_oracle).collect();
    let error_histogram = (!errors.is_empty()).then(|| {
        let mut counts = vec![0; ERROR_BIN_EDGES.len() + 1];
        for e in &errors {
            counts[ERROR_BIN_EDGES.iter().take_while(|edge| e.abs() >= **edge).count()] += 1;
        }
        ErrorHistogram {
            edges: ERROR_BIN_EDGES.to_vec(),
            counts,
            max_abs: errors.iter().fold(0.0, |m, e| m.max(e.abs())),
            mean: errors.iter().sum::<f64>() / errors.len() as f64,
        }
    });

    let mut risk_bins: Vec<RiskBin> = Vec::new();
    for r in rows.iter().filter(|r| r.margin.is_some()) {
        if let Some(risk) = r.risk {
            let floor = risk.floor() as i32;
            let idx = match risk_bins.binary_search_by_key(&floor, |b| b.risk_floor) {
                Ok(i) => i,
                Err(i) => {
                    risk_bins.insert(i, RiskBin { risk_floor: floor, total: 0, concern: 0 });
                    i
                }
            };
            risk_bins[idx].total += 1;
            risk_bins[idx].concern += r.concern as usize;
        }
    }

    let rb_pathologies = if solver == Solver::RimonBoyd {
        rows.iter()
            .filter(|r| match r.margin {
                Some(m) => m > r.miss_distance + MISS_DISTANCE_SLACK,
                None => r.method == Method::RimonBoyd.as_str(),
            })
            .count()
    } else {
        0
    };

    Summary {
        count: rows.len(),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
        concern: rows.iter().filter(|r| r.concern).count(),
        overlap: rows.iter().filter(|r| r.overlap).count(),
        not_converged: rows.iter().filter(|r| r.margin.is_some() && !r.converged).count(),
        rb_pathologies,
        error_histogram,
        risk_histogram: (!risk_bins.is_empty()).then_some(risk_bins),
        wall_time_s,
        throughput_per_min: wall_time_s.filter(|t| *t > 0.0).map(|t| rows.len() as f64 * 60.0 / t),
    }
}

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Screens every conjunction; rows come back in input order.
pub fn screen_batch(
    conjunctions: &[Conjunction],
    opts: &ScreeningOptions,
) -> Result<(Vec<ScreeningRow>, Summary), ScreeningError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let start = Instant::now();
    let rows: Vec<ScreeningRow> = pool.install(|| conjunctions.par_iter().map(|c| screen_one(c, opts)).collect());
    let wall = (!opts.deterministic).then(|| start.elapsed().as_secs_f64());
    let summary = summarize(&rows, opts.solver, wall);
    Ok((rows, summary))
}

pub fn write_rows_csv<W: Write>(writer: W, rows: &[ScreeningRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_json<W: Write>(mut writer: W, rows: &[ScreeningRow]) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut writer, rows)?;
    writeln!(writer)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EllipsoidFileError {
    #[error("expected 4 lines (center and three covariance rows), found {0}")]
    LineCount(usize),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("covariance is not symmetric")]
    NotSymmetric,
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Parses the 4-line ellipsoid format: the center, then the three rows of
/// the covariance (km, km²). Values may be separated by whitespace or
/// commas; blank lines and `#` comments are ignored.
pub fn parse_ellipsoid(text: &str) -> Result<Ellipsoid, EllipsoidFileError> {
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let values: Vec<&str> = content.split(|ch: char| ch == ',' || ch.is_whitespace()).filter(|s| !s.is_empty()).collect();
        if values.len() != 3 {
            return Err(EllipsoidFileError::Parse { line: i + 1, message: format!("expected 3 numbers, found {}", values.len()) });
        }
        let mut row = [0.0; 3];
        for (slot, v) in row.iter_mut().zip(&values) {
            *slot = v
                .parse()
                .map_err(|_| EllipsoidFileError::Parse { line: i + 1, message: format!("not a number: {v:?}") })?;
        }
        rows.push(row);
    }
    if rows.len() != 4 {
        return Err(EllipsoidFileError::LineCount(rows.len()));
    }
    let m = [rows[1], rows[2], rows[3]];
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    for i in 0..3 {
        for j in (i + 1)..3 {
            if (m[i][j] - m[j][i]).abs() > 1e-12 * scale {
                return Err(EllipsoidFileError::NotSymmetric);
            }
        }
    }
    Ok(Ellipsoid::from_covariance(Vec3(rows[0]), SymMat3::from_mat3_symmetrized(&m))?)
}

pub fn format_ellipsoid(e: &Ellipsoid) -> String {
    let c = e.center();
    let m = e.covariance().to_mat3();
    let mut s = format!("{} {} {}\n", c[0], c[1], c[2]);
    for row in m {
        s.push_str(&format!("{} {} {}\n", row[0], row[1], row[2]));
    }
    s
}
