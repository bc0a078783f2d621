//! Serialized outputs: fit reports, study reports and CSV tables.

use std::io::Write;

use lqar_core::selection::RaicPoint;
use lqar_core::simulation::{parameter_names, MonteCarloReport};
use lqar_core::SigmaRule;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const TOOL_NAME: &str = "lqar";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// As given on the command line.
    pub input: String,
    pub input_sha256: String,
    /// Every option that affects the result.
    pub config: serde_json::Value,
}

impl Provenance {
    pub fn new(input: &str, bytes: &[u8], config: serde_json::Value) -> Self {
        Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            input: input.into(),
            input_sha256: sha256_hex(bytes),
            config,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSearchSummary {
    pub grid_points: usize,
    pub failures: usize,
    pub curve: Vec<RaicPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodBlock {
    pub method: String,
    pub q: f64,
    pub raic: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub degenerate: bool,
    pub stationary: bool,
    pub sigma_rule: SigmaRule,
    /// Log-likelihood at q = 1, Lq-likelihood otherwise.
    pub objective: Option<f64>,
    pub sigma2_raw: f64,
    pub sigma2_surrogate_corrected: f64,
    /// β, φ and σ; σ is √σ²_raw.
    pub parameters: Vec<ParameterRow>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub level: f64,
    pub inference_error: Option<String>,
    pub q_search: Option<QSearchSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub provenance: Provenance,
    pub n: usize,
    pub ar_order: usize,
    pub columns: Vec<String>,
    pub fits: Vec<MethodBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectQReport {
    pub provenance: Provenance,
    pub q_star: f64,
    pub raic_at_q_star: f64,
    pub curve: Vec<RaicPoint>,
    pub failures: Vec<lqar_core::selection::GridFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutput {
    pub provenance: Provenance,
    pub report: MonteCarloReport,
}

pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_error(e: impl std::fmt::Display) -> CliError {
    CliError::input(format!("writing CSV: {e}"))
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn write_curve<W: Write>(out: W, curve: &[RaicPoint]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["q", "raic"]).map_err(csv_error)?;
    for p in curve {
        w.write_record([num(p.q), num(p.raic)]).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}

/// One row per method and parameter, in the column order Estimates, Bias, RMSE, SE, CIL, CIU.
pub fn write_summary_table<W: Write>(out: W, report: &MonteCarloReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "method", "q", "parameter", "truth", "Estimates", "Bias", "RMSE", "SE", "CIL", "CIU", "successes",
        "failures",
    ])
    .map_err(csv_error)?;
    for m in &report.methods {
        for p in &m.parameters {
            w.write_record([
                m.label.clone(),
                num(m.mean_q),
                p.name.clone(),
                num(p.truth),
                num(p.mean),
                num(p.bias),
                num(p.rmse),
                num(p.mean_se),
                num(p.mean_ci_lower),
                num(p.mean_ci_upper),
                m.successes.to_string(),
                m.failures.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    w.flush().map_err(csv_error)
}

/// Long table of per-replication estimates, suitable for boxplots.
pub fn write_replications<W: Write>(out: W, report: &MonteCarloReport) -> Result<(), CliError> {
    let names = parameter_names(report.config.beta_true.len(), report.config.phi_true.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replication".to_string(), "method".into(), "ok".into(), "q".into(), "iterations".into()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(csv_error)?;
    for r in &report.replications {
        let mut row = vec![
            r.replication.to_string(),
            r.method.clone(),
            r.ok.to_string(),
            num(r.q),
            r.iterations.to_string(),
        ];
        if r.ok {
            row.extend(r.estimates.iter().map(|&v| num(v)));
        } else {
            row.extend(std::iter::repeat_n(String::new(), names.len()));
        }
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(csv_error)
}
