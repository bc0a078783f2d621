//! Synthetic AR(p)-error regression data, contamination schemes and the
//! Monte Carlo harness comparing CML with CMLq.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cml::{cml_fit, SolverControl};
use crate::cmlq::{ira_fit_with, SigmaRule};
use crate::error::{Error, Result};
use crate::inference::{asymptotic_report, FittedModel};
use crate::model::{is_stationary, Dataset, ParameterVector};
use crate::selection::{default_grid, select_q_with, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
}

/// Which covariates of an x-contaminated row are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XColumns {
    #[default]
    All,
    /// One column, picked at random once per dataset.
    One,
}

/// How x-outlier rows relate to y-outlier rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XRows {
    #[default]
    Independent,
    Shared,
}

/// Whether x outliers exist before the response is generated (and so
/// propagate through Xβ) or overwrite x after y is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XTiming {
    #[default]
    BeforeResponse,
    AfterResponse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContaminationSpec {
    pub case: Case,
    pub rate: f64,
    pub outlier_mean: f64,
    pub outlier_sd: f64,
    pub x_columns: XColumns,
    pub x_rows: XRows,
    pub x_timing: XTiming,
}

impl Default for ContaminationSpec {
    fn default() -> Self {
        ContaminationSpec {
            case: Case::I,
            rate: 0.10,
            outlier_mean: 10.0,
            outlier_sd: 1.0,
            x_columns: XColumns::All,
            x_rows: XRows::Independent,
            x_timing: XTiming::BeforeResponse,
        }
    }
}

impl ContaminationSpec {
    pub fn case(case: Case) -> Self {
        ContaminationSpec {
            case,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate < 0.5) {
            return Err(config_error("contamination.rate", format!("must be in [0, 0.5), got {}", self.rate)));
        }
        if !self.outlier_mean.is_finite() {
            return Err(config_error("contamination.outlier_mean", "must be finite"));
        }
        if !(self.outlier_sd > 0.0 && self.outlier_sd.is_finite()) {
            return Err(config_error(
                "contamination.outlier_sd",
                format!("must be positive, got {}", self.outlier_sd),
            ));
        }
        Ok(())
    }

    /// ⌈rate·N⌉, or 0 for clean data.
    pub fn outlier_count(&self, n: usize) -> usize {
        if self.case == Case::I {
            return 0;
        }
        ((self.rate * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

fn default_burn_in() -> usize {
    500
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    pub beta_true: Vec<f64>,
    pub phi_true: Vec<f64>,
    pub sigma_true: f64,
    #[serde(default)]
    pub contamination: ContaminationSpec,
    pub replications: usize,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Confidence level for the reported intervals.
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub sigma_rule: SigmaRule,
}

impl ScenarioConfig {
    /// The simulation design with β = (1, 3, 5, 2, 1)ᵀ, φ = (0.8, −0.2)ᵀ, σ = 1, N = 50.
    pub fn reference_p5(case: Case, replications: usize, seed: u64) -> Self {
        ScenarioConfig {
            n: 50,
            beta_true: vec![1.0, 3.0, 5.0, 2.0, 1.0],
            phi_true: vec![0.8, -0.2],
            sigma_true: 1.0,
            contamination: ContaminationSpec::case(case),
            replications,
            seed,
            burn_in: default_burn_in(),
            level: default_level(),
            sigma_rule: SigmaRule::default(),
        }
    }

    /// Ten covariates, every coefficient 3.
    pub fn reference_p10(case: Case, replications: usize, seed: u64) -> Self {
        let mut cfg = Self::reference_p5(case, replications, seed);
        cfg.beta_true = vec![3.0; 10];
        cfg
    }

    pub fn ar_order(&self) -> usize {
        self.phi_true.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta_true.is_empty() {
            return Err(config_error("beta_true", "needs at least one coefficient"));
        }
        if self.beta_true.iter().chain(&self.phi_true).any(|v| !v.is_finite()) {
            return Err(config_error("beta_true/phi_true", "entries must be finite"));
        }
        if !is_stationary(&self.phi_true) {
            return Err(config_error("phi_true", format!("{:?} is not stationary", self.phi_true)));
        }
        if !(self.sigma_true > 0.0 && self.sigma_true.is_finite()) {
            return Err(config_error("sigma_true", format!("must be positive, got {}", self.sigma_true)));
        }
        if self.replications == 0 {
            return Err(config_error("replications", "must be at least 1"));
        }
        if self.n < self.ar_order() + self.beta_true.len() + 2 {
            return Err(config_error(
                "N",
                format!(
                    "{} is too small for {} coefficients and AR order {}",
                    self.n,
                    self.beta_true.len(),
                    self.ar_order()
                ),
            ));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(config_error("level", format!("must be in (0, 1), got {}", self.level)));
        }
        self.contamination.validate()
    }

    /// The independent stream owned by one replication.
    pub fn replication_rng(&self, replication: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(replication as u64);
        rng
    }
}

fn draw_covariates<R: rand::Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, m);
    for t in 0..n {
        for j in 0..m {
            x[(t, j)] = StandardNormal.sample(rng);
        }
    }
    x
}

/// e_t = Σ φ_j e_{t−j} + σ a_t started from zeros; the first `burn_in` values are dropped.
pub fn simulate_ar_errors<R: rand::Rng + ?Sized>(
    n: usize,
    phi: &[f64],
    sigma: f64,
    burn_in: usize,
    rng: &mut R,
) -> Vec<f64> {
    let total = n + burn_in;
    let mut e = vec![0.0; total];
    for t in 0..total {
        let a: f64 = StandardNormal.sample(rng);
        let mut v = sigma * a;
        for (j, &ph) in phi.iter().enumerate() {
            if t > j {
                v += ph * e[t - j - 1];
            }
        }
        e[t] = v;
    }
    e.split_off(burn_in)
}

fn form_response(x: &DMatrix<f64>, beta: &[f64], e: &[f64]) -> DVector<f64> {
    x * DVector::from_column_slice(beta) + DVector::from_column_slice(e)
}

/// A clean sample: X iid N(0, 1), AR(p) errors, y = Xβ + e.
pub fn generate_dataset<R: rand::Rng + ?Sized>(config: &ScenarioConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let x = draw_covariates(config.n, config.beta_true.len(), rng);
    let e = simulate_ar_errors(config.n, &config.phi_true, config.sigma_true, config.burn_in, rng);
    Dataset::new(form_response(&x, &config.beta_true, &e), x)
}

/// Row sets and replacement values for one contaminated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ContaminationDraw {
    pub y_rows: Vec<usize>,
    pub y_values: Vec<f64>,
    pub x_rows: Vec<usize>,
    pub x_columns: Vec<usize>,
    /// Row-major, `x_rows.len() × x_columns.len()`.
    pub x_values: Vec<f64>,
}

impl ContaminationDraw {
    fn empty() -> Self {
        ContaminationDraw {
            y_rows: Vec::new(),
            y_values: Vec::new(),
            x_rows: Vec::new(),
            x_columns: Vec::new(),
            x_values: Vec::new(),
        }
    }

    pub fn draw<R: rand::Rng + ?Sized>(spec: &ContaminationSpec, n: usize, m: usize, rng: &mut R) -> Self {
        let k = spec.outlier_count(n).min(n);
        if k == 0 {
            return Self::empty();
        }
        let dist = Normal::new(spec.outlier_mean, spec.outlier_sd).expect("validated outlier distribution");
        let mut y_rows = index::sample(rng, n, k).into_vec();
        y_rows.sort_unstable();
        let y_values = (0..k).map(|_| dist.sample(rng)).collect();
        let mut out = ContaminationDraw {
            y_rows,
            y_values,
            ..Self::empty()
        };
        if spec.case == Case::III {
            out.x_rows = match spec.x_rows {
                XRows::Shared => out.y_rows.clone(),
                XRows::Independent => {
                    let mut r = index::sample(rng, n, k).into_vec();
                    r.sort_unstable();
                    r
                }
            };
            out.x_columns = match spec.x_columns {
                XColumns::All => (0..m).collect(),
                XColumns::One => vec![rng.random_range(0..m)],
            };
            out.x_values = (0..k * out.x_columns.len()).map(|_| dist.sample(rng)).collect();
        }
        out
    }

    fn apply_x(&self, x: &mut DMatrix<f64>) {
        let c = self.x_columns.len();
        for (i, &r) in self.x_rows.iter().enumerate() {
            for (j, &col) in self.x_columns.iter().enumerate() {
                x[(r, col)] = self.x_values[i * c + j];
            }
        }
    }

    fn apply_y(&self, y: &mut DVector<f64>) {
        for (&r, &v) in self.y_rows.iter().zip(&self.y_values) {
            y[r] = v;
        }
    }
}

/// Replace responses (and, for Case III, covariate rows) of an existing sample.
pub fn contaminate<R: rand::Rng + ?Sized>(
    data: &Dataset,
    spec: &ContaminationSpec,
    rng: &mut R,
) -> Result<Dataset> {
    spec.validate()?;
    let mut out = data.clone();
    if spec.case == Case::I {
        return Ok(out);
    }
    let draw = ContaminationDraw::draw(spec, data.n(), data.m(), rng);
    draw.apply_y(out.y_mut());
    draw.apply_x(out.x_mut());
    Ok(out)
}

/// The sample used by replication `replication` of a study.
pub fn scenario_dataset(config: &ScenarioConfig, replication: usize) -> Result<Dataset> {
    config.validate()?;
    let mut rng = config.replication_rng(replication);
    let m = config.beta_true.len();
    let mut x = draw_covariates(config.n, m, &mut rng);
    let e = simulate_ar_errors(config.n, &config.phi_true, config.sigma_true, config.burn_in, &mut rng);
    let spec = &config.contamination;
    let draw = ContaminationDraw::draw(spec, config.n, m, &mut rng);
    let before = spec.x_timing == XTiming::BeforeResponse;
    if before {
        draw.apply_x(&mut x);
    }
    let mut y = form_response(&x, &config.beta_true, &e);
    draw.apply_y(&mut y);
    if !before {
        draw.apply_x(&mut x);
    }
    Dataset::new(y, x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Cml,
    CmlqFixed { q: f64 },
    CmlqSelected {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grid: Option<Vec<f64>>,
    },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Cml => "cml".into(),
            Method::CmlqFixed { q } => format!("cmlq(q={q})"),
            Method::CmlqSelected { .. } => "cmlq(raic)".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |q: f64| !(q > 0.0 && q <= 1.0);
        match self {
            Method::CmlqFixed { q } if bad(*q) => Err(Error::InvalidQ(*q)),
            Method::CmlqSelected { grid: Some(g) } if g.is_empty() => {
                Err(config_error("methods.grid", "empty q grid"))
            }
            Method::CmlqSelected { grid: Some(g) } => match g.iter().find(|&&q| bad(q)) {
                Some(&q) => Err(Error::InvalidQ(q)),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// One method applied to one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub method: String,
    pub ok: bool,
    pub q: f64,
    pub iterations: usize,
    /// (β, φ, σ); empty when the fit failed.
    pub estimates: Vec<f64>,
    pub se: Option<Vec<f64>>,
    pub ci_lower: Option<Vec<f64>>,
    pub ci_upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// NaN when no replication produced standard errors.
    pub mean_se: f64,
    pub sd: f64,
    pub mean_ci_lower: f64,
    pub mean_ci_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub label: String,
    pub successes: usize,
    pub failures: usize,
    pub inference_failures: usize,
    /// Mean of the q used (fixed or selected) over successful replications.
    pub mean_q: f64,
    pub min_q: f64,
    pub max_q: f64,
    pub parameters: Vec<ParameterSummary>,
}

impl MethodSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: ScenarioConfig,
    pub control: SolverControl,
    pub methods: Vec<MethodSummary>,
    /// Replication-major, then method order.
    pub replications: Vec<ReplicationRecord>,
}

impl MonteCarloReport {
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.label == label)
    }
}

pub fn parameter_names(m: usize, p: usize) -> Vec<String> {
    (1..=m)
        .map(|i| format!("beta{i}"))
        .chain((1..=p).map(|i| format!("phi{i}")))
        .chain(std::iter::once("sigma".to_string()))
        .collect()
}

fn fit_one(
    data: &Dataset,
    config: &ScenarioConfig,
    method: &Method,
    control: &SolverControl,
    replication: usize,
) -> ReplicationRecord {
    let p = config.ar_order();
    let mut rec = ReplicationRecord {
        replication,
        method: method.label(),
        ok: false,
        q: f64::NAN,
        iterations: 0,
        estimates: Vec::new(),
        se: None,
        ci_lower: None,
        ci_upper: None,
        failure: None,
    };
    let fitted: std::result::Result<(ParameterVector, f64, usize, Box<dyn FittedModel>), String> =
        match method {
            Method::Cml => cml_fit(data, p, control)
                .map_err(|e| e.to_string())
                .and_then(|f| {
                    check_fit(f.converged, f.degenerate, f.iterations)?;
                    Ok((f.params.clone(), 1.0, f.iterations, Box::new(f) as Box<dyn FittedModel>))
                }),
            Method::CmlqFixed { q } => ira_fit_with(data, p, *q, control, config.sigma_rule, None)
                .map_err(|e| e.to_string())
                .and_then(|f| {
                    check_fit(f.converged, f.degenerate, f.iterations)?;
                    Ok((f.params.clone(), f.q, f.iterations, Box::new(f) as Box<dyn FittedModel>))
                }),
            Method::CmlqSelected { grid } => {
                let grid = grid.clone().unwrap_or_else(default_grid);
                let opts = SearchOptions {
                    sigma_rule: config.sigma_rule,
                    ..SearchOptions::default()
                };
                select_q_with(data, p, &grid, control, &opts)
                    .map_err(|e| e.to_string())
                    .map(|r| {
                        let f = r.fit_at_q_star;
                        (f.params.clone(), f.q, f.iterations, Box::new(f) as Box<dyn FittedModel>)
                    })
            }
        };
    match fitted {
        Err(msg) => rec.failure = Some(msg),
        Ok((params, q, iterations, model)) => {
            rec.ok = true;
            rec.q = q;
            rec.iterations = iterations;
            let mut est: Vec<f64> = params.to_theta().iter().copied().collect();
            *est.last_mut().expect("σ² entry") = params.sigma2.sqrt();
            rec.estimates = est;
            if let Ok(inf) = asymptotic_report(model.as_ref(), data, config.level) {
                rec.se = Some(inf.reported_se);
                rec.ci_lower = Some(inf.ci_lower);
                rec.ci_upper = Some(inf.ci_upper);
            }
        }
    }
    rec
}

fn check_fit(converged: bool, degenerate: bool, iterations: usize) -> std::result::Result<(), String> {
    if degenerate {
        Err("degenerate fit (innovation variance collapsed)".into())
    } else if !converged {
        Err(format!("no convergence in {iterations} iterations"))
    } else {
        Ok(())
    }
}

/// Mean of values summed in ascending order, so the result does not depend on replication order.
fn ordered_mean(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum::<f64>() / values.len() as f64
}

fn summarize(name: String, truth: f64, mut est: Vec<f64>, mut se: Vec<f64>, mut lo: Vec<f64>, mut hi: Vec<f64>) -> ParameterSummary {
    let n = est.len();
    let mean = ordered_mean(&mut est);
    let bias = mean - truth;
    let mut dev: Vec<f64> = est.iter().map(|v| (v - mean).powi(2)).collect();
    let var_pop = ordered_mean(&mut dev);
    let sd = if n > 1 {
        (var_pop * n as f64 / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    ParameterSummary {
        name,
        truth,
        mean,
        bias,
        // mean squared error decomposed as bias² + variance
        rmse: (bias * bias + var_pop).sqrt(),
        mean_se: ordered_mean(&mut se),
        sd,
        mean_ci_lower: ordered_mean(&mut lo),
        mean_ci_upper: ordered_mean(&mut hi),
    }
}

/// Aggregates one method's records; the result does not depend on their order.
pub fn summarize_method(
    method: &Method,
    config: &ScenarioConfig,
    records: &[&ReplicationRecord],
) -> MethodSummary {
    let m = config.beta_true.len();
    let p = config.ar_order();
    let names = parameter_names(m, p);
    let truth: Vec<f64> = config
        .beta_true
        .iter()
        .chain(&config.phi_true)
        .copied()
        .chain(std::iter::once(config.sigma_true))
        .collect();
    let ok: Vec<&&ReplicationRecord> = records.iter().filter(|r| r.ok).collect();
    let with_se: Vec<&&ReplicationRecord> = ok.iter().copied().filter(|r| r.se.is_some()).collect();
    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let pick = |f: &dyn Fn(&ReplicationRecord) -> Option<f64>| -> Vec<f64> {
                with_se.iter().filter_map(|r| f(r)).collect()
            };
            summarize(
                name,
                truth[i],
                ok.iter().map(|r| r.estimates[i]).collect(),
                pick(&|r| r.se.as_ref().map(|v| v[i])),
                pick(&|r| r.ci_lower.as_ref().map(|v| v[i])),
                pick(&|r| r.ci_upper.as_ref().map(|v| v[i])),
            )
        })
        .collect();
    let mut qs: Vec<f64> = ok.iter().map(|r| r.q).collect();
    let mean_q = ordered_mean(&mut qs);
    MethodSummary {
        method: method.clone(),
        label: method.label(),
        successes: ok.len(),
        failures: records.len() - ok.len(),
        inference_failures: ok.len() - with_se.len(),
        mean_q,
        min_q: qs.first().copied().unwrap_or(f64::NAN),
        max_q: qs.last().copied().unwrap_or(f64::NAN),
        parameters,
    }
}

/// Runs every method on every replication. Replications are spread over
/// the current rayon pool; the report does not depend on its size.
pub fn run_study(
    config: &ScenarioConfig,
    methods: &[Method],
    control: &SolverControl,
) -> Result<MonteCarloReport> {
    config.validate()?;
    control.validate()?;
    if methods.is_empty() {
        return Err(config_error("methods", "at least one method is required"));
    }
    for m in methods {
        m.validate()?;
    }

    let per_rep: Vec<Vec<ReplicationRecord>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| match scenario_dataset(config, rep) {
            Ok(data) => methods
                .iter()
                .map(|m| fit_one(&data, config, m, control, rep))
                .collect(),
            Err(e) => methods
                .iter()
                .map(|m| ReplicationRecord {
                    replication: rep,
                    method: m.label(),
                    ok: false,
                    q: f64::NAN,
                    iterations: 0,
                    estimates: Vec::new(),
                    se: None,
                    ci_lower: None,
                    ci_upper: None,
                    failure: Some(e.to_string()),
                })
                .collect(),
        })
        .collect();
    let replications: Vec<ReplicationRecord> = per_rep.into_iter().flatten().collect();

    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, method)| {
            let recs: Vec<&ReplicationRecord> = replications
                .iter()
                .skip(k)
                .step_by(methods.len())
                .collect();
            summarize_method(method, config, &recs)
        })
        .collect();

    Ok(MonteCarloReport {
        config: config.clone(),
        control: control.clone(),
        methods: summaries,
        replications,
    })
}
