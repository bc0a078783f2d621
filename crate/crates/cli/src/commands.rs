use std::fs;
use std::path::Path;

use lqar_core::cml::cml_fit;
use lqar_core::cmlq::ira_fit_with;
use lqar_core::datasets::{belgium_schema, BELGIUM_PHONE_CALLS_CSV};
use lqar_core::inference::{asymptotic_report, FittedModel};
use lqar_core::io::{read_csv, CsvSchema};
use lqar_core::model::conditional_log_likelihood;
use lqar_core::selection::{default_grid, raic, raic_at, select_q_with, SearchOptions};
use lqar_core::simulation::{run_study, parameter_names, Method};
use lqar_core::{Dataset, ScenarioConfig, SigmaRule, SolverControl};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{DataArgs, FitArgs, MethodArg, SelectQArgs, SimulateArgs, SolverArgs};
use crate::error::{exit, CliError};
use crate::report::{
    finite, to_json, write_curve, write_replications, write_summary_table, FitReport, MethodBlock,
    ParameterRow, Provenance, QSearchSummary, SelectQReport, SimulationOutput,
};

pub const BUILTIN_BELGIUM: &str = "builtin:belgium";

pub struct LoadedData {
    pub data: Dataset,
    pub bytes: Vec<u8>,
    pub columns: Vec<String>,
    pub label: String,
}

fn display_name(input: &str) -> String {
    Path::new(input)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| input.to_string())
}

pub fn load_data(args: &DataArgs) -> Result<LoadedData, CliError> {
    let (bytes, label) = if args.input == BUILTIN_BELGIUM {
        (BELGIUM_PHONE_CALLS_CSV.as_bytes().to_vec(), args.input.clone())
    } else {
        let path = Path::new(&args.input);
        (fs::read(path).map_err(|e| CliError::io(path, e))?, display_name(&args.input))
    };
    let schema = match (&args.response, args.input == BUILTIN_BELGIUM) {
        (None, true) => belgium_schema(),
        (None, false) => return Err(CliError::input("--response is required")),
        (Some(r), _) => {
            if !args.delimiter.is_ascii() {
                return Err(CliError::input("--delimiter must be a single ASCII character"));
            }
            CsvSchema {
                response: r.clone(),
                covariates: args.covariates.clone(),
                intercept: args.intercept,
                delimiter: args.delimiter as u8,
            }
        }
    };
    let data = read_csv(bytes.as_slice(), &schema)?;
    Ok(LoadedData {
        data,
        bytes,
        columns: schema.column_names(),
        label,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QChoice {
    Auto,
    Fixed(f64),
}

pub fn parse_q(s: &str) -> Result<QChoice, CliError> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(QChoice::Auto);
    }
    let q: f64 = s
        .parse()
        .map_err(|_| CliError::input(format!("--q must be a number or 'auto', got '{s}'")))?;
    if !(q > 0.0 && q <= 1.0) {
        return Err(CliError::input(format!("--q must be in (0, 1], got {q}")));
    }
    Ok(QChoice::Fixed(q))
}

fn round12(v: f64) -> f64 {
    (v * 1e12).round() / 1e12
}

/// `start:end:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(spec) = spec else {
        return Ok(default_grid());
    };
    let bad = || CliError::input(format!("cannot parse grid '{spec}'"));
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (a, b, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if !(step > 0.0) || b < a {
            return Err(bad());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|i| round12(a + i as f64 * step)).collect())
    } else {
        spec.split(',').map(parse).collect()
    }
}

fn solver_control(s: &SolverArgs) -> SolverControl {
    SolverControl {
        epsilon: s.epsilon,
        max_iterations: s.max_iter,
        trace: false,
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<fs::File, CliError> {
    fs::File::create(path).map_err(|e| CliError::io(path, e))
}

struct FitSummary {
    q: f64,
    iterations: usize,
    converged: bool,
    degenerate: bool,
    stationary: bool,
    objective: f64,
    sigma2_raw: f64,
    sigma2_surrogate_corrected: f64,
    sigma_rule: SigmaRule,
    raic: Option<f64>,
}

fn method_block<F: FittedModel>(
    name: &str,
    fit: &F,
    summary: FitSummary,
    data: &Dataset,
    level: f64,
    q_search: Option<QSearchSummary>,
) -> MethodBlock {
    let params = fit.params();
    let names = parameter_names(params.m(), params.p());
    let mut estimates: Vec<f64> = params.to_theta().iter().copied().collect();
    let last = estimates.len() - 1;
    estimates[last] = params.sigma2.sqrt();
    let (rows, covariance, inference_error) = match asymptotic_report(fit, data, level) {
        Ok(rep) => (
            names
                .into_iter()
                .enumerate()
                .map(|(i, name)| ParameterRow {
                    name,
                    estimate: estimates[i],
                    se: finite(rep.reported_se[i]),
                    ci_lower: finite(rep.ci_lower[i]),
                    ci_upper: finite(rep.ci_upper[i]),
                })
                .collect(),
            Some(rep.covariance),
            None,
        ),
        Err(e) => (
            names
                .into_iter()
                .enumerate()
                .map(|(i, name)| ParameterRow {
                    name,
                    estimate: estimates[i],
                    se: None,
                    ci_lower: None,
                    ci_upper: None,
                })
                .collect(),
            None,
            Some(e.to_string()),
        ),
    };
    MethodBlock {
        method: name.into(),
        q: summary.q,
        raic: summary.raic.and_then(finite),
        iterations: summary.iterations,
        converged: summary.converged,
        degenerate: summary.degenerate,
        stationary: summary.stationary,
        sigma_rule: summary.sigma_rule,
        objective: finite(summary.objective),
        sigma2_raw: summary.sigma2_raw,
        sigma2_surrogate_corrected: summary.sigma2_surrogate_corrected,
        parameters: rows,
        covariance,
        level,
        inference_error,
        q_search,
    }
}

/// Runs the fit and builds the report without writing anything.
pub fn fit_report(args: &FitArgs) -> Result<FitReport, CliError> {
    let loaded = load_data(&args.data)?;
    let data = &loaded.data;
    let p = args.data.ar_order;
    let control = solver_control(&args.solver);
    let rule: SigmaRule = args.solver.sigma_rule.into();
    let q = parse_q(&args.q)?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::input(format!("--level must be in (0, 1), got {}", args.level)));
    }

    let block = match (args.method, q) {
        (MethodArg::Cml, _) => {
            let fit = cml_fit(data, p, &control)?;
            let raic_value = if fit.degenerate {
                None
            } else {
                conditional_log_likelihood(data, &fit.params)
                    .and_then(|ll| raic_at(data, &fit.params, 1.0, ll))
                    .ok()
            };
            let summary = FitSummary {
                q: 1.0,
                iterations: fit.iterations,
                converged: fit.converged,
                degenerate: fit.degenerate,
                stationary: fit.stationary,
                objective: fit.loglik,
                sigma2_raw: fit.params.sigma2,
                sigma2_surrogate_corrected: fit.params.sigma2,
                sigma_rule: SigmaRule::Literal,
                raic: raic_value,
            };
            method_block("cml", &fit, summary, data, args.level, None)
        }
        (MethodArg::Cmlq, QChoice::Fixed(q)) => {
            let fit = ira_fit_with(data, p, q, &control, rule, None)?;
            let summary = FitSummary {
                q,
                iterations: fit.iterations,
                converged: fit.converged,
                degenerate: fit.degenerate,
                stationary: fit.stationary,
                objective: fit.lq_value,
                sigma2_raw: fit.sigma2_raw,
                sigma2_surrogate_corrected: fit.sigma2_surrogate_corrected,
                sigma_rule: rule,
                raic: raic(&fit, data).ok(),
            };
            method_block("cmlq", &fit, summary, data, args.level, None)
        }
        (MethodArg::Cmlq, QChoice::Auto) => {
            let grid = parse_grid(args.grid.as_deref())?;
            let opts = SearchOptions {
                sigma_rule: rule,
                ..SearchOptions::default()
            };
            let res = select_q_with(data, p, &grid, &control, &opts)?;
            let raic_value = res.raic_at_q_star();
            let fit = &res.fit_at_q_star;
            let summary = FitSummary {
                q: fit.q,
                iterations: fit.iterations,
                converged: fit.converged,
                degenerate: fit.degenerate,
                stationary: fit.stationary,
                objective: fit.lq_value,
                sigma2_raw: fit.sigma2_raw,
                sigma2_surrogate_corrected: fit.sigma2_surrogate_corrected,
                sigma_rule: rule,
                raic: Some(raic_value),
            };
            let search = QSearchSummary {
                grid_points: res.raic_curve.len() + res.failures.len(),
                failures: res.failures.len(),
                curve: res.raic_curve.clone(),
            };
            method_block("cmlq", fit, summary, data, args.level, Some(search))
        }
    };

    let config = json!({
        "method": match args.method { MethodArg::Cml => "cml", MethodArg::Cmlq => "cmlq" },
        "q": args.q,
        "grid": args.grid,
        "ar_order": p,
        "level": args.level,
        "epsilon": control.epsilon,
        "max_iterations": control.max_iterations,
        "sigma_rule": rule,
        "response": args.data.response,
        "covariates": args.data.covariates,
        "intercept": args.data.intercept,
    });
    Ok(FitReport {
        provenance: Provenance::new(&loaded.label, &loaded.bytes, config),
        n: data.n(),
        ar_order: p,
        columns: loaded.columns,
        fits: vec![block],
    })
}

pub fn exit_code_for(report: &FitReport) -> i32 {
    if report.fits.iter().any(|f| f.degenerate) {
        exit::NUMERICAL
    } else if report.fits.iter().any(|f| !f.converged) {
        exit::NOT_CONVERGED
    } else {
        exit::OK
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<i32, CliError> {
    let report = fit_report(args)?;
    emit(args.output.as_deref(), &to_json(&report)?)?;
    Ok(exit_code_for(&report))
}

pub fn select_q_report(args: &SelectQArgs) -> Result<SelectQReport, CliError> {
    let loaded = load_data(&args.data)?;
    let grid = parse_grid(args.grid.as_deref())?;
    let control = solver_control(&args.solver);
    let rule: SigmaRule = args.solver.sigma_rule.into();
    let opts = SearchOptions {
        sigma_rule: rule,
        ..SearchOptions::default()
    };
    let res = select_q_with(&loaded.data, args.data.ar_order, &grid, &control, &opts)?;
    let config = json!({
        "grid": args.grid,
        "ar_order": args.data.ar_order,
        "epsilon": control.epsilon,
        "max_iterations": control.max_iterations,
        "sigma_rule": rule,
        "response": args.data.response,
        "covariates": args.data.covariates,
        "intercept": args.data.intercept,
    });
    Ok(SelectQReport {
        provenance: Provenance::new(&loaded.label, &loaded.bytes, config),
        q_star: res.q_star,
        raic_at_q_star: res.raic_at_q_star(),
        curve: res.raic_curve,
        failures: res.failures,
    })
}

pub fn cmd_select_q(args: &SelectQArgs) -> Result<i32, CliError> {
    let report = select_q_report(args)?;
    if let Some(path) = &args.curve {
        write_curve(create(path)?, &report.curve)?;
    }
    emit(args.output.as_deref(), &to_json(&report)?)?;
    Ok(exit::OK)
}

fn default_methods() -> Vec<Method> {
    vec![Method::Cml, Method::CmlqSelected { grid: None }]
}

/// The TOML study file: scenario fields at the top level plus optional
/// `methods` and `[control]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyFile {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub control: SolverControl,
}

pub fn parse_study(text: &str) -> Result<StudyFile, CliError> {
    let study: StudyFile = toml::from_str(text).map_err(|e| CliError {
        kind: "config",
        message: e.to_string().trim_end().to_string(),
        code: exit::INPUT,
    })?;
    study.scenario.validate()?;
    study.control.validate()?;
    Ok(study)
}

pub fn simulate(args: &SimulateArgs) -> Result<SimulationOutput, CliError> {
    let bytes = fs::read(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::input(format!("{} is not UTF-8", args.config.display())))?;
    let mut study = parse_study(&text)?;
    if let Some(seed) = args.seed {
        study.scenario.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::input(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_study(&study.scenario, &study.methods, &study.control))?;
    let config = serde_json::to_value(&study).map_err(|e| CliError::input(e.to_string()))?;
    Ok(SimulationOutput {
        provenance: Provenance::new(&display_name(&args.config.to_string_lossy()), &bytes, config),
        report,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<i32, CliError> {
    let out = simulate(args)?;
    if let Some(path) = &args.table {
        write_summary_table(create(path)?, &out.report)?;
    }
    if let Some(path) = &args.replications {
        write_replications(create(path)?, &out.report)?;
    }
    emit(args.output.as_deref(), &to_json(&out)?)?;
    Ok(exit::OK)
}
