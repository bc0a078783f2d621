//! Choosing q by minimizing the robust AIC
//! `RAIC(q) = −mean L_q(f(a_t)) + tr(−M₂⁻¹M₁)`,
//! where M₁ and M₂ are the summed outer product and Jacobian of the modified score.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cml::SolverControl;
use crate::cmlq::{ira_fit_with, CmlqFit, SigmaRule};
use crate::error::{Error, Result};
use crate::inference::score_moments;
use crate::linalg::solve_general;
use crate::model::{Dataset, ParameterVector};

/// q = 0.30, 0.31, …, 1.00.
pub fn default_grid() -> Vec<f64> {
    (30..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaicPoint {
    pub q: f64,
    pub raic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub q: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSearchResult {
    pub q_star: f64,
    /// Ascending in q; only grid points with a usable fit.
    pub raic_curve: Vec<RaicPoint>,
    pub fit_at_q_star: CmlqFit,
    pub failures: Vec<GridFailure>,
}

impl QSearchResult {
    pub fn raic_at_q_star(&self) -> f64 {
        self.raic_curve
            .iter()
            .find(|p| p.q == self.q_star)
            .map(|p| p.raic)
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Descending q, each fit started from the previous one.
    #[default]
    WarmStart,
    /// Every grid point from OLS, evaluated in parallel.
    ColdParallel,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub sigma_rule: SigmaRule,
    pub mode: SearchMode,
}

/// RAIC for parameters fitted at `q`.
pub fn raic_at(data: &Dataset, params: &ParameterVector, q: f64, lq_value: f64) -> Result<f64> {
    let (m1, m2, n) = score_moments(data, params, q)?;
    let sol = solve_general(&m2, &m1, "Lq-likelihood Jacobian")?;
    Ok(-lq_value / n as f64 - sol.trace())
}

pub fn raic(fit: &CmlqFit, data: &Dataset) -> Result<f64> {
    if fit.degenerate {
        return Err(Error::Singular {
            what: "degenerate fit".into(),
            condition: f64::INFINITY,
        });
    }
    raic_at(data, &fit.params, fit.q, fit.lq_value)
}

fn usable(fit: &CmlqFit) -> std::result::Result<(), String> {
    if fit.degenerate {
        Err("degenerate fit (innovation variance collapsed)".into())
    } else if !fit.converged {
        Err(format!("no convergence in {} iterations", fit.iterations))
    } else {
        Ok(())
    }
}

fn evaluate(
    data: &Dataset,
    p: usize,
    q: f64,
    control: &SolverControl,
    rule: SigmaRule,
    start: Option<&ParameterVector>,
) -> std::result::Result<(CmlqFit, f64), String> {
    let attempt = |s: Option<&ParameterVector>| -> std::result::Result<CmlqFit, String> {
        let fit = ira_fit_with(data, p, q, control, rule, s).map_err(|e| e.to_string())?;
        usable(&fit)?;
        Ok(fit)
    };
    let fit = match attempt(start) {
        Ok(f) => f,
        Err(first) if start.is_some() => attempt(None).map_err(|e| format!("{first}; cold start: {e}"))?,
        Err(e) => return Err(e),
    };
    let value = raic(&fit, data).map_err(|e| e.to_string())?;
    if !value.is_finite() {
        return Err(format!("non-finite RAIC {value}"));
    }
    Ok((fit, value))
}

pub fn select_q(
    data: &Dataset,
    p: usize,
    grid: &[f64],
    control: &SolverControl,
) -> Result<QSearchResult> {
    select_q_with(data, p, grid, control, &SearchOptions::default())
}

pub fn select_q_with(
    data: &Dataset,
    p: usize,
    grid: &[f64],
    control: &SolverControl,
    options: &SearchOptions,
) -> Result<QSearchResult> {
    if grid.is_empty() {
        return Err(Error::Domain("empty q grid".into()));
    }
    if let Some(&bad) = grid.iter().find(|&&q| !(q > 0.0 && q <= 1.0)) {
        return Err(Error::InvalidQ(bad));
    }
    control.validate()?;
    data.check_fit_order(p)?;

    let mut qs = grid.to_vec();
    qs.sort_by(|a, b| b.total_cmp(a));
    qs.dedup();

    let outcomes: Vec<(f64, std::result::Result<(CmlqFit, f64), String>)> = match options.mode {
        SearchMode::WarmStart => {
            let mut prev: Option<ParameterVector> = None;
            qs.iter()
                .map(|&q| {
                    let r = evaluate(data, p, q, control, options.sigma_rule, prev.as_ref());
                    if let Ok((fit, _)) = &r {
                        prev = Some(fit.params.clone());
                    }
                    (q, r)
                })
                .collect()
        }
        SearchMode::ColdParallel => qs
            .par_iter()
            .map(|&q| (q, evaluate(data, p, q, control, options.sigma_rule, None)))
            .collect(),
    };

    let mut curve = Vec::new();
    let mut fits = Vec::new();
    let mut failures = Vec::new();
    for (q, outcome) in outcomes {
        match outcome {
            Ok((fit, value)) => {
                curve.push(RaicPoint { q, raic: value });
                fits.push(fit);
            }
            Err(reason) => failures.push(GridFailure { q, reason }),
        }
    }
    failures.sort_by(|a, b| a.q.total_cmp(&b.q));
    let best = argmin_prefer_larger_q(&curve).map(|i| (curve[i].q, fits.swap_remove(i)));
    curve.sort_by(|a, b| a.q.total_cmp(&b.q));

    match best {
        Some((q_star, fit)) => Ok(QSearchResult {
            q_star,
            raic_curve: curve,
            fit_at_q_star: fit,
            failures,
        }),
        None => Err(Error::NoValidQ {
            failures: failures.len(),
        }),
    }
}

/// Index of the smallest RAIC; equal values resolve to the larger q.
pub fn argmin_prefer_larger_q(curve: &[RaicPoint]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, pt) in curve.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &curve[b];
                if pt.raic < cur.raic || (pt.raic == cur.raic && pt.q > cur.q) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// The trace penalty alone, for inspection.
pub fn raic_penalty(m1: &DMatrix<f64>, m2: &DMatrix<f64>) -> Result<f64> {
    Ok(-solve_general(m2, m1, "Lq-likelihood Jacobian")?.trace())
}
