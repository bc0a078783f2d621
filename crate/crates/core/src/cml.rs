//! Classical conditional maximum likelihood.

use serde::{Deserialize, Serialize};

use crate::cmlq::{
    cmlq_beta_update, cmlq_phi_update, ira_fit_with, weighted_innovation_variance, SigmaRule,
};
use crate::error::{Error, Result};
use crate::model::{Dataset, ParameterVector, WeightVector};

/// Stopping rule shared by both estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverControl {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub trace: bool,
}

impl Default for SolverControl {
    fn default() -> Self {
        SolverControl {
            epsilon: 1e-8,
            max_iterations: 500,
            trace: false,
        }
    }
}

impl SolverControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config {
                field: "epsilon".into(),
                message: format!("must be positive, got {}", self.epsilon),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::Config {
                field: "max_iterations".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmlFit {
    pub params: ParameterVector,
    pub iterations: usize,
    pub converged: bool,
    /// Exact fit: σ̂² = 0.
    pub degenerate: bool,
    pub stationary: bool,
    pub loglik: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<ParameterVector>>,
}

/// Generalized least squares for fixed φ (Cochrane–Orcutt step).
pub fn cml_beta_update(data: &Dataset, phi: &[f64]) -> Result<Vec<f64>> {
    if phi.len() >= data.n() {
        return Err(Error::Dimension(format!(
            "AR order {} needs more than {} observations",
            phi.len(),
            data.n()
        )));
    }
    cmlq_beta_update(data, phi, &WeightVector::unit(data.n() - phi.len()))
}

/// φ̂ = R⁻¹R₀ from lagged residual cross products.
pub fn cml_phi_update(data: &Dataset, beta: &[f64], p: usize) -> Result<Vec<f64>> {
    if p >= data.n() {
        return Err(Error::Dimension(format!(
            "AR order {p} needs more than {} observations",
            data.n()
        )));
    }
    cmlq_phi_update(data, beta, &WeightVector::unit(data.n() - p))
}

/// Mean squared innovation over the N − p conditional rows.
pub fn cml_sigma_update(data: &Dataset, beta: &[f64], phi: &[f64]) -> Result<f64> {
    if phi.len() >= data.n() {
        return Err(Error::Dimension(format!(
            "AR order {} needs more than {} observations",
            phi.len(),
            data.n()
        )));
    }
    weighted_innovation_variance(data, beta, phi, &WeightVector::unit(data.n() - phi.len()))
}

pub fn cml_fit(data: &Dataset, p: usize, control: &SolverControl) -> Result<CmlFit> {
    cml_fit_from(data, p, control, None)
}

pub fn cml_fit_from(
    data: &Dataset,
    p: usize,
    control: &SolverControl,
    start: Option<&ParameterVector>,
) -> Result<CmlFit> {
    let fit = ira_fit_with(data, p, 1.0, control, SigmaRule::Literal, start)?;
    Ok(CmlFit {
        params: fit.params,
        iterations: fit.iterations,
        converged: fit.converged,
        degenerate: fit.degenerate,
        stationary: fit.stationary,
        loglik: fit.lq_value,
        trace: fit.trace,
    })
}
