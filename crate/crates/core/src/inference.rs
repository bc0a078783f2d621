//! Sandwich covariance V = J⁻¹KJ⁻¹ for the (Lq-)likelihood estimators.
//!
//! J and K are the sample averages, over the conditional rows, of the
//! Jacobian and outer product of the modified score, evaluated at the fit.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cml::CmlFit;
use crate::cmlq::CmlqFit;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, solve_general, symmetrize, RCOND_FLOOR};
use crate::model::{check_q_positive, observation_terms, weights_from_log_densities, Dataset, ParameterVector};

/// Anything inference can be computed for.
pub trait FittedModel {
    fn params(&self) -> &ParameterVector;
    fn q(&self) -> f64;
    fn is_degenerate(&self) -> bool;
}

impl FittedModel for CmlFit {
    fn params(&self) -> &ParameterVector {
        &self.params
    }
    fn q(&self) -> f64 {
        1.0
    }
    fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

impl FittedModel for CmlqFit {
    fn params(&self) -> &ParameterVector {
        &self.params
    }
    fn q(&self) -> f64 {
        self.q
    }
    fn is_degenerate(&self) -> bool {
        self.degenerate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub level: f64,
    /// Covariance of θ̂ = (β, φ, σ²), already divided by N − p.
    pub covariance: Vec<Vec<f64>>,
    /// √diag(covariance), on the θ scale.
    pub se: Vec<f64>,
    /// (β, φ, σ): the σ² entry is reported as σ.
    pub estimates: Vec<f64>,
    /// SEs for `estimates`; SE(σ̂) = SE(σ̂²)/(2σ̂).
    pub reported_se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub jacobian_condition: f64,
}

/// θ* = (β, φ, qσ²).
pub fn surrogate_parameter(params: &ParameterVector, q: f64) -> Result<ParameterVector> {
    check_q_positive(q)?;
    let mut out = params.clone();
    out.sigma2 *= q;
    Ok(out)
}

/// Summed modified-score outer product and Jacobian (M₁ = Σu*u*', M₂ = Σ∇u*).
pub fn score_moments(
    data: &Dataset,
    params: &ParameterVector,
    q: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, usize)> {
    check_q_positive(q)?;
    let d = params.dim();
    let terms = observation_terms(data, params)?;
    let lds: Vec<f64> = terms.iter().map(|o| o.log_density).collect();
    let w = weights_from_log_densities(&lds, q);
    let mut outer = DMatrix::zeros(d, d);
    let mut jac = DMatrix::zeros(d, d);
    for (o, &wt) in terms.iter().zip(&w.w) {
        let us = &o.score * wt;
        outer += &us * us.transpose();
        jac += (&o.score * o.score.transpose() * (1.0 - q) + &o.hessian) * wt;
    }
    Ok((outer, jac, terms.len()))
}

/// Plug-in J = mean ∇u*_t and K = mean u*_t u*_t'.
pub fn estimate_jk(
    data: &Dataset,
    params: &ParameterVector,
    q: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (outer, jac, n) = score_moments(data, params, q)?;
    let n = n as f64;
    Ok((jac / n, outer / n))
}

/// Two-sided standard normal critical value for `level`.
pub fn z_critical(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("confidence level must be in (0, 1), got {level}")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 * (1.0 + level)))
}

pub fn asymptotic_report<F: FittedModel + ?Sized>(
    fit: &F,
    data: &Dataset,
    level: f64,
) -> Result<AsymptoticReport> {
    let z = z_critical(level)?;
    if fit.is_degenerate() {
        return Err(Error::InferenceUnavailable {
            condition: f64::INFINITY,
        });
    }
    let params = fit.params();
    let (j, k) = estimate_jk(data, params, fit.q())?;
    let condition = condition_number(&j);
    if !(condition.is_finite() && 1.0 / condition > RCOND_FLOOR) {
        return Err(Error::InferenceUnavailable { condition });
    }
    let n = (data.n() - params.p()) as f64;
    let j_inv_k = solve_general(&j, &k, "Jacobian")
        .map_err(|_| Error::InferenceUnavailable { condition })?;
    let mut cov = solve_general(&j, &j_inv_k.transpose(), "Jacobian")
        .map_err(|_| Error::InferenceUnavailable { condition })?
        / n;
    symmetrize(&mut cov);

    let d = params.dim();
    let se: Vec<f64> = (0..d).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
    let theta = params.to_theta();
    let sigma = params.sigma2.sqrt();
    let mut estimates: Vec<f64> = theta.iter().copied().collect();
    let mut reported_se = se.clone();
    estimates[d - 1] = sigma;
    reported_se[d - 1] = se[d - 1] / (2.0 * sigma);

    let ci_lower = estimates
        .iter()
        .zip(&reported_se)
        .map(|(e, s)| e - z * s)
        .collect();
    let ci_upper = estimates
        .iter()
        .zip(&reported_se)
        .map(|(e, s)| e + z * s)
        .collect();

    Ok(AsymptoticReport {
        level,
        covariance: (0..d).map(|i| cov.row(i).iter().copied().collect()).collect(),
        se,
        estimates,
        reported_se,
        ci_lower,
        ci_upper,
        jacobian_condition: condition,
    })
}
