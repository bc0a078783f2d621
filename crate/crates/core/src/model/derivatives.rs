//! Analytic first and second derivatives of the conditional log-likelihood,
//! and their Lq-weighted counterparts.
//!
//! Parameter order is θ = (β₁..β_M, φ₁..φ_p, σ²).

use nalgebra::{DMatrix, DVector};

use super::{
    backshift_transform, check_q_positive, normal_log_density, residuals, weights_from_log_densities,
    Dataset, ParameterVector,
};
use crate::error::Result;

/// Contribution of one conditional row to the score and its Jacobian.
#[derive(Debug, Clone)]
pub struct ObservationTerm {
    /// Innovation a_t.
    pub innovation: f64,
    pub log_density: f64,
    /// U(a_t; θ), the gradient of log f(a_t; θ).
    pub score: DVector<f64>,
    /// ∇U(a_t; θ).
    pub hessian: DMatrix<f64>,
}

pub fn observation_terms(data: &Dataset, params: &ParameterVector) -> Result<Vec<ObservationTerm>> {
    params.check_against(data)?;
    let m = params.m();
    let p = params.p();
    let d = params.dim();
    let s = params.sigma2;
    let s2 = s * s;
    let s3 = s2 * s;

    let res = residuals(data, params)?;
    let tr = backshift_transform(data, &params.phi)?;
    let x = data.x();

    let mut out = Vec::with_capacity(res.a.len());
    for (r, &a) in res.a.iter().enumerate() {
        let t = r + p;
        let tx = tr.tx.row(r);
        let mut u = DVector::zeros(d);
        let mut h = DMatrix::zeros(d, d);

        for k in 0..m {
            u[k] = a * tx[k] / s;
            for j in 0..m {
                h[(j, k)] = -tx[j] * tx[k] / s;
            }
            let v = -a * tx[k] / (s2);
            h[(k, d - 1)] = v;
            h[(d - 1, k)] = v;
        }
        for i in 0..p {
            let lag = res.e[t - i - 1];
            u[m + i] = a * lag / s;
            for j in 0..m {
                let v = -(lag * tx[j] + a * x[(t - i - 1, j)]) / s;
                h[(j, m + i)] = v;
                h[(m + i, j)] = v;
            }
            for l in 0..p {
                h[(m + i, m + l)] = -lag * res.e[t - l - 1] / s;
            }
            let v = -a * lag / s2;
            h[(m + i, d - 1)] = v;
            h[(d - 1, m + i)] = v;
        }
        u[d - 1] = -0.5 / s + a * a / (2.0 * s2);
        h[(d - 1, d - 1)] = 0.5 / s2 - a * a / s3;

        out.push(ObservationTerm {
            innovation: a,
            log_density: normal_log_density(a, s),
            score: u,
            hessian: h,
        });
    }
    Ok(out)
}

/// Gradient of the conditional log-likelihood.
pub fn score(data: &Dataset, params: &ParameterVector) -> Result<DVector<f64>> {
    let terms = observation_terms(data, params)?;
    Ok(terms
        .iter()
        .fold(DVector::zeros(params.dim()), |acc, o| acc + &o.score))
}

/// Σ ω_t U(a_t; θ), the gradient of the Lq-likelihood.
pub fn modified_score(data: &Dataset, params: &ParameterVector, q: f64) -> Result<DVector<f64>> {
    check_q_positive(q)?;
    let terms = observation_terms(data, params)?;
    let lds: Vec<f64> = terms.iter().map(|o| o.log_density).collect();
    let w = weights_from_log_densities(&lds, q);
    Ok(terms
        .iter()
        .zip(&w.w)
        .fold(DVector::zeros(params.dim()), |acc, (o, &wt)| acc + &o.score * wt))
}

/// Hessian of the conditional log-likelihood.
pub fn score_jacobian(data: &Dataset, params: &ParameterVector) -> Result<DMatrix<f64>> {
    let d = params.dim();
    let terms = observation_terms(data, params)?;
    Ok(terms
        .iter()
        .fold(DMatrix::zeros(d, d), |acc, o| acc + &o.hessian))
}

/// Σ ω_t [(1 − q) U U' + ∇U], the Hessian of the Lq-likelihood.
pub fn modified_score_jacobian(
    data: &Dataset,
    params: &ParameterVector,
    q: f64,
) -> Result<DMatrix<f64>> {
    check_q_positive(q)?;
    let d = params.dim();
    let terms = observation_terms(data, params)?;
    let lds: Vec<f64> = terms.iter().map(|o| o.log_density).collect();
    let w = weights_from_log_densities(&lds, q);
    Ok(terms
        .iter()
        .zip(&w.w)
        .fold(DMatrix::zeros(d, d), |acc, (o, &wt)| {
            acc + (&o.score * o.score.transpose() * (1.0 - q) + &o.hessian) * wt
        }))
}
