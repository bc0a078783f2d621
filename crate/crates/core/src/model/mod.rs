//! Regression with AR(p) errors: data, parameters, the backshift filter and
//! the conditional (Lq-)likelihood.
//!
//! Observations are indexed `0..N` here; the conditional likelihood uses the
//! last `N - p` of them, so "conditional row `r`" refers to observation `p + r`.

mod derivatives;

pub use derivatives::{
    modified_score, modified_score_jacobian, observation_terms, score, score_jacobian,
    ObservationTerm,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights are floored here so `W` always has a positive trace.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Below this `|1 - q|` the Lq function is evaluated as a plain logarithm.
pub const LQ_LOG_SWITCH: f64 = 1e-10;

/// Companion eigenvalues must have modulus below `1 - STATIONARITY_MARGIN`.
pub const STATIONARITY_MARGIN: f64 = 1e-8;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Response `y` and covariate matrix `X` (N × M), rows in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: DVector<f64>,
    x: DMatrix<f64>,
}

impl Dataset {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "response has {} rows but covariates have {}",
                y.len(),
                x.nrows()
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite response at row {i}")));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            let row = i % x.nrows();
            let col = i / x.nrows();
            return Err(Error::Domain(format!(
                "non-finite covariate at row {row}, column {col}"
            )));
        }
        Ok(Dataset { y, x })
    }

    /// Builds a dataset from row-major covariates.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged covariate rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Dataset::new(
            DVector::from_vec(y),
            DMatrix::from_row_slice(rows.len(), m, &flat),
        )
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn m(&self) -> usize {
        self.x.ncols()
    }

    pub(crate) fn y_mut(&mut self) -> &mut DVector<f64> {
        &mut self.y
    }

    pub(crate) fn x_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.x
    }

    /// Enough conditional rows to fit an AR(`p`) model with `M` coefficients.
    pub fn check_fit_order(&self, p: usize) -> Result<()> {
        let need = p + self.m() + 2;
        if self.n() < need {
            return Err(Error::Dimension(format!(
                "N = {} observations, need at least p + M + 2 = {need}",
                self.n()
            )));
        }
        Ok(())
    }
}

/// θ = (β₁..β_M, φ₁..φ_p, σ²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub beta: Vec<f64>,
    pub phi: Vec<f64>,
    pub sigma2: f64,
}

impl ParameterVector {
    pub fn new(beta: Vec<f64>, phi: Vec<f64>, sigma2: f64) -> Self {
        ParameterVector { beta, phi, sigma2 }
    }

    pub fn m(&self) -> usize {
        self.beta.len()
    }

    pub fn p(&self) -> usize {
        self.phi.len()
    }

    pub fn dim(&self) -> usize {
        self.m() + self.p() + 1
    }

    pub fn to_theta(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.beta
                .iter()
                .chain(self.phi.iter())
                .copied()
                .chain(std::iter::once(self.sigma2)),
        )
    }

    pub fn from_theta(theta: &DVector<f64>, m: usize, p: usize) -> Result<Self> {
        if theta.len() != m + p + 1 {
            return Err(Error::Dimension(format!(
                "theta has length {}, expected {}",
                theta.len(),
                m + p + 1
            )));
        }
        Ok(ParameterVector {
            beta: theta.rows(0, m).iter().copied().collect(),
            phi: theta.rows(m, p).iter().copied().collect(),
            sigma2: theta[m + p],
        })
    }

    pub fn is_stationary(&self) -> bool {
        is_stationary(&self.phi)
    }

    fn check_against(&self, data: &Dataset) -> Result<()> {
        if self.m() != data.m() {
            return Err(Error::Dimension(format!(
                "{} coefficients for {} covariates",
                self.m(),
                data.m()
            )));
        }
        if self.p() >= data.n() {
            return Err(Error::Dimension(format!(
                "AR order {} needs more than {} observations",
                self.p(),
                data.n()
            )));
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Domain(format!(
                "innovation variance must be positive and finite, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }
}

/// True when every root of 1 − φ₁z − … − φ_p z^p lies outside the unit circle.
pub fn is_stationary(phi: &[f64]) -> bool {
    let p = phi.len();
    if p == 0 {
        return true;
    }
    if phi.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (j, &v) in phi.iter().enumerate() {
        companion[(0, j)] = v;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .all(|l| l.norm() < 1.0 - STATIONARITY_MARGIN)
}

/// Φ(B)y and Φ(B)X on rows p..N.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedData {
    pub ty: DVector<f64>,
    pub tx: DMatrix<f64>,
}

/// Regression residuals `e` (length N) and innovations `a = Φ(B)e` (length N − p).
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSet {
    pub e: DVector<f64>,
    pub a: DVector<f64>,
}

/// ω_t = f(a_t; 0, σ²)^(1−q) on the conditional rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub q: f64,
}

impl WeightVector {
    pub fn unit(len: usize) -> Self {
        WeightVector {
            w: vec![1.0; len],
            q: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }
}

/// Applies v_t − Σ_j φ_j v_{t−j} for t = p..N.
pub fn backshift(v: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
    let p = phi.len();
    if p >= v.len() {
        return Err(Error::Dimension(format!(
            "AR order {p} needs more than {} observations",
            v.len()
        )));
    }
    Ok((p..v.len())
        .map(|t| {
            phi.iter()
                .enumerate()
                .fold(v[t], |acc, (j, &c)| acc - c * v[t - j - 1])
        })
        .collect())
}

pub fn backshift_transform(data: &Dataset, phi: &[f64]) -> Result<TransformedData> {
    let ty = backshift(data.y().as_slice(), phi)?;
    let rows = ty.len();
    let mut tx = DMatrix::zeros(rows, data.m());
    for k in 0..data.m() {
        let col: Vec<f64> = data.x().column(k).iter().copied().collect();
        let tcol = backshift(&col, phi)?;
        tx.column_mut(k).copy_from_slice(&tcol);
    }
    Ok(TransformedData {
        ty: DVector::from_vec(ty),
        tx,
    })
}

/// e = y − Xβ.
pub fn regression_residuals(data: &Dataset, beta: &[f64]) -> Result<DVector<f64>> {
    if beta.len() != data.m() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} covariates",
            beta.len(),
            data.m()
        )));
    }
    let b = DVector::from_column_slice(beta);
    Ok(data.y() - data.x() * b)
}

pub fn residuals(data: &Dataset, params: &ParameterVector) -> Result<ResidualSet> {
    if params.m() != data.m() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} covariates",
            params.m(),
            data.m()
        )));
    }
    let e = regression_residuals(data, &params.beta)?;
    let a = backshift(e.as_slice(), &params.phi)?;
    Ok(ResidualSet {
        e,
        a: DVector::from_vec(a),
    })
}

/// log of the N(0, σ²) density at `a`.
pub fn normal_log_density(a: f64, sigma2: f64) -> f64 {
    -0.5 * (LN_2PI + sigma2.ln()) - a * a / (2.0 * sigma2)
}

/// Deformed logarithm evaluated from `ln u`.
pub fn lq_from_log(log_u: f64, q: f64) -> f64 {
    let d = 1.0 - q;
    if d.abs() < LQ_LOG_SWITCH {
        log_u
    } else {
        (d * log_u).exp_m1() / d
    }
}

/// L_q(u) = (u^(1−q) − 1)/(1 − q), and log u at q = 1.
pub fn lq(u: f64, q: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(Error::Domain(format!("lq needs u > 0, got {u}")));
    }
    check_q_positive(q)?;
    Ok(lq_from_log(u.ln(), q))
}

pub(crate) fn check_q_positive(q: f64) -> Result<()> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    Ok(())
}

/// Per-row log densities of the innovations.
pub fn innovation_log_densities(data: &Dataset, params: &ParameterVector) -> Result<Vec<f64>> {
    params.check_against(data)?;
    let r = residuals(data, params)?;
    Ok(r.a
        .iter()
        .map(|&a| normal_log_density(a, params.sigma2))
        .collect())
}

/// Σ_{t>p} log f(a_t; 0, σ²).
pub fn conditional_log_likelihood(data: &Dataset, params: &ParameterVector) -> Result<f64> {
    lq_likelihood(data, params, 1.0)
}

/// Σ_{t>p} L_q(f(a_t; 0, σ²)).
pub fn lq_likelihood(data: &Dataset, params: &ParameterVector, q: f64) -> Result<f64> {
    check_q_positive(q)?;
    Ok(innovation_log_densities(data, params)?
        .into_iter()
        .map(|ld| lq_from_log(ld, q))
        .sum())
}

/// ω_t from per-row log densities; exactly 1 when q = 1.
pub fn weights_from_log_densities(log_densities: &[f64], q: f64) -> WeightVector {
    let d = 1.0 - q;
    let w = log_densities
        .iter()
        .map(|&ld| (d * ld).exp().max(WEIGHT_FLOOR))
        .collect();
    WeightVector { w, q }
}

pub fn weights(data: &Dataset, params: &ParameterVector, q: f64) -> Result<WeightVector> {
    check_q_positive(q)?;
    let ld = innovation_log_densities(data, params)?;
    Ok(weights_from_log_densities(&ld, q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn backshift_ar1_by_hand() {
        let ty = backshift(&[1.0, 2.0, 3.0, 4.0], &[0.5]).unwrap();
        assert_eq!(ty, vec![1.5, 2.0, 2.5]);
    }

    #[test]
    fn backshift_ar2_by_hand() {
        let ty = backshift(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.8, -0.2]).unwrap();
        let expect = [3.0 - 1.6 + 0.2, 4.0 - 2.4 + 0.4, 5.0 - 3.2 + 0.6];
        for (a, b) in ty.iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_relative_eq!(ty[0], 1.6, epsilon = 1e-12);
        assert_relative_eq!(ty[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(ty[2], 2.4, epsilon = 1e-12);
    }

    #[test]
    fn empty_filter_is_identity() {
        let y = [0.3, -1.0, 2.5];
        assert_eq!(backshift(&y, &[]).unwrap(), y.to_vec());
    }

    #[test]
    fn order_at_least_n_is_rejected() {
        assert!(matches!(
            backshift(&[1.0, 2.0], &[0.1, 0.2]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn residuals_by_hand() {
        let data = Dataset::new(DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]), col(&[1.0; 4])).unwrap();
        let params = ParameterVector::new(vec![2.0], vec![0.5], 1.0);
        let r = residuals(&data, &params).unwrap();
        assert_eq!(r.e.as_slice(), &[-1.0, 0.0, 1.0, 2.0]);
        assert_eq!(r.a.as_slice(), &[0.5, 1.0, 1.5]);
    }

    #[test]
    fn exact_fit_has_zero_residuals() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.5, 1.0, -1.0, 1.0, 2.0, 1.0, 0.0]);
        let y = &x * DVector::from_vec(vec![1.5, -2.0]);
        let data = Dataset::new(y, x).unwrap();
        let r = residuals(&data, &ParameterVector::new(vec![1.5, -2.0], vec![0.3], 1.0)).unwrap();
        assert!(r.e.amax() < 1e-15);
        assert!(r.a.amax() < 1e-15);
    }

    #[test]
    fn loglik_at_zero_innovation() {
        let data = Dataset::new(DVector::from_vec(vec![1.0, 1.0]), col(&[1.0, 1.0])).unwrap();
        let params = ParameterVector::new(vec![1.0], vec![0.2], 1.0);
        let ll = conditional_log_likelihood(&data, &params).unwrap();
        assert_relative_eq!(ll, -0.918_938_533_204_672_7, epsilon = 1e-15);

        let doubled = ParameterVector::new(vec![1.0], vec![0.2], 2.0);
        let ll2 = conditional_log_likelihood(&data, &doubled).unwrap();
        assert_relative_eq!(ll - ll2, 0.5 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn loglik_rejects_nonpositive_variance() {
        let data = Dataset::new(DVector::from_vec(vec![1.0, 1.0, 2.0]), col(&[1.0; 3])).unwrap();
        let params = ParameterVector::new(vec![1.0], vec![], 0.0);
        assert!(matches!(
            conditional_log_likelihood(&data, &params),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn lq_values() {
        assert_relative_eq!(lq(std::f64::consts::E, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        for q in [0.1, 0.5, 0.99, 1.0, 1.7] {
            assert_eq!(lq(1.0, q).unwrap(), 0.0);
        }
        assert_relative_eq!(lq(4.0, 0.5).unwrap(), 2.0, epsilon = 1e-15);
        assert!(lq(0.0, 0.5).is_err());
        assert!(lq(-1.0, 0.5).is_err());
    }

    #[test]
    fn lq_is_continuous_at_one() {
        let u = 0.37;
        let below = lq(u, 1.0 - 1e-7).unwrap();
        assert_relative_eq!(below, u.ln(), epsilon = 1e-7);
        assert_eq!(lq(u, 1.0 - 1e-12).unwrap(), u.ln());
    }

    #[test]
    fn weight_by_hand() {
        // φ_N(2) = 0.05399096651318806, square root 0.2323595...
        let data = Dataset::new(DVector::from_vec(vec![2.0]), col(&[0.0])).unwrap();
        let params = ParameterVector::new(vec![0.0], vec![], 1.0);
        let w = weights(&data, &params, 0.5).unwrap();
        assert_relative_eq!(w.w[0], 0.053_990_966_513_188_06f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(w.w[0], 0.23236, epsilon = 1e-5);
    }

    #[test]
    fn unit_weights_at_q_one_and_unit_density() {
        let data = Dataset::new(DVector::from_vec(vec![0.3, -2.0, 5.0]), col(&[0.0; 3])).unwrap();
        let params = ParameterVector::new(vec![0.0], vec![0.4], 0.7);
        assert!(weights(&data, &params, 1.0).unwrap().w.iter().all(|&w| w == 1.0));

        let zero = Dataset::new(DVector::from_vec(vec![0.0; 3]), col(&[0.0; 3])).unwrap();
        let unit_density = ParameterVector::new(vec![0.0], vec![0.4], 1.0 / (2.0 * std::f64::consts::PI));
        for q in [0.2, 0.6, 0.95] {
            for w in weights(&zero, &unit_density, q).unwrap().w {
                assert_relative_eq!(w, 1.0, epsilon = 1e-14);
            }
            assert!(lq_likelihood(&zero, &unit_density, q).unwrap().abs() < 1e-14);
        }
    }

    #[test]
    fn lq_likelihood_at_one_is_loglik_exactly() {
        let data = Dataset::from_rows(
            vec![0.2, 1.4, -0.7, 2.2, 0.9],
            &[vec![1.0, 0.1], vec![1.0, -0.4], vec![1.0, 0.8], vec![1.0, 1.3], vec![1.0, -0.2]],
        )
        .unwrap();
        let params = ParameterVector::new(vec![0.4, 0.9], vec![0.3], 0.8);
        assert_eq!(
            lq_likelihood(&data, &params, 1.0).unwrap(),
            conditional_log_likelihood(&data, &params).unwrap()
        );
    }

    #[test]
    fn lq_likelihood_matches_pointwise_oracle() {
        let data = Dataset::from_rows(
            vec![0.2, 1.4, -0.7, 2.2, 0.9],
            &[vec![0.1], vec![-0.4], vec![0.8], vec![1.3], vec![-0.2]],
        )
        .unwrap();
        let params = ParameterVector::new(vec![0.9], vec![0.3], 0.8);
        let e: Vec<f64> = (0..5).map(|t| data.y()[t] - 0.9 * data.x()[(t, 0)]).collect();
        let (mut ll, mut lqsum) = (0.0, 0.0);
        for t in 1..5 {
            let a: f64 = e[t] - 0.3 * e[t - 1];
            let dens = (-a * a / (2.0 * 0.8)).exp() / (2.0 * std::f64::consts::PI * 0.8).sqrt();
            ll += dens.ln();
            lqsum += (dens.powf(0.1) - 1.0) / 0.1;
        }
        assert_relative_eq!(conditional_log_likelihood(&data, &params).unwrap(), ll, epsilon = 1e-12);
        assert_relative_eq!(lq_likelihood(&data, &params, 0.9).unwrap(), lqsum, epsilon = 1e-12);
    }

    #[test]
    fn stationarity_check() {
        assert!(is_stationary(&[]));
        assert!(is_stationary(&[0.8, -0.2]));
        assert!(is_stationary(&[0.5]));
        assert!(!is_stationary(&[1.0]));
        assert!(!is_stationary(&[1.15]));
        assert!(!is_stationary(&[0.5, 0.6]));
    }

    #[test]
    fn dataset_rejects_non_finite() {
        let x = col(&[1.0, f64::NAN]);
        assert!(Dataset::new(DVector::from_vec(vec![1.0, 2.0]), x).is_err());
        assert!(Dataset::new(DVector::from_vec(vec![1.0, f64::INFINITY]), col(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn theta_round_trip() {
        let p = ParameterVector::new(vec![1.0, 2.0], vec![0.5], 3.0);
        let theta = p.to_theta();
        assert_eq!(theta.as_slice(), &[1.0, 2.0, 0.5, 3.0]);
        assert_eq!(ParameterVector::from_theta(&theta, 2, 1).unwrap(), p);
    }
}
