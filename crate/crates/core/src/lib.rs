//! Robust and classical conditional estimation for linear regression with
//! stationary AR(p) errors.
//!
//! The classical estimator maximizes the conditional Gaussian likelihood of
//! the innovations; the robust one maximizes the Lq-likelihood, which turns
//! into a weighted version of the same closed-form updates with weights
//! `f(a_t)^(1-q)`. Both run on one alternating engine ([`cmlq::ira_fit`] with
//! `q = 1` is [`cml::cml_fit`]).

pub mod cml;
pub mod cmlq;
pub mod datasets;
pub mod error;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod selection;
pub mod simulation;

pub use cml::{cml_fit, CmlFit, SolverControl};
pub use cmlq::{ira_fit, CmlqFit, SigmaRule};
pub use error::{Error, Result};
pub use inference::{asymptotic_report, AsymptoticReport};
pub use model::{Dataset, ParameterVector, WeightVector};
pub use selection::{raic, select_q, QSearchResult};
pub use simulation::{run_study, ContaminationSpec, MonteCarloReport, ScenarioConfig};
