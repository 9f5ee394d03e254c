//! Diversification quotients (DQ) based on VaR and ES.
//!
//! The crate covers empirical scenario sets, elliptical models and
//! multivariate regularly varying models, together with the dependence
//! structures that attain DQ's extreme values and portfolio-weight
//! optimization.

pub mod dependence;
pub mod distributions;
pub mod dq;
pub mod elliptical;
mod error;
pub mod mrv;
pub mod optimizer;
pub mod risk_measures;

pub use distributions::{
    sample_elliptical, EllipticalFamily, EllipticalSpec, Probabilities, ScenarioMatrix, UnivariateModel,
};
pub use dq::{alpha_star, dq, dq_es, dq_var, dr, DqMethod, DqResult, Measure};
pub use error::{DqError, Result};
pub use risk_measures::{
    es_empirical, pelve, superquantile_value, var_empirical, EmpiricalDistribution, Level, TailRisk,
};
