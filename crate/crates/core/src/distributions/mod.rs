//! Univariate loss models, elliptical specifications and scenario samplers.

mod elliptical;
mod iid;
mod scenario;
pub(crate) mod special;

pub use elliptical::{sample_elliptical, EllipticalFamily, EllipticalSpec};
pub use scenario::{Probabilities, ScenarioMatrix};

pub(crate) use elliptical::{stream_rng, validate_dispersion, BLOCK_ROWS};
pub use iid::sample_iid;

use crate::error::{DqError, Result};
use crate::risk_measures::Level;
use serde::{Deserialize, Serialize};
use special::*;

/// A univariate loss distribution.
///
/// `Pareto` has survival function `(x / scale)^(-tail_index)` on `x >= scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum UnivariateModel {
    Normal { loc: f64, scale: f64 },
    StudentT { dof: f64, loc: f64, scale: f64 },
    Uniform { lower: f64, upper: f64 },
    Pareto { tail_index: f64, scale: f64 },
}

impl UnivariateModel {
    pub fn normal(loc: f64, scale: f64) -> Result<Self> {
        positive("scale", scale)?;
        finite("loc", loc)?;
        Ok(Self::Normal { loc, scale })
    }

    pub fn standard_normal() -> Self {
        Self::Normal { loc: 0.0, scale: 1.0 }
    }

    pub fn student_t(dof: f64, loc: f64, scale: f64) -> Result<Self> {
        positive("degrees of freedom", dof)?;
        positive("scale", scale)?;
        finite("loc", loc)?;
        Ok(Self::StudentT { dof, loc, scale })
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        finite("lower", lower)?;
        finite("upper", upper)?;
        if lower >= upper {
            return Err(DqError::invalid(format!(
                "uniform bounds must satisfy lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self::Uniform { lower, upper })
    }

    pub fn pareto(tail_index: f64, scale: f64) -> Result<Self> {
        positive("tail index", tail_index)?;
        positive("scale", scale)?;
        Ok(Self::Pareto { tail_index, scale })
    }

    /// Left-continuous inverse of the cdf at `p` in (0, 1).
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_open_unit("p", p)?;
        Ok(match *self {
            Self::Normal { loc, scale } => loc + scale * normal_quantile(p),
            Self::StudentT { dof, loc, scale } => loc + scale * t_isf(dof, 1.0 - p),
            Self::Uniform { lower, upper } => lower + (upper - lower) * p,
            Self::Pareto { tail_index, scale } => scale * (1.0 - p).powf(-1.0 / tail_index),
        })
    }

    /// `VaR_alpha`, the quantile at `1 - alpha`, evaluated through the upper
    /// tail so that small `alpha` keeps full relative precision.
    pub fn var(&self, alpha: Level) -> f64 {
        let a = alpha.get();
        match *self {
            Self::Normal { loc, scale } => loc + scale * normal_isf(a),
            Self::StudentT { dof, loc, scale } => loc + scale * t_isf(dof, a),
            Self::Uniform { lower, upper } => upper - (upper - lower) * a,
            Self::Pareto { tail_index, scale } => scale * a.powf(-1.0 / tail_index),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { loc, scale } => normal_cdf((x - loc) / scale),
            Self::StudentT { dof, loc, scale } => t_cdf(dof, (x - loc) / scale),
            Self::Uniform { lower, upper } => ((x - lower) / (upper - lower)).clamp(0.0, 1.0),
            Self::Pareto { .. } => 1.0 - self.sf(x),
        }
    }

    /// Survival function `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { loc, scale } => normal_sf((x - loc) / scale),
            Self::StudentT { dof, loc, scale } => t_sf(dof, (x - loc) / scale),
            Self::Uniform { lower, upper } => ((upper - x) / (upper - lower)).clamp(0.0, 1.0),
            Self::Pareto { tail_index, scale } => {
                if x <= scale {
                    1.0
                } else {
                    (x / scale).powf(-tail_index)
                }
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match *self {
            Self::Normal { loc, scale } => normal_pdf((x - loc) / scale) / scale,
            Self::StudentT { dof, loc, scale } => t_pdf(dof, (x - loc) / scale) / scale,
            Self::Uniform { lower, upper } => {
                if (lower..=upper).contains(&x) {
                    1.0 / (upper - lower)
                } else {
                    0.0
                }
            }
            Self::Pareto { tail_index, scale } => {
                if x < scale {
                    0.0
                } else {
                    tail_index / scale * (x / scale).powf(-tail_index - 1.0)
                }
            }
        }
    }

    pub fn has_finite_mean(&self) -> bool {
        match *self {
            Self::StudentT { dof, .. } => dof > 1.0,
            Self::Pareto { tail_index, .. } => tail_index > 1.0,
            _ => true,
        }
    }

    pub fn mean(&self) -> Result<f64> {
        self.require_finite_mean("mean")?;
        Ok(match *self {
            Self::Normal { loc, .. } | Self::StudentT { loc, .. } => loc,
            Self::Uniform { lower, upper } => 0.5 * (lower + upper),
            Self::Pareto { tail_index, scale } => scale * tail_index / (tail_index - 1.0),
        })
    }

    /// Closed-form expected shortfall `ES_alpha`.
    pub fn es(&self, alpha: Level) -> Result<f64> {
        self.require_finite_mean("ES")?;
        let a = alpha.get();
        Ok(match *self {
            Self::Normal { loc, scale } => loc + scale * normal_pdf(normal_isf(a)) / a,
            Self::StudentT { dof, loc, scale } => {
                let t = t_isf(dof, a);
                loc + scale * t_pdf(dof, t) / a * (dof + t * t) / (dof - 1.0)
            }
            Self::Uniform { lower, upper } => upper - 0.5 * (upper - lower) * a,
            Self::Pareto { tail_index, scale } => {
                tail_index / (tail_index - 1.0) * scale * a.powf(-1.0 / tail_index)
            }
        })
    }

    /// Same family re-expressed with location 0 and unit scale, where that is
    /// meaningful (normal and t).
    pub fn standardized(&self) -> Self {
        match *self {
            Self::Normal { .. } => Self::standard_normal(),
            Self::StudentT { dof, .. } => Self::StudentT { dof, loc: 0.0, scale: 1.0 },
            other => other,
        }
    }

    fn require_finite_mean(&self, measure: &'static str) -> Result<()> {
        if self.has_finite_mean() {
            Ok(())
        } else {
            Err(DqError::UnsupportedMeasure { measure, model: format!("{self:?}") })
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(DqError::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(DqError::invalid(format!("{name} must be finite, got {v}")))
    }
}

pub(crate) fn check_open_unit(name: &str, p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(DqError::invalid(format!("{name} must lie in (0, 1), got {p}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lvl(a: f64) -> Level {
        Level::new(a).unwrap()
    }

    fn families() -> Vec<UnivariateModel> {
        vec![
            UnivariateModel::normal(0.0, 1.0).unwrap(),
            UnivariateModel::normal(3.0, 2.5).unwrap(),
            UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap(),
            UnivariateModel::student_t(0.7, 1.0, 2.0).unwrap(),
            UnivariateModel::student_t(7.5, -1.0, 0.5).unwrap(),
            UnivariateModel::uniform(-1.0, 1.0).unwrap(),
            UnivariateModel::pareto(2.0, 1.0).unwrap(),
            UnivariateModel::pareto(0.8, 3.0).unwrap(),
        ]
    }

    #[test]
    fn quantile_examples() {
        let n = UnivariateModel::standard_normal();
        assert_eq!(n.quantile(0.5).unwrap(), 0.0);
        assert!((n.quantile(0.95).unwrap() - 1.6449).abs() < 1e-4);
        let p = UnivariateModel::pareto(2.0, 1.0).unwrap();
        assert!((p.quantile(0.99).unwrap() - 10.0).abs() < 1e-9);
        assert!(n.quantile(0.0).is_err());
        assert!(n.quantile(1.0).is_err());
        assert!(n.quantile(f64::NAN).is_err());
    }

    #[test]
    fn cdf_examples() {
        let t3 = UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap();
        assert_eq!(t3.cdf(0.0), 0.5);
        // 0.5 + (1/π)[(x/√3)/(1+x²/3) + arctan(x/√3)] at x = 6.5889
        assert!((t3.cdf(6.5889) - 0.996_442_77).abs() < 5e-5);
        let u = UnivariateModel::uniform(-1.0, 1.0).unwrap();
        assert_eq!(u.cdf(0.5), 0.75);
    }

    #[test]
    fn density_examples() {
        let n = UnivariateModel::standard_normal();
        assert!((n.density(0.0) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        let t3 = UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap();
        // Γ(2) / (Γ(1.5) √(3π)) = 2 / (√π √(3π))
        let want = 2.0 / (std::f64::consts::PI * 3f64.sqrt());
        assert!((t3.density(0.0) - want).abs() < 1e-12);
        assert!((t3.density(0.0) - 0.36755).abs() < 1e-5);
        assert_eq!(UnivariateModel::uniform(0.0, 2.0).unwrap().density(1.0), 0.5);
        assert_eq!(UnivariateModel::pareto(2.0, 1.0).unwrap().density(0.5), 0.0);
    }

    #[test]
    fn es_examples() {
        let n = UnivariateModel::standard_normal();
        assert!((n.es(lvl(0.05)).unwrap() - 2.0627).abs() < 1e-3);
        let t3 = UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap();
        assert!((t3.es(lvl(0.05)).unwrap() - 3.874).abs() < 2e-3);
        let u = UnivariateModel::uniform(-1.0, 1.0).unwrap();
        assert!((u.es(lvl(0.05)).unwrap() - 0.95).abs() < 1e-12);
    }

    #[test]
    fn es_rejects_infinite_mean() {
        let t1 = UnivariateModel::student_t(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(t1.es(lvl(0.05)), Err(DqError::UnsupportedMeasure { .. })));
        let p = UnivariateModel::pareto(0.9, 1.0).unwrap();
        assert!(p.es(lvl(0.05)).unwrap_err().is_numerical());
    }

    #[test]
    fn es_matches_quadrature_of_var() {
        // ES_a = (1/a) ∫_0^a VaR_b db by midpoint rule in u = b/a
        for m in families().into_iter().filter(|m| m.has_finite_mean()) {
            for &a in &[0.01, 0.05, 0.3] {
                let k = 200_000;
                let mut acc = 0.0;
                for i in 0..k {
                    let b = a * (i as f64 + 0.5) / k as f64;
                    acc += m.var(lvl(b));
                }
                let quad = acc / k as f64;
                let es = m.es(lvl(a)).unwrap();
                assert!((quad - es).abs() < 2e-3 * es.abs().max(1.0), "{m:?} a={a}: {quad} vs {es}");
            }
        }
    }

    #[test]
    fn quantile_cdf_round_trip() {
        for m in families() {
            let mut p = 0.001;
            while p < 0.999 {
                let x = m.quantile(p).unwrap();
                assert!((m.cdf(x) - p).abs() <= 1e-9, "{m:?} p={p}");
                p += 0.0049;
            }
        }
    }

    #[test]
    fn es_dominates_var() {
        for m in families().into_iter().filter(|m| m.has_finite_mean()) {
            for i in 1..=50 {
                let a = lvl(0.01 * i as f64);
                assert!(m.es(a).unwrap() >= m.var(a) - 1e-12, "{m:?}");
            }
        }
    }

    #[test]
    fn cdf_derivative_matches_density() {
        let h = 1e-5;
        for m in families() {
            for &p in &[0.05, 0.2, 0.5, 0.8, 0.95] {
                let x = m.quantile(p).unwrap();
                let (lo, hi) = (x - h, x + h);
                if let UnivariateModel::Pareto { scale, .. } = m {
                    if lo < scale {
                        continue;
                    }
                }
                let numeric = (m.cdf(hi) - m.cdf(lo)) / (2.0 * h);
                let d = m.density(x);
                assert!((numeric - d).abs() <= 1e-6 * d, "{m:?} x={x}: {numeric} vs {d}");
            }
        }
    }

    #[test]
    fn density_integrates_to_interval_mass() {
        // composite Simpson on [q(0.001), q(0.999)] must recover mass 0.998
        for m in families() {
            let (a, b) = (m.quantile(0.001).unwrap(), m.quantile(0.999).unwrap());
            let k = 200_000;
            let h = (b - a) / k as f64;
            let mut s = m.density(a) + m.density(b);
            for i in 1..k {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * m.density(a + i as f64 * h);
            }
            let mass = s * h / 3.0;
            assert!((mass - 0.998).abs() < 1e-6, "{m:?}: {mass}");
        }
    }
}
