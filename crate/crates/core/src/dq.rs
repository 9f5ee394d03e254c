//! Diversification quotient and ratio on scenario data.
//!
//! `DQ_alpha(X) = alpha* / alpha` with
//! `alpha* = inf{beta in (0,1) : rho_beta(S) <= sum_i rho_alpha(X_i)}`
//! and `inf(empty) = 1`.

use crate::distributions::ScenarioMatrix;
use crate::error::{DqError, Result};
use crate::risk_measures::{es_in_place, var_in_place, EmpiricalDistribution, Level};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const BISECTION_TOL: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;
const STDERR_BATCHES: usize = 20;
const STDERR_MIN_ROWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    VaR,
    ES,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::VaR => "var",
            Self::ES => "es",
        })
    }
}

impl FromStr for Measure {
    type Err = DqError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "var" => Ok(Self::VaR),
            "es" => Ok(Self::ES),
            _ => Err(DqError::invalid(format!("unknown risk measure {s:?} (expected var or es)"))),
        }
    }
}

/// How a DQ value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DqMethod {
    /// Bisection on `beta -> rho_beta(S)`.
    Bisection,
    /// `P(S > sum VaR_alpha(X_i)) / alpha`.
    Exceedance,
    /// `min_r E[(r (S - sum ES_alpha(X_i)) + 1)_+] / alpha`.
    Rmin,
    /// Closed form for a parametric model.
    Analytic,
}

impl fmt::Display for DqMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Bisection => "bisection",
            Self::Exceedance => "exceedance",
            Self::Rmin => "rmin",
            Self::Analytic => "analytic",
        })
    }
}

impl FromStr for DqMethod {
    type Err = DqError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bisection" => Ok(Self::Bisection),
            "exceedance" => Ok(Self::Exceedance),
            "rmin" => Ok(Self::Rmin),
            "analytic" => Ok(Self::Analytic),
            _ => Err(DqError::invalid(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqResult {
    pub value: f64,
    pub alpha: Level,
    pub alpha_star: f64,
    pub method: DqMethod,
    /// Batch-means Monte Carlo standard error, for equally likely samples.
    pub stderr: Option<f64>,
}

impl DqResult {
    pub(crate) fn from_alpha_star(alpha_star: f64, alpha: Level, method: DqMethod) -> Self {
        let alpha_star = alpha_star.clamp(0.0, 1.0);
        Self { value: alpha_star / alpha.get(), alpha, alpha_star, method, stderr: None }
    }
}

/// `rho_alpha(X_i)` for every column.
pub fn marginal_risks(m: &ScenarioMatrix, measure: Measure, alpha: Level) -> Result<Vec<f64>> {
    let a = alpha.get();
    (0..m.n_cols())
        .map(|j| {
            let mut col = m.column(j);
            if m.is_uniform() {
                Ok(match measure {
                    Measure::VaR => var_in_place(&mut col, a),
                    Measure::ES => es_in_place(&mut col, a),
                })
            } else {
                let d = EmpiricalDistribution::under(m, &col)?;
                Ok(risk(&d, measure, alpha))
            }
        })
        .collect()
}

fn risk(d: &EmpiricalDistribution, measure: Measure, alpha: Level) -> f64 {
    match measure {
        Measure::VaR => d.var(alpha),
        Measure::ES => d.es(alpha),
    }
}

fn aggregate(m: &ScenarioMatrix) -> Result<EmpiricalDistribution> {
    EmpiricalDistribution::under(m, &m.row_sums())
}

/// `alpha*` by bisection on the nonincreasing map `beta -> rho_beta(S)`.
pub fn alpha_star(m: &ScenarioMatrix, measure: Measure, alpha: Level) -> Result<f64> {
    let threshold: f64 = marginal_risks(m, measure, alpha)?.iter().sum();
    let s = aggregate(m)?;
    Ok(alpha_star_bisection(&s, measure, threshold))
}

fn alpha_star_bisection(s: &EmpiricalDistribution, measure: Measure, threshold: f64) -> f64 {
    // rho_{0+}(S) = max S; rho_{1-}(S) is min S for VaR and E[S] for ES
    if s.max() <= threshold {
        return 0.0;
    }
    let at_one = match measure {
        Measure::VaR => s.min(),
        Measure::ES => s.mean(),
    };
    if at_one > threshold {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let level = Level::new(mid).expect("bisection stays inside (0, 1)");
        if risk(s, measure, level) <= threshold {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `P(S > t)` as `alpha*`; the exceedance form of the VaR quotient.
fn alpha_star_exceedance(s: &EmpiricalDistribution, threshold: f64) -> f64 {
    s.sf(threshold)
}

/// `min_{r > 0} E[(r (S - t) + 1)_+]`, or 0 when `P(S > t) = 0`.
///
/// The objective is convex and piecewise linear in `r` with kinks at
/// `-1/(s_j - t)`. Scanning kinks from the most negative `s_j - t` upward,
/// the slope starts at `E[S] - t` and grows by `p_j (t - s_j)` per kink; the
/// first kink where it turns nonnegative is a global minimizer.
fn alpha_star_rmin(s: &EmpiricalDistribution, threshold: f64) -> f64 {
    if s.max() <= threshold {
        return 0.0;
    }
    let mut slope = s.mean() - threshold;
    if slope >= 0.0 {
        // infimum approached as r -> 0
        return 1.0;
    }
    let values = s.values();
    let probs = s.probabilities();
    let mut kink = None;
    for (k, (&v, &p)) in values.iter().zip(probs).enumerate() {
        let y = v - threshold;
        if y >= 0.0 {
            break;
        }
        slope -= p * y;
        if slope >= 0.0 {
            kink = Some((k, -1.0 / y));
            break;
        }
    }
    // the final slope is E[(S - t)_+] > 0, so a kink is always found; the
    // fallback covers rounding in the running slope
    let (k, r) = kink.unwrap_or_else(|| {
        let k = values.partition_point(|&v| v < threshold).saturating_sub(1);
        (k, -1.0 / (values[k] - threshold))
    });
    let mut total = 0.0;
    let mut comp = 0.0;
    for (&v, &p) in values[k + 1..].iter().zip(&probs[k + 1..]) {
        let term = p * (r * (v - threshold) + 1.0).max(0.0);
        let t = total + term;
        comp += if total.abs() >= term.abs() { (total - t) + term } else { (term - t) + total };
        total = t;
    }
    (total + comp).min(1.0)
}

/// DQ by an explicit route. VaR accepts `Exceedance` and `Bisection`; ES
/// accepts `Rmin` and `Bisection`.
pub fn dq(m: &ScenarioMatrix, measure: Measure, alpha: Level, method: DqMethod) -> Result<DqResult> {
    let mut result = dq_point(m, measure, alpha, method)?;
    result.stderr = batch_stderr(m, measure, alpha, method)?;
    Ok(result)
}

fn dq_point(m: &ScenarioMatrix, measure: Measure, alpha: Level, method: DqMethod) -> Result<DqResult> {
    let threshold: f64 = marginal_risks(m, measure, alpha)?.iter().sum();
    if measure == Measure::VaR && method == DqMethod::Exceedance && m.is_uniform() {
        // count / (alpha N) keeps integer ratios such as n exact
        let n = m.n_rows();
        let count = m.row_sums().iter().filter(|&&s| s > threshold).count();
        let value = count as f64 / (alpha.get() * n as f64);
        return Ok(DqResult { value, alpha, alpha_star: count as f64 / n as f64, method, stderr: None });
    }
    let s = aggregate(m)?;
    let a_star = match (measure, method) {
        (_, DqMethod::Bisection) => alpha_star_bisection(&s, measure, threshold),
        (Measure::VaR, DqMethod::Exceedance) => alpha_star_exceedance(&s, threshold),
        (Measure::ES, DqMethod::Rmin) => alpha_star_rmin(&s, threshold),
        _ => {
            return Err(DqError::invalid(format!(
                "method {method} does not apply to {measure} on scenario data"
            )))
        }
    };
    Ok(DqResult::from_alpha_star(a_star, alpha, method))
}

fn batch_stderr(m: &ScenarioMatrix, measure: Measure, alpha: Level, method: DqMethod) -> Result<Option<f64>> {
    let n = m.n_rows();
    if !m.is_uniform() || n < STDERR_MIN_ROWS {
        return Ok(None);
    }
    let size = n / STDERR_BATCHES;
    let values = (0..STDERR_BATCHES)
        .map(|b| {
            let block = m.row_block(b * size..(b + 1) * size);
            dq_point(&block, measure, alpha, method).map(|r| r.value)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(Some((var / k).sqrt()))
}

/// `P(S > sum_i VaR_alpha(X_i)) / alpha`.
pub fn dq_var(m: &ScenarioMatrix, alpha: Level) -> Result<DqResult> {
    dq(m, Measure::VaR, alpha, DqMethod::Exceedance)
}

pub fn dq_es(m: &ScenarioMatrix, alpha: Level, method: DqMethod) -> Result<DqResult> {
    dq(m, Measure::ES, alpha, method)
}

/// Diversification ratio `rho(S) / sum_i rho(X_i)`.
pub fn dr(m: &ScenarioMatrix, measure: Measure, alpha: Level) -> Result<f64> {
    let denom: f64 = marginal_risks(m, measure, alpha)?.iter().sum();
    if denom == 0.0 {
        return Err(DqError::UndefinedRatio);
    }
    Ok(risk(&aggregate(m)?, measure, alpha) / denom)
}
