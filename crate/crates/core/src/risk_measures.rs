//! VaR and ES on parametric models and on discrete scenario distributions.
//!
//! Conventions: `alpha` is the tail probability, `VaR_alpha(X)` is the
//! left-continuous quantile at `1 - alpha` and `ES_alpha(X)` is the average of
//! `VaR_beta(X)` over `beta` in `(0, alpha]`.

use crate::distributions::{ScenarioMatrix, UnivariateModel};
use crate::error::{DqError, Result};
use serde::{Deserialize, Serialize};

/// Slack when comparing `alpha * N` with an integer count, so that levels
/// such as `0.05` with `N = 100` are treated as exactly 5 scenarios.
const COUNT_SLACK: f64 = 1e-9;
const MASS_SLACK: f64 = 1e-12;
const MAX_BISECTIONS: usize = 200;

/// Probability level in the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Level(f64);

impl Level {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(DqError::InvalidLevel(alpha))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Level {
    type Error = DqError;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<Level> for f64 {
    fn from(level: Level) -> f64 {
        level.0
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Compensated running sum.
#[derive(Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// A discrete distribution on finitely many atoms.
///
/// Atoms are stored once each in increasing order. Tail masses are kept as
/// suffix sums so VaR, ES and exceedance probabilities cost `O(log N)`.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    probs: Vec<f64>,
    /// `P(X > values[k])`.
    upper: Vec<f64>,
    /// `E[X 1{X > values[k]}]`.
    upper_sum: Vec<f64>,
    /// For equally likely samples: sample size and `#{X > values[k]}`.
    counts: Option<(usize, Vec<usize>)>,
}

impl EmpiricalDistribution {
    /// Equally likely observations.
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        check_sample(sample)?;
        let mut sorted = sample.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let n = sorted.len();
        let mut values: Vec<f64> = Vec::new();
        let mut mult: Vec<usize> = Vec::new();
        for x in sorted {
            if values.last() == Some(&x) {
                *mult.last_mut().unwrap() += 1;
            } else {
                values.push(x);
                mult.push(1);
            }
        }
        let probs = mult.iter().map(|&m| m as f64 / n as f64).collect();
        let mut above = vec![0usize; values.len()];
        for k in (0..values.len().saturating_sub(1)).rev() {
            above[k] = above[k + 1] + mult[k + 1];
        }
        let mut dist = Self::assemble(values, probs);
        dist.upper = above.iter().map(|&c| c as f64 / n as f64).collect();
        dist.counts = Some((n, above));
        Ok(dist)
    }

    /// Observations with explicit probabilities summing to one.
    pub fn from_weighted(sample: &[f64], probs: &[f64]) -> Result<Self> {
        check_sample(sample)?;
        if probs.len() != sample.len() {
            return Err(DqError::invalid("sample and probability lengths differ"));
        }
        let mut pairs: Vec<(f64, f64)> =
            sample.iter().copied().zip(probs.iter().copied()).filter(|&(_, p)| p > 0.0).collect();
        if pairs.is_empty() {
            return Err(DqError::invalid("all probabilities are zero"));
        }
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut values: Vec<f64> = Vec::new();
        let mut masses: Vec<f64> = Vec::new();
        for (x, p) in pairs {
            if values.last() == Some(&x) {
                *masses.last_mut().unwrap() += p;
            } else {
                values.push(x);
                masses.push(p);
            }
        }
        let total: f64 = masses.iter().sum();
        for p in masses.iter_mut() {
            *p /= total;
        }
        Ok(Self::assemble(values, masses))
    }

    /// Distribution of `values[i]` under the scenario probabilities of `m`.
    pub fn under(m: &ScenarioMatrix, values: &[f64]) -> Result<Self> {
        match m.weights() {
            None => Self::from_sample(values),
            Some(p) => Self::from_weighted(values, p),
        }
    }

    fn assemble(values: Vec<f64>, probs: Vec<f64>) -> Self {
        let k = values.len();
        let mut upper = vec![0.0; k];
        let mut upper_sum = vec![0.0; k];
        let mut mass = Neumaier::default();
        let mut total = Neumaier::default();
        for j in (0..k.saturating_sub(1)).rev() {
            mass.add(probs[j + 1]);
            total.add(probs[j + 1] * values[j + 1]);
            upper[j] = mass.value();
            upper_sum[j] = total.value();
        }
        Self { values, probs, upper, upper_sum, counts: None }
    }

    /// Distinct support points in increasing order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Cumulative probabilities `F(values[k])`.
    pub fn cumulative(&self) -> Vec<f64> {
        self.upper.iter().map(|u| 1.0 - u).collect()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    pub fn mean(&self) -> f64 {
        self.upper_sum[0] + self.probs[0] * self.values[0]
    }

    /// `P(X > x)`.
    pub fn sf(&self, x: f64) -> f64 {
        let idx = self.values.partition_point(|&v| v <= x);
        if idx == 0 {
            1.0
        } else {
            self.upper[idx - 1]
        }
    }

    /// Index of `VaR_alpha`: the first atom whose upper tail mass is at most
    /// `alpha`.
    fn var_index(&self, alpha: f64) -> usize {
        match &self.counts {
            Some((n, above)) => {
                let allowed = (alpha * *n as f64 + COUNT_SLACK).floor() as usize;
                above.partition_point(|&c| c > allowed)
            }
            None => self.upper.partition_point(|&u| u > alpha + MASS_SLACK),
        }
        .min(self.values.len() - 1)
    }

    pub fn var(&self, alpha: Level) -> f64 {
        self.values[self.var_index(alpha.get())]
    }

    /// Exact integral of the quantile function over the top `alpha` mass.
    pub fn es(&self, alpha: Level) -> f64 {
        let a = alpha.get();
        let k = self.var_index(a);
        let boundary = (a - self.upper[k]).max(0.0);
        (self.upper_sum[k] + boundary * self.values[k]) / a
    }
}

fn check_sample(sample: &[f64]) -> Result<()> {
    if sample.is_empty() {
        return Err(DqError::invalid("sample is empty"));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(DqError::invalid("sample contains non-finite values"));
    }
    Ok(())
}

pub fn var_empirical(sample: &EmpiricalDistribution, alpha: Level) -> f64 {
    sample.var(alpha)
}

pub fn es_empirical(sample: &EmpiricalDistribution, alpha: Level) -> f64 {
    sample.es(alpha)
}

/// Number of observations strictly above `VaR_alpha` allowed in a sample of
/// `n` equally likely points.
pub(crate) fn tail_count(alpha: f64, n: usize) -> usize {
    ((alpha * n as f64 + COUNT_SLACK).floor() as usize).min(n - 1)
}

/// `VaR_alpha` of equally likely observations; reorders `buf`.
pub(crate) fn var_in_place(buf: &mut [f64], alpha: f64) -> f64 {
    let n = buf.len();
    let idx = n - 1 - tail_count(alpha, n);
    *buf.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// `ES_alpha` of equally likely observations; reorders `buf`.
pub(crate) fn es_in_place(buf: &mut [f64], alpha: f64) -> f64 {
    let n = buf.len();
    let m = tail_count(alpha, n);
    let idx = n - 1 - m;
    let (_, &mut v, top) = buf.select_nth_unstable_by(idx, f64::total_cmp);
    let mut acc = Neumaier::default();
    for &x in top.iter() {
        acc.add(x);
    }
    let scaled = alpha * n as f64;
    (acc.value() + (scaled - m as f64).max(0.0) * v) / scaled
}

/// Anything with VaR and ES at every level.
pub trait TailRisk {
    fn value_at_risk(&self, alpha: Level) -> f64;
    fn expected_shortfall(&self, alpha: Level) -> Result<f64>;
}

impl TailRisk for UnivariateModel {
    fn value_at_risk(&self, alpha: Level) -> f64 {
        self.var(alpha)
    }

    fn expected_shortfall(&self, alpha: Level) -> Result<f64> {
        self.es(alpha)
    }
}

impl TailRisk for EmpiricalDistribution {
    fn value_at_risk(&self, alpha: Level) -> f64 {
        self.var(alpha)
    }

    fn expected_shortfall(&self, alpha: Level) -> Result<f64> {
        Ok(self.es(alpha))
    }
}

/// Quantile function of the superquantile transform: `p -> ES_{1-p}`.
pub fn superquantile_value<D: TailRisk + ?Sized>(dist: &D, p: f64) -> Result<f64> {
    crate::distributions::check_open_unit("p", p)?;
    dist.expected_shortfall(Level::new(1.0 - p)?)
}

/// PELVE: the `c` in `[1, 1/alpha)` with `ES_{c alpha}(X) = VaR_alpha(X)`.
pub fn pelve<D: TailRisk + ?Sized>(dist: &D, alpha: Level) -> Result<f64> {
    let a = alpha.get();
    let target = dist.value_at_risk(alpha);
    let tol = 1e-9 * target.abs().max(1.0);
    let gap = |c: f64| -> Result<f64> { Ok(dist.expected_shortfall(Level::new(c * a)?)? - target) };

    let mut lo = 1.0;
    let g_lo = gap(lo)?;
    if g_lo.abs() <= tol {
        return Ok(lo);
    }
    if g_lo < 0.0 {
        return Err(DqError::Calibration(format!("ES is below VaR at level {a}")));
    }
    let mut hi = (1.0 - 1e-12) / a;
    if gap(hi)? > tol {
        return Err(DqError::Calibration(format!(
            "no c in [1, 1/alpha) equates ES_(c alpha) with VaR_alpha at alpha = {a}"
        )));
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let g = gap(mid)?;
        if g.abs() <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
