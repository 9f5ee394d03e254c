//! Deterministic dependence structures that attain DQ's special values, and
//! a diagnostic for common tail events.

use crate::distributions::{ScenarioMatrix, UnivariateModel};
use crate::error::{DqError, Result};
use crate::risk_measures::Level;
use serde::{Deserialize, Serialize};

const GRID_SLACK: f64 = 1e-9;

/// `alpha * N` as an integer, or an error when it is not one.
fn integer_count(alpha: f64, n: usize) -> Result<usize> {
    let x = alpha * n as f64;
    let k = x.round();
    if (x - k).abs() > GRID_SLACK * x.max(1.0) {
        return Err(DqError::invalid(format!("alpha * N = {x} must be an integer")));
    }
    Ok(k as usize)
}

/// Row `j` is `(F_1^{-1}(u_j), ..., F_n^{-1}(u_j))` with `u_j = (j - 0.5) / N`.
pub fn make_comonotonic(marginals: &[UnivariateModel], rows: usize) -> Result<ScenarioMatrix> {
    if rows < 2 {
        return Err(DqError::invalid("a comonotonic grid needs at least 2 rows"));
    }
    if marginals.is_empty() {
        return Err(DqError::invalid("at least one marginal is required"));
    }
    let mut data = Vec::with_capacity(rows * marginals.len());
    for j in 0..rows {
        let u = (j as f64 + 0.5) / rows as f64;
        for m in marginals {
            data.push(m.quantile(u)?);
        }
    }
    ScenarioMatrix::from_row_major(marginals.len(), data)
}

/// Stratified construction with mutually exclusive marginal tail events and
/// an `n alpha`-concentrated joint tail.
///
/// With `u_j = (j - 0.5) / N`, `A_i = ((i-1) alpha, i alpha]` and
/// `B = (0, n alpha]`: column `i` is `1 + (i alpha - u) / alpha` on `A_i`,
/// `1` on `B \ A_i` and `0` outside `B`.
pub fn make_alpha_ce(n: usize, alpha: Level, rows: usize) -> Result<ScenarioMatrix> {
    if n < 2 {
        return Err(DqError::invalid("need at least 2 assets"));
    }
    let a = alpha.get();
    if a * n as f64 >= 1.0 {
        return Err(DqError::invalid(format!("alpha = {a} must be below 1/n = {}", 1.0 / n as f64)));
    }
    let per_slice = integer_count(a, rows)?;
    if per_slice == 0 {
        return Err(DqError::invalid("alpha * N must be at least 1"));
    }
    let mut data = vec![0.0; rows * n];
    for j in 0..rows {
        let slice = j / per_slice;
        if slice >= n {
            break;
        }
        let u = (j as f64 + 0.5) / rows as f64;
        let row = &mut data[j * n..(j + 1) * n];
        row.fill(1.0);
        row[slice] = 1.0 + ((slice + 1) as f64 * a - u) / a;
    }
    ScenarioMatrix::from_row_major(n, data)
}

/// One-hot rows cycling through the `n` coordinates; every column is
/// Bernoulli(1/n) and every row sums to 1.
pub fn make_multinomial_onehot(n: usize, rows: usize) -> Result<ScenarioMatrix> {
    if n < 2 {
        return Err(DqError::invalid("need at least 2 assets"));
    }
    if rows == 0 || !rows.is_multiple_of(n) {
        return Err(DqError::invalid(format!("N = {rows} must be a positive multiple of n = {n}")));
    }
    let mut data = vec![0.0; rows * n];
    for j in 0..rows {
        data[j * n + j % n] = 1.0;
    }
    ScenarioMatrix::from_row_major(n, data)
}

/// DQ^ES of two uniform losses on `[-1, 1]` whose sum is uniform on `[-t, t]`:
/// `(1 - (2 - 2 alpha) / t)_+ / alpha`.
pub fn dq_es_uniform_pair(t: f64, alpha: Level) -> Result<f64> {
    if !(t > 0.0 && t <= 2.0) {
        return Err(DqError::invalid(format!("t must lie in (0, 2], got {t}")));
    }
    let a = alpha.get();
    Ok((1.0 - (2.0 - 2.0 * a) / t).max(0.0) / a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEventDiagnostic {
    pub is_concentrated: bool,
    pub level: Level,
    /// Per column, the sorted indices of the `alpha N` largest scenarios.
    pub per_margin_tail_sets: Vec<Vec<usize>>,
}

/// Checks whether all columns share the same top-`alpha N` scenarios.
/// Ties are broken by ascending scenario index.
pub fn check_alpha_concentration(m: &ScenarioMatrix, alpha: Level) -> Result<TailEventDiagnostic> {
    if !m.is_uniform() {
        return Err(DqError::invalid("concentration check needs equally likely scenarios"));
    }
    let k = integer_count(alpha.get(), m.n_rows())?;
    let sets: Vec<Vec<usize>> = (0..m.n_cols())
        .map(|j| {
            let col = m.column(j);
            let mut idx: Vec<usize> = (0..col.len()).collect();
            idx.sort_by(|&a, &b| col[b].total_cmp(&col[a]).then(a.cmp(&b)));
            let mut top = idx[..k].to_vec();
            top.sort_unstable();
            top
        })
        .collect();
    let is_concentrated = sets.windows(2).all(|w| w[0] == w[1]);
    Ok(TailEventDiagnostic { is_concentrated, level: alpha, per_margin_tail_sets: sets })
}
