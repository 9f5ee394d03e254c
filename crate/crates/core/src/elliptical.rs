//! Closed forms for DQ and DR under elliptical models `E_n(mu, Sigma, tau)`.
//!
//! With `Y ~ E_1(0, 1, tau)` and `k = sum_i sigma_i / sqrt(1' Sigma 1)`:
//! `DQ^VaR_alpha = P(Y > k VaR_alpha(Y)) / alpha` and `DQ^ES_alpha = beta / alpha`
//! where `ES_beta(Y) = k ES_alpha(Y)`. Neither depends on `mu`.

use crate::distributions::validate_dispersion;
use crate::distributions::{EllipticalFamily, EllipticalSpec};
use crate::dq::{DqMethod, DqResult, Measure};
use crate::error::{DqError, Result};
use crate::risk_measures::Level;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

const MAX_BISECTIONS: usize = 200;
const RATIO_GRID: [f64; 4] = [10.0, 1e2, 1e3, 1e4];
const RATIO_TOL: f64 = 1e-3;

/// Equicorrelated matrix: unit diagonal, `r` elsewhere.
pub fn equicorrelated(n: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { r })
}

/// AR(1) correlation matrix with entries `r^|i-j|`.
pub fn ar1(n: usize, r: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| r.powi(i.abs_diff(j) as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSummary {
    pub k_sigma: f64,
    /// `AC = 1 / k^2`.
    pub avg_correlation: f64,
}

/// `k_Sigma = sum_i sigma_i / sqrt(1' Sigma 1)`, at least 1.
pub fn k_sigma(sigma: &DMatrix<f64>) -> Result<DispersionSummary> {
    validate_dispersion(sigma)?;
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return Err(DqError::invalid("1' Sigma 1 must be positive"));
    }
    let scales: f64 = sigma.diagonal().iter().map(|v| v.sqrt()).sum();
    let mut k = scales / total.sqrt();
    // Cauchy-Schwarz gives k >= 1; snap rounding in the rank-one case
    if k < 1.0 || (k - 1.0).abs() < 1e-12 {
        k = 1.0;
    }
    Ok(DispersionSummary { k_sigma: k, avg_correlation: 1.0 / (k * k) })
}

fn spec_k(spec: &EllipticalSpec) -> Result<f64> {
    Ok(k_sigma(spec.dispersion())?.k_sigma)
}

/// DQ^VaR of an elliptical vector.
pub fn dq_var_elliptical(spec: &EllipticalSpec, alpha: Level) -> Result<DqResult> {
    dq_var_given_k(spec.family(), spec_k(spec)?, alpha)
}

/// DQ^VaR for a given `k`, without a full dispersion matrix.
pub fn dq_var_given_k(family: EllipticalFamily, k: f64, alpha: Level) -> Result<DqResult> {
    check_k(k)?;
    let y = family.standard_margin();
    let a_star = if k == 1.0 { alpha.get() } else { y.sf(k * y.var(alpha)) };
    Ok(DqResult::from_alpha_star(a_star, alpha, DqMethod::Analytic))
}

/// DQ^ES of an elliptical vector; requires a finite mean.
pub fn dq_es_elliptical(spec: &EllipticalSpec, alpha: Level) -> Result<DqResult> {
    dq_es_given_k(spec.family(), spec_k(spec)?, alpha)
}

/// DQ^ES for a given `k`: solves `ES_beta(Y) = k ES_alpha(Y)` for `beta`.
pub fn dq_es_given_k(family: EllipticalFamily, k: f64, alpha: Level) -> Result<DqResult> {
    check_k(k)?;
    let y = family.standard_margin();
    let target = k * y.es(alpha)?;
    if k == 1.0 {
        return Ok(DqResult::from_alpha_star(alpha.get(), alpha, DqMethod::Analytic));
    }
    let es_at = |log_beta: f64| -> Result<f64> { y.es(Level::new(log_beta.exp())?) };
    // beta <= alpha since k >= 1; walk down until ES_beta exceeds the target
    let mut hi = alpha.get().ln();
    let mut lo = hi;
    loop {
        lo -= 2.0;
        if lo < f64::MIN_POSITIVE.ln() {
            return Err(DqError::NonConvergence("ES level underflows".into()));
        }
        if es_at(lo)? >= target {
            break;
        }
        hi = lo;
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if es_at(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(DqResult::from_alpha_star(hi.exp(), alpha, DqMethod::Analytic))
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k >= 1.0 {
        Ok(())
    } else {
        Err(DqError::invalid(format!("k must be at least 1, got {k}")))
    }
}

/// `lim_{alpha -> 0} DQ^VaR_alpha`: `1{k = 1}` for normal, `k^-nu` for t.
pub fn dq_var_limit(spec: &EllipticalSpec) -> Result<f64> {
    dq_var_limit_given_k(spec.family(), spec_k(spec)?)
}

pub fn dq_var_limit_given_k(family: EllipticalFamily, k: f64) -> Result<f64> {
    check_k(k)?;
    Ok(match family {
        EllipticalFamily::Normal => {
            if k == 1.0 {
                1.0
            } else {
                0.0
            }
        }
        EllipticalFamily::StudentT { dof } => k.powf(-dof),
    })
}

/// `lim_{x -> inf} k f(k x) / f(x)` for a user-supplied density of `Y`.
///
/// The ratio is evaluated at `x = 10, 100, 1000, 10000`; the limit is
/// accepted when the last two finite evaluations differ by less than 1e-3.
/// Points where `f(x)` vanishes (bounded support or underflow) are skipped;
/// if the density vanishes from the first grid point on, or all but one
/// point vanish and that ratio is negligible, the limit is 0.
pub fn density_ratio_limit(k: f64, density: impl Fn(f64) -> f64) -> Result<f64> {
    check_k(k)?;
    if k == 1.0 {
        return Ok(1.0);
    }
    let ratios: Vec<f64> = RATIO_GRID
        .iter()
        .filter_map(|&x| {
            let fx = density(x);
            (fx > 0.0 && fx.is_finite()).then(|| k * density(k * x) / fx)
        })
        .collect();
    match ratios.as_slice() {
        [] => Ok(0.0),
        [.., a, b] if (a - b).abs() < RATIO_TOL => Ok(*b),
        // the density underflows right after: a super-polynomial tail
        [only] if *only < RATIO_TOL => Ok(0.0),
        _ => Err(DqError::LimitDoesNotExist(format!("density ratio did not settle: {ratios:?}"))),
    }
}

/// Diversification ratio `rho(S) / sum_i rho(X_i)` of an elliptical vector.
pub fn dr_elliptical(spec: &EllipticalSpec, measure: Measure, alpha: Level) -> Result<f64> {
    let y = spec.family().standard_margin();
    let rho = match measure {
        Measure::VaR => y.var(alpha),
        Measure::ES => y.es(alpha)?,
    };
    let loc: f64 = spec.location().iter().sum();
    let agg = spec.dispersion().iter().sum::<f64>().sqrt();
    let scales: f64 = spec.scales().iter().sum();
    let denom = loc + scales * rho;
    if denom == 0.0 {
        return Err(DqError::UndefinedRatio);
    }
    if loc == 0.0 {
        return Ok(agg / scales);
    }
    Ok((loc + agg * rho) / denom)
}

/// Reads an `n x n` matrix from headerless comma-separated rows.
pub fn read_dispersion_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| DqError::invalid(format!("cannot parse {f:?} as a number"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(DqError::invalid("dispersion CSV must hold n rows of n values"));
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    validate_dispersion(&m)?;
    Ok(m)
}

pub fn read_dispersion_path(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_dispersion_csv(std::fs::File::open(path)?)
}

pub fn write_dispersion_csv<W: Write>(m: &DMatrix<f64>, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..m.nrows() {
        wtr.write_record(m.row(i).iter().map(f64::to_string))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::UnivariateModel;
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn lvl(a: f64) -> Level {
        Level::new(a).unwrap()
    }

    fn t3() -> EllipticalFamily {
        EllipticalFamily::StudentT { dof: 3.0 }
    }

    fn centered(family: EllipticalFamily, sigma: DMatrix<f64>) -> EllipticalSpec {
        EllipticalSpec::centered(family, sigma).unwrap()
    }

    #[test]
    fn k_sigma_examples() {
        let k1 = k_sigma(&equicorrelated(4, 0.3)).unwrap();
        assert!((k1.k_sigma - 1.4510).abs() < 1e-4);
        assert!((k1.avg_correlation * k1.k_sigma.powi(2) - 1.0).abs() < 1e-15);
        assert!((k_sigma(&ar1(4, 0.3)).unwrap().k_sigma - 1.6046).abs() < 1e-4);
        let s = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(k_sigma(&(&s * s.transpose())).unwrap().k_sigma, 1.0);
        assert!(k_sigma(&DMatrix::zeros(3, 3)).is_err());
        // negative correlation with 1' Sigma 1 = 0
        let anti = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(k_sigma(&anti).is_err());
    }

    #[test]
    fn k_sigma_matches_hand_formula() {
        let sigma = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, -0.5, 1.0, 1.0, 0.2, -0.5, 0.2, 9.0]);
        let want = (2.0 + 1.0 + 3.0) / (4.0f64 + 1.0 + 9.0 + 2.0 * (1.0 - 0.5 + 0.2)).sqrt();
        assert!((k_sigma(&sigma).unwrap().k_sigma - want).abs() < 1e-15);
    }

    #[test]
    fn var_quotient_examples() {
        let a = lvl(0.01);
        let n = dq_var_elliptical(&centered(EllipticalFamily::Normal, equicorrelated(4, 0.3)), a).unwrap();
        assert!((n.value - 0.036_851_5).abs() < 1e-6, "{}", n.value);
        assert_eq!(n.method, DqMethod::Analytic);
        let t = dq_var_elliptical(&centered(t3(), equicorrelated(4, 0.3)), a).unwrap();
        assert!((t.value - 0.355_808_5).abs() < 1e-6, "{}", t.value);
        let s = DVector::from_vec(vec![1.0, 0.5]);
        let rank_one = centered(t3(), &s * s.transpose());
        assert_eq!(dq_var_elliptical(&rank_one, lvl(0.05)).unwrap().value, 1.0);
    }

    #[test]
    fn var_quotient_ignores_location() {
        let sigma = ar1(3, 0.6);
        let a = centered(t3(), sigma.clone());
        let b = EllipticalSpec::new(t3(), DVector::from_vec(vec![10.0, -3.0, 2.0]), sigma).unwrap();
        for alpha in [0.01, 0.2, 0.7] {
            assert_eq!(
                dq_var_elliptical(&a, lvl(alpha)).unwrap().value,
                dq_var_elliptical(&b, lvl(alpha)).unwrap().value
            );
            assert_eq!(
                dq_es_elliptical(&a, lvl(alpha)).unwrap().value,
                dq_es_elliptical(&b, lvl(alpha)).unwrap().value
            );
        }
    }

    #[test]
    fn var_quotient_ranges_by_level() {
        let spec = centered(EllipticalFamily::Normal, equicorrelated(4, 0.3));
        for a in [0.01, 0.2, 0.5] {
            let v = dq_var_elliptical(&spec, lvl(a)).unwrap().value;
            assert!((0.0..=1.0).contains(&v));
        }
        for a in [0.51, 0.7, 0.99] {
            let v = dq_var_elliptical(&spec, lvl(a)).unwrap().value;
            assert!((1.0..=2.0).contains(&v), "alpha={a}: {v}");
        }
    }

    #[test]
    fn es_quotient_examples() {
        let sigma1 = equicorrelated(4, 0.3);
        let n = dq_es_elliptical(&centered(EllipticalFamily::Normal, sigma1.clone()), lvl(0.025_768)).unwrap();
        assert!((n.value - 0.037_656).abs() < 2e-5, "{}", n.value);
        let t = dq_es_elliptical(&centered(t3(), sigma1), lvl(0.033_075_6)).unwrap();
        assert!((t.value - 0.359_476).abs() < 2e-5, "{}", t.value);
        let s = DVector::from_vec(vec![2.0, 1.0, 1.0]);
        assert_eq!(dq_es_elliptical(&centered(t3(), &s * s.transpose()), lvl(0.05)).unwrap().value, 1.0);
    }

    #[test]
    fn es_quotient_solves_defining_equation() {
        let spec = centered(EllipticalFamily::StudentT { dof: 4.5 }, ar1(5, 0.4));
        let k = k_sigma(spec.dispersion()).unwrap().k_sigma;
        let y = UnivariateModel::student_t(4.5, 0.0, 1.0).unwrap();
        for a in [0.01, 0.1, 0.6] {
            let r = dq_es_elliptical(&spec, lvl(a)).unwrap();
            let lhs = y.es(lvl(r.alpha_star)).unwrap();
            let rhs = k * y.es(lvl(a)).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * rhs, "alpha={a}");
        }
    }

    #[test]
    fn es_quotient_rejects_infinite_mean() {
        let spec = centered(EllipticalFamily::StudentT { dof: 1.0 }, equicorrelated(2, 0.3));
        assert!(matches!(dq_es_elliptical(&spec, lvl(0.05)), Err(DqError::UnsupportedMeasure { .. })));
    }

    #[test]
    fn limits() {
        let k = 1.4510;
        assert_eq!(dq_var_limit_given_k(EllipticalFamily::Normal, k).unwrap(), 0.0);
        assert!((dq_var_limit_given_k(t3(), k).unwrap() - 0.3273).abs() < 1e-4);
        assert_eq!(dq_var_limit_given_k(EllipticalFamily::Normal, 1.0).unwrap(), 1.0);
        assert_eq!(dq_var_limit_given_k(t3(), 1.0).unwrap(), 1.0);
    }

    #[test]
    fn analytic_quotients_approach_limits() {
        let spec = centered(t3(), equicorrelated(4, 0.3));
        let lim = dq_var_limit(&spec).unwrap();
        assert!((dq_var_elliptical(&spec, lvl(1e-4)).unwrap().value - lim).abs() < 0.02);
        assert!((dq_es_elliptical(&spec, lvl(1e-4)).unwrap().value - lim).abs() < 0.02);
        let normal = centered(EllipticalFamily::Normal, equicorrelated(4, 0.3));
        assert!(dq_var_elliptical(&normal, lvl(1e-6)).unwrap().value < 0.01);
    }

    #[test]
    fn density_ratio_limit_generic() {
        let k = 1.4510;
        let t = UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap();
        let lim = density_ratio_limit(k, |x| t.density(x)).unwrap();
        assert!((lim - k.powf(-3.0)).abs() < 1e-3);
        let n = UnivariateModel::standard_normal();
        assert_eq!(density_ratio_limit(k, |x| n.density(x)).unwrap(), 0.0);
        let bounded = UnivariateModel::uniform(-1.0, 1.0).unwrap();
        assert_eq!(density_ratio_limit(k, |x| bounded.density(x)).unwrap(), 0.0);
        assert_eq!(density_ratio_limit(1.0, |x| n.density(x)).unwrap(), 1.0);
        // log-periodic modulation of a power tail has no ratio limit
        let wobbly = |x: f64| x.powi(-4) * (1.5 + (3.0 * x.ln()).sin());
        assert!(matches!(density_ratio_limit(k, wobbly), Err(DqError::LimitDoesNotExist(_))));
    }

    #[test]
    fn dr_examples() {
        let sigma1 = equicorrelated(4, 0.3);
        let spec = centered(EllipticalFamily::Normal, sigma1.clone());
        let k = k_sigma(&sigma1).unwrap().k_sigma;
        let v = dr_elliptical(&spec, Measure::VaR, lvl(0.05)).unwrap();
        assert_eq!(v, 1.0 / k);
        assert!((v - 0.6892).abs() < 1e-4);
        assert_eq!(dr_elliptical(&spec, Measure::ES, lvl(0.01)).unwrap(), v);

        let shifted = EllipticalSpec::new(EllipticalFamily::Normal, DVector::from_element(4, 10.0), sigma1.clone())
            .unwrap();
        let got = dr_elliptical(&shifted, Measure::VaR, lvl(0.05)).unwrap();
        let q = UnivariateModel::standard_normal().var(lvl(0.05));
        let want = (40.0 + sigma1.sum().sqrt() * q) / (40.0 + 4.0 * q);
        assert!((got - want).abs() < 1e-14);
        assert!((got - 0.6892).abs() > 0.1);

        assert!(matches!(dr_elliptical(&spec, Measure::VaR, lvl(0.5)), Err(DqError::UndefinedRatio)));
    }

    #[test]
    fn dispersion_csv_round_trip() {
        let m = ar1(3, 0.3);
        let mut buf = Vec::new();
        write_dispersion_csv(&m, &mut buf).unwrap();
        assert_eq!(read_dispersion_csv(buf.as_slice()).unwrap(), m);
        assert!(read_dispersion_csv("1,0\n0\n".as_bytes()).is_err());
        assert!(read_dispersion_csv("1,2\n2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn average_correlation_limits_along_n() {
        let alpha = lvl(0.05);
        let mut prev = f64::INFINITY;
        let mut equi = Vec::new();
        for n in 2..=100 {
            let v = dq_var_elliptical(&centered(EllipticalFamily::Normal, ar1(n, 0.5)), alpha).unwrap().value;
            assert!(v <= prev + 1e-12, "n={n}");
            prev = v;
            equi.push(dq_var_elliptical(&centered(EllipticalFamily::Normal, equicorrelated(n, 0.5)), alpha)
                .unwrap()
                .value);
        }
        assert!(prev < 1e-6);
        let tail = &equi[equi.len() - 10..];
        assert!(tail.iter().all(|&v| v > 0.1));
        assert!(tail[9] - tail[0] < 1e-3);
        // limit uses k -> 1/sqrt(r)
        let lim = dq_var_given_k(EllipticalFamily::Normal, 0.5f64.powf(-0.5), alpha).unwrap().value;
        assert!((tail[9] - lim).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn quotients_monotone_in_k(
            k1 in 1.0f64..4.0,
            dk in 0.0f64..2.0,
            a in 0.001f64..0.999,
            t in prop::bool::ANY,
        ) {
            let fam = if t { EllipticalFamily::StudentT { dof: 3.5 } } else { EllipticalFamily::Normal };
            let k2 = k1 + dk;
            let v1 = dq_var_given_k(fam, k1, lvl(a)).unwrap().value;
            let v2 = dq_var_given_k(fam, k2, lvl(a)).unwrap().value;
            if a <= 0.5 {
                prop_assert!(v2 <= v1 + 1e-12);
            } else {
                prop_assert!(v2 >= v1 - 1e-12);
            }
            let e1 = dq_es_given_k(fam, k1, lvl(a)).unwrap().value;
            let e2 = dq_es_given_k(fam, k2, lvl(a)).unwrap().value;
            prop_assert!(e2 <= e1 * (1.0 + 1e-9));
            prop_assert!((0.0..=1.0 + 1e-9).contains(&e1));
        }
    }
}
