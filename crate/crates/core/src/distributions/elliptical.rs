use super::scenario::ScenarioMatrix;
use super::UnivariateModel;
use crate::error::{DqError, Result};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;
const CHOLESKY_JITTER: f64 = 1e-10;

/// Rows drawn from one counter stream. Fixed so that output does not depend
/// on how blocks are distributed over threads.
pub(crate) const BLOCK_ROWS: usize = 4096;

/// Characteristic generator of an elliptical model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum EllipticalFamily {
    Normal,
    StudentT { dof: f64 },
}

impl EllipticalFamily {
    /// The one-dimensional generator `Y ~ E_1(0, 1, tau)`.
    pub fn standard_margin(&self) -> UnivariateModel {
        match *self {
            Self::Normal => UnivariateModel::standard_normal(),
            Self::StudentT { dof } => UnivariateModel::StudentT { dof, loc: 0.0, scale: 1.0 },
        }
    }
}

/// `E_n(mu, Sigma, tau)` with `tau` given by the family tag.
///
/// For the t family `Sigma` is the dispersion matrix, not the covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticalSpec {
    family: EllipticalFamily,
    location: DVector<f64>,
    dispersion: DMatrix<f64>,
}

impl EllipticalSpec {
    pub fn new(
        family: EllipticalFamily,
        location: DVector<f64>,
        dispersion: DMatrix<f64>,
    ) -> Result<Self> {
        if let EllipticalFamily::StudentT { dof } = family {
            if !(dof.is_finite() && dof > 0.0) {
                return Err(DqError::invalid(format!("degrees of freedom must be positive, got {dof}")));
            }
        }
        validate_dispersion(&dispersion)?;
        if location.len() != dispersion.nrows() {
            return Err(DqError::invalid(format!(
                "location has length {} but dispersion is {}x{}",
                location.len(),
                dispersion.nrows(),
                dispersion.ncols()
            )));
        }
        if location.iter().any(|m| !m.is_finite()) {
            return Err(DqError::invalid("location entries must be finite"));
        }
        Ok(Self { family, location, dispersion })
    }

    /// Centered model (`mu = 0`).
    pub fn centered(family: EllipticalFamily, dispersion: DMatrix<f64>) -> Result<Self> {
        let n = dispersion.nrows();
        Self::new(family, DVector::zeros(n), dispersion)
    }

    pub fn family(&self) -> EllipticalFamily {
        self.family
    }

    pub fn location(&self) -> &DVector<f64> {
        &self.location
    }

    pub fn dispersion(&self) -> &DMatrix<f64> {
        &self.dispersion
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// Marginal scales `sigma_i = sqrt(Sigma_ii)`.
    pub fn scales(&self) -> DVector<f64> {
        self.dispersion.diagonal().map(f64::sqrt)
    }

    /// Model of `w ⊙ X`: location `w_i mu_i`, dispersion `diag(w) Sigma diag(w)`.
    pub fn weighted(&self, w: &[f64]) -> Result<Self> {
        if w.len() != self.dim() {
            return Err(DqError::invalid("weight vector length does not match dimension"));
        }
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(w));
        let disp = &d * &self.dispersion * &d;
        let loc = self.location.component_mul(&DVector::from_column_slice(w));
        Self::new(self.family, loc, disp)
    }

    pub(crate) fn cholesky_factor(&self) -> Result<DMatrix<f64>> {
        if let Some(c) = self.dispersion.clone().cholesky() {
            return Ok(c.l());
        }
        let n = self.dim();
        let jittered = &self.dispersion + DMatrix::identity(n, n) * CHOLESKY_JITTER;
        match jittered.cholesky() {
            Some(c) => Ok(c.l()),
            None => Err(DqError::NotPositiveSemidefinite(min_eigenvalue(&self.dispersion))),
        }
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

pub(crate) fn validate_dispersion(m: &DMatrix<f64>) -> Result<()> {
    let n = m.nrows();
    if n == 0 || m.ncols() != n {
        return Err(DqError::invalid(format!("dispersion must be square and non-empty, got {}x{}", n, m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(DqError::invalid("dispersion entries must be finite"));
    }
    for i in 0..n {
        if m[(i, i)] < 0.0 {
            return Err(DqError::invalid(format!("negative diagonal entry at {i}")));
        }
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL {
                return Err(DqError::invalid(format!("dispersion is not symmetric at ({i}, {j})")));
            }
        }
    }
    if m.iter().all(|&v| v == 0.0) {
        return Err(DqError::invalid("dispersion must not be all zeros"));
    }
    let lambda = min_eigenvalue(m);
    if lambda < -EIGEN_TOL {
        return Err(DqError::NotPositiveSemidefinite(lambda));
    }
    Ok(())
}

/// Counter-mode generator for `(seed, stream)`.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `count` iid rows of `X = mu + L Z / sqrt(W / nu)` (the `W` factor
/// only for the t family), with `L L^T = Sigma`.
pub fn sample_elliptical(spec: &EllipticalSpec, count: usize, seed: u64) -> Result<ScenarioMatrix> {
    if count == 0 {
        return Err(DqError::invalid("sample size must be positive"));
    }
    let n = spec.dim();
    let chol = spec.cholesky_factor()?;
    let mixing = match spec.family {
        EllipticalFamily::Normal => None,
        EllipticalFamily::StudentT { dof } => Some(
            (dof, ChiSquared::new(dof).map_err(|e| DqError::invalid(e.to_string()))?),
        ),
    };
    let mu = spec.location.as_slice();

    let mut data = vec![0.0; count * n];
    data.par_chunks_mut(BLOCK_ROWS * n).enumerate().for_each(|(block, chunk)| {
        let mut rng = stream_rng(seed, block as u64);
        let mut z = vec![0.0; n];
        for row in chunk.chunks_mut(n) {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            let radial = match &mixing {
                None => 1.0,
                Some((dof, chi)) => (dof / chi.sample(&mut rng)).sqrt(),
            };
            for (i, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, zj) in z.iter().enumerate().take(i + 1) {
                    acc += chol[(i, j)] * zj;
                }
                *out = mu[i] + radial * acc;
            }
        }
    });
    ScenarioMatrix::from_row_major(n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptical::equicorrelated;

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let mut sab = 0.0;
        let mut saa = 0.0;
        let mut sbb = 0.0;
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    fn empirical_quantile(mut v: Vec<f64>, p: f64) -> f64 {
        v.sort_by(f64::total_cmp);
        let k = ((p * v.len() as f64).ceil() as usize).max(1) - 1;
        v[k]
    }

    #[test]
    fn independent_normal_columns_are_uncorrelated() {
        let spec = EllipticalSpec::centered(EllipticalFamily::Normal, DMatrix::identity(2, 2)).unwrap();
        let s = sample_elliptical(&spec, 1_000_000, 1).unwrap();
        let rho = correlation(&s.column(0), &s.column(1));
        assert!(rho.abs() < 0.005, "rho = {rho}");
    }

    #[test]
    fn t_margins_have_t3_quantiles() {
        let spec = EllipticalSpec::centered(EllipticalFamily::StudentT { dof: 3.0 }, DMatrix::identity(2, 2))
            .unwrap();
        let s = sample_elliptical(&spec, 1_000_000, 2).unwrap();
        for j in 0..2 {
            let q = empirical_quantile(s.column(j), 0.95);
            assert!((q - 2.3534).abs() < 0.02, "col {j}: {q}");
        }
    }

    #[test]
    fn location_shifts_column_means() {
        let spec = EllipticalSpec::new(
            EllipticalFamily::Normal,
            DVector::from_vec(vec![5.0, 5.0]),
            equicorrelated(2, 0.3),
        )
        .unwrap();
        let s = sample_elliptical(&spec, 100_000, 3).unwrap();
        for j in 0..2 {
            let m = s.column(j).iter().sum::<f64>() / 100_000.0;
            assert!((m - 5.0).abs() < 0.02, "col {j}: {m}");
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let spec =
            EllipticalSpec::centered(EllipticalFamily::StudentT { dof: 4.0 }, equicorrelated(3, 0.5)).unwrap();
        let a = sample_elliptical(&spec, 10_001, 9).unwrap();
        let b = sample_elliptical(&spec, 10_001, 9).unwrap();
        let c = sample_elliptical(&spec, 10_001, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        // a longer draw extends the shorter one
        let d = sample_elliptical(&spec, 20_000, 9).unwrap();
        assert_eq!(a.row(10_000), d.row(10_000));
    }

    #[test]
    fn row_sums_follow_univariate_margin() {
        // S ~ E_1(1'mu, 1'Sigma1, tau); one-sample KS against that margin
        let sigma = equicorrelated(3, 0.4);
        let total: f64 = sigma.iter().sum();
        let spec = EllipticalSpec::new(
            EllipticalFamily::StudentT { dof: 5.0 },
            DVector::from_vec(vec![1.0, -2.0, 0.5]),
            sigma,
        )
        .unwrap();
        let n = 100_000;
        let s = sample_elliptical(&spec, n, 4).unwrap();
        let mut sums = s.row_sums();
        sums.sort_by(f64::total_cmp);
        let margin = UnivariateModel::student_t(5.0, -0.5, total.sqrt()).unwrap();
        let mut d: f64 = 0.0;
        for (i, x) in sums.iter().enumerate() {
            let f = margin.cdf(*x);
            d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS = {d}, critical = {critical}");
    }

    #[test]
    fn rejects_bad_dispersion() {
        let not_sym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(EllipticalSpec::centered(EllipticalFamily::Normal, not_sym).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            EllipticalSpec::centered(EllipticalFamily::Normal, indefinite),
            Err(DqError::NotPositiveSemidefinite(_))
        ));
        assert!(EllipticalSpec::centered(EllipticalFamily::Normal, DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn rank_one_dispersion_samples_with_jitter() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let spec = EllipticalSpec::centered(EllipticalFamily::Normal, sigma).unwrap();
        let s = sample_elliptical(&spec, 1000, 5).unwrap();
        for j in 0..1000 {
            let r = s.row(j);
            assert!((r[1] - 2.0 * r[0]).abs() < 1e-4);
        }
    }
}
