//! Portfolio weights on the simplex that minimize DQ.

use crate::distributions::{stream_rng, EllipticalSpec, ScenarioMatrix};
use crate::dq::{dq, marginal_risks, DqMethod, Measure};
use crate::error::{DqError, Result};
use crate::mrv::{dq_limit_mrv, eta, SpectralMeasure};
use crate::risk_measures::{tail_count, Level};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SIMPLEX_TOL: f64 = 1e-12;
const STEP_SCHEDULE: [f64; 4] = [0.1, 0.03, 0.01, 0.003];
const SEARCH_STARTS: usize = 8;
const MAX_EVALS_PER_START: usize = 20_000;
const START_SEED: u64 = 0x00d1_5eed;
const MIN_TAIL_SCENARIOS: f64 = 20.0;
const MRV_CONSTRAINT_TOL: f64 = 1e-10;
const MRV_GRADIENT_TOL: f64 = 1e-8;
const MRV_MAX_ITER: usize = 100_000;

/// A point of the simplex `{w >= 0, sum w = 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(DqError::invalid("weights must not be empty"));
        }
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(DqError::invalid("weights must be nonnegative"));
        }
        let total: f64 = w.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(DqError::invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self(w))
    }

    /// Rescales a nonnegative, nonzero vector onto the simplex.
    pub fn normalize(w: &[f64]) -> Result<Self> {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(DqError::invalid("weights must be nonnegative"));
        }
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(DqError::invalid("weights must not all be zero"));
        }
        Self::new(w.iter().map(|v| v / total).collect()).or_else(|_| {
            // renormalizing once more absorbs the rounding of the first pass
            let again: Vec<f64> = w.iter().map(|v| v / total).collect();
            let t: f64 = again.iter().sum();
            Self::new(again.iter().map(|v| v / t).collect())
        })
    }

    pub fn equal(n: usize) -> Result<Self> {
        Self::normalize(&vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Weights {
    type Error = DqError;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<Weights> for Vec<f64> {
    fn from(w: Weights) -> Vec<f64> {
        w.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptMethod {
    ClosedForm,
    QpFallback,
    SimplexSearch,
    ConvexMrv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub weights: Weights,
    pub objective: f64,
    pub method: OptMethod,
    pub iterations: usize,
    pub converged: bool,
}

/// `k_w = w' sigma / sqrt(w' Sigma w)` for the portfolio `w ⊙ X`.
pub fn portfolio_k(sigma: &DMatrix<f64>, w: &[f64]) -> f64 {
    let w = DVector::from_column_slice(w);
    let scales = sigma.diagonal().map(f64::sqrt);
    w.dot(&scales) / (w.dot(&(sigma * &w))).sqrt()
}

/// Maximizes `w' sigma / sqrt(w' Sigma w)` over the simplex, which minimizes
/// both DQ^VaR and DQ^ES of `w ⊙ X` at every level for elliptical `X`.
///
/// The interior candidate `Sigma^{-1} sigma` is used when it is nonnegative;
/// otherwise `min y' Sigma y` subject to `sigma' y = 1, y >= 0` is solved by
/// a primal active-set method.
pub fn optimize_elliptical(spec: &EllipticalSpec) -> Result<OptimizationReport> {
    let sigma = spec.dispersion();
    let n = sigma.nrows();
    let chol = sigma.clone().cholesky().ok_or(DqError::SingularMatrix)?;
    let scales = sigma.diagonal().map(f64::sqrt);
    if scales.iter().any(|&s| s == 0.0) {
        return Err(DqError::SingularMatrix);
    }
    let z = chol.solve(&scales);
    let (y, method, iterations) = if z.iter().all(|&v| v >= 0.0) {
        (z, OptMethod::ClosedForm, 0)
    } else {
        let (y, it) = active_set_qp(sigma, &scales)?;
        (y, OptMethod::QpFallback, it)
    };
    let weights = Weights::normalize(y.as_slice())?;
    let objective = portfolio_k(sigma, weights.as_slice());
    debug_assert_eq!(weights.len(), n);
    Ok(OptimizationReport { weights, objective, method, iterations, converged: true })
}

/// `min y' S y` s.t. `c' y = 1`, `y >= 0`, for positive-definite `S`.
fn active_set_qp(s: &DMatrix<f64>, c: &DVector<f64>) -> Result<(DVector<f64>, usize)> {
    let n = c.len();
    let mut y = DVector::from_element(n, 1.0 / c.sum());
    let mut fixed = vec![false; n];
    let tol = 1e-12;
    for iter in 1..=100 * n.max(1) {
        let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
        let s_ff = DMatrix::from_fn(free.len(), free.len(), |a, b| s[(free[a], free[b])]);
        let c_f = DVector::from_iterator(free.len(), free.iter().map(|&i| c[i]));
        let u = s_ff.cholesky().ok_or(DqError::SingularMatrix)?.solve(&c_f);
        let scale = c_f.dot(&u);
        // equality-constrained optimum on the free coordinates
        let mut target = DVector::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            target[i] = u[a] / scale;
        }
        let step = &target - &y;
        if step.amax() <= tol {
            // multipliers of the bound constraints: grad - nu c with nu = 2 / scale
            let grad = s * &target * 2.0;
            let nu = 2.0 / scale;
            let worst = (0..n)
                .filter(|&i| fixed[i])
                .map(|i| (i, grad[i] - nu * c[i]))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, mu)) if mu < -tol => fixed[i] = false,
                _ => return Ok((target, iter)),
            }
            y = target;
            continue;
        }
        let mut t = 1.0;
        let mut blocking = None;
        for &i in &free {
            if step[i] < 0.0 {
                let ti = -y[i] / step[i];
                if ti < t {
                    t = ti;
                    blocking = Some(i);
                }
            }
        }
        y += step * t;
        if let Some(i) = blocking {
            fixed[i] = true;
            y[i] = 0.0;
        }
    }
    Err(DqError::NonConvergence("active-set iteration limit reached".into()))
}

/// DQ of `w ⊙ X` on one fixed scenario set.
struct EmpiricalObjective<'a> {
    m: &'a ScenarioMatrix,
    measure: Measure,
    alpha: Level,
    /// `rho_alpha(X_i)`; `rho_alpha(w_i X_i) = w_i rho_alpha(X_i)` for `w_i >= 0`.
    marginal: Vec<f64>,
}

impl<'a> EmpiricalObjective<'a> {
    fn new(m: &'a ScenarioMatrix, measure: Measure, alpha: Level) -> Result<Self> {
        let marginal = marginal_risks(m, measure, alpha)?;
        Ok(Self { m, measure, alpha, marginal })
    }

    fn eval(&self, w: &[f64]) -> Result<f64> {
        if !self.m.is_uniform() {
            return Ok(dq(&self.m.scale_columns(w)?, self.measure, self.alpha, default_method(self.measure))?.value);
        }
        let threshold: f64 = w.iter().zip(&self.marginal).map(|(wi, r)| wi * r).sum();
        let sums = self.m.weighted_sums(w);
        let a = self.alpha.get();
        let n = sums.len();
        Ok(match self.measure {
            Measure::VaR => sums.iter().filter(|&&s| s > threshold).count() as f64 / (a * n as f64),
            Measure::ES => es_alpha_star_uniform(sums, threshold, a) / a,
        })
    }
}

fn default_method(measure: Measure) -> DqMethod {
    match measure {
        Measure::VaR => DqMethod::Exceedance,
        Measure::ES => DqMethod::Rmin,
    }
}

/// `inf{beta : ES_beta(S) <= t}` for equally likely `S`, using that the
/// answer never exceeds `alpha` when `t` is a sum of marginal ES values.
fn es_alpha_star_uniform(mut sums: Vec<f64>, threshold: f64, alpha: f64) -> f64 {
    let n = sums.len();
    let m = (tail_count(alpha, n) + 2).min(n);
    let start = n - m;
    if start > 0 {
        sums.select_nth_unstable_by(start, f64::total_cmp);
    }
    let top = &mut sums[start..];
    top.sort_unstable_by(|a, b| b.total_cmp(a));
    if top[0] <= threshold {
        return 0.0;
    }
    // D_k = sum of the k largest minus k t rises while values exceed t, then
    // falls; alpha* N is where it returns to zero
    let mut d = 0.0;
    for (k, &x) in top.iter().enumerate() {
        let next = d + (x - threshold);
        if next < 0.0 {
            let theta = d / (threshold - x);
            return ((k as f64 + theta) / n as f64).min(alpha);
        }
        d = next;
    }
    alpha
}

/// Derivative-free search for the weights minimizing empirical DQ.
///
/// Weights are parameterized by a softmax over `n - 1` free coordinates and
/// explored by compass moves with step sizes 0.1, 0.03, 0.01, 0.003 from
/// several starts, including equal weights. The objective is evaluated on the
/// given scenarios only, so it is deterministic and piecewise constant; the
/// result is a local optimum.
pub fn optimize_dq_empirical(m: &ScenarioMatrix, measure: Measure, alpha: Level) -> Result<OptimizationReport> {
    let tail = alpha.get() * m.n_rows() as f64;
    if tail < MIN_TAIL_SCENARIOS {
        return Err(DqError::invalid(format!(
            "alpha * N = {tail:.3} is below {MIN_TAIL_SCENARIOS}; use at least {} scenarios",
            (MIN_TAIL_SCENARIOS / alpha.get()).ceil()
        )));
    }
    let n = m.n_cols();
    let obj = EmpiricalObjective::new(m, measure, alpha)?;
    if n == 1 {
        let value = obj.eval(&[1.0])?;
        return Ok(OptimizationReport {
            weights: Weights::new(vec![1.0])?,
            objective: value,
            method: OptMethod::SimplexSearch,
            iterations: 0,
            converged: true,
        });
    }
    let starts: Vec<Vec<f64>> = (0..SEARCH_STARTS)
        .map(|k| {
            if k == 0 {
                vec![0.0; n - 1]
            } else {
                let mut rng = stream_rng(START_SEED, k as u64);
                (0..n - 1).map(|_| 1.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect()
            }
        })
        .collect();
    let runs = starts.into_par_iter().map(|theta| pattern_search(&obj, theta)).collect::<Result<Vec<_>>>()?;
    // first minimum wins, so ties go to the lowest start index
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.value < best.value { run } else { best })
        .expect("at least one start");
    Ok(OptimizationReport {
        weights: Weights::normalize(&softmax(&best.theta))?,
        objective: best.value,
        method: OptMethod::SimplexSearch,
        iterations: best.moves,
        converged: best.converged,
    })
}

struct SearchRun {
    theta: Vec<f64>,
    value: f64,
    moves: usize,
    converged: bool,
}

fn softmax(theta: &[f64]) -> Vec<f64> {
    let top = theta.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = theta.iter().map(|t| (t - top).exp()).collect();
    w.push((-top).exp());
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

fn pattern_search(obj: &EmpiricalObjective<'_>, mut theta: Vec<f64>) -> Result<SearchRun> {
    let mut value = obj.eval(&softmax(&theta))?;
    let mut evals = 1;
    let mut moves = 0;
    for &h in &STEP_SCHEDULE {
        loop {
            let mut improved = false;
            for d in 0..theta.len() {
                for sign in [1.0, -1.0] {
                    let mut trial = theta.clone();
                    trial[d] += sign * h;
                    let v = obj.eval(&softmax(&trial))?;
                    evals += 1;
                    if v < value {
                        theta = trial;
                        value = v;
                        moves += 1;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
            if evals >= MAX_EVALS_PER_START {
                return Ok(SearchRun { theta, value, moves, converged: false });
            }
        }
    }
    Ok(SearchRun { theta, value, moves, converged: true })
}

/// Minimizes the `alpha -> 0` limit of DQ^VaR over the simplex for an MRV
/// model with tail index `gamma > 1`.
///
/// Solves `min eta_y` s.t. `sum_i y_i eta_{e_i}^{1/gamma} = 1, y >= 0` by
/// projected gradient with backtracking, then rescales `y` into the simplex.
pub fn optimize_mrv_limit(psi: &SpectralMeasure) -> Result<OptimizationReport> {
    let g = psi.gamma();
    if g <= 1.0 {
        return Err(DqError::invalid(format!("tail index must exceed 1 for a unique optimum, got {g}")));
    }
    if psi.atoms().iter().any(|a| a.s.iter().any(|&v| v < 0.0)) {
        return Err(DqError::invalid("spectral atoms must be nonnegative for loss portfolios"));
    }
    let n = psi.dim();
    let etas = psi.marginal_etas()?;
    if let Some(i) = etas.iter().position(|&e| e <= 0.0) {
        return Err(DqError::invalid(format!("margin {} carries no tail mass", i + 1)));
    }
    let c: Vec<f64> = etas.iter().map(|e| e.powf(1.0 / g)).collect();

    let gradient = |y: &[f64]| -> Vec<f64> {
        let mut grad = vec![0.0; n];
        for atom in psi.atoms() {
            let dot: f64 = y.iter().zip(&atom.s).map(|(a, b)| a * b).sum();
            let scale = atom.p * g * dot.max(0.0).powf(g - 1.0);
            for (gi, si) in grad.iter_mut().zip(&atom.s) {
                *gi += scale * si;
            }
        }
        grad
    };

    let csum: f64 = c.iter().sum();
    let mut y = vec![1.0 / csum; n];
    let mut f = eta(&y, psi)?;
    let mut t = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MRV_MAX_ITER {
        iterations += 1;
        let grad = gradient(&y);
        let unit: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let p_unit = project(&unit, &c);
        let residual = p_unit.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if residual <= MRV_GRADIENT_TOL {
            converged = true;
            break;
        }
        t *= 2.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a - t * b).collect();
            let next = project(&trial, &c);
            let diff: Vec<f64> = next.iter().zip(&y).map(|(a, b)| a - b).collect();
            let lin: f64 = grad.iter().zip(&diff).map(|(a, b)| a * b).sum();
            let quad: f64 = diff.iter().map(|d| d * d).sum::<f64>() / (2.0 * t);
            let fn_next = eta(&next, psi)?;
            if fn_next <= f + lin + quad || t < 1e-20 {
                y = next;
                f = fn_next;
                break;
            }
            t *= 0.5;
        }
    }
    let residual = (y.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() - 1.0).abs();
    debug_assert!(residual <= MRV_CONSTRAINT_TOL, "constraint residual {residual}");
    let weights = Weights::normalize(&y)?;
    let objective = dq_limit_mrv(weights.as_slice(), psi)?;
    Ok(OptimizationReport { weights, objective, method: OptMethod::ConvexMrv, iterations, converged })
}

/// Euclidean projection onto `{y >= 0, c' y = 1}` for positive `c`.
fn project(z: &[f64], c: &[f64]) -> Vec<f64> {
    let mass = |lambda: f64| -> f64 { z.iter().zip(c).map(|(zi, ci)| ci * (zi - lambda * ci).max(0.0)).sum() };
    // mass is nonincreasing in lambda; bracket the root of mass = 1
    let mut hi = z.iter().zip(c).map(|(zi, ci)| zi / ci).fold(f64::NEG_INFINITY, f64::max);
    let mut lo = hi - 1.0;
    while mass(lo) < 1.0 {
        let width = hi - lo;
        hi = lo;
        lo -= 2.0 * width;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y: Vec<f64> = z.iter().zip(c).map(|(zi, ci)| (zi - lo * ci).max(0.0)).collect();
    // remove the residual bisection error along c
    let total: f64 = y.iter().zip(c).map(|(a, b)| a * b).sum();
    y.iter().map(|v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dependence::make_comonotonic;
    use crate::distributions::{sample_elliptical, EllipticalFamily, UnivariateModel};
    use crate::dq::{dq_es, dq_var, dr};
    use crate::elliptical::{dq_es_elliptical, dq_var_elliptical};
    use crate::mrv::{two_factor_limit, Atom};
    use proptest::prelude::*;

    fn lvl(a: f64) -> Level {
        Level::new(a).unwrap()
    }

    fn example_sigma() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0])
    }

    fn centered(sigma: DMatrix<f64>) -> EllipticalSpec {
        EllipticalSpec::centered(EllipticalFamily::StudentT { dof: 3.0 }, sigma).unwrap()
    }

    fn grid_argmin(f: impl Fn(f64) -> f64, step: f64) -> f64 {
        let steps = (1.0 / step).round() as usize;
        (0..=steps).map(|i| i as f64 * step).min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap()
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::new(vec![0.5, 0.6]).is_err());
        assert!(Weights::new(vec![1.5, -0.5]).is_err());
        assert!(Weights::new(vec![]).is_err());
        assert_eq!(Weights::normalize(&[2.0, 6.0]).unwrap().as_slice(), [0.25, 0.75]);
        let w = Weights::normalize(&[0.1, 0.2, 0.3, 0.7, 1.3]).unwrap();
        assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(serde_json::from_str::<Weights>("[0.5, 0.5]").is_ok());
        assert!(serde_json::from_str::<Weights>("[0.5, 0.6]").is_err());
    }

    #[test]
    fn elliptical_examples() {
        let r = optimize_elliptical(&centered(example_sigma())).unwrap();
        assert_eq!(r.method, OptMethod::ClosedForm);
        assert!((r.weights.as_slice()[0] - 0.5860).abs() < 1e-3);
        assert!((r.weights.as_slice()[0] - (2.0 - 2f64.sqrt())).abs() < 1e-12);

        let eye = optimize_elliptical(&centered(DMatrix::identity(4, 4))).unwrap();
        assert!(eye.weights.as_slice().iter().all(|w| (w - 0.25).abs() < 1e-15));

        let diag = optimize_elliptical(&centered(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])))).unwrap();
        assert!((diag.weights.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn elliptical_rejects_singular() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(optimize_elliptical(&centered(s)), Err(DqError::SingularMatrix)));
    }

    #[test]
    fn qp_fallback_matches_brute_force() {
        // asset 1 is strongly correlated with both others, so Sigma^{-1} sigma has a negative entry
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 1.8, 0.9, 1.8, 4.0, 1.4, 0.9, 1.4, 1.0]);
        let r = optimize_elliptical(&centered(s.clone())).unwrap();
        assert_eq!(r.method, OptMethod::QpFallback);
        let mut best = 0.0f64;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let w = [i as f64 / steps as f64, j as f64 / steps as f64, (steps - i - j) as f64 / steps as f64];
                best = best.max(portfolio_k(&s, &w));
            }
        }
        assert!(r.objective >= best - 1e-12, "{} vs {best}", r.objective);
        assert!(r.objective - best < 1e-4);
        assert!(r.weights.as_slice().iter().all(|&w| w >= 0.0));
    }

    #[test]
    fn elliptical_optimum_beats_random_portfolios() {
        let spec = centered(example_sigma());
        let w_star = optimize_elliptical(&spec).unwrap().weights;
        let opt = spec.weighted(w_star.as_slice()).unwrap();
        let mut rng = stream_rng(77, 0);
        for _ in 0..200 {
            let raw: Vec<f64> = (0..2).map(|_| -f64::ln(1.0 - rand::Rng::random::<f64>(&mut rng))).collect();
            let w = Weights::normalize(&raw).unwrap();
            let other = spec.weighted(w.as_slice()).unwrap();
            for a in [0.01, 0.05] {
                assert!(
                    dq_var_elliptical(&opt, lvl(a)).unwrap().value
                        <= dq_var_elliptical(&other, lvl(a)).unwrap().value + 1e-12
                );
                assert!(
                    dq_es_elliptical(&opt, lvl(a)).unwrap().value
                        <= dq_es_elliptical(&other, lvl(a)).unwrap().value + 1e-9
                );
            }
        }
    }

    #[test]
    fn empirical_guard_and_single_asset() {
        let m = ScenarioMatrix::from_rows(&(0..100).map(|i| vec![i as f64, 1.0]).collect::<Vec<_>>()).unwrap();
        assert!(matches!(optimize_dq_empirical(&m, Measure::VaR, lvl(0.05)), Err(DqError::InvalidInput(_))));
        let one = ScenarioMatrix::from_rows(&(0..1000).map(|i| vec![(i % 37) as f64]).collect::<Vec<_>>()).unwrap();
        let r = optimize_dq_empirical(&one, Measure::VaR, lvl(0.05)).unwrap();
        assert_eq!(r.weights.as_slice(), [1.0]);
        assert_eq!(r.objective, dq_var(&one, lvl(0.05)).unwrap().value);
    }

    #[test]
    fn fast_objective_matches_generic_routes() {
        let spec = centered(example_sigma());
        let m = sample_elliptical(&spec, 20_000, 3).unwrap();
        for measure in [Measure::VaR, Measure::ES] {
            let obj = EmpiricalObjective::new(&m, measure, lvl(0.05)).unwrap();
            for w in [[0.5, 0.5], [0.2, 0.8], [0.9, 0.1], [1.0, 0.0]] {
                let scaled = m.scale_columns(&w).unwrap();
                let want = match measure {
                    Measure::VaR => dq_var(&scaled, lvl(0.05)).unwrap().value,
                    Measure::ES => dq_es(&scaled, lvl(0.05), DqMethod::Rmin).unwrap().value,
                };
                let got = obj.eval(&w).unwrap();
                assert!((got - want).abs() < 1e-9, "{measure} {w:?}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn comonotonic_objective_is_flat() {
        let m = make_comonotonic(
            &[UnivariateModel::standard_normal(), UnivariateModel::student_t(3.0, 0.0, 2.0).unwrap()],
            20_000,
        )
        .unwrap();
        let r = optimize_dq_empirical(&m, Measure::VaR, lvl(0.05)).unwrap();
        assert!(r.converged);
        assert!((r.objective - 1.0).abs() <= 1.0 / (0.05 * 20_000.0));
    }

    #[test]
    fn empirical_search_never_worse_than_equal_weights() {
        let spec = EllipticalSpec::centered(
            EllipticalFamily::StudentT { dof: 4.0 },
            DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 2.0, 0.5, 0.1, 0.5, 0.5]),
        )
        .unwrap();
        let m = sample_elliptical(&spec, 20_000, 11).unwrap();
        for measure in [Measure::VaR, Measure::ES] {
            let r = optimize_dq_empirical(&m, measure, lvl(0.05)).unwrap();
            let eq = EmpiricalObjective::new(&m, measure, lvl(0.05)).unwrap().eval(&[1.0 / 3.0; 3]).unwrap();
            assert!(r.objective <= eq);
            assert!(r.converged);
        }
    }

    #[test]
    fn dq_and_dr_share_argmin_for_centered_elliptical() {
        let spec = centered(example_sigma());
        let m = sample_elliptical(&spec, 200_000, 21).unwrap();
        let a = lvl(0.05);
        let dq_argmin = grid_argmin(
            |w1| dq_es(&m.scale_columns(&[w1, 1.0 - w1]).unwrap(), a, DqMethod::Rmin).unwrap().value,
            0.01,
        );
        let dr_argmin = grid_argmin(|w1| dr(&m.scale_columns(&[w1, 1.0 - w1]).unwrap(), Measure::ES, a).unwrap(), 0.01);
        assert!((dq_argmin - dr_argmin).abs() <= 0.03, "{dq_argmin} vs {dr_argmin}");
    }

    #[test]
    fn mrv_iid_optimum_is_equal_weights() {
        for (n, g) in [(2, 1.5), (4, 3.0), (5, 2.2)] {
            let r = optimize_mrv_limit(&SpectralMeasure::iid(n, g).unwrap()).unwrap();
            assert!(r.converged);
            for &w in r.weights.as_slice() {
                assert!((w - 1.0 / n as f64).abs() < 1e-6);
            }
            assert!((r.objective - (n as f64).powf(1.0 - g)).abs() < 1e-9);
        }
    }

    #[test]
    fn mrv_two_factor_optimum_matches_grid() {
        for nu in [2.0, 4.0] {
            let r = optimize_mrv_limit(&SpectralMeasure::two_factor(0.3, nu).unwrap()).unwrap();
            let grid = grid_argmin(|w1| two_factor_limit([w1, 1.0 - w1], 0.3, nu).unwrap(), 1e-4);
            assert!((r.weights.as_slice()[0] - grid).abs() < 1e-3, "nu={nu}: {:?} vs {grid}", r.weights);
        }
    }

    #[test]
    fn mrv_asymmetric_two_atom_matches_grid() {
        let psi = SpectralMeasure::new(
            2.5,
            vec![Atom { s: vec![0.8, 0.2], p: 0.7 }, Atom { s: vec![0.1, 0.9], p: 0.3 }],
        )
        .unwrap();
        let r = optimize_mrv_limit(&psi).unwrap();
        let grid = grid_argmin(|w1| dq_limit_mrv(&[w1, 1.0 - w1], &psi).unwrap(), 1e-4);
        assert!((r.weights.as_slice()[0] - grid).abs() < 1e-3);
    }

    #[test]
    fn mrv_rejects_light_tails() {
        assert!(optimize_mrv_limit(&SpectralMeasure::iid(3, 1.0).unwrap()).is_err());
    }

    #[test]
    fn projection_lands_on_constraint() {
        let c = [0.5, 2.0, 1.0];
        for z in [[3.0, -1.0, 0.2], [0.0, 0.0, 0.0], [-5.0, 10.0, 1e-3]] {
            let y = project(&z, &c);
            assert!(y.iter().all(|&v| v >= 0.0));
            let r: f64 = y.iter().zip(&c).map(|(a, b)| a * b).sum();
            assert!((r - 1.0).abs() <= MRV_CONSTRAINT_TOL);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn elliptical_optimum_ignores_location_and_scale(
            r in -0.3f64..0.9,
            s2 in 0.2f64..5.0,
            scale in 0.01f64..100.0,
            mu in prop::collection::vec(-10.0f64..10.0, 2),
        ) {
            let s = DMatrix::from_row_slice(2, 2, &[1.0, r * s2.sqrt(), r * s2.sqrt(), s2]);
            let base = optimize_elliptical(&centered(s.clone())).unwrap();
            let moved = EllipticalSpec::new(
                EllipticalFamily::Normal,
                DVector::from_vec(mu),
                s * scale,
            ).unwrap();
            let other = optimize_elliptical(&moved).unwrap();
            for (a, b) in base.weights.as_slice().iter().zip(other.weights.as_slice()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
