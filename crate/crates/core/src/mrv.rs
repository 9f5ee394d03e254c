//! Multivariate regular variation: spectral integrals and the `alpha -> 0`
//! limit of DQ^VaR for portfolios `w ⊙ X`.
//!
//! For `X` in `MRV_gamma` with spectral measure `Psi` on the L1 sphere,
//! `eta_x = sum_k p_k (x' s_k)^gamma` and
//! `f(w) = eta_w / (sum_i w_i eta_{e_i}^{1/gamma})^gamma`.

use crate::distributions::{stream_rng, ScenarioMatrix, BLOCK_ROWS};
use crate::error::{DqError, Result};
use rand_distr::{Distribution, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

const SPHERE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub s: Vec<f64>,
    pub p: f64,
}

/// Discrete spectral measure with tail index `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectral")]
pub struct SpectralMeasure {
    gamma: f64,
    atoms: Vec<Atom>,
}

#[derive(Deserialize)]
struct RawSpectral {
    gamma: f64,
    atoms: Vec<Atom>,
}

impl TryFrom<RawSpectral> for SpectralMeasure {
    type Error = DqError;
    fn try_from(raw: RawSpectral) -> Result<Self> {
        Self::new(raw.gamma, raw.atoms)
    }
}

impl SpectralMeasure {
    pub fn new(gamma: f64, atoms: Vec<Atom>) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(DqError::invalid(format!("tail index must be positive, got {gamma}")));
        }
        let n = atoms.first().map_or(0, |a| a.s.len());
        if n == 0 {
            return Err(DqError::invalid("spectral measure needs at least one atom of positive dimension"));
        }
        for (k, atom) in atoms.iter().enumerate() {
            if atom.s.len() != n {
                return Err(DqError::invalid(format!("atom {k} has dimension {}, expected {n}", atom.s.len())));
            }
            if !(atom.p.is_finite() && atom.p > 0.0) {
                return Err(DqError::invalid(format!("atom {k} has non-positive weight {}", atom.p)));
            }
            let norm: f64 = atom.s.iter().map(|v| v.abs()).sum();
            if !norm.is_finite() || (norm - 1.0).abs() > SPHERE_TOL {
                return Err(DqError::invalid(format!("atom {k} has L1 norm {norm}, expected 1")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.p).sum();
        if (total - 1.0).abs() > SPHERE_TOL {
            return Err(DqError::invalid(format!("atom weights sum to {total}, expected 1")));
        }
        Ok(Self { gamma, atoms })
    }

    /// Spectral measure of `n` iid regularly varying margins: mass `1/n` on
    /// each basis vector.
    pub fn iid(n: usize, gamma: f64) -> Result<Self> {
        let atoms = (0..n)
            .map(|i| {
                let mut s = vec![0.0; n];
                s[i] = 1.0;
                Atom { s, p: 1.0 / n as f64 }
            })
            .collect();
        Self::new(gamma, atoms)
    }

    /// Upper-tail spectral atoms of `X = A Y` with
    /// `A = [[1, 0], [r, sqrt(1 - r^2)]]` and iid `t_nu` factors `Y`.
    ///
    /// A large `Y_1` points along `(1, r)`, a large `Y_2` along `(0, 1)`; their
    /// weights are the L1 lengths of the columns of `A` raised to `nu`.
    pub fn two_factor(r: f64, nu: f64) -> Result<Self> {
        check_two_factor(r, nu)?;
        let c = (1.0 - r * r).sqrt();
        let w1 = (1.0 + r).powf(nu);
        let w2 = c.powf(nu);
        let total = w1 + w2;
        Self::new(
            nu,
            vec![
                Atom { s: vec![1.0 / (1.0 + r), r / (1.0 + r)], p: w1 / total },
                Atom { s: vec![0.0, 1.0], p: w2 / total },
            ],
        )
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].s.len()
    }

    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?)
    }

    /// `eta_{e_i}` for every margin.
    pub fn marginal_etas(&self) -> Result<Vec<f64>> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                eta(&e, self)
            })
            .collect()
    }
}

fn check_two_factor(r: f64, nu: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r) {
        return Err(DqError::invalid(format!("r must lie in [0, 1), got {r}")));
    }
    if !(nu.is_finite() && nu > 0.0) {
        return Err(DqError::invalid(format!("nu must be positive, got {nu}")));
    }
    Ok(())
}

/// `eta_x = sum_k p_k (x' s_k)^gamma`.
pub fn eta(x: &[f64], psi: &SpectralMeasure) -> Result<f64> {
    if x.len() != psi.dim() {
        return Err(DqError::invalid(format!("vector has length {}, measure has dimension {}", x.len(), psi.dim())));
    }
    let g = psi.gamma;
    let integer = g.fract() == 0.0 && g <= i32::MAX as f64;
    let mut total = 0.0;
    for atom in &psi.atoms {
        let dot: f64 = x.iter().zip(&atom.s).map(|(a, b)| a * b).sum();
        let term = if integer {
            dot.powi(g as i32)
        } else if dot < 0.0 {
            return Err(DqError::invalid(format!("x's = {dot} is negative and gamma = {g} is not an integer")));
        } else {
            dot.powf(g)
        };
        total += atom.p * term;
    }
    Ok(total)
}

/// `lim_{alpha -> 0} DQ^VaR_alpha(w ⊙ X)`.
///
/// `w` may be any nonnegative, nonzero vector; it is normalized first, which
/// does not change the value. Zero-weight margins are dropped.
pub fn dq_limit_mrv(w: &[f64], psi: &SpectralMeasure) -> Result<f64> {
    let w = normalized(w, psi.dim())?;
    let g = psi.gamma;
    let etas = psi.marginal_etas()?;
    let mut denom = 0.0;
    for (i, (&wi, &e)) in w.iter().zip(&etas).enumerate() {
        if wi == 0.0 {
            continue;
        }
        if e <= 0.0 {
            return Err(DqError::invalid(format!("margin {i} has no tail mass (eta_e{} = 0)", i + 1)));
        }
        denom += wi * e.powf(1.0 / g);
    }
    Ok(eta(&w, psi)? / denom.powf(g))
}

fn normalized(w: &[f64], n: usize) -> Result<Vec<f64>> {
    if w.len() != n {
        return Err(DqError::invalid(format!("weight vector has length {}, expected {n}", w.len())));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(DqError::invalid("weights must be nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(DqError::invalid("weights must not all be zero"));
    }
    Ok(w.iter().map(|v| v / total).collect())
}

/// `n^(1 - gamma)`, the limit for `n` iid regularly varying margins.
pub fn dq_limit_iid(n: usize, gamma: f64) -> Result<f64> {
    if n == 0 || !(gamma.is_finite() && gamma > 0.0) {
        return Err(DqError::invalid("need n >= 1 and gamma > 0"));
    }
    Ok((n as f64).powf(1.0 - gamma))
}

/// Closed-form `f(w)` for the two-factor t model with correlation `r`.
pub fn two_factor_limit(w: [f64; 2], r: f64, nu: f64) -> Result<f64> {
    check_two_factor(r, nu)?;
    let [w1, w2] = <[f64; 2]>::try_from(normalized(&w, 2)?).unwrap();
    let c = (1.0 - r * r).sqrt();
    let a = (w1 + w2 * r).powf(nu) + (w2 * c).powf(nu);
    let b = r.powf(nu) + c.powf(nu);
    Ok((w1 * a.powf(-1.0 / nu) + w2 * (a / b).powf(-1.0 / nu)).powf(-nu))
}

/// `count` draws of `X = A Y` for the two-factor t model.
pub fn sample_two_factor(r: f64, nu: f64, count: usize, seed: u64) -> Result<ScenarioMatrix> {
    check_two_factor(r, nu)?;
    if count == 0 {
        return Err(DqError::invalid("sample size must be positive"));
    }
    let t = StudentT::new(nu).map_err(|e| DqError::invalid(e.to_string()))?;
    let c = (1.0 - r * r).sqrt();
    let mut data = vec![0.0; 2 * count];
    data.par_chunks_mut(2 * BLOCK_ROWS).enumerate().for_each(|(block, chunk)| {
        let mut rng = stream_rng(seed, block as u64);
        for row in chunk.chunks_mut(2) {
            let y1: f64 = t.sample(&mut rng);
            let y2: f64 = t.sample(&mut rng);
            row[0] = y1;
            row[1] = r * y1 + c * y2;
        }
    });
    ScenarioMatrix::from_row_major(2, data)
}
