//! Figure and table data for the elliptical and MRV experiments.
//!
//! Curves with a closed form are computed analytically; the two-factor
//! panels use a seeded sample shared by all weights of a panel, with the
//! panel seed derived from the base seed and the panel index.

use crate::args::{FigureId, ReproduceArgs};
use crate::format::{fmt6, num, Table};
use dqlab::dq::marginal_risks;
use dqlab::elliptical::{ar1, dq_es_given_k, dq_var_given_k, equicorrelated, k_sigma};
use dqlab::mrv::{sample_two_factor, two_factor_limit};
use dqlab::optimizer::optimize_elliptical;
use dqlab::{pelve, DqError, EllipticalFamily, EllipticalSpec, Level, Measure, Result, UnivariateModel};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::Path;

const T_DOF: f64 = 3.0;

/// splitmix64 of `base + (index + 1) * golden`.
pub fn point_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lvl(a: f64) -> Result<Level> {
    Level::new(a)
}

fn t(dof: f64) -> EllipticalFamily {
    EllipticalFamily::StudentT { dof }
}

/// Evenly spaced `start, start + step, ..., stop` without accumulated drift.
fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).map(|x| (x * 1e10).round() / 1e10).collect()
}

struct Model {
    name: &'static str,
    family: EllipticalFamily,
    equicorrelated: bool,
}

fn four_models(dof: f64) -> [Model; 4] {
    [
        Model { name: "normal_sigma1", family: EllipticalFamily::Normal, equicorrelated: true },
        Model { name: "normal_sigma2", family: EllipticalFamily::Normal, equicorrelated: false },
        Model { name: "t_sigma1", family: t(dof), equicorrelated: true },
        Model { name: "t_sigma2", family: t(dof), equicorrelated: false },
    ]
}

fn k_of(equi: bool, n: usize, r: f64) -> Result<f64> {
    let sigma = if equi { equicorrelated(n, r) } else { ar1(n, r) };
    Ok(k_sigma(&sigma)?.k_sigma)
}

fn dq_given_k(family: EllipticalFamily, measure: Measure, k: f64, alpha: Level) -> Result<f64> {
    Ok(match measure {
        Measure::VaR => dq_var_given_k(family, k, alpha)?.value,
        Measure::ES => dq_es_given_k(family, k, alpha)?.value,
    })
}

fn panel_suffix(m: Measure) -> &'static str {
    match m {
        Measure::VaR => "var",
        Measure::ES => "es",
    }
}

/// One row per grid point, computed in parallel and collected in order.
fn sweep(xs: &[f64], row: impl Fn(f64) -> Result<Vec<f64>> + Sync) -> Result<Vec<Vec<f64>>> {
    xs.par_iter()
        .map(|&x| {
            let mut r = vec![x];
            r.extend(row(x)?);
            Ok(r)
        })
        .collect()
}

struct Output {
    files: Vec<String>,
    parameters: Value,
    seeds: Value,
}

fn save(dir: &Path, name: &str, table: &Table, files: &mut Vec<String>) -> Result<()> {
    table.write(&dir.join(name))?;
    files.push(name.to_string());
    Ok(())
}

fn fig1(dir: &Path) -> Result<Output> {
    let (alpha, r, n) = (lvl(0.05)?, 0.3, 4);
    let k1 = k_of(true, n, r)?;
    let k2 = k_of(false, n, r)?;
    let mut files = Vec::new();
    for (measure, start) in [(Measure::VaR, 0.1), (Measure::ES, 1.1)] {
        let mut table = Table::new(["nu", "dq_t_sigma1", "dq_t_sigma2", "dr_t_sigma1", "dr_t_sigma2"]);
        table.rows = sweep(&grid(start, 10.0, 0.1), |nu| {
            // centered models: DR = 1 / k for every generator
            Ok(vec![dq_given_k(t(nu), measure, k1, alpha)?, dq_given_k(t(nu), measure, k2, alpha)?, 1.0 / k1, 1.0 / k2])
        })?;
        save(dir, &format!("fig1_{}.csv", panel_suffix(measure)), &table, &mut files)?;
    }
    Ok(Output {
        files,
        parameters: json!({ "alpha": 0.05, "r": r, "n": n, "nu_step": 0.1, "nu_min_var": 0.1, "nu_min_es": 1.1, "nu_max": 10.0 }),
        seeds: json!({}),
    })
}

fn model_sweep(
    dir: &Path,
    prefix: &str,
    var: &str,
    xs: &[f64],
    k_and_alpha: impl Fn(&Model, f64) -> Result<(f64, Level)> + Sync,
) -> Result<Vec<String>> {
    let models = four_models(T_DOF);
    let mut files = Vec::new();
    for measure in [Measure::VaR, Measure::ES] {
        let mut header = vec![var.to_string()];
        header.extend(models.iter().map(|m| m.name.to_string()));
        let mut table = Table::new(header);
        table.rows = sweep(xs, |x| {
            models
                .iter()
                .map(|m| {
                    let (k, alpha) = k_and_alpha(m, x)?;
                    dq_given_k(m.family, measure, k, alpha)
                })
                .collect()
        })?;
        save(dir, &format!("{prefix}_{}.csv", panel_suffix(measure)), &table, &mut files)?;
    }
    Ok(files)
}

fn fig2(dir: &Path) -> Result<Output> {
    let alpha = lvl(0.05)?;
    let files = model_sweep(dir, "fig2", "r", &grid(0.0, 1.0, 0.02), |m, r| Ok((k_of(m.equicorrelated, 4, r)?, alpha)))?;
    Ok(Output { files, parameters: json!({ "alpha": 0.05, "nu": T_DOF, "n": 4, "r_step": 0.02 }), seeds: json!({}) })
}

fn fig3(dir: &Path) -> Result<Output> {
    let k1 = k_of(true, 4, 0.3)?;
    let k2 = k_of(false, 4, 0.3)?;
    let files = model_sweep(dir, "fig3", "alpha", &grid(0.001, 0.1, 0.001), |m, a| {
        Ok((if m.equicorrelated { k1 } else { k2 }, lvl(a)?))
    })?;
    Ok(Output {
        files,
        parameters: json!({ "nu": T_DOF, "r": 0.3, "n": 4, "alpha_min": 0.001, "alpha_max": 0.1, "alpha_step": 0.001 }),
        seeds: json!({}),
    })
}

fn fig4(dir: &Path) -> Result<Output> {
    let alpha = lvl(0.05)?;
    let ns: Vec<f64> = (2..=100).map(f64::from).collect();
    let files = model_sweep(dir, "fig4", "n", &ns, |m, n| Ok((k_of(m.equicorrelated, n as usize, 0.5)?, alpha)))?;
    Ok(Output { files, parameters: json!({ "alpha": 0.05, "nu": T_DOF, "r": 0.5, "n_min": 2, "n_max": 100 }), seeds: json!({}) })
}

fn fig5(dir: &Path) -> Result<Output> {
    let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
    let spec = EllipticalSpec::centered(t(T_DOF), sigma.clone())?;
    let alphas = [0.001, 0.01, 0.025, 0.05];
    let mut files = Vec::new();
    for measure in [Measure::VaR, Measure::ES] {
        let mut header = vec!["w1".to_string()];
        header.extend(alphas.iter().map(|a| format!("alpha_{a}")));
        let mut table = Table::new(header);
        table.rows = sweep(&grid(0.0, 1.0, 0.01), |w1| {
            let w = [w1, 1.0 - w1];
            let weighted = DMatrix::from_fn(2, 2, |i, j| w[i] * w[j] * sigma[(i, j)]);
            let k = k_sigma(&weighted)?.k_sigma;
            alphas.iter().map(|&a| dq_given_k(t(T_DOF), measure, k, lvl(a)?)).collect()
        })?;
        save(dir, &format!("fig5_{}.csv", panel_suffix(measure)), &table, &mut files)?;
    }
    let opt = optimize_elliptical(&spec)?;
    Ok(Output {
        files,
        parameters: json!({
            "nu": T_DOF,
            "sigma": [[1.0, 0.5], [0.5, 2.0]],
            "alphas": alphas,
            "w1_step": 0.01,
            "optimal_w1": num(opt.weights.as_slice()[0]),
        }),
        seeds: json!({}),
    })
}

fn fig6(dir: &Path, seed: u64, samples: usize) -> Result<Output> {
    let r = 0.3;
    let alphas = [0.001, 0.01, 0.025];
    let mut files = Vec::new();
    let mut seeds = serde_json::Map::new();
    for (panel, nu) in [2.0, 4.0].into_iter().enumerate() {
        let panel_seed = point_seed(seed, panel as u64);
        let m = sample_two_factor(r, nu, samples, panel_seed)?;
        let levels = alphas.iter().map(|&a| lvl(a)).collect::<Result<Vec<_>>>()?;
        if levels.iter().any(|a| a.get() * (samples as f64) < 1.0) {
            return Err(DqError::InvalidInput(format!("--samples {samples} leaves no tail scenarios at alpha 0.001")));
        }
        let marginal = levels.iter().map(|&a| marginal_risks(&m, Measure::VaR, a)).collect::<Result<Vec<_>>>()?;
        let mut header = vec!["w1".to_string()];
        header.extend(alphas.iter().map(|a| format!("alpha_{a}")));
        header.push("limit".into());
        let mut table = Table::new(header);
        table.rows = sweep(&grid(0.0, 1.0, 0.01), |w1| {
            let w = [w1, 1.0 - w1];
            let sums = m.weighted_sums(&w);
            let mut row = Vec::with_capacity(alphas.len() + 1);
            for (a, v) in levels.iter().zip(&marginal) {
                // VaR is positively homogeneous, so the threshold is w . VaR(X)
                let threshold = w[0] * v[0] + w[1] * v[1];
                let exceed = sums.iter().filter(|&&s| s > threshold).count();
                row.push(exceed as f64 / samples as f64 / a.get());
            }
            row.push(two_factor_limit(w, r, nu)?);
            Ok(row)
        })?;
        let name = format!("fig6_nu{nu}.csv");
        seeds.insert(name.clone(), json!(panel_seed));
        save(dir, &name, &table, &mut files)?;
    }
    Ok(Output {
        files,
        parameters: json!({ "r": r, "nu": [2.0, 4.0], "alphas": alphas, "w1_step": 0.01, "samples": samples }),
        seeds: Value::Object(seeds),
    })
}

fn table1(dir: &Path) -> Result<Output> {
    let a = 0.01;
    let alpha = lvl(a)?;
    let mut csv = String::from("model,c,c_alpha,dq_var_alpha,dq_es_c_alpha\n");
    for m in four_models(T_DOF).iter() {
        let margin: UnivariateModel = m.family.standard_margin();
        let c = pelve(&margin, alpha)?;
        let k = k_of(m.equicorrelated, 4, 0.3)?;
        let dq_var = dq_var_given_k(m.family, k, alpha)?.value;
        let dq_es = dq_es_given_k(m.family, k, lvl(c * a)?)?.value;
        let cells: Vec<String> = [c, c * a, dq_var, dq_es].iter().map(|&v| fmt6(v)).collect();
        csv.push_str(&format!("{},{}\n", m.name, cells.join(",")));
    }
    std::fs::write(dir.join("table1.csv"), csv)?;
    let files = vec!["table1.csv".to_string()];
    Ok(Output {
        files,
        parameters: json!({ "alpha": a, "n": 4, "r": 0.3, "nu": T_DOF }),
        seeds: json!({}),
    })
}

pub fn run(a: &ReproduceArgs) -> Result<()> {
    if a.samples == 0 {
        return Err(DqError::InvalidInput("--samples must be at least 1".into()));
    }
    std::fs::create_dir_all(&a.out)
        .map_err(|e| DqError::InvalidInput(format!("cannot create {}: {e}", a.out.display())))?;
    let (id, out) = match a.id {
        FigureId::Fig1 => ("fig1", fig1(&a.out)?),
        FigureId::Fig2 => ("fig2", fig2(&a.out)?),
        FigureId::Fig3 => ("fig3", fig3(&a.out)?),
        FigureId::Fig4 => ("fig4", fig4(&a.out)?),
        FigureId::Fig5 => ("fig5", fig5(&a.out)?),
        FigureId::Fig6 => ("fig6", fig6(&a.out, a.seed, a.samples)?),
        FigureId::Table1 => ("table1", table1(&a.out)?),
    };
    let manifest = json!({
        "id": id,
        "tool": "dqlab",
        "version": env!("CARGO_PKG_VERSION"),
        "base_seed": a.seed,
        "samples": a.samples,
        "seed_derivation": "splitmix64(base_seed + (panel_index + 1) * 0x9E3779B97F4A7C15)",
        "panel_seeds": out.seeds,
        "parameters": out.parameters,
        "files": out.files,
        "replay": format!("dqlab reproduce {id} --out <dir> --seed {} --samples {}", a.seed, a.samples),
    });
    std::fs::write(a.out.join(format!("{id}_manifest.json")), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
