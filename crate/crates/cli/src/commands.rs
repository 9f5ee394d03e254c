use crate::args::*;
use crate::format::{emit, fmt6, num, Table};
use dqlab::elliptical::{
    ar1, dq_es_elliptical, dq_var_elliptical, dq_var_limit, dr_elliptical, equicorrelated, read_dispersion_path,
};
use dqlab::distributions::sample_iid;
use dqlab::dependence::{make_alpha_ce, make_comonotonic, make_multinomial_onehot};
use dqlab::mrv::{dq_limit_mrv, sample_two_factor, SpectralMeasure};
use dqlab::optimizer::{optimize_dq_empirical, optimize_elliptical, optimize_mrv_limit, OptimizationReport};
use dqlab::{
    dq, dr, sample_elliptical, DqError, DqMethod, EllipticalFamily, EllipticalSpec, Level, Measure,
    Result, ScenarioMatrix, UnivariateModel,
};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

fn invalid(msg: impl Into<String>) -> DqError {
    DqError::InvalidInput(msg.into())
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::Var => Measure::VaR,
            MeasureArg::Es => Measure::ES,
        }
    }
}

impl From<MethodArg> for DqMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Exceedance => DqMethod::Exceedance,
            MethodArg::Rmin => DqMethod::Rmin,
            MethodArg::Bisection => DqMethod::Bisection,
        }
    }
}

fn family(f: Family, nu: Option<f64>) -> Result<EllipticalFamily> {
    Ok(match f {
        Family::Normal => EllipticalFamily::Normal,
        Family::T => EllipticalFamily::StudentT { dof: nu.ok_or_else(|| invalid("--nu is required for the t family"))? },
    })
}

pub fn dispersion(m: &ModelArgs) -> Result<DMatrix<f64>> {
    match (&m.sigma, m.structure) {
        (Some(path), _) => read_dispersion_path(path).map_err(|e| match e {
            DqError::Io(io) => invalid(format!("cannot read {}: {io}", path.display())),
            other => other,
        }),
        (None, Some(s)) => {
            let n = m.dim.ok_or_else(|| invalid("--dim is required with --structure"))?;
            let r = m.r.ok_or_else(|| invalid("--r is required with --structure"))?;
            if n == 0 {
                return Err(invalid("--dim must be positive"));
            }
            Ok(match s {
                Structure::Equicorrelated => equicorrelated(n, r),
                Structure::Ar1 => ar1(n, r),
            })
        }
        (None, None) => Err(invalid("give --sigma or --structure with --dim and --r")),
    }
}

pub fn model(m: &ModelArgs) -> Result<EllipticalSpec> {
    let sigma = dispersion(m)?;
    let mu = match &m.mu {
        Some(v) => DVector::from_vec(v.clone()),
        None => DVector::zeros(sigma.nrows()),
    };
    EllipticalSpec::new(family(m.family, m.nu)?, mu, sigma)
}

/// Parses `normal[:loc:scale]`, `t:nu[:loc:scale]`, `uniform:a:b`, `pareto:gamma[:scale]`.
pub fn margin(text: &str) -> Result<UnivariateModel> {
    let mut parts = text.split(':');
    let name = parts.next().unwrap_or_default().to_ascii_lowercase();
    let nums = parts
        .map(|p| p.trim().parse::<f64>().map_err(|_| invalid(format!("bad number {p:?} in margin {text:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let bad = || invalid(format!("cannot parse margin {text:?}"));
    match (name.as_str(), nums.as_slice()) {
        ("normal", []) => Ok(UnivariateModel::standard_normal()),
        ("normal", [loc, scale]) => UnivariateModel::normal(*loc, *scale),
        ("t", [nu]) => UnivariateModel::student_t(*nu, 0.0, 1.0),
        ("t", [nu, loc, scale]) => UnivariateModel::student_t(*nu, *loc, *scale),
        ("uniform", [a, b]) => UnivariateModel::uniform(*a, *b),
        ("pareto", [g]) => UnivariateModel::pareto(*g, 1.0),
        ("pareto", [g, s]) => UnivariateModel::pareto(*g, *s),
        _ => Err(bad()),
    }
}

fn levels(alphas: &[f64]) -> Result<Vec<Level>> {
    if alphas.is_empty() {
        return Err(invalid("at least one --alpha is required"));
    }
    alphas.iter().map(|&a| Level::new(a)).collect()
}

/// One value per level, printed bare for a single plain-format level.
fn report_levels(
    fmt: Format,
    alphas: &[Level],
    values: &[f64],
    stderr: &[Option<f64>],
    meta: serde_json::Value,
) -> Result<()> {
    match fmt {
        Format::Plain if values.len() == 1 => emit(&fmt6(values[0])),
        Format::Json => {
            let rows: Vec<_> = alphas
                .iter()
                .zip(values)
                .zip(stderr)
                .map(|((a, v), s)| {
                    let mut row = json!({ "alpha": num(a.get()), "value": num(*v) });
                    if let Some(s) = s {
                        row["stderr"] = num(*s);
                    }
                    if let (Some(obj), Some(extra)) = (row.as_object_mut(), meta.as_object()) {
                        obj.extend(extra.clone());
                    }
                    row
                })
                .collect();
            emit(&serde_json::to_string_pretty(&rows)?)
        }
        _ => {
            let with_se = stderr.iter().any(Option::is_some);
            let mut t = Table::new(if with_se { vec!["alpha", "value", "stderr"] } else { vec!["alpha", "value"] });
            for ((a, v), s) in alphas.iter().zip(values).zip(stderr) {
                let mut row = vec![a.get(), *v];
                if with_se {
                    row.push(s.unwrap_or(f64::NAN));
                }
                t.rows.push(row);
            }
            emit(&t.render())
        }
    }
}

pub fn elliptical(a: &EllipticalArgs, fmt: Format) -> Result<()> {
    let spec = model(&a.model)?;
    if a.limit {
        let v = dq_var_limit(&spec)?;
        return match fmt {
            Format::Json => emit(&json!({ "limit": num(v) }).to_string()),
            _ => emit(&fmt6(v)),
        };
    }
    let alphas = levels(&a.alpha)?;
    let measure = Measure::from(a.measure);
    let values = alphas
        .iter()
        .map(|&al| match (a.stat, measure) {
            (Stat::Dq, Measure::VaR) => dq_var_elliptical(&spec, al).map(|r| r.value),
            (Stat::Dq, Measure::ES) => dq_es_elliptical(&spec, al).map(|r| r.value),
            (Stat::Dr, m) => dr_elliptical(&spec, m, al),
        })
        .collect::<Result<Vec<_>>>()?;
    let meta = json!({ "measure": measure.to_string(), "stat": stat_name(a.stat), "method": "analytic" });
    report_levels(fmt, &alphas, &values, &vec![None; values.len()], meta)
}

fn stat_name(s: Stat) -> &'static str {
    match s {
        Stat::Dq => "dq",
        Stat::Dr => "dr",
    }
}

fn read_scenarios(path: &std::path::Path) -> Result<ScenarioMatrix> {
    ScenarioMatrix::read_csv_path(path).map_err(|e| match e {
        DqError::Io(io) => invalid(format!("cannot read {}: {io}", path.display())),
        other => other,
    })
}

pub fn empirical(a: &EmpiricalArgs, fmt: Format) -> Result<()> {
    let m = read_scenarios(&a.input)?;
    let alphas = levels(&a.alpha)?;
    let measure = Measure::from(a.measure);
    let method = a.method.map(DqMethod::from).unwrap_or(match measure {
        Measure::VaR => DqMethod::Exceedance,
        Measure::ES => DqMethod::Rmin,
    });
    let mut values = Vec::new();
    let mut stderr = Vec::new();
    for &al in &alphas {
        match a.stat {
            Stat::Dq => {
                let r = dq(&m, measure, al, method)?;
                values.push(r.value);
                stderr.push(r.stderr);
            }
            Stat::Dr => {
                values.push(dr(&m, measure, al)?);
                stderr.push(None);
            }
        }
    }
    let meta = json!({ "measure": measure.to_string(), "stat": stat_name(a.stat), "method": method.to_string() });
    report_levels(fmt, &alphas, &values, &stderr, meta)
}

fn write_scenarios(m: &ScenarioMatrix, out: Option<&std::path::Path>) -> Result<()> {
    match out {
        Some(p) => m.write_csv_path(p),
        None => m.write_csv(std::io::stdout().lock()),
    }
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    let m = match &a.kind {
        SampleKind::Elliptical(spec) => sample_elliptical(&model(spec)?, a.samples, a.seed)?,
        SampleKind::Iid { margin: text, dim } => sample_iid(&margin(text)?, *dim, a.samples, a.seed)?,
        SampleKind::TwoFactor { r, nu } => sample_two_factor(*r, *nu, a.samples, a.seed)?,
    };
    write_scenarios(&m, a.out.as_deref())
}

pub fn construct(a: &ConstructArgs) -> Result<()> {
    let m = match &a.kind {
        ConstructKind::Comonotonic { margins } => {
            let ms = margins.iter().map(|t| margin(t)).collect::<Result<Vec<_>>>()?;
            make_comonotonic(&ms, a.rows)?
        }
        ConstructKind::AlphaCe { dim, alpha } => make_alpha_ce(*dim, Level::new(*alpha)?, a.rows)?,
        ConstructKind::Onehot { dim } => make_multinomial_onehot(*dim, a.rows)?,
    };
    write_scenarios(&m, a.out.as_deref())
}

pub fn spectral(a: &SpectralArgs) -> Result<SpectralMeasure> {
    let s = &a.source;
    if let Some(path) = &s.spectral {
        return SpectralMeasure::from_json_path(path).map_err(|e| match e {
            DqError::Io(io) => invalid(format!("cannot read {}: {io}", path.display())),
            DqError::Json(j) => invalid(format!("bad spectral measure in {}: {j}", path.display())),
            other => other,
        });
    }
    if let Some(n) = s.iid {
        return SpectralMeasure::iid(n, a.gamma.ok_or_else(|| invalid("--gamma is required with --iid"))?);
    }
    if let Some(r) = s.two_factor {
        return SpectralMeasure::two_factor(r, a.nu.ok_or_else(|| invalid("--nu is required with --two-factor"))?);
    }
    Err(invalid("give --spectral, --iid or --two-factor"))
}

fn report_weights(r: &OptimizationReport, fmt: Format) -> Result<()> {
    let w = r.weights.as_slice();
    match fmt {
        Format::Json => emit(&serde_json::to_string_pretty(&json!({
            "weights": w.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "objective": num(r.objective),
            "method": r.method,
            "iterations": r.iterations,
            "converged": r.converged,
        }))?),
        Format::Csv => {
            let mut t = Table::new(["asset", "weight"]);
            for (i, &x) in w.iter().enumerate() {
                t.rows.push(vec![(i + 1) as f64, x]);
            }
            emit(&t.render())
        }
        Format::Plain => {
            let ws: Vec<String> = w.iter().map(|&x| fmt6(x)).collect();
            emit(&format!("weights={}\nobjective={}", ws.join(","), fmt6(r.objective)))
        }
    }
}

pub fn optimize(a: &OptimizeArgs, fmt: Format) -> Result<()> {
    let report = match &a.kind {
        OptimizeKind::Elliptical(spec) => optimize_elliptical(&model(spec)?)?,
        OptimizeKind::Empirical { input, alpha, measure } => {
            optimize_dq_empirical(&read_scenarios(input)?, Measure::from(*measure), Level::new(*alpha)?)?
        }
        OptimizeKind::Mrv(s) => optimize_mrv_limit(&spectral(s)?)?,
    };
    report_weights(&report, fmt)
}

pub fn mrv(a: &MrvArgs, fmt: Format) -> Result<()> {
    let psi = spectral(&a.model)?;
    let w = a.weights.clone().unwrap_or_else(|| vec![1.0; psi.dim()]);
    let v = dq_limit_mrv(&w, &psi)?;
    match fmt {
        Format::Json => emit(&json!({ "limit": num(v) }).to_string()),
        _ => emit(&fmt6(v)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_parse() {
        assert_eq!(margin("normal").unwrap(), UnivariateModel::standard_normal());
        assert_eq!(margin("t:3").unwrap(), UnivariateModel::student_t(3.0, 0.0, 1.0).unwrap());
        assert_eq!(margin("uniform:-1:1").unwrap(), UnivariateModel::uniform(-1.0, 1.0).unwrap());
        assert_eq!(margin("pareto:3:2").unwrap(), UnivariateModel::pareto(3.0, 2.0).unwrap());
        assert!(margin("cauchy").is_err());
        assert!(margin("t:x").is_err());
        assert!(margin("normal:1").is_err());
    }
}
