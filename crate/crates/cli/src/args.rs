use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

pub const DEFAULT_SEED: u64 = 20240901;
pub const DEFAULT_SAMPLES: usize = 1_000_000;

/// Diversification quotients based on VaR and ES.
#[derive(Debug, Parser)]
#[command(name = "dqlab", version, about)]
pub struct Cli {
    /// Output style for results written to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Plain)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Plain,
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// DQ, DR or the small-alpha limit for a normal or t model.
    Elliptical(EllipticalArgs),
    /// DQ or DR from a scenario CSV.
    Empirical(EmpiricalArgs),
    /// Draw a seeded scenario sample and write it as CSV.
    Sample(SampleArgs),
    /// Build a deterministic dependence structure as a scenario CSV.
    Construct(ConstructArgs),
    /// Find DQ-minimizing portfolio weights.
    Optimize(OptimizeArgs),
    /// Small-alpha DQ^VaR limit for a multivariate regularly varying model.
    Mrv(MrvArgs),
    /// Regenerate a figure or table as CSV plus a JSON manifest.
    Reproduce(ReproduceArgs),
    /// Execute a JSON config whose keys mirror the command-line flags.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Normal,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Structure {
    /// Unit diagonal, every off-diagonal entry r.
    Equicorrelated,
    /// Unit diagonal, entry (i, j) equal to r^|i-j|.
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    Var,
    Es,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Dq,
    Dr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Exceedance,
    Rmin,
    Bisection,
}

/// Elliptical model: family plus a dispersion matrix from a file or a
/// parametric structure.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = Family::Normal)]
    pub family: Family,
    /// Degrees of freedom of the t family.
    #[arg(long, required_if_eq("family", "t"))]
    pub nu: Option<f64>,
    /// Dispersion matrix as headerless CSV rows.
    #[arg(long, conflicts_with_all = ["structure", "dim", "r"])]
    pub sigma: Option<PathBuf>,
    #[arg(long, value_enum, requires_all = ["dim", "r"])]
    pub structure: Option<Structure>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub r: Option<f64>,
    /// Location vector; zero when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub mu: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct EllipticalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// One or more levels; a list produces one row per level.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MeasureArg::Var)]
    pub measure: MeasureArg,
    #[arg(long, value_enum, default_value_t = Stat::Dq)]
    pub stat: Stat,
    /// Report the alpha -> 0 limit of DQ^VaR instead.
    #[arg(long, conflicts_with_all = ["alpha", "stat"])]
    pub limit: bool,
}

#[derive(Debug, Args)]
pub struct EmpiricalArgs {
    /// Scenario CSV with a header; an optional trailing `prob` column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MeasureArg::Var)]
    pub measure: MeasureArg,
    #[arg(long, value_enum, default_value_t = Stat::Dq)]
    pub stat: Stat,
    /// Defaults to exceedance for VaR and rmin for ES.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[command(subcommand)]
    pub kind: SampleKind,
    #[arg(long, global = true, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Destination CSV; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SampleKind {
    /// Normal or t vector.
    Elliptical(ModelArgs),
    /// Independent columns with a common marginal.
    Iid {
        /// Marginal, e.g. `normal`, `t:3`, `uniform:-1:1`, `pareto:3`.
        #[arg(long, allow_hyphen_values = true)]
        margin: String,
        #[arg(long)]
        dim: usize,
    },
    /// `X = A Y` with iid t factors and loading r.
    TwoFactor {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        nu: f64,
    },
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(subcommand)]
    pub kind: ConstructKind,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub rows: usize,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ConstructKind {
    /// Quantile grid with perfectly aligned columns.
    Comonotonic {
        /// Comma-separated marginals, e.g. `normal,t:3`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        margins: Vec<String>,
    },
    /// Exclusive marginal tails inside one common event.
    AlphaCe {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        alpha: f64,
    },
    /// One-hot rows cycling through the coordinates.
    Onehot {
        #[arg(long)]
        dim: usize,
    },
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(subcommand)]
    pub kind: OptimizeKind,
}

#[derive(Debug, Subcommand)]
pub enum OptimizeKind {
    /// Closed form for elliptical models; the same weights at every level.
    Elliptical(ModelArgs),
    /// Search over the simplex on a scenario CSV.
    Empirical {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = MeasureArg::Var)]
        measure: MeasureArg,
    },
    /// Minimizer of the small-alpha limit for an MRV model.
    Mrv(SpectralArgs),
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "spectral_source")]
pub struct SpectralChoice {
    /// JSON `{"gamma": .., "atoms": [{"s": [..], "p": ..}, ..]}`.
    #[arg(long)]
    pub spectral: Option<PathBuf>,
    /// Independent margins with this many coordinates.
    #[arg(long, requires = "gamma")]
    pub iid: Option<usize>,
    /// Two-factor t model with this loading r (needs --nu).
    #[arg(long, requires = "nu")]
    pub two_factor: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SpectralArgs {
    #[command(flatten)]
    pub source: SpectralChoice,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MrvArgs {
    #[command(flatten)]
    pub model: SpectralArgs,
    /// Portfolio weights; equal weights when omitted.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Table1,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub id: FigureId,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo sample size where no closed form exists.
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}
