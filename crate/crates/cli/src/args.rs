use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "needlet", version, about = "Needlet window design and spherical analysis")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file whose keys mirror the long flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Design windows.
    #[command(subcommand)]
    Design(DesignKind),
    /// Needlet coefficients of a map or multipole file.
    Analyze(AnalyzeArgs),
    /// Reconstruct a field from needlet coefficients.
    Synthesize(SynthesizeArgs),
    /// Gaussian isotropic realizations of a power spectrum.
    Simulate(SimulateArgs),
    /// Evaluate windows against a criterion.
    #[command(subcommand)]
    Evaluate(EvaluateKind),
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// Tight B-adic family of square-root spline windows.
    Spline(SplineArgs),
    /// Best cap-concentrated window of a band.
    Slepian(SlepianArgs),
    /// MISE-optimal window under a mask.
    Mise(MiseDesignArgs),
    /// One of the reference windows.
    Reference(ReferenceArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Cap openings (degrees) of the criteria report.
    #[arg(long = "theta0", action = ArgAction::Set, num_args = 1.., default_values_t = [1.0, 5.0, 10.0])]
    pub theta0: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplineArgs {
    #[arg(long = "B")]
    pub base: f64,
    /// Odd spline order.
    #[arg(long)]
    pub order: u32,
    #[arg(long)]
    pub jmax: u32,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SlepianArgs {
    #[arg(long, action = ArgAction::Set, num_args = 2, value_names = ["LMIN", "LMAX"], required = true)]
    pub band: Vec<usize>,
    /// Design opening (degrees), then any further report openings.
    #[arg(long = "theta0", action = ArgAction::Set, num_args = 1.., required = true)]
    pub theta0: Vec<f64>,
    /// `auto`, `none` or a fixed penalty weight.
    #[arg(long, default_value = "auto")]
    pub smoothing: String,
}

#[derive(Debug, Args, Serialize)]
pub struct MaskArgs {
    /// JSON mask description.
    #[arg(long)]
    pub mask: PathBuf,
    /// Power spectrum CSV.
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Band limit of the mask expansion.
    #[arg(long = "mask-lmax", default_value_t = 96)]
    pub mask_lmax: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct MiseDesignArgs {
    #[arg(long, action = ArgAction::Set, num_args = 2, value_names = ["LMIN", "LMAX"], required = true)]
    pub band: Vec<usize>,
    #[command(flatten)]
    pub mask: MaskArgs,
    /// Estimate Q by Monte Carlo with this many realizations; required for
    /// map masks.
    #[arg(long = "n-mc")]
    pub n_mc: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceName {
    Exponential,
    Bspline3,
    MexicanHat,
    SqrtSpline,
}

#[derive(Debug, Args, Serialize)]
pub struct ReferenceArgs {
    #[arg(long)]
    pub kind: ReferenceName,
    /// Scale index.
    #[arg(long, allow_hyphen_values = true)]
    pub j: Option<i32>,
    /// Mexican-hat width.
    #[arg(long = "R")]
    pub r: Option<f64>,
    /// Mexican-hat truncation degree.
    #[arg(long)]
    pub lmax: Option<usize>,
    #[arg(long = "B")]
    pub base: Option<f64>,
    #[arg(long)]
    pub order: Option<u32>,
    #[command(flatten)]
    pub report: ReportArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    /// Map or multipole file.
    #[arg(long)]
    pub input: PathBuf,
    /// Family manifest.
    #[arg(long)]
    pub family: PathBuf,
    /// Synthesize back and report the reconstruction error.
    #[arg(long)]
    pub check: bool,
    /// One minimal grid per scale instead of a shared one.
    #[arg(long = "per-scale-grid")]
    pub per_scale_grid: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthesizeArgs {
    /// Coefficient manifest written by `analyze`.
    #[arg(long)]
    pub coefficients: PathBuf,
    /// Family manifest the coefficients were computed with.
    #[arg(long)]
    pub family: PathBuf,
    /// Map or multipole file to compare against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum FieldFormat {
    Alm,
    Map,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub spectrum: PathBuf,
    /// Number of realizations.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = FieldFormat::Alm)]
    pub format: FieldFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct WindowInputs {
    /// Window files.
    #[arg(long, action = ArgAction::Set, num_args = 1..)]
    pub windows: Vec<PathBuf>,
    /// Family manifest, as an alternative to `--windows`.
    #[arg(long)]
    pub family: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluateKind {
    /// Cap concentration `1 - ∫_cap ψ² / ∫ ψ²`.
    Concentration(ConcentrationArgs),
    /// L^p cap concentration.
    Lp(LpArgs),
    /// Probability curve of the mask-induced error.
    MaskError(MaskErrorArgs),
    /// Per-realization integrated square error under a mask.
    Mise(MiseEvalArgs),
    /// Uncertainty product.
    Heisenberg(HeisenbergArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ConcentrationArgs {
    #[command(flatten)]
    pub inputs: WindowInputs,
    #[arg(long = "theta0", action = ArgAction::Set, num_args = 1.., required = true)]
    pub theta0: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct LpArgs {
    #[command(flatten)]
    pub inputs: WindowInputs,
    #[arg(long = "theta0", action = ArgAction::Set, num_args = 1.., required = true)]
    pub theta0: Vec<f64>,
    /// Exponents: 1, 2 or inf.
    #[arg(long, action = ArgAction::Set, num_args = 1.., default_values = ["1", "2", "inf"])]
    pub p: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    #[default]
    Empirical,
    Gaussian,
}

#[derive(Debug, Args, Serialize)]
pub struct MaskErrorArgs {
    #[command(flatten)]
    pub inputs: WindowInputs,
    #[command(flatten)]
    pub mask: MaskArgs,
    #[arg(long = "alpha-grid", action = ArgAction::Set, num_args = 3, value_names = ["A0", "A1", "STEP"], required = true)]
    pub alpha_grid: Vec<f64>,
    #[arg(long = "n-mc", default_value_t = 30)]
    pub n_mc: usize,
    #[arg(long, value_enum, default_value_t = MethodName::Empirical)]
    pub method: MethodName,
}

#[derive(Debug, Args, Serialize)]
pub struct MiseEvalArgs {
    #[command(flatten)]
    pub inputs: WindowInputs,
    #[command(flatten)]
    pub mask: MaskArgs,
    #[arg(long = "n-mc", default_value_t = 30)]
    pub n_mc: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct HeisenbergArgs {
    #[command(flatten)]
    pub inputs: WindowInputs,
}
