use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lis_core::{GeometryKind, QuadratureRule};

use crate::kappa::parse_kappa_l;

/// LIS sensing-space analysis: degrees of freedom, Slepian bases, far-field
/// spectra and the line-of-sight channel comparison.
#[derive(Debug, Parser)]
#[command(name = "lis", version, about)]
pub struct Cli {
    #[command(flatten)]
    pub shared: SharedArgs,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Args)]
pub struct SharedArgs {
    /// Directory receiving every output file (created if missing).
    #[arg(long, global = true, default_value = "lis-out")]
    pub out_dir: PathBuf,

    /// Master RNG seed (overrides `rng_seed` of a channel config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker thread cap for assembly, eigensolves and trials.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Wavelength β in meters; for geometry commands it sets κL = 2πL/β.
    #[arg(long, global = true)]
    pub beta: Option<f64>,

    /// Aperture L in meters (characteristic length for custom meshes).
    #[arg(long, global = true)]
    pub aperture: Option<f64>,

    /// Re-run the command recorded in a previous manifest.json.
    #[arg(long, global = true, value_name = "MANIFEST")]
    pub from_manifest: Option<PathBuf>,

    /// Log verbosity: error, warn, info, debug.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalue sweep over κL with DoF summary.
    Dofs(DofsArgs),
    /// Export the leading Slepian functions sampled on the nodes.
    Slepian(SlepianArgs),
    /// Export far-field patterns of the leading Slepian functions.
    Spectra(SpectraArgs),
    /// Monte-Carlo Slepian vs Fourier comparison from a JSON config.
    Channel(ChannelArgs),
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    /// linear, circular, square, paraboloid or custom.
    #[arg(long, default_value = "linear")]
    pub geometry: GeometryKind,

    /// `lismesh v1` file, required for --geometry custom.
    #[arg(long)]
    pub mesh: Option<PathBuf>,

    /// Node/cell count (defaults: 1024 linear and circular, 4096 square, 4500 paraboloid).
    #[arg(long)]
    pub nodes: Option<usize>,

    /// Segment rule for linear and square shapes: midpoint or gauss-legendre.
    #[arg(long, default_value = "midpoint")]
    pub quadrature: QuadratureRule,
}

#[derive(Debug, Args)]
pub struct DofsArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,

    /// κL values, comma separated, ascending (`4pi`, `2pi,4pi,6pi`, `12.5`).
    #[arg(long, value_delimiter = ',', value_parser = parse_kappa_l)]
    pub kappa_l: Vec<f64>,

    /// Also write each assembled operator as CSV.
    #[arg(long)]
    pub dump_operator: bool,
}

#[derive(Debug, Args)]
pub struct SlepianArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,

    #[arg(long, value_parser = parse_kappa_l)]
    pub kappa_l: Option<f64>,

    /// Number of leading Slepian functions to export.
    #[arg(long, default_value_t = 9)]
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,

    #[arg(long, value_parser = parse_kappa_l)]
    pub kappa_l: Option<f64>,

    /// Number of leading Slepian functions to transform.
    #[arg(long, default_value_t = 9)]
    pub count: usize,

    /// Fibonacci sphere points.
    #[arg(long, default_value_t = 2000)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    /// Experiment JSON; missing fields take the reference defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Also write one row per (trial, N).
    #[arg(long)]
    pub dump_trials: bool,
}
