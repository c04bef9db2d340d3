use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "fracvar",
    version,
    about = "Simulate fractional processes and evaluate variation statistics"
)]
#[command(args_conflicts_with_subcommands = true, allow_negative_numbers = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample one path and write its values (columns t,value).
    Simulate(Opts),
    /// Evaluate a variation statistic on one or more sampled paths.
    Qv(QvOpts),
    /// Exact expectation of the weighted quadratic variation from the kernel.
    ExpectedQv(Opts),
    /// Estimate H from the second-order statistic on the half-integer grid.
    EstimateHurst(Opts),
    /// Sample one path of the process and choose between it and the alternative.
    Discriminate(Opts),
    /// Repeat the discrimination over --paths seeds and report the success rate.
    Power(Opts),
    /// Calibrate the critical exponent and limit of the trifractional dyadic sum.
    CalibrateTrifbm(Opts),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Fbm,
    Bifbm,
    Trifbm,
    Nfbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Stat {
    Pvar,
    Weighted,
    Scaled,
    Kurchenko,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightExponent {
    Auto,
    Value(f64),
}

impl FromStr for WeightExponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(WeightExponent::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|w| w.is_finite())
            .map(WeightExponent::Value)
            .ok_or_else(|| format!("expected a finite number or 'auto', got '{s}'"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    #[arg(long, value_enum, default_value = "fbm")]
    pub process: Family,
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long)]
    pub order: Option<u32>,
    /// Horizon T.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Dyadic level: 2^level intervals on [0, T].
    #[arg(long, conflicts_with = "n")]
    pub level: Option<u32>,
    /// Number of uniform intervals (half-integer grid size for the second-order statistic).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight exponent w, or `auto` for 2HK-1.
    #[arg(long)]
    pub weight_exponent: Option<WeightExponent>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long)]
    pub alt_hurst: Option<f64>,
    #[arg(long)]
    pub alt_k: Option<f64>,
    /// Output file (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct QvOpts {
    #[arg(long, value_enum, default_value = "pvar")]
    pub stat: Stat,
    #[command(flatten)]
    pub opts: Opts,
}
