use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "offsetcal", version, about = "Offset calibration bounds, estimates and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Constrained Cramér–Rao bound for a reference choice.
    Bounds(BoundsArgs),
    /// Estimate offsets from a CSV measurement file.
    Estimate(EstimateArgs),
    /// Re-run one of the Monte-Carlo figures.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefArg {
    Average,
    Single(usize),
}

pub fn parse_ref(s: &str) -> Result<RefArg, String> {
    match s {
        "average" => Ok(RefArg::Average),
        _ => s
            .strip_prefix("single:")
            .and_then(|i| i.parse().ok())
            .map(RefArg::Single)
            .ok_or_else(|| format!("expected 'average' or 'single:<index>', got '{s}'")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig1c,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig1c => "fig1c",
        }
    }
}

#[derive(Debug, Args)]
#[group(id = "noise", multiple = false)]
pub struct NoiseArgs {
    /// Common noise variance of every sensor.
    #[arg(long, group = "noise")]
    pub sigma2: Option<f64>,
    /// CSV file holding the N×N sensor covariance.
    #[arg(long, group = "noise")]
    pub cov_file: Option<PathBuf>,
    /// Comma-separated per-sensor variances.
    #[arg(long, group = "noise", value_delimiter = ',')]
    pub variances: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long = "ref", value_parser = parse_ref, default_value = "average")]
    pub reference: RefArg,
    /// Machine-readable output instead of the text report.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Also write the report and a manifest into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV measurements: one row per sensor, one column per epoch.
    #[arg(long)]
    pub input: PathBuf,
    /// Expected sensor count (checked against the file).
    #[arg(long)]
    pub n: Option<usize>,
    /// Expected measurement count (checked against the file).
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long = "ref", value_parser = parse_ref, default_value = "average")]
    pub reference: RefArg,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(value_enum)]
    pub figure: Figure,
    /// JSON experiment config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Noise variance for fig1a.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Grid step for the swept axes.
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Render an SVG plot next to the data file (needs --out).
    #[arg(long)]
    pub svg: bool,
}
