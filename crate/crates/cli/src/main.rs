mod commands;
mod figures;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use levybridge::bridge::DEFAULT_MAX_ATTEMPTS;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "levybridge", version, about = "Symmetric alpha-stable bridges: densities, sampling and first passage")]
pub struct Cli {
    /// Directory for output files and manifests.
    #[arg(long, global = true, env = "LEVYBRIDGE_OUT", default_value = ".")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Density, CDF or derivatives of the process at time t.
    Pdf(PdfArgs),
    /// Midpoint density of the bridge and its extrema.
    Midpoint(MidpointArgs),
    /// Bifurcation length L_b.
    Lb(LbArgs),
    /// Critical index where the centre's second and fourth derivatives vanish together.
    AlphaCritical,
    /// Ensemble of recursively sampled bridges.
    BridgeSample(SampleArgs),
    /// Monte Carlo crossing probability of a boundary d.
    Crossing(CrossingArgs),
    /// Histogram of first-passage times.
    FirstPassage(FirstPassageArgs),
    /// Stretched versus recursive crossing estimates over rejection thresholds.
    Sweep(SweepArgs),
    /// Data bundle for one figure.
    Figure(FigureArgs),
    /// Rerun the command recorded in a manifest and compare outputs.
    Replay(ReplayArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ProcessArgs {
    /// Stability index in (0, 2].
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
}

/// A length given either absolutely or in units of the curvature `L_b`.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ArrivalArgs {
    /// Arrival point L.
    #[arg(long = "L", allow_hyphen_values = true, conflicts_with = "l_units")]
    pub l: Option<f64>,
    /// Arrival point in units of the curvature bifurcation length.
    #[arg(long = "L-in-units-of-Lb", allow_hyphen_values = true)]
    pub l_units: Option<f64>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        (0..self.n)
            .map(|k| self.lo + (self.hi - self.lo) * k as f64 / (self.n - 1) as f64)
            .collect()
    }
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err("expected lo:hi:n".into());
    }
    let lo: f64 = parts[0].parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = parts[1].parse().map_err(|e| format!("hi: {e}"))?;
    let n: usize = parts[2].parse().map_err(|e| format!("n: {e}"))?;
    if !(lo.is_finite() && hi.is_finite() && hi > lo && n >= 1) {
        return Err("need finite lo < hi and n >= 1".into());
    }
    Ok(Grid { lo, hi, n })
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct PdfArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    /// Time.
    #[arg(long = "t", default_value_t = 1.0)]
    pub t: f64,
    /// Points to print, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    /// Write a CSV on `lo:hi:n`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Derivative order 0..=4.
    #[arg(long, default_value_t = 0)]
    pub order: usize,
    /// Cumulative distribution instead of density.
    #[arg(long, conflicts_with = "order")]
    pub cdf: bool,
    #[arg(long, default_value_t = 7)]
    pub digits: usize,
    /// Base name of the output file.
    #[arg(long, default_value = "pdf")]
    pub name: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct MidpointArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "T", default_value_t = 1.0)]
    pub total_time: f64,
    #[command(flatten)]
    pub arrival: ArrivalArgs,
    /// Points to print, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    /// Write the density on `lo:hi:n`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Print the critical points, or write them next to the grid CSV.
    #[arg(long)]
    pub locate_extrema: bool,
    #[arg(long, default_value_t = 7)]
    pub digits: usize,
    #[arg(long, default_value = "midpoint")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionChoice {
    Curvature,
    Tangent,
    EqualHeight,
    All,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct LbArgs {
    /// Indices, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub alpha: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub total_time: f64,
    #[arg(long, value_enum, default_value_t = CriterionChoice::Curvature)]
    pub criterion: CriterionChoice,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SampleArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "T", default_value_t = 1.0)]
    pub total_time: f64,
    #[command(flatten)]
    pub arrival: ArrivalArgs,
    /// Bisection depth; paths have 2^depth + 1 points.
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    #[arg(long, default_value_t = 16)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the paths as CSV (`path, t, x`).
    #[arg(long)]
    pub csv: bool,
    #[arg(long, default_value = "bridges")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    Recursive,
    Stretched,
    Increments,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub process: ProcessArgs,
    #[arg(long = "T", default_value_t = 1.0)]
    pub total_time: f64,
    /// Drop the arrival condition.
    #[arg(long, conflicts_with_all = ["l", "l_units"])]
    pub unconditioned: bool,
    #[command(flatten)]
    pub arrival: ArrivalArgs,
    /// Boundary; defaults to sigma T^(1/alpha).
    #[arg(long = "d", conflicts_with = "d_units")]
    pub d: Option<f64>,
    #[arg(long = "d-in-units-of-Lb")]
    pub d_units: Option<f64>,
    /// Defaults to recursive for bridges and increments otherwise.
    #[arg(long, value_enum)]
    pub sampler: Option<SamplerChoice>,
    /// Paths are watched on 2^depth steps unless --dt is given.
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Rejection threshold of the stretched sampler; infinite by default.
    #[arg(long = "L-thresh", conflicts_with = "threshold_units")]
    pub threshold: Option<f64>,
    #[arg(long = "L-thresh-in-units-of-Lb")]
    pub threshold_units: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
    /// Exact Brownian crossing between samples (alpha = 2 only).
    #[arg(long)]
    pub continuous: bool,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CrossingArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Several boundaries from one set of paths, comma separated; writes a CSV.
    #[arg(long, value_delimiter = ',')]
    pub d_list: Vec<f64>,
    #[arg(long, default_value = "crossing")]
    pub name: String,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FirstPassageArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long, default_value_t = 20)]
    pub n_bins: usize,
    #[arg(long, default_value = "first_passage")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnitChoice {
    /// Multiples of the curvature L_b (sigma T^(1/alpha) at alpha = 2).
    Lb,
    Absolute,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,1.9,2")]
    pub alphas: Vec<f64>,
    /// Strictly decreasing; `inf` allowed.
    #[arg(long, value_delimiter = ',', default_value = "inf,4,2,1,0.5,0.25,0.1")]
    pub thresholds: Vec<f64>,
    #[arg(long, value_enum, default_value_t = UnitChoice::Lb)]
    pub unit: UnitChoice,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub total_time: f64,
    #[arg(long = "L", default_value_t = 0.0, allow_hyphen_values = true)]
    pub arrival: f64,
    /// Boundary in units of sigma T^(1/alpha).
    #[arg(long, default_value_t = 1.0)]
    pub boundary_scale: f64,
    #[arg(long, default_value_t = 10)]
    pub depth: u32,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u64,
    #[arg(long, default_value = "sweep")]
    pub name: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureChoice {
    /// Cauchy extrema diagram with closed form and inset densities.
    Fig2,
    /// Midpoint densities and extrema across alpha and L.
    Fig3,
    /// L_b(alpha) for the three criteria, critical index and asymptote.
    Fig4,
    /// Rejection-threshold sweep.
    Fig5,
    /// First-passage histograms with exact Gaussian curves.
    Fig6,
    /// Sample bridges at alpha = 1.9 for L in {0.5, 1, 1.5} L_b.
    Paths,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct FigureArgs {
    #[arg(value_enum)]
    pub figure: FigureChoice,
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    pub scale: Scale,
    /// Overrides the preset path count.
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
}

/// Command line after the program name with output-directory flags removed.
fn recorded_args(raw: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    let mut skip = false;
    for a in raw {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out-dir" {
            skip = true;
            continue;
        }
        if a.starts_with("--out-dir=") {
            continue;
        }
        out.push(a.clone());
    }
    out
}

fn main() -> ExitCode {
    let raw: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::run(&cli, recorded_args(&raw)) {
        Ok(_) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code.clamp(1, 255) as u8)
        }
    }
}
