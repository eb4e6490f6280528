//! Command-line interface.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use mipt::analysis::{
    dynamic_collapse, fit_power_law, fss_collapse, CollapseOptions, CollapseParams, DynamicCollapseParams, DynamicOptions,
    GammaMode,
    PowerLawFit, PowerLawPoint,
};
use mipt::oracle::equivalence_suite;
use serde::Serialize;

use crate::aggregate::{aggregate, dataset, dynamic_series, power_points, Observable, Selection};
use crate::manifest::Manifest;
use crate::records::read_all;
use crate::runner::{run, RunOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mipt", version, about = "Monitored Clifford circuit sweeps and finite-size-scaling analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every trajectory of a manifest, skipping those already on disk.
    Run {
        manifest: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the manifest's output path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the manifest's master seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        quiet: bool,
    },
    /// Group records into means and standard errors (JSON lines).
    Aggregate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Finite-size-scaling collapse of a stationary observable.
    Collapse {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "i3")]
        observable: Observable,
        /// `free` or a fixed value.
        #[arg(long, default_value = "free", value_parser = parse_gamma)]
        gamma: GammaMode,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        stats: StatsArgs,
    },
    /// Fit `Q = a L^kappa + b` at a single p.
    Fit {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "neg")]
        observable: Observable,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        stats: StatsArgs,
    },
    /// Dynamic collapse of reference-qubit entropy series in `t / L^z`.
    Dyncollapse {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Range of `S_R(t) / S_R(0)` used in the fit.
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], default_values_t = [0.02, 0.5])]
        window: Vec<f64>,
        #[command(flatten)]
        select: SelectArgs,
        #[command(flatten)]
        stats: StatsArgs,
    },
    /// Compare the tableau simulator with the dense state-vector reference.
    Validate {
        #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
        sizes: Vec<usize>,
        /// Random circuits per size and protocol.
        #[arg(long, default_value_t = 500)]
        circuits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// `chrc` or `lrhrc`.
    #[arg(long)]
    pub protocol: Option<String>,
    /// Cluster size M or exponent alpha.
    #[arg(long)]
    pub param: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub p_min: Option<f64>,
    #[arg(long)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub min_size: Option<usize>,
    #[arg(long)]
    pub max_size: Option<usize>,
}

impl SelectArgs {
    fn selection(&self) -> Selection {
        Selection {
            protocol: self.protocol.clone(),
            param: self.param,
            p: self.p,
            p_min: self.p_min,
            p_max: self.p_max,
            min_size: self.min_size,
            max_size: self.max_size,
        }
    }
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, default_value_t = 100)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_gamma(s: &str) -> Result<GammaMode, String> {
    if s == "free" {
        return Ok(GammaMode::Free);
    }
    s.parse::<f64>().map(GammaMode::Fixed).map_err(|_| format!("expected `free` or a number, got {s:?}"))
}

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Serialize)]
struct CollapseOutput {
    observable: Observable,
    params: CollapseParams,
    /// Rescaled points `x = (p - p_c) L^{1/nu}`, `y = Q / L^gamma`.
    points: Vec<ScaledPoint>,
}

#[derive(Serialize)]
struct ScaledPoint {
    #[serde(rename = "L")]
    size: usize,
    p: f64,
    x: f64,
    y: f64,
    dy: f64,
}

#[derive(Serialize)]
struct FitOutput {
    observable: Observable,
    fit: PowerLawFit,
    points: Vec<PowerLawPoint>,
}

#[derive(Serialize)]
struct DynamicOutput {
    params: DynamicCollapseParams,
    /// Rescaled curves, `x = t / L^z`.
    curves: Vec<DynamicCurve>,
}

#[derive(Serialize)]
struct DynamicCurve {
    #[serde(rename = "L")]
    size: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
}

fn emit<T: Serialize>(value: &T, output: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match output {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { manifest, workers, output, seed, quiet } => {
            let m = Manifest::load(&manifest).map_err(Failure::Usage)?;
            if workers == Some(0) {
                return Err(Failure::Usage(anyhow::anyhow!("--workers must be at least 1")));
            }
            let summary = run(&m, &RunOptions { workers, output, seed, progress: !quiet })?;
            eprintln!(
                "{}: {} simulated, {} already present",
                summary.output.display(),
                summary.simulated,
                summary.skipped
            );
        }
        Command::Aggregate { files, output } => {
            let rows = aggregate(&read_all(&files)?);
            let mut text = String::new();
            for r in &rows {
                text += &serde_json::to_string(r).map_err(anyhow::Error::from)?;
                text.push('\n');
            }
            match output {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().write_all(text.as_bytes()).map_err(anyhow::Error::from)?,
            }
        }
        Command::Collapse { files, observable, gamma, select, stats } => {
            let data = dataset(&read_all(&files)?, &select.selection(), observable)?;
            let opts = CollapseOptions { gamma, bootstrap: stats.bootstrap, seed: stats.seed, p_c_range: None };
            let params = fss_collapse(&data, &opts).map_err(anyhow::Error::from)?;
            let points = data
                .points()
                .iter()
                .map(|pt| {
                    let l = pt.size as f64;
                    let sy = l.powf(-params.gamma);
                    ScaledPoint {
                        size: pt.size,
                        p: pt.p,
                        x: (pt.p - params.p_c) * l.powf(1.0 / params.nu),
                        y: pt.mean * sy,
                        dy: pt.err * sy,
                    }
                })
                .collect();
            emit(&CollapseOutput { observable, params, points }, stats.output.as_deref())?;
        }
        Command::Fit { files, observable, select, stats } => {
            let points = power_points(&read_all(&files)?, &select.selection(), observable)?;
            let fit = fit_power_law(&points, stats.bootstrap, stats.seed).map_err(anyhow::Error::from)?;
            emit(&FitOutput { observable, fit, points }, stats.output.as_deref())?;
        }
        Command::Dyncollapse { files, window, select, stats } => {
            if !(0.0..1.0).contains(&window[0]) || window[1] <= window[0] {
                return Err(Failure::Usage(anyhow::anyhow!("--window needs 0 <= LO < HI")));
            }
            let series = dynamic_series(&read_all(&files)?, &select.selection())?;
            let opts = DynamicOptions { window: (window[0], window[1]), bootstrap: stats.bootstrap, seed: stats.seed };
            let params = dynamic_collapse(&series, &opts).map_err(anyhow::Error::from)?;
            let curves = series
                .iter()
                .map(|s| {
                    let scale = (s.size as f64).powf(-params.z);
                    DynamicCurve {
                        size: s.size,
                        x: (0..s.mean.len()).map(|t| t as f64 * scale).collect(),
                        y: s.mean.clone(),
                        dy: s.err.clone(),
                    }
                })
                .collect();
            emit(&DynamicOutput { params, curves }, stats.output.as_deref())?;
        }
        Command::Validate { sizes, circuits, seed } => {
            if let Some(&l) = sizes.iter().find(|&&l| !(2..=mipt::oracle::MAX_QUBITS).contains(&l)) {
                return Err(Failure::Usage(anyhow::anyhow!(
                    "size {l} outside 2..={}",
                    mipt::oracle::MAX_QUBITS
                )));
            }
            let report = equivalence_suite(&sizes, circuits, seed);
            for f in report.failures.iter().take(20) {
                println!("mismatch: {f}");
            }
            let verdict = if report.passed() { "PASS" } else { "FAIL" };
            println!(
                "{verdict}: {} circuits, {} comparisons, {} mismatches",
                report.circuits,
                report.comparisons,
                report.failures.len()
            );
            if !report.passed() {
                return Err(Failure::Runtime(anyhow::anyhow!("tableau and dense reference disagree")));
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
