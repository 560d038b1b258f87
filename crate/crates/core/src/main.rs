use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rtri_mimo::experiments::{self, ExperimentKind, ExperimentSpec};
use rtri_mimo::Error;

#[derive(Parser)]
#[command(
    name = "rtri",
    version,
    about = "MIMO training analysis under residual transmit impairments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Normalized channel-estimation MSE, closed form and Monte Carlo.
    MseSweep,
    /// Optimal training length with joint power allocation.
    OptimalTp,
    /// Achievable rate at the optimal design.
    RateSweep,
    /// Rate gain of the optimal training length over t_p = n_tx.
    RateGain,
    /// Optimal training length with equal pilot and data power.
    EqualPowerTp,
    /// Closed-form versus oracle checks; exits with status 1 on any failure.
    Validate,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::MseSweep => ExperimentKind::MseSweep,
            Command::OptimalTp => ExperimentKind::OptimalTp,
            Command::RateSweep => ExperimentKind::RateSweep,
            Command::RateGain => ExperimentKind::RateGain,
            Command::EqualPowerTp => ExperimentKind::EqualPowerTp,
            Command::Validate => ExperimentKind::Validate,
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON file with ExperimentSpec fields; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    plot: bool,
    /// SNR grid in dB as start:step:stop, stop inclusive.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_grid)]
    snr_db: Option<SnrGrid>,
    /// Comma-separated impairment levels.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    delta: Option<Vec<f64>>,
    /// Worker threads (0 = all cores). Ignored without the `parallel` feature.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
}

#[derive(Clone, Debug)]
struct SnrGrid(Vec<f64>);

fn parse_grid(s: &str) -> Result<SnrGrid, String> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [start, step, stop] = parts[..] else {
        return Err("expected start:step:stop".into());
    };
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err("need finite start <= stop and step > 0".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok(SnrGrid((0..=n).map(|i| start + step * i as f64).collect()))
}

fn build_spec(kind: ExperimentKind, common: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = match &common.config {
        Some(path) => ExperimentSpec::from_json_file(path)?,
        None => ExperimentSpec::default(),
    };
    spec.kind = kind;
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    if let Some(trials) = common.trials {
        spec.trials = trials;
    }
    if let Some(out) = &common.out {
        spec.output_path = out.clone();
    }
    if common.plot {
        spec.plot = true;
    }
    if let Some(grid) = &common.snr_db {
        spec.snr_grid_db = grid.0.clone();
    }
    if let Some(delta) = &common.delta {
        spec.delta_list = delta.clone();
    }
    Ok(spec)
}

fn execute(cli: &Cli) -> Result<bool, Error> {
    let spec = build_spec(cli.command.kind(), &cli.common)?;
    let report = experiments::run(&spec)?;
    println!("wrote {}", report.csv_path.display());
    println!("wrote {}", report.manifest_path.display());
    if let Some(p) = &report.plot_path {
        println!("wrote {}", p.display());
    }
    if !report.passed {
        eprintln!("validation failed; see {}", report.csv_path.display());
    }
    Ok(report.passed)
}

#[cfg(feature = "parallel")]
fn with_workers(
    workers: usize,
    f: impl FnOnce() -> Result<bool, Error> + Send,
) -> Result<bool, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    pool.install(f)
}

#[cfg(not(feature = "parallel"))]
fn with_workers(_workers: usize, f: impl FnOnce() -> Result<bool, Error>) -> Result<bool, Error> {
    f()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match with_workers(cli.common.workers, || execute(&cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_inclusive() {
        assert_eq!(parse_grid("-10:5:40").unwrap().0.len(), 11);
        assert_eq!(parse_grid("0:0.5:1").unwrap().0, vec![0.0, 0.5, 1.0]);
        assert!(parse_grid("1:0:2").is_err());
        assert!(parse_grid("1:2").is_err());
    }
}
