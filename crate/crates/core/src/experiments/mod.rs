//! Parameter sweeps and the validation suite behind the `rtri` CLI.
//!
//! Each run writes `<kind>.csv`, `<kind>.manifest.json` and, when plotting
//! is requested, `<kind>.svg` into the output directory. CSV output depends
//! only on the `ExperimentSpec` and seed.

mod output;
mod plot;
pub mod validate;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::db_to_linear;
use crate::error::{Error, Result};
use crate::estimation::{empirical_mse, normalized_mse, training_gain};
use crate::model::LinkConfig;
use crate::optimize::{optimize_training_length, relative_rate_gain, PowerMode};
use crate::rng::{experiment_id, TrialStreams};

pub use output::{format_significant, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MseSweep,
    OptimalTp,
    RateSweep,
    RateGain,
    EqualPowerTp,
    Validate,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MseSweep => "mse_sweep",
            ExperimentKind::OptimalTp => "optimal_tp",
            ExperimentKind::RateSweep => "rate_sweep",
            ExperimentKind::RateGain => "rate_gain",
            ExperimentKind::EqualPowerTp => "equal_power_tp",
            ExperimentKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: LinkConfig,
    pub snr_grid_db: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output_path: PathBuf,
    /// Emit an SVG line plot next to the CSV.
    pub plot: bool,
    /// Pilot length for `mse_sweep`; defaults to `n_tx`.
    pub t_p: Option<usize>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Validate,
            config: LinkConfig::default(),
            snr_grid_db: (0..=10).map(|i| -10.0 + 5.0 * i as f64).collect(),
            delta_list: vec![0.0, 0.08, 0.175],
            trials: 10_000,
            seed: 1,
            output_path: PathBuf::from("out"),
            plot: false,
            t_p: None,
        }
    }
}

impl ExperimentSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .config
            .violations()
            .into_iter()
            .map(|v| format!("config: {v}"))
            .collect();
        if self.snr_grid_db.is_empty() {
            out.push("snr_grid_db must not be empty".into());
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            out.push("snr_grid_db values must be finite".into());
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            out.push("snr_grid_db must be strictly increasing".into());
        }
        if self.delta_list.is_empty() {
            out.push("delta_list must not be empty".into());
        }
        if self
            .delta_list
            .iter()
            .any(|d| !(*d >= 0.0 && d.is_finite()))
        {
            out.push("delta_list values must be finite and >= 0".into());
        }
        if self.trials < 1 {
            out.push("trials must be at least 1".into());
        }
        if let Some(t_p) = self.t_p {
            if t_p < self.config.n_tx || t_p >= self.config.coherence {
                out.push(format!(
                    "t_p = {t_p} must lie in [n_tx, coherence - 1] = [{}, {}]",
                    self.config.n_tx,
                    self.config.coherence.saturating_sub(1)
                ));
            }
        }
        if self.config.max_antennas() > crate::rate::MAX_CLOSED_FORM_ANTENNAS {
            out.push(format!(
                "closed-form rate supports at most {} antennas per side",
                crate::rate::MAX_CLOSED_FORM_ANTENNAS
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(v))
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub plot_path: Option<PathBuf>,
    /// False only when a validation property failed.
    pub passed: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    kind: ExperimentKind,
    seed: u64,
    csv: String,
    spec: &'a ExperimentSpec,
}

/// Runs one experiment and writes its outputs.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport> {
    spec.validate()?;
    let (table, passed) = build_table(spec)?;

    let dir = &spec.output_path;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = spec.kind.name();
    let csv_name = format!("{name}.csv");
    let manifest_name = format!("{name}.manifest.json");
    let csv_path = dir.join(&csv_name);
    let manifest_path = dir.join(&manifest_name);

    let csv_bytes = table.to_csv(&manifest_name)?;
    fs::write(&csv_path, csv_bytes).map_err(|e| Error::io(&csv_path, e))?;

    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        kind: spec.kind,
        seed: spec.seed,
        csv: csv_name,
        spec,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(&manifest_path, json).map_err(|e| Error::io(&manifest_path, e))?;

    let plot_path = match (spec.plot, plot::figure_for(spec.kind, &table)) {
        (true, Some(svg)) => {
            let path = dir.join(format!("{name}.svg"));
            fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            Some(path)
        }
        _ => None,
    };

    Ok(RunReport {
        csv_path,
        manifest_path,
        plot_path,
        passed,
    })
}

/// Computes the result table for `spec` without touching the filesystem.
pub fn build_table(spec: &ExperimentSpec) -> Result<(Table, bool)> {
    spec.validate()?;
    match spec.kind {
        ExperimentKind::MseSweep => mse_sweep(spec).map(|t| (t, true)),
        ExperimentKind::OptimalTp => search_sweep(spec, PowerMode::JointPower).map(|t| (t, true)),
        ExperimentKind::EqualPowerTp => {
            search_sweep(spec, PowerMode::EqualPower).map(|t| (t, true))
        }
        ExperimentKind::RateSweep => rate_sweep(spec).map(|t| (t, true)),
        ExperimentKind::RateGain => rate_gain(spec).map(|t| (t, true)),
        ExperimentKind::Validate => {
            let checks = validate::run_checks(&spec.config, spec.trials, spec.seed)?;
            let passed = checks.iter().all(|c| c.passed());
            Ok((validate::checks_table(&checks), passed))
        }
    }
}

/// Visits the `(delta, snr_db)` grid in delta-major order.
fn grid<'a>(spec: &'a ExperimentSpec) -> impl Iterator<Item = (usize, f64, usize, f64)> + 'a {
    spec.delta_list
        .iter()
        .enumerate()
        .flat_map(move |(di, &delta)| {
            spec.snr_grid_db
                .iter()
                .enumerate()
                .map(move |(si, &snr_db)| (di, delta, si, snr_db))
        })
}

fn mse_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let cfg = spec.config;
    let t_p = spec.t_p.unwrap_or(cfg.n_tx);
    let mut table = Table::new(&[
        "snr_db",
        "delta",
        "mse_closed_form",
        "mse_empirical",
        "std_err",
    ]);
    for (di, delta, si, snr_db) in grid(spec) {
        let rho_p = db_to_linear(snr_db);
        let closed = normalized_mse(training_gain(rho_p, t_p, cfg.n_tx, delta));
        let streams = TrialStreams::new(
            spec.seed,
            experiment_id("mse_sweep", &[di as u64, si as u64]),
        );
        let emp = empirical_mse(&cfg.with_delta(delta), t_p, rho_p, spec.trials, &streams)?;
        table.push(vec![
            Cell::Num(snr_db),
            Cell::Num(delta),
            Cell::Num(closed),
            Cell::Num(emp.mean),
            Cell::Num(emp.std_err),
        ]);
    }
    Ok(table)
}

fn search_sweep(spec: &ExperimentSpec, mode: PowerMode) -> Result<Table> {
    let mut table = Table::new(&["snr_db", "delta", "t_p_opt", "alpha", "rate_bits"]);
    for (_, delta, _, snr_db) in grid(spec) {
        let cfg = spec.config.with_delta(delta).with_snr(db_to_linear(snr_db));
        let design = optimize_training_length(&cfg, mode)?;
        table.push(vec![
            Cell::Num(snr_db),
            Cell::Num(delta),
            Cell::Int(design.t_p),
            Cell::Num(design.alpha),
            Cell::Num(design.rate.bits_per_use),
        ]);
    }
    Ok(table)
}

fn rate_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let mut table = Table::new(&["snr_db", "delta", "rate_bits"]);
    for (_, delta, _, snr_db) in grid(spec) {
        let cfg = spec.config.with_delta(delta).with_snr(db_to_linear(snr_db));
        let design = optimize_training_length(&cfg, PowerMode::JointPower)?;
        table.push(vec![
            Cell::Num(snr_db),
            Cell::Num(delta),
            Cell::Num(design.rate.bits_per_use),
        ]);
    }
    Ok(table)
}

fn rate_gain(spec: &ExperimentSpec) -> Result<Table> {
    let mut table = Table::new(&["snr_db", "delta", "gain_percent"]);
    for (_, delta, _, snr_db) in grid(spec) {
        let gain = relative_rate_gain(&spec.config.with_delta(delta), db_to_linear(snr_db))?;
        table.push(vec![Cell::Num(snr_db), Cell::Num(delta), Cell::Num(gain)]);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid() {
        assert!(ExperimentSpec::default().validate().is_ok());
    }

    #[test]
    fn spec_lists_every_violation() {
        let spec = ExperimentSpec {
            snr_grid_db: vec![10.0, 0.0],
            delta_list: vec![-0.1],
            trials: 0,
            config: LinkConfig {
                coherence: 2,
                ..LinkConfig::default()
            },
            ..ExperimentSpec::default()
        };
        match spec.validate() {
            Err(Error::InvalidSpec(v)) => assert_eq!(v.len(), 4, "{v:?}"),
            other => panic!("expected InvalidSpec, got {other:?}"),
        }
    }

    #[test]
    fn spec_json_accepts_partial_documents() {
        let spec: ExperimentSpec =
            serde_json::from_str(r#"{"kind": "rate_gain", "config": {"n_tx": 2, "n_rx": 3, "coherence": 20, "delta": 0.1, "snr": 2.0}, "seed": 9}"#)
                .unwrap();
        assert_eq!(spec.kind, ExperimentKind::RateGain);
        assert_eq!(spec.config.n_rx, 3);
        assert_eq!(spec.seed, 9);
        assert_eq!(spec.trials, ExperimentSpec::default().trials);
        assert!(serde_json::from_str::<ExperimentSpec>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn ideal_optimal_tp_column_is_constant() {
        let spec = ExperimentSpec {
            kind: ExperimentKind::OptimalTp,
            delta_list: vec![0.0],
            snr_grid_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0],
            ..ExperimentSpec::default()
        };
        let (table, _) = build_table(&spec).unwrap();
        for row in table.rows() {
            assert_eq!(row[2], Cell::Int(4));
        }
    }
}
