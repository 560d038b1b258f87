//! Closed-form versus oracle checks run by `rtri validate`.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::output::{Cell, Table};
use crate::db_to_linear;
use crate::error::Result;
use crate::estimation::{empirical_mse, mse_floor, normalized_mse, training_gain};
use crate::exec::{estimate_mean, map_indexed};
use crate::model::LinkConfig;
use crate::optimize::{
    alpha_high_snr_limit, optimal_alpha, optimize_training_length, relative_rate_gain, PowerMode,
};
use crate::quadrature::{integrate, Tolerance};
use crate::rate::{
    closed_form_rate, effective_snr, effective_snr_equal_power, mc_rate,
    sample_unordered_eigenvalue, EffectiveSnr, WishartEigenDensity,
};
use crate::rng::{experiment_id, RandomSource, TrialStreams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
    GreaterThan,
    LessThan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub property: String,
    pub measured: f64,
    pub bound: f64,
    pub relation: Relation,
}

impl Check {
    fn new(property: impl Into<String>, measured: f64, relation: Relation, bound: f64) -> Self {
        Self {
            property: property.into(),
            measured,
            bound,
            relation,
        }
    }

    pub fn passed(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.measured <= self.bound,
            Relation::AtLeast => self.measured >= self.bound,
            Relation::GreaterThan => self.measured > self.bound,
            Relation::LessThan => self.measured < self.bound,
        }
    }
}

pub fn checks_table(checks: &[Check]) -> Table {
    let mut table = Table::new(&["property", "status", "measured", "bound"]);
    for c in checks {
        table.push(vec![
            Cell::Text(c.property.clone()),
            Cell::Text(if c.passed() { "pass" } else { "fail" }.into()),
            Cell::Num(c.measured),
            Cell::Num(c.bound),
        ]);
    }
    table
}

/// Pilot SNRs (dB), impairment levels and pilot lengths of the MSE grid.
pub const MSE_GRID_SNR_DB: [f64; 5] = [-10.0, 0.0, 10.0, 20.0, 30.0];
pub const MSE_GRID_DELTA: [f64; 3] = [0.0, 0.08, 0.175];
pub const MSE_GRID_TP: [usize; 3] = [4, 8, 16];
pub const RATE_GRID_ANTENNAS: [usize; 3] = [1, 2, 4];
pub const RATE_GRID_SNR: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

/// Relative gap between the empirical MSE at 40 dB and the error floor.
pub fn mse_floor_gap(config: &LinkConfig, delta: f64, trials: usize, seed: u64) -> Result<f64> {
    let t_p = config.n_tx;
    let streams = TrialStreams::new(seed, experiment_id("mse_floor", &[delta.to_bits()]));
    let emp = empirical_mse(
        &config.with_delta(delta),
        t_p,
        db_to_linear(40.0),
        trials,
        &streams,
    )?;
    let floor = mse_floor(t_p, config.n_tx, delta)?;
    Ok((emp.mean - floor).abs() / floor)
}

/// Largest `|empirical − closed form| / std_err` over the MSE grid.
pub fn mse_grid_max_z(config: &LinkConfig, trials: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (si, &snr_db) in MSE_GRID_SNR_DB.iter().enumerate() {
        for (di, &delta) in MSE_GRID_DELTA.iter().enumerate() {
            for (ti, &t_p) in MSE_GRID_TP.iter().enumerate() {
                let rho_p = db_to_linear(snr_db);
                let cfg = config.with_delta(delta);
                let streams = TrialStreams::new(
                    seed,
                    experiment_id("mse_grid", &[si as u64, di as u64, ti as u64]),
                );
                let emp = empirical_mse(&cfg, t_p, rho_p, trials, &streams)?;
                let closed = normalized_mse(training_gain(rho_p, t_p, cfg.n_tx, delta));
                worst = worst.max((emp.mean - closed).abs() / emp.std_err);
            }
        }
    }
    Ok(worst)
}

/// Largest `|closed − MC| / max(1%·closed, 3·std_err)` over the rate grid.
pub fn rate_grid_max_normalized_gap(trials: usize, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &n_tx in &RATE_GRID_ANTENNAS {
        for &n_rx in &RATE_GRID_ANTENNAS {
            for (k, &snr) in RATE_GRID_SNR.iter().enumerate() {
                let rho = EffectiveSnr::new(snr)?;
                let closed = closed_form_rate(rho, n_tx, n_rx, 1, 1)?.bits_per_use;
                let streams = TrialStreams::new(
                    seed,
                    experiment_id("rate_grid", &[n_tx as u64, n_rx as u64, k as u64]),
                );
                let mc = mc_rate(rho, n_tx, n_rx, 1, 1, trials, &streams)?;
                let allowed = (0.01 * closed).max(3.0 * mc.std_err);
                worst = worst.max((closed - mc.bits_per_use).abs() / allowed);
            }
        }
    }
    Ok(worst)
}

/// Upper integration limit where the density tail is far below 1e-10.
pub const PDF_INTEGRATION_LIMIT: f64 = 120.0;

/// `(max |∫f − 1|, max |∫λf − p|)` over `1 ≤ q ≤ p ≤ max_dim`, by quadrature.
pub fn wishart_pdf_quadrature_errors(max_dim: usize) -> Result<(f64, f64)> {
    let tol = Tolerance {
        relative: 1e-13,
        ..Tolerance::default()
    };
    let mut norm_err: f64 = 0.0;
    let mut mean_err: f64 = 0.0;
    for p in 1..=max_dim {
        for q in 1..=p {
            let d = WishartEigenDensity::new(p, q)?;
            let mass = integrate(
                |l| d.pdf(l).unwrap_or(f64::NAN),
                0.0,
                PDF_INTEGRATION_LIMIT,
                tol,
            );
            let mean = integrate(
                |l| l * d.pdf(l).unwrap_or(f64::NAN),
                0.0,
                PDF_INTEGRATION_LIMIT,
                tol,
            );
            norm_err = norm_err.max((mass.value - 1.0).abs());
            mean_err = mean_err.max((mean.value - p as f64).abs());
        }
    }
    Ok((norm_err, mean_err))
}

/// Chi-square goodness-of-fit p-value of `samples` sampled unordered
/// eigenvalues against the closed-form density. Bins have width 0.5 and are
/// merged until each expects at least 5 counts.
pub fn wishart_histogram_p_value(p: usize, q: usize, samples: usize, seed: u64) -> Result<f64> {
    let density = WishartEigenDensity::new(p, q)?;
    let streams = TrialStreams::new(
        seed,
        experiment_id("wishart_histogram", &[p as u64, q as u64]),
    );
    let draws: Vec<Result<f64>> = map_indexed(streams.execution, samples, |k| {
        sample_unordered_eigenvalue(p, q, &mut streams.source(k as u64))
    });
    let draws: Vec<f64> = draws.into_iter().collect::<Result<_>>()?;

    let width = 0.5;
    let raw_bins = (PDF_INTEGRATION_LIMIT / width) as usize;
    let mut probs = Vec::with_capacity(raw_bins);
    for b in 0..raw_bins {
        let (lo, hi) = (b as f64 * width, (b + 1) as f64 * width);
        probs.push(
            integrate(
                |l| density.pdf(l).unwrap_or(f64::NAN),
                lo,
                hi,
                Tolerance::default(),
            )
            .value,
        );
    }
    let mut counts = vec![0usize; raw_bins];
    for &x in &draws {
        let idx = ((x / width) as usize).min(raw_bins - 1);
        counts[idx] += 1;
    }

    let n = samples as f64;
    let mut merged: Vec<(f64, f64)> = Vec::new();
    let (mut acc_p, mut acc_c) = (0.0, 0.0);
    for (prob, count) in probs.iter().zip(&counts) {
        acc_p += prob;
        acc_c += *count as f64;
        if acc_p * n >= 5.0 {
            merged.push((acc_p, acc_c));
            acc_p = 0.0;
            acc_c = 0.0;
        }
    }
    if let Some(last) = merged.last_mut() {
        last.0 += acc_p;
        last.1 += acc_c;
    }
    let stat: f64 = merged
        .iter()
        .map(|&(prob, count)| {
            let expected = prob * n;
            (count - expected).powi(2) / expected
        })
        .sum();
    let dof = (merged.len() - 1) as f64;
    let chi2 = ChiSquared::new(dof).map_err(|e| crate::Error::Internal(e.to_string()))?;
    Ok(1.0 - chi2.cdf(stat))
}

/// Largest relative amount by which a 9999-point α grid beats the closed-form
/// optimum, over `instances` random `(ρ, T, T_p, δ)` draws.
pub fn alpha_grid_max_shortfall(instances: usize, seed: u64) -> Result<f64> {
    let mut rng = RandomSource::new(seed, experiment_id("alpha_grid", &[]));
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let n_tx = 1 + rng.index(8);
        let coherence = n_tx + 1 + rng.index(200);
        let t_p = n_tx + rng.index(coherence - n_tx);
        let rho = db_to_linear(-20.0 + 60.0 * rng.uniform());
        let delta = 0.2 * rng.uniform();
        let t_d = coherence - t_p;
        let snr_at = |alpha: f64| -> Result<f64> {
            let rho_p = (1.0 - alpha) * rho * coherence as f64 / t_p as f64;
            let rho_d = alpha * rho * coherence as f64 / t_d as f64;
            Ok(effective_snr(rho_p, rho_d, t_p, n_tx, delta)?.value())
        };
        let at_opt = snr_at(optimal_alpha(rho, coherence, t_p, n_tx, delta)?)?;
        let grid: Vec<f64> = (1..10_000)
            .map(|k| snr_at(k as f64 / 10_000.0))
            .collect::<Result<_>>()?;
        let best = grid.into_iter().fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((best - at_opt) / at_opt);
    }
    Ok(worst)
}

/// Runs the full validation suite.
pub fn run_checks(config: &LinkConfig, trials: usize, seed: u64) -> Result<Vec<Check>> {
    use Relation::*;
    let mut checks = Vec::new();
    let n_tx = config.n_tx;

    for delta in [0.08, 0.175] {
        checks.push(Check::new(
            format!("mse_floor_rel_gap_delta_{delta}"),
            mse_floor_gap(config, delta, trials, seed)?,
            AtMost,
            0.05,
        ));
    }
    checks.push(Check::new(
        "mse_closed_form_vs_oracle_max_z",
        mse_grid_max_z(config, trials, seed)?,
        AtMost,
        3.0,
    ));
    checks.push(Check::new(
        "rate_closed_form_vs_oracle_max_normalized_gap",
        rate_grid_max_normalized_gap(trials, seed)?,
        AtMost,
        1.0,
    ));

    let (norm_err, mean_err) = wishart_pdf_quadrature_errors(6)?;
    checks.push(Check::new(
        "wishart_pdf_normalization_max_error",
        norm_err,
        AtMost,
        1e-6,
    ));
    checks.push(Check::new(
        "wishart_pdf_first_moment_max_error",
        mean_err,
        AtMost,
        1e-5,
    ));
    checks.push(Check::new(
        "wishart_histogram_p_value_4x4",
        wishart_histogram_p_value(4, 4, trials, seed)?,
        GreaterThan,
        0.01,
    ));

    checks.push(Check::new(
        "alpha_grid_max_relative_shortfall",
        alpha_grid_max_shortfall(50, seed)?,
        AtMost,
        1e-12,
    ));
    let t_d = config.coherence - n_tx;
    let low = optimal_alpha(1e-8, config.coherence, n_tx, n_tx, config.delta)?;
    checks.push(Check::new(
        "alpha_low_snr_deviation_from_half",
        (low - 0.5).abs(),
        AtMost,
        1e-3,
    ));
    let high = optimal_alpha(1e8, config.coherence, n_tx, n_tx, config.delta)?;
    checks.push(Check::new(
        "alpha_high_snr_deviation_from_limit",
        (high - alpha_high_snr_limit(n_tx, t_d, n_tx, config.delta)).abs(),
        AtMost,
        1e-3,
    ));

    let ideal_excess = MSE_GRID_SNR_DB
        .iter()
        .map(|&db| {
            let cfg = config.with_delta(0.0).with_snr(db_to_linear(db));
            optimize_training_length(&cfg, PowerMode::JointPower).map(|d| (d.t_p - n_tx) as f64)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "ideal_hardware_tp_excess_over_n_tx",
        ideal_excess,
        AtMost,
        0.0,
    ));

    let rho_30 = db_to_linear(30.0);
    let impaired = optimize_training_length(
        &config.with_delta(0.175).with_snr(rho_30),
        PowerMode::JointPower,
    )?;
    checks.push(Check::new(
        "rtri_tp_excess_over_n_tx_30db",
        (impaired.t_p - n_tx) as f64,
        GreaterThan,
        0.0,
    ));
    let gain_high = relative_rate_gain(&config.with_delta(0.175), rho_30)?;
    let gain_low = relative_rate_gain(&config.with_delta(0.08), rho_30)?;
    checks.push(Check::new(
        "rtri_rate_gain_percent_30db",
        gain_high,
        GreaterThan,
        0.0,
    ));
    checks.push(Check::new(
        "rate_gain_ordering_margin_30db",
        gain_high - gain_low,
        AtLeast,
        0.0,
    ));

    let saturation = |delta: f64| -> Result<f64> {
        let rate_at = |db: f64| -> Result<f64> {
            let cfg = config.with_delta(delta).with_snr(db_to_linear(db));
            Ok(optimize_training_length(&cfg, PowerMode::EqualPower)?
                .rate
                .bits_per_use)
        };
        let (r40, r60) = (rate_at(40.0)?, rate_at(60.0)?);
        Ok((r60 - r40) / r40)
    };
    checks.push(Check::new(
        "equal_power_rate_change_40_to_60db_delta_0.175",
        saturation(0.175)?.abs(),
        LessThan,
        0.01,
    ));
    checks.push(Check::new(
        "equal_power_rate_growth_40_to_60db_ideal",
        saturation(0.0)?,
        GreaterThan,
        0.5,
    ));

    // route equivalence of the two effective-SNR forms at one point per δ
    let mut route_gap: f64 = 0.0;
    for &delta in &MSE_GRID_DELTA {
        let a = effective_snr_equal_power(10.0, n_tx, n_tx, delta)?.value();
        let b = crate::rate::effective_snr_from_variances(10.0, 10.0, n_tx, n_tx, delta)?.value();
        route_gap = route_gap.max((a - b).abs() / b);
    }
    checks.push(Check::new(
        "effective_snr_route_relative_gap",
        route_gap,
        AtMost,
        1e-12,
    ));

    // orthogonality of the LMMSE estimate and its error at a mid-grid point
    let streams = TrialStreams::new(seed, experiment_id("orthogonality", &[]));
    let cross = lmmse_cross_correlation(config, 10.0, 0.175, trials, &streams)?;
    checks.push(Check::new("lmmse_orthogonality_max_z", cross, AtMost, 4.0));

    Ok(checks)
}

/// Largest `|mean| / std_err` over the entries of `E[Ĥᴴ H_e]` (real and
/// imaginary parts separately).
pub fn lmmse_cross_correlation(
    config: &LinkConfig,
    rho_p: f64,
    delta: f64,
    trials: usize,
    streams: &TrialStreams,
) -> Result<f64> {
    use crate::estimation::LmmseFilter;
    use crate::model::{make_orthogonal_training, sample_channel, training_rx};
    let n_tx = config.n_tx;
    let s_p = make_orthogonal_training(n_tx, n_tx)?;
    let filter = LmmseFilter::new(&s_p, rho_p, delta)?;
    let mut worst: f64 = 0.0;
    for i in 0..n_tx {
        for j in 0..n_tx {
            for imag in [false, true] {
                let est = estimate_mean(streams, trials, |rng| {
                    let h = sample_channel(config.n_rx, n_tx, rng);
                    let y = training_rx(&h, &s_p, rho_p, delta, rng)?;
                    let h_hat = filter.apply(&y)?.h_hat;
                    let err = h.sub(&h_hat)?;
                    let v = h_hat.adjoint().matmul(&err)?.get(i, j);
                    Ok(if imag { v.im } else { v.re })
                })?;
                worst = worst.max(est.mean.abs() / est.std_err);
            }
        }
    }
    Ok(worst)
}
