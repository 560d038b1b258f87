//! Power allocation and training-length optimization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::model::{split_resources, LinkConfig, ResourceSplit};
use crate::rate::{effective_snr, EffectiveSnr, RateResult, WishartEigenDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Pilot and data powers chosen jointly with the training length.
    JointPower,
    /// `ρ_p = ρ_d = ρ`.
    EqualPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDesign {
    pub t_p: usize,
    /// Data share of the block energy. In equal-power mode this is
    /// `T_d / T`, reported for reference only.
    pub alpha: f64,
    pub rate: RateResult,
    pub mode: PowerMode,
    /// Closed-form rate for every candidate `t_p = n_tx, …, coherence - 1`.
    pub rate_profile: Vec<f64>,
}

impl TrainingDesign {
    /// Rate at the candidate `t_p`, if it was part of the search.
    pub fn rate_at(&self, t_p: usize, n_tx: usize) -> Option<f64> {
        t_p.checked_sub(n_tx)
            .and_then(|i| self.rate_profile.get(i).copied())
    }
}

/// Energy share of the data phase that maximizes `ρ_eff` for fixed `t_p`.
///
/// With `r = ρT + N_tρTδ²/T_p + N_t` and
/// `s = ρT + N_tρTδ²/T_p − N_tρT(1+δ²)/T_d`, the optimum
/// `(r − √(r² − rs))/s` is evaluated as `r / (r + √(r(r − s)))`, which is
/// the same number without the cancellation near `s = 0`.
pub fn optimal_alpha(
    rho: f64,
    coherence: usize,
    t_p: usize,
    n_tx: usize,
    delta: f64,
) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Constraint(format!(
            "rho must be finite and > 0, got {rho}"
        )));
    }
    if n_tx < 1 || t_p < n_tx || t_p + 1 > coherence {
        return Err(Error::Constraint(format!(
            "need 1 <= n_tx <= t_p <= coherence - 1, got n_tx={n_tx}, t_p={t_p}, coherence={coherence}"
        )));
    }
    let (r, s) = alpha_coefficients(rho, coherence, t_p, n_tx, delta);
    if s.abs() < 1e-12 * r {
        return Ok(0.5);
    }
    Ok(r / (r + (r * (r - s)).sqrt()))
}

fn alpha_coefficients(
    rho: f64,
    coherence: usize,
    t_p: usize,
    n_tx: usize,
    delta: f64,
) -> (f64, f64) {
    let d2 = delta * delta;
    let nt = n_tx as f64;
    let energy = rho * coherence as f64;
    let t_d = (coherence - t_p) as f64;
    let common = energy + nt * energy * d2 / t_p as f64;
    (common + nt, common - nt * energy * (1.0 + d2) / t_d)
}

/// `lim_{ρ→∞}` of [`optimal_alpha`]: `1 / (1 + √(b/a))` with
/// `a = 1 + N_tδ²/T_p` and `b = N_t(1+δ²)/T_d`.
pub fn alpha_high_snr_limit(t_p: usize, t_d: usize, n_tx: usize, delta: f64) -> f64 {
    let d2 = delta * delta;
    let a = 1.0 + n_tx as f64 * d2 / t_p as f64;
    let b = n_tx as f64 * (1.0 + d2) / t_d as f64;
    1.0 / (1.0 + (b / a).sqrt())
}

/// Resource split and effective SNR for one training length.
pub fn candidate(
    config: &LinkConfig,
    t_p: usize,
    mode: PowerMode,
) -> Result<(ResourceSplit, EffectiveSnr)> {
    let split = match mode {
        PowerMode::JointPower => {
            let alpha =
                optimal_alpha(config.snr, config.coherence, t_p, config.n_tx, config.delta)?;
            split_resources(config, t_p, alpha)?
        }
        PowerMode::EqualPower => ResourceSplit::equal_power(config, t_p)?,
    };
    let snr = effective_snr(split.rho_p(), split.rho_d(), t_p, config.n_tx, config.delta)?;
    Ok((split, snr))
}

/// Exhaustive search over `t_p ∈ [n_tx, coherence − 1]` for the largest
/// closed-form rate. Ties resolve to the smallest `t_p`.
pub fn optimize_training_length(config: &LinkConfig, mode: PowerMode) -> Result<TrainingDesign> {
    optimize_training_length_with(config, mode, Execution::default())
}

pub fn optimize_training_length_with(
    config: &LinkConfig,
    mode: PowerMode,
    execution: Execution,
) -> Result<TrainingDesign> {
    config.validate()?;
    let density = WishartEigenDensity::new(config.max_antennas(), config.min_antennas())?;
    let candidates = config.coherence - config.n_tx;
    let evaluated = map_indexed(execution, candidates, |i| -> Result<(f64, RateResult)> {
        let t_p = config.n_tx + i;
        let (split, snr) = candidate(config, t_p, mode).map_err(|e| at(t_p, e))?;
        let rate = density
            .rate(snr, config.n_tx, split.t_d(), config.coherence)
            .map_err(|e| at(t_p, e))?;
        Ok((split.alpha(), rate))
    });

    let mut profile = Vec::with_capacity(candidates);
    let mut best: Option<(usize, f64, RateResult)> = None;
    for (i, item) in evaluated.into_iter().enumerate() {
        let (alpha, rate) = item?;
        profile.push(rate.bits_per_use);
        if best.is_none_or(|(_, _, b)| rate.bits_per_use > b.bits_per_use) {
            best = Some((config.n_tx + i, alpha, rate));
        }
    }
    let (t_p, alpha, rate) =
        best.ok_or_else(|| Error::Internal("empty training-length search".into()))?;
    Ok(TrainingDesign {
        t_p,
        alpha,
        rate,
        mode,
        rate_profile: profile,
    })
}

fn at(t_p: usize, source: Error) -> Error {
    Error::AtTrainingLength {
        t_p,
        source: Box::new(source),
    }
}

/// Percentage rate improvement of the optimal training length over
/// `t_p = n_tx`, with jointly optimized power, at SNR `rho`.
pub fn relative_rate_gain(config: &LinkConfig, rho: f64) -> Result<f64> {
    let design = optimize_training_length(&config.with_snr(rho), PowerMode::JointPower)?;
    let baseline = design.rate_profile[0];
    Ok((design.rate.bits_per_use - baseline) / baseline * 100.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> LinkConfig {
        LinkConfig::default()
    }

    #[test]
    fn alpha_example() {
        let (r, s) = alpha_coefficients(1.0, 100, 4, 4, 0.0);
        assert!((r - 104.0).abs() < 1e-12);
        assert!((s - (100.0 - 400.0 / 96.0)).abs() < 1e-12);
        let alpha = optimal_alpha(1.0, 100, 4, 4, 0.0).unwrap();
        let direct_form = (r - (r * r - r * s).sqrt()) / s;
        assert!((alpha - direct_form).abs() < 1e-14);
        assert!((alpha - 0.781_11).abs() < 1e-5);
    }

    #[test]
    fn alpha_zero_s_branch() {
        // s = 0 when T_d = N_t(1+δ²)·(1 + N_tδ²/T_p)⁻¹; with δ = 0 that is T_d = N_t
        let alpha = optimal_alpha(3.0, 8, 4, 4, 0.0).unwrap();
        assert_eq!(alpha, 0.5);
        assert!((alpha_high_snr_limit(4, 4, 4, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn alpha_limits() {
        assert!((optimal_alpha(1e-6, 100, 4, 4, 0.175).unwrap() - 0.5).abs() < 1e-3);
        let high = alpha_high_snr_limit(4, 96, 4, 0.0);
        assert!((high - 1.0 / (1.0 + (4.0f64 / 96.0).sqrt())).abs() < 1e-15);
        assert!((high - 0.830_479_152_801_462_8).abs() < 1e-14);
        for &delta in &[0.0, 0.08, 0.175] {
            let at_1e8 = optimal_alpha(1e8, 100, 4, 4, delta).unwrap();
            assert!((at_1e8 - alpha_high_snr_limit(4, 96, 4, delta)).abs() < 1e-3);
        }
    }

    #[test]
    fn alpha_rejects_bad_input() {
        assert!(optimal_alpha(0.0, 100, 4, 4, 0.0).is_err());
        assert!(optimal_alpha(1.0, 100, 3, 4, 0.0).is_err());
        assert!(optimal_alpha(1.0, 100, 100, 4, 0.0).is_err());
    }

    #[test]
    fn ideal_hardware_uses_minimal_training() {
        let design =
            optimize_training_length(&base().with_snr(10.0), PowerMode::JointPower).unwrap();
        assert_eq!(design.t_p, 4);
        assert_eq!(design.rate_profile.len(), 96);
        assert_eq!(relative_rate_gain(&base(), 10.0).unwrap(), 0.0);
    }

    #[test]
    fn equal_power_alpha_is_data_fraction() {
        let design = optimize_training_length(
            &base().with_snr(10.0).with_delta(0.08),
            PowerMode::EqualPower,
        )
        .unwrap();
        let t_d = 100 - design.t_p;
        assert!((design.alpha - t_d as f64 / 100.0).abs() < 1e-15);
    }

    #[test]
    fn search_reports_offending_length() {
        let err = at(7, Error::Domain("x".into())).to_string();
        assert!(err.contains("t_p=7"));
    }
}
