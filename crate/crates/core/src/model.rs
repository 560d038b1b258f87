//! Block-fading MIMO link with residual transmit RF impairments.
//!
//! Received signal over one block: `Y = √(ρ/N_t) · H · (S + Δ) + V`, where
//! `H` and `V` have i.i.d. `CN(0,1)` entries and the distortion `Δ` has
//! i.i.d. `CN(0, δ²)` entries, independent across channel uses. The block of
//! `T` channel uses splits into `T_p` pilot uses and `T_d` data uses.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::rng::RandomSource;

/// Antenna counts, coherence time, impairment level and SNR budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    /// Transmit antennas `N_t`.
    pub n_tx: usize,
    /// Receive antennas `N_r`.
    pub n_rx: usize,
    /// Coherence time `T` in channel uses.
    pub coherence: usize,
    /// Impairment level δ (equal to the EVM); zero is ideal hardware.
    pub delta: f64,
    /// Average SNR ρ, linear.
    pub snr: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            n_tx: 4,
            n_rx: 4,
            coherence: 100,
            delta: 0.0,
            snr: 1.0,
        }
    }
}

impl LinkConfig {
    /// Every violated invariant, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_tx < 1 {
            out.push("n_tx must be at least 1".to_string());
        }
        if self.n_rx < 1 {
            out.push("n_rx must be at least 1".to_string());
        }
        if self.coherence < self.n_tx + 1 {
            out.push(format!(
                "coherence {} must be at least n_tx + 1 = {}",
                self.coherence,
                self.n_tx + 1
            ));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            out.push(format!("delta must be finite and >= 0, got {}", self.delta));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            out.push(format!("snr must be finite and > 0, got {}", self.snr));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Constraint(v.join("; ")))
        }
    }

    pub fn with_snr(self, snr: f64) -> Self {
        Self { snr, ..self }
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    /// `q = min(N_r, N_t)`.
    pub fn min_antennas(&self) -> usize {
        self.n_tx.min(self.n_rx)
    }

    /// `p = max(N_r, N_t)`.
    pub fn max_antennas(&self) -> usize {
        self.n_tx.max(self.n_rx)
    }
}

/// Time and energy split between the training and data phases.
///
/// Satisfies `T_p + T_d = T` and `ρ_p T_p + ρ_d T_d = ρ T`; `alpha` is the
/// share of the block energy spent on data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceSplit {
    t_p: usize,
    t_d: usize,
    rho_p: f64,
    rho_d: f64,
    alpha: f64,
}

impl ResourceSplit {
    pub fn t_p(&self) -> usize {
        self.t_p
    }
    pub fn t_d(&self) -> usize {
        self.t_d
    }
    pub fn rho_p(&self) -> f64 {
        self.rho_p
    }
    pub fn rho_d(&self) -> f64 {
        self.rho_d
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same per-use power in both phases, `ρ_p = ρ_d = ρ`.
    pub fn equal_power(config: &LinkConfig, t_p: usize) -> Result<Self> {
        config.validate()?;
        check_training_length(config, t_p)?;
        let t_d = config.coherence - t_p;
        let split = Self {
            t_p,
            t_d,
            rho_p: config.snr,
            rho_d: config.snr,
            alpha: t_d as f64 / config.coherence as f64,
        };
        split.check_conservation(config)?;
        Ok(split)
    }

    /// Checks time and energy conservation against `config`.
    pub fn check_conservation(&self, config: &LinkConfig) -> Result<()> {
        let budget = config.snr * config.coherence as f64;
        let energy = self.rho_p * self.t_p as f64 + self.rho_d * self.t_d as f64;
        if self.t_p + self.t_d != config.coherence {
            return Err(Error::Internal(format!(
                "time not conserved: {} + {} != {}",
                self.t_p, self.t_d, config.coherence
            )));
        }
        if (energy - budget).abs() > 1e-9 * budget {
            return Err(Error::Internal(format!(
                "energy not conserved: {energy} vs budget {budget}"
            )));
        }
        let alpha = self.rho_d * self.t_d as f64 / budget;
        if (alpha - self.alpha).abs() > 1e-12 {
            return Err(Error::Internal(format!(
                "alpha {} inconsistent with data energy share {alpha}",
                self.alpha
            )));
        }
        Ok(())
    }
}

fn check_training_length(config: &LinkConfig, t_p: usize) -> Result<()> {
    if t_p < config.n_tx {
        return Err(Error::Constraint(format!(
            "t_p = {t_p} is below the lower bound n_tx = {}",
            config.n_tx
        )));
    }
    if t_p + 1 > config.coherence {
        return Err(Error::Constraint(format!(
            "t_p = {t_p} exceeds the upper bound coherence - 1 = {}",
            config.coherence - 1
        )));
    }
    Ok(())
}

/// Splits the block of `config` into `t_p` pilot uses and the rest for data,
/// giving the data phase a share `alpha` of the total energy `ρT`.
pub fn split_resources(config: &LinkConfig, t_p: usize, alpha: f64) -> Result<ResourceSplit> {
    config.validate()?;
    check_training_length(config, t_p)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Constraint(format!(
            "alpha = {alpha} must lie strictly between 0 and 1"
        )));
    }
    let t_d = config.coherence - t_p;
    let budget = config.snr * config.coherence as f64;
    let split = ResourceSplit {
        t_p,
        t_d,
        rho_p: (1.0 - alpha) * budget / t_p as f64,
        rho_d: alpha * budget / t_d as f64,
        alpha,
    };
    split.check_conservation(config)?;
    Ok(split)
}

/// First `n_tx` rows of the `t_p`-point DFT matrix, entries of unit modulus,
/// so that `S_p S_p^H = t_p I`.
pub fn make_orthogonal_training(n_tx: usize, t_p: usize) -> Result<ComplexMatrix> {
    if n_tx < 1 {
        return Err(Error::Constraint("n_tx must be at least 1".into()));
    }
    if t_p < n_tx {
        return Err(Error::Constraint(format!(
            "t_p = {t_p} must be at least n_tx = {n_tx}"
        )));
    }
    Ok(ComplexMatrix::from_fn(n_tx, t_p, |k, l| {
        let phase = ((k * l) % t_p) as f64 / t_p as f64;
        let angle = -std::f64::consts::TAU * phase;
        Complex64::new(angle.cos(), angle.sin())
    }))
}

fn gaussian_matrix(
    rows: usize,
    cols: usize,
    std_dev: f64,
    rng: &mut RandomSource,
) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| rng.complex_gaussian() * std_dev)
}

/// Channel matrix with i.i.d. `CN(0, 1)` entries.
pub fn sample_channel(n_rx: usize, n_tx: usize, rng: &mut RandomSource) -> ComplexMatrix {
    gaussian_matrix(n_rx, n_tx, 1.0, rng)
}

/// Distortion matrix with i.i.d. `CN(0, δ²)` entries.
///
/// Samples are drawn even when `delta = 0` so that the stream position does
/// not depend on the impairment level.
pub fn sample_distortion(
    delta: f64,
    n_tx: usize,
    n_cols: usize,
    rng: &mut RandomSource,
) -> ComplexMatrix {
    gaussian_matrix(n_tx, n_cols, delta, rng)
}

/// Data symbols with i.i.d. `CN(0, 1)` entries.
pub fn sample_data_symbols(n_tx: usize, t_d: usize, rng: &mut RandomSource) -> ComplexMatrix {
    gaussian_matrix(n_tx, t_d, 1.0, rng)
}

/// `√(ρ/N_t) · H · (S + Δ) + V` for given distortion and noise realizations.
pub fn received_signal(
    h: &ComplexMatrix,
    symbols: &ComplexMatrix,
    rho: f64,
    distortion: &ComplexMatrix,
    noise: &ComplexMatrix,
) -> Result<ComplexMatrix> {
    if h.cols() != symbols.rows() {
        return Err(Error::DimensionMismatch {
            op: "received_signal",
            expected: format!("{} transmit rows in symbols", h.cols()),
            found: format!("{}x{}", symbols.rows(), symbols.cols()),
        });
    }
    if !(rho > 0.0) {
        return Err(Error::Constraint(format!(
            "per-use SNR must be > 0, got {rho}"
        )));
    }
    let scale = (rho / h.cols() as f64).sqrt();
    let transmitted = symbols.add(distortion)?;
    h.matmul(&transmitted)?.scale(scale).add(noise)
}

fn phase_rx(
    h: &ComplexMatrix,
    symbols: &ComplexMatrix,
    rho: f64,
    delta: f64,
    rng: &mut RandomSource,
) -> Result<ComplexMatrix> {
    if h.cols() != symbols.rows() {
        return Err(Error::DimensionMismatch {
            op: "phase_rx",
            expected: format!("{} transmit rows in symbols", h.cols()),
            found: format!("{}x{}", symbols.rows(), symbols.cols()),
        });
    }
    let distortion = sample_distortion(delta, symbols.rows(), symbols.cols(), rng);
    let noise = gaussian_matrix(h.rows(), symbols.cols(), 1.0, rng);
    received_signal(h, symbols, rho, &distortion, &noise)
}

/// Training-phase observation `Y_p` with fresh distortion and noise.
pub fn training_rx(
    h: &ComplexMatrix,
    s_p: &ComplexMatrix,
    rho_p: f64,
    delta: f64,
    rng: &mut RandomSource,
) -> Result<ComplexMatrix> {
    phase_rx(h, s_p, rho_p, delta, rng)
}

/// Data-phase observation `Y_d` with fresh distortion and noise.
pub fn data_rx(
    h: &ComplexMatrix,
    s_d: &ComplexMatrix,
    rho_d: f64,
    delta: f64,
    rng: &mut RandomSource,
) -> Result<ComplexMatrix> {
    phase_rx(h, s_d, rho_d, delta, rng)
}
