//! LMMSE channel estimation under transmit distortion.
//!
//! Each row `y` of the training observation satisfies
//! `y = √(ρ_p/N_t)·h·(S_p + Δ_p) + v`. Only second moments enter the linear
//! estimator: `E[yᴴy] = (ρ_p/N_t)·S_pᴴS_p + (δ²ρ_p + 1)·I` and
//! `E[hᴴy] = √(ρ_p/N_t)·S_p`, which gives the filter used below.

use crate::error::{Error, Result};
use crate::exec::{estimate_mean, MeanEstimate};
use crate::linalg::ComplexMatrix;
use crate::model::{make_orthogonal_training, sample_channel, training_rx, LinkConfig};
use crate::rng::TrialStreams;

/// Training gain `g = ρ_p T_p / (N_t (ρ_p δ² + 1))`.
pub fn training_gain(rho_p: f64, t_p: usize, n_tx: usize, delta: f64) -> f64 {
    rho_p * t_p as f64 / (n_tx as f64 * (rho_p * delta * delta + 1.0))
}

/// Per-entry estimation error variance `1 / (1 + g)`.
pub fn normalized_mse(gain: f64) -> f64 {
    1.0 / (1.0 + gain)
}

/// High-SNR limit of the normalized MSE, `1 / (1 + T_p/(N_t δ²))`.
///
/// Ideal hardware has no floor; `delta = 0` is a domain error.
pub fn mse_floor(t_p: usize, n_tx: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!(
            "mse_floor needs delta > 0 (ideal hardware has zero floor), got {delta}"
        )));
    }
    Ok(1.0 / (1.0 + t_p as f64 / (n_tx as f64 * delta * delta)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimate {
    pub h_hat: ComplexMatrix,
    /// Per-entry variance of the estimate.
    pub est_var: f64,
    /// Per-entry variance of the estimation error.
    pub err_var: f64,
    pub gain: f64,
}

/// Precomputed LMMSE filter for a fixed pilot matrix, power and impairment
/// level. `Ĥ = Y_p · W` with
/// `W = √(ρ_p/N_t) · ((ρ_p/N_t)·S_pᴴS_p + (δ²ρ_p + 1)·I)⁻¹ · S_pᴴ`.
#[derive(Debug, Clone)]
pub struct LmmseFilter {
    weights: ComplexMatrix,
    n_tx: usize,
    t_p: usize,
    est_var: f64,
    err_var: f64,
}

impl LmmseFilter {
    pub fn new(s_p: &ComplexMatrix, rho_p: f64, delta: f64) -> Result<Self> {
        if !(rho_p > 0.0 && rho_p.is_finite()) {
            return Err(Error::Constraint(format!(
                "rho_p must be finite and > 0, got {rho_p}"
            )));
        }
        if !(delta >= 0.0) {
            return Err(Error::Constraint(format!(
                "delta must be >= 0, got {delta}"
            )));
        }
        let (n_tx, t_p) = s_p.shape();
        let per_antenna = rho_p / n_tx as f64;
        let s_h = s_p.adjoint();
        let regularized = s_h
            .matmul(s_p)?
            .scale(per_antenna)
            .add(&ComplexMatrix::identity(t_p).scale(delta * delta * rho_p + 1.0))?;
        let weights = regularized
            .solve_hermitian_pd(&s_h)
            .map_err(|e| Error::Internal(format!("regularized pilot Gram not invertible: {e}")))?
            .scale(per_antenna.sqrt());

        // Error covariance per row: I - √(ρ_p/N_t)·S_p·W; its mean diagonal is the
        // per-entry error variance. Equals 1/(1+g) for row-orthogonal pilots.
        let captured = s_p.matmul(&weights)?.scale(per_antenna.sqrt());
        let trace: f64 = (0..n_tx).map(|i| captured.get(i, i).re).sum();
        let est_var = trace / n_tx as f64;
        Ok(Self {
            weights,
            n_tx,
            t_p,
            est_var,
            err_var: 1.0 - est_var,
        })
    }

    pub fn weights(&self) -> &ComplexMatrix {
        &self.weights
    }

    pub fn est_var(&self) -> f64 {
        self.est_var
    }

    pub fn err_var(&self) -> f64 {
        self.err_var
    }

    pub fn gain(&self) -> f64 {
        self.est_var / self.err_var
    }

    pub fn apply(&self, y_p: &ComplexMatrix) -> Result<ChannelEstimate> {
        if y_p.cols() != self.t_p {
            return Err(Error::DimensionMismatch {
                op: "lmmse_estimate",
                expected: format!("{} pilot columns", self.t_p),
                found: format!("{}x{}", y_p.rows(), y_p.cols()),
            });
        }
        let h_hat = y_p.matmul(&self.weights)?;
        debug_assert_eq!(h_hat.cols(), self.n_tx);
        Ok(ChannelEstimate {
            h_hat,
            est_var: self.est_var,
            err_var: self.err_var,
            gain: self.gain(),
        })
    }
}

/// LMMSE estimate of `H` from the training observation `y_p`.
pub fn lmmse_estimate(
    y_p: &ComplexMatrix,
    s_p: &ComplexMatrix,
    rho_p: f64,
    delta: f64,
) -> Result<ChannelEstimate> {
    LmmseFilter::new(s_p, rho_p, delta)?.apply(y_p)
}

/// Monte-Carlo normalized MSE `‖H − Ĥ‖²_F / (N_r N_t)` with orthogonal
/// pilots of length `t_p`, fresh `H`, `Δ_p` and `V_p` per trial.
pub fn empirical_mse(
    config: &LinkConfig,
    t_p: usize,
    rho_p: f64,
    trials: usize,
    streams: &TrialStreams,
) -> Result<MeanEstimate> {
    if trials < 1 {
        return Err(Error::Constraint("trials must be at least 1".into()));
    }
    if config.n_tx < 1 || config.n_rx < 1 {
        return Err(Error::Constraint(
            "antenna counts must be at least 1".into(),
        ));
    }
    let s_p = make_orthogonal_training(config.n_tx, t_p)?;
    let filter = LmmseFilter::new(&s_p, rho_p, config.delta)?;
    let entries = (config.n_rx * config.n_tx) as f64;
    estimate_mean(streams, trials, |rng| {
        let h = sample_channel(config.n_rx, config.n_tx, rng);
        let y_p = training_rx(&h, &s_p, rho_p, config.delta, rng)?;
        let estimate = filter.apply(&y_p)?;
        Ok(h.sub(&estimate.h_hat)?.frobenius_norm_sqr() / entries)
    })
}
