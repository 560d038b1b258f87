//! Effective SNR and the approximated ergodic rate.
//!
//! The receiver treats its LMMSE estimate as the true channel; estimation
//! error and data-phase distortion fold into an effective noise of variance
//! `σ²_Ṽ = (1/(1+g) + δ²)·ρ_d + 1`. The rate is then
//! `(T_d/T)·E[log2 det(I + (ρ_eff/N_t)·H̄H̄ᴴ)]` with `H̄` i.i.d. `CN(0,1)`,
//! evaluated in closed form through the density of an unordered eigenvalue
//! of the complex Wishart matrix `W = H̄H̄ᴴ` (or `H̄ᴴH̄`, whichever is
//! `q × q` with `q = min(N_r, N_t)`).

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::estimation::{normalized_mse, training_gain};
use crate::exec::estimate_mean;
use crate::linalg::ComplexMatrix;
use crate::model::sample_channel;
use crate::numerics::{
    log_factorial, normalized_upper_gamma_sequence, signed_log_sum, SignedLogValue,
};
use crate::rng::{RandomSource, TrialStreams};

/// Cancellation condition above which the closed-form rate is rejected.
pub const MAX_RATE_CONDITION: f64 = 1e6;

/// Largest antenna dimension supported by the closed-form rate.
pub const MAX_CLOSED_FORM_ANTENNAS: usize = 8;

/// Effective SNR `ρ_eff`, linear and non-negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EffectiveSnr(f64);

impl EffectiveSnr {
    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!(
                "effective SNR must be finite and >= 0, got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub bits_per_use: f64,
    /// Zero for closed-form results.
    pub std_err: f64,
    pub method: RateMethod,
}

fn check_snr_inputs(rho_p: f64, rho_d: f64, t_p: usize, n_tx: usize) -> Result<()> {
    if !(rho_p > 0.0 && rho_d > 0.0) {
        return Err(Error::Constraint(format!(
            "per-phase SNRs must be > 0, got rho_p={rho_p}, rho_d={rho_d}"
        )));
    }
    if n_tx < 1 || t_p < n_tx {
        return Err(Error::Constraint(format!(
            "need 1 <= n_tx <= t_p, got n_tx={n_tx}, t_p={t_p}"
        )));
    }
    Ok(())
}

/// `ρ_eff = ρ_d ρ_p T_p / (N_t(1+ρ_pδ²)(1+ρ_d+ρ_dδ²) + ρ_pT_p + ρ_dρ_pT_pδ²)`.
pub fn effective_snr(
    rho_p: f64,
    rho_d: f64,
    t_p: usize,
    n_tx: usize,
    delta: f64,
) -> Result<EffectiveSnr> {
    check_snr_inputs(rho_p, rho_d, t_p, n_tx)?;
    let d2 = delta * delta;
    let tp = t_p as f64;
    let num = rho_d * rho_p * tp;
    let den = n_tx as f64 * (1.0 + rho_p * d2) * (1.0 + rho_d + rho_d * d2)
        + rho_p * tp
        + rho_d * rho_p * tp * d2;
    EffectiveSnr::new(num / den)
}

/// Variance of one entry of the effective noise in the data phase.
pub fn effective_noise_variance(gain: f64, delta: f64, rho_d: f64) -> f64 {
    (normalized_mse(gain) + delta * delta) * rho_d + 1.0
}

/// `ρ_eff` as the ratio `ρ_d σ²_Ĥ / σ²_Ṽ` of estimate power to effective noise.
pub fn effective_snr_from_variances(
    rho_p: f64,
    rho_d: f64,
    t_p: usize,
    n_tx: usize,
    delta: f64,
) -> Result<EffectiveSnr> {
    check_snr_inputs(rho_p, rho_d, t_p, n_tx)?;
    let g = training_gain(rho_p, t_p, n_tx, delta);
    let est_var = g / (1.0 + g);
    EffectiveSnr::new(rho_d * est_var / effective_noise_variance(g, delta, rho_d))
}

/// `ρ_eff` when pilots and data share the per-use SNR `ρ`.
pub fn effective_snr_equal_power(
    rho: f64,
    t_p: usize,
    n_tx: usize,
    delta: f64,
) -> Result<EffectiveSnr> {
    check_snr_inputs(rho, rho, t_p, n_tx)?;
    let d2 = delta * delta;
    let tp = t_p as f64;
    let num = rho * rho * tp;
    let den = n_tx as f64 * (1.0 + rho * d2) * (1.0 + rho + rho * d2) + (rho * rho * d2 + rho) * tp;
    EffectiveSnr::new(num / den)
}

/// Saturation level of `ρ_eff` as both phase SNRs grow without bound.
pub fn effective_snr_ceiling(t_p: usize, n_tx: usize, delta: f64) -> f64 {
    let d2 = delta * delta;
    t_p as f64 / (d2 * (n_tx as f64 * (1.0 + d2) + t_p as f64))
}

fn factorial_big(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Exact determinant of an integer matrix (fraction-free Bareiss elimination).
fn bareiss_determinant(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&r| !m[r][k].is_zero()) {
                Some(r) => {
                    m.swap(k, r);
                    sign = -sign;
                }
                None => return BigInt::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&m[i][j] * &m[k][k] - &m[i][k] * &m[k][j]) / &prev;
                m[i][j] = v;
            }
        }
        prev = m[k][k].clone();
    }
    sign * m[n - 1][n - 1].clone()
}

fn gamma_index(i: usize, j: usize, n: usize, m: usize) -> usize {
    if i < n && j < m {
        i + j - 2
    } else if i >= n && j >= m {
        i + j
    } else {
        i + j - 1
    }
}

/// Density of one unordered eigenvalue of a `q × q` complex Wishart matrix
/// with `p` degrees of freedom and identity covariance:
/// `f(λ) = Σ_e c_e · λ^e · e^{-λ}`, `e = p-q, …, p+q-2`.
///
/// The coefficients come from the double sum over `(n, m)` of signed
/// `(q-1) × (q-1)` factorial determinants, evaluated exactly in integer
/// arithmetic and grouped by power of `λ` before conversion to floating
/// point. The per-element `q^{-1/(q-1)}` scale contributes a single `1/q`
/// to each determinant; for `q = 1` the determinant is empty and equals 1.
#[derive(Debug, Clone)]
pub struct WishartEigenDensity {
    p: usize,
    q: usize,
    /// `(exponent e, c_e)` pairs with nonzero `c_e`.
    terms: Vec<(usize, f64)>,
}

impl WishartEigenDensity {
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if q < 1 || q > p {
            return Err(Error::Domain(format!(
                "Wishart density needs 1 <= q <= p, got p={p}, q={q}"
            )));
        }
        let dim = q - 1;
        let mut grouped = vec![BigInt::zero(); 2 * q - 1];
        for n in 1..=q {
            for m in 1..=q {
                let omega: Vec<Vec<BigInt>> = (1..=dim)
                    .map(|i| {
                        (1..=dim)
                            .map(|j| factorial_big(gamma_index(i, j, n, m) + p - q))
                            .collect()
                    })
                    .collect();
                let det = bareiss_determinant(omega);
                if (n + m) % 2 == 0 {
                    grouped[n + m - 2] += det;
                } else {
                    grouped[n + m - 2] -= det;
                }
            }
        }
        // K^{-1} · q
        let denominator: BigInt = (1..=q)
            .map(|i| factorial_big(p - i) * factorial_big(q - i))
            .fold(BigInt::from(q), |acc, f| acc * f);
        let den_f = denominator
            .to_f64()
            .ok_or_else(|| Error::Internal("Wishart normalization overflows f64".into()))?;
        let terms = grouped
            .into_iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(offset, c)| {
                let magnitude = c.abs().to_f64().unwrap_or(f64::INFINITY);
                let value = if c.is_negative() {
                    -magnitude
                } else {
                    magnitude
                };
                (offset + p - q, value / den_f)
            })
            .collect();
        Ok(Self { p, q, terms })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `(exponent, coefficient)` pairs of `λ^e e^{-λ}`.
    pub fn terms(&self) -> &[(usize, f64)] {
        &self.terms
    }

    pub fn pdf(&self, lambda: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(Error::Domain(format!(
                "eigenvalue must be >= 0, got {lambda}"
            )));
        }
        if lambda == 0.0 {
            return Ok(self
                .terms
                .iter()
                .find(|(e, _)| *e == 0)
                .map_or(0.0, |&(_, c)| c));
        }
        let ln_lambda = lambda.ln();
        let parts: Vec<SignedLogValue> = self
            .terms
            .iter()
            .map(|&(e, c)| {
                SignedLogValue::from_f64(c) * SignedLogValue::new(e as f64 * ln_lambda - lambda, 1)
            })
            .collect();
        Ok(signed_log_sum(&parts).value.to_f64().max(0.0))
    }

    /// Exact `∫ λ^k f(λ) dλ = Σ c_e (e+k)!`, useful as a cross-check.
    pub fn moment(&self, k: usize) -> f64 {
        self.terms
            .iter()
            .map(|&(e, c)| c * log_factorial((e + k) as u64).exp())
            .sum()
    }

    /// `E[ln(1 + a·λ)]` for `a = 1/x > 0`, with its cancellation condition.
    fn expected_log1p(&self, x: f64) -> Result<(f64, f64)> {
        let max_t = self.terms.iter().map(|&(e, _)| e + 1).max().unwrap_or(1);
        let u = normalized_upper_gamma_sequence(max_t - 1, x)?;
        let mut prefix = Vec::with_capacity(u.len());
        let mut acc = 0.0;
        for &v in &u {
            acc += v;
            prefix.push(acc);
        }
        let parts: Vec<SignedLogValue> = self
            .terms
            .iter()
            .map(|&(e, c)| {
                // ∫ ln(1+aλ) λ^e e^{-λ} dλ = e! · Σ_{j=0}^{e} u_j(x)
                let inner = SignedLogValue::new(log_factorial(e as u64) + prefix[e].ln(), 1);
                SignedLogValue::from_f64(c) * inner
            })
            .collect();
        let sum = signed_log_sum(&parts);
        Ok((sum.value.to_f64(), sum.condition))
    }

    /// Closed-form rate in bits per channel use for a link whose unordered
    /// Wishart eigenvalue follows this density.
    pub fn rate(
        &self,
        rho_eff: EffectiveSnr,
        n_tx: usize,
        t_d: usize,
        coherence: usize,
    ) -> Result<RateResult> {
        let snr = rho_eff.value();
        if !(snr > 0.0) {
            return Err(Error::Domain(format!(
                "closed-form rate needs rho_eff > 0, got {snr}"
            )));
        }
        if t_d > coherence || coherence == 0 {
            return Err(Error::Constraint(format!(
                "need t_d <= coherence, got t_d={t_d}, coherence={coherence}"
            )));
        }
        let x = n_tx as f64 / snr;
        let (nats, condition) = self.expected_log1p(x)?;
        if !(condition <= MAX_RATE_CONDITION) {
            return Err(Error::NumericalInstability {
                p: self.p,
                q: self.q,
                rho_eff: snr,
                condition,
            });
        }
        let bits = self.q as f64 * t_d as f64 / coherence as f64 * nats / std::f64::consts::LN_2;
        Ok(RateResult {
            bits_per_use: bits.max(0.0),
            std_err: 0.0,
            method: RateMethod::ClosedForm,
        })
    }
}

/// Density of an unordered eigenvalue of a `q × q` complex Wishart matrix
/// with `p ≥ q` degrees of freedom.
pub fn wishart_unordered_eig_pdf(lambda: f64, p: usize, q: usize) -> Result<f64> {
    WishartEigenDensity::new(p, q)?.pdf(lambda)
}

fn check_rate_dims(n_tx: usize, n_rx: usize, t_d: usize, coherence: usize) -> Result<()> {
    if n_tx < 1 || n_rx < 1 {
        return Err(Error::Constraint(
            "antenna counts must be at least 1".into(),
        ));
    }
    if t_d > coherence || coherence == 0 {
        return Err(Error::Constraint(format!(
            "need t_d <= coherence, got t_d={t_d}, coherence={coherence}"
        )));
    }
    Ok(())
}

/// Closed-form approximated achievable rate, bits per channel use.
pub fn closed_form_rate(
    rho_eff: EffectiveSnr,
    n_tx: usize,
    n_rx: usize,
    t_d: usize,
    coherence: usize,
) -> Result<RateResult> {
    check_rate_dims(n_tx, n_rx, t_d, coherence)?;
    let (p, q) = (n_tx.max(n_rx), n_tx.min(n_rx));
    if p > MAX_CLOSED_FORM_ANTENNAS {
        return Err(Error::Domain(format!(
            "closed-form rate supports up to {MAX_CLOSED_FORM_ANTENNAS} antennas per side, got {p}"
        )));
    }
    WishartEigenDensity::new(p, q)?.rate(rho_eff, n_tx, t_d, coherence)
}

/// `log2 det(I + a·W)` for the `q × q` Gram matrix `W` of `h`.
pub fn log2_det_gram(h: &ComplexMatrix, a: f64) -> Result<f64> {
    let w = if h.rows() <= h.cols() {
        h.gram()
    } else {
        h.adjoint().gram()
    };
    let q = w.rows();
    let m = ComplexMatrix::identity(q).add(&w.scale(a))?;
    Ok(m.ln_det_hermitian_pd()? / std::f64::consts::LN_2)
}

/// Monte-Carlo estimate of the same rate over `trials` i.i.d. channels.
pub fn mc_rate(
    rho_eff: EffectiveSnr,
    n_tx: usize,
    n_rx: usize,
    t_d: usize,
    coherence: usize,
    trials: usize,
    streams: &TrialStreams,
) -> Result<RateResult> {
    check_rate_dims(n_tx, n_rx, t_d, coherence)?;
    if trials < 1 {
        return Err(Error::Constraint("trials must be at least 1".into()));
    }
    let a = rho_eff.value() / n_tx as f64;
    let est = estimate_mean(streams, trials, |rng| {
        let h = sample_channel(n_rx, n_tx, rng);
        log2_det_gram(&h, a)
    })?;
    let fraction = t_d as f64 / coherence as f64;
    Ok(RateResult {
        bits_per_use: fraction * est.mean,
        std_err: fraction * est.std_err,
        method: RateMethod::MonteCarlo,
    })
}

/// One eigenvalue, chosen uniformly, of `W = H Hᴴ` with `H` a `q × p`
/// i.i.d. `CN(0,1)` matrix.
pub fn sample_unordered_eigenvalue(p: usize, q: usize, rng: &mut RandomSource) -> Result<f64> {
    if q < 1 || q > p {
        return Err(Error::Domain(format!("need 1 <= q <= p, got p={p}, q={q}")));
    }
    let h = sample_channel(q, p, rng);
    let eig = h.gram().hermitian_eigenvalues()?;
    Ok(eig[rng.index(q)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn effective_snr_examples() {
        let v = effective_snr(10.0, 10.0, 4, 4, 0.0).unwrap().value();
        assert!(rel(v, 400.0 / 84.0) < 1e-14);
        let high = effective_snr(1e9, 1e9, 4, 4, 0.175).unwrap().value();
        assert!(rel(high, effective_snr_ceiling(4, 4, 0.175)) < 1e-6);
        assert!(rel(effective_snr_ceiling(4, 4, 0.175), 16.080_4) < 1e-4);
        assert!(effective_snr(10.0, 1e-12, 4, 4, 0.1).unwrap().value() < 1e-11);
    }

    #[test]
    fn equal_power_examples() {
        let v = effective_snr_equal_power(10.0, 4, 4, 0.175)
            .unwrap()
            .value();
        let den = 4.0 * (1.0 + 0.306_25) * (1.0 + 10.0 + 0.306_25) + (3.062_5 + 10.0) * 4.0;
        assert!(rel(v, 400.0 / den) < 1e-14);
        assert!(rel(v, 3.593) < 1e-3);
        let ideal = effective_snr_equal_power(10.0, 4, 4, 0.0).unwrap().value();
        assert!(rel(ideal, 400.0 / 84.0) < 1e-14);
    }

    #[test]
    fn snr_rejects_bad_inputs() {
        assert!(effective_snr(0.0, 1.0, 4, 4, 0.0).is_err());
        assert!(effective_snr(1.0, 1.0, 3, 4, 0.0).is_err());
        assert!(EffectiveSnr::new(-1.0).is_err());
    }

    #[test]
    fn bareiss_matches_small_determinants() {
        let m = |rows: &[&[i64]]| -> Vec<Vec<BigInt>> {
            rows.iter()
                .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
                .collect()
        };
        assert_eq!(bareiss_determinant(m(&[])), BigInt::one());
        assert_eq!(
            bareiss_determinant(m(&[&[1, 2], &[3, 4]])),
            BigInt::from(-2)
        );
        assert_eq!(
            bareiss_determinant(m(&[&[0, 1, 2], &[1, 0, 3], &[4, -3, 8]])),
            BigInt::from(-2)
        );
        assert_eq!(bareiss_determinant(m(&[&[1, 2], &[2, 4]])), BigInt::zero());
    }

    #[test]
    fn single_eigenvalue_reduces_to_gamma_density() {
        let d = WishartEigenDensity::new(1, 1).unwrap();
        assert!(rel(d.pdf(1.0).unwrap(), (-1f64).exp()) < 1e-15);
        let d = WishartEigenDensity::new(4, 1).unwrap();
        for l in [0.3f64, 1.0, 5.5] {
            let expected = l * l * l * (-l).exp() / 6.0;
            assert!(rel(d.pdf(l).unwrap(), expected) < 1e-14);
        }
    }

    #[test]
    fn two_by_two_density_is_known_polynomial() {
        // (λ²/2 − λ + 1)·e^{−λ}
        let d = WishartEigenDensity::new(2, 2).unwrap();
        for l in [0.0f64, 0.5, 2.0, 7.0] {
            let expected = (l * l / 2.0 - l + 1.0) * (-l).exp();
            assert!((d.pdf(l).unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_moments() {
        for p in 1..=8 {
            for q in 1..=p {
                let d = WishartEigenDensity::new(p, q).unwrap();
                assert!((d.moment(0) - 1.0).abs() < 1e-9, "p={p} q={q}");
                assert!(rel(d.moment(1), p as f64) < 1e-9, "p={p} q={q}");
            }
        }
    }

    #[test]
    fn density_domain_errors() {
        assert!(WishartEigenDensity::new(2, 3).is_err());
        assert!(WishartEigenDensity::new(2, 0).is_err());
        assert!(wishart_unordered_eig_pdf(-1.0, 2, 2).is_err());
    }

    #[test]
    fn siso_closed_form_rate() {
        // e·E1(1)/ln 2
        let r = closed_form_rate(EffectiveSnr::new(1.0).unwrap(), 1, 1, 1, 1).unwrap();
        assert!(rel(r.bits_per_use, 0.860_347_382_270_885_95) < 1e-12);
        assert_eq!(r.method, RateMethod::ClosedForm);
        assert_eq!(r.std_err, 0.0);
    }

    #[test]
    fn rate_vanishes_at_low_snr() {
        let tiny = closed_form_rate(EffectiveSnr::new(1e-9).unwrap(), 4, 4, 96, 100).unwrap();
        // ≈ (T_d/T)·q·p·ρ_eff/(N_t ln 2)
        let linear = 0.96 * 16.0 * 1e-9 / 4.0 / std::f64::consts::LN_2;
        assert!(rel(tiny.bits_per_use, linear) < 1e-6);
        assert!(closed_form_rate(EffectiveSnr::new(0.0).unwrap(), 4, 4, 96, 100).is_err());
    }

    #[test]
    fn mc_rate_zero_snr_is_exactly_zero() {
        let r = mc_rate(
            EffectiveSnr::new(0.0).unwrap(),
            2,
            3,
            5,
            10,
            100,
            &TrialStreams::new(1, 1),
        )
        .unwrap();
        assert_eq!(r.bits_per_use, 0.0);
        assert_eq!(r.std_err, 0.0);
    }
}
