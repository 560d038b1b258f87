//! Special functions and signed summation used by the closed-form rate.
//!
//! Only the cases the rate formula needs are covered: factorials, the
//! exponential integral `E1(x)` for real `x > 0`, and the upper incomplete
//! gamma function `Γ(a, x)` at non-positive integer orders. The incomplete
//! gamma values are always returned pre-multiplied by `e^x`, since the two
//! factors over- and underflow separately once `x` reaches a few hundred.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const MAX_DIRECT_FACTORIAL: u64 = 170;
const CF_MAX_ITER: usize = 10_000;
const CF_TINY: f64 = 1e-300;

fn log_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(MAX_DIRECT_FACTORIAL as usize + 1);
        let mut product = 1.0f64;
        table.push(0.0);
        for n in 1..=MAX_DIRECT_FACTORIAL {
            product *= n as f64;
            table.push(product.ln());
        }
        table
    })
}

/// `ln(n!)`. Direct product table up to 170!, log-gamma beyond.
pub fn log_factorial(n: u64) -> f64 {
    if n <= MAX_DIRECT_FACTORIAL {
        log_factorial_table()[n as usize]
    } else {
        statrs::function::gamma::ln_gamma(n as f64 + 1.0)
    }
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
///
/// Underflows to zero for `x` beyond roughly 740; use
/// [`scaled_exp_integral_e1`] when the scaled value is needed.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_positive(x, "exp_integral_e1")?;
    if x < 1.0 {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() * upper_gamma_continued_fraction(0.0, x))
    }
}

/// `e^x · E1(x)` for `x > 0`, finite for any representable `x`.
pub fn scaled_exp_integral_e1(x: f64) -> Result<f64> {
    check_positive(x, "scaled_exp_integral_e1")?;
    if x < 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(upper_gamma_continued_fraction(0.0, x))
    }
}

/// `e^x · Γ(a, x)` for integer `a ≤ 0` and real `x > 0`.
///
/// For `x < 1` the value is built from `e^x E1(x)` by downward recurrence on
/// the order, which is stable there. For `x ≥ 1` the recurrence cancels
/// badly (each step loses about `log10(x)` digits), so the Lentz continued
/// fraction for `Γ(a, x)` is evaluated directly.
pub fn scaled_upper_gamma_nonpos(a: i64, x: f64) -> Result<f64> {
    if a > 0 {
        return Err(Error::Domain(format!(
            "scaled_upper_gamma_nonpos requires a <= 0, got a = {a}"
        )));
    }
    check_positive(x, "scaled_upper_gamma_nonpos")?;
    let order = (-a) as usize;
    let normalized = if x >= 1.0 {
        upper_gamma_continued_fraction(a as f64, x)
    } else {
        *normalized_series_by_recurrence(order, x)
            .last()
            .expect("recurrence yields order + 1 values")
    };
    Ok(normalized * x.powi(a as i32))
}

/// Returns `u_j = x^j · e^x · Γ(-j, x)` for `j = 0..=max_order`.
///
/// These are the terms `e^{x} Γ(-j, x) / x^{-j}` summed by the closed-form
/// rate, with `x = N_t / ρ_eff`. Every `u_j` lies in `(0, 1/x]`-ish range for
/// large `x` and behaves like `1/j` for small `x`, so no power of `x` is ever
/// formed explicitly.
pub fn normalized_upper_gamma_sequence(max_order: usize, x: f64) -> Result<Vec<f64>> {
    check_positive(x, "normalized_upper_gamma_sequence")?;
    if x >= 1.0 {
        Ok((0..=max_order)
            .map(|j| upper_gamma_continued_fraction(-(j as f64), x))
            .collect())
    } else {
        Ok(normalized_series_by_recurrence(max_order, x))
    }
}

fn check_positive(x: f64, op: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{op} requires finite x > 0, got {x}"
        )))
    }
}

/// Power series `E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)`, for `0 < x < 1`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power_over_factorial = 1.0;
    for k in 1..200 {
        power_over_factorial *= -x / k as f64;
        let term = power_over_factorial / k as f64;
        sum += term;
        if term.abs() < f64::EPSILON * 1e-3 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// `u_{j+1} = (1 - x·u_j) / (j + 1)` starting from `u_0 = e^x E1(x)`.
fn normalized_series_by_recurrence(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_order + 1);
    let mut u = x.exp() * e1_series(x);
    out.push(u);
    for j in 0..max_order {
        u = (1.0 - x * u) / (j + 1) as f64;
        out.push(u);
    }
    out
}

/// Modified Lentz evaluation of
/// `Γ(a, x) = e^{-x} x^a / (x + 1 - a - 1(1-a)/(x + 3 - a - 2(2-a)/(x + 5 - a - …)))`,
/// returning the continued fraction only (the `e^{-x} x^a` prefactor is left
/// to the caller).
fn upper_gamma_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / CF_TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..CF_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = b + an / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    h
}

/// A real number stored as `sign · exp(log_magnitude)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLogValue {
    pub log_magnitude: f64,
    /// One of -1, 0, +1. Zero means the value is exactly zero.
    pub sign: i8,
}

impl SignedLogValue {
    pub const ZERO: SignedLogValue = SignedLogValue {
        log_magnitude: f64::NEG_INFINITY,
        sign: 0,
    };

    pub fn new(log_magnitude: f64, sign: i8) -> Self {
        if sign == 0 {
            Self::ZERO
        } else {
            Self {
                log_magnitude,
                sign: sign.signum(),
            }
        }
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self {
                log_magnitude: x.abs().ln(),
                sign: if x > 0.0 { 1 } else { -1 },
            }
        }
    }

    pub fn to_f64(self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_magnitude.exp(),
        }
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }
}

impl std::ops::Mul for SignedLogValue {
    type Output = SignedLogValue;

    fn mul(self, other: SignedLogValue) -> SignedLogValue {
        if self.is_zero() || other.is_zero() {
            Self::ZERO
        } else {
            Self {
                log_magnitude: self.log_magnitude + other.log_magnitude,
                sign: self.sign * other.sign,
            }
        }
    }
}

/// Result of [`signed_log_sum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedSum {
    pub value: SignedLogValue,
    /// `Σ|terms| / |Σ terms|`; infinite when nonzero terms cancel exactly.
    pub condition: f64,
}

/// Sums signed-log terms with Neumaier compensation after rescaling by the
/// largest magnitude.
pub fn signed_log_sum(terms: &[SignedLogValue]) -> SignedSum {
    let max_log = terms
        .iter()
        .filter(|t| !t.is_zero())
        .map(|t| t.log_magnitude)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_log == f64::NEG_INFINITY {
        return SignedSum {
            value: SignedLogValue::ZERO,
            condition: 1.0,
        };
    }

    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    let mut abs_sum = 0.0f64;
    for term in terms.iter().filter(|t| !t.is_zero()) {
        let scaled = f64::from(term.sign) * (term.log_magnitude - max_log).exp();
        abs_sum += scaled.abs();
        let next = sum + scaled;
        if sum.abs() >= scaled.abs() {
            compensation += (sum - next) + scaled;
        } else {
            compensation += (scaled - next) + sum;
        }
        sum = next;
    }
    let total = sum + compensation;

    if total == 0.0 {
        SignedSum {
            value: SignedLogValue::ZERO,
            condition: f64::INFINITY,
        }
    } else {
        SignedSum {
            value: SignedLogValue {
                log_magnitude: total.abs().ln() + max_log,
                sign: if total > 0.0 { 1 } else { -1 },
            },
            condition: abs_sum / total.abs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn log_factorial_small_values() {
        assert_eq!(log_factorial(0), 0.0);
        assert!(rel(log_factorial(5), 120f64.ln()) < 1e-15);
        assert!(rel(log_factorial(20), 2_432_902_008_176_640_000f64.ln()) < 1e-14);
        // ln(200!) from a 40-digit reference
        assert!(rel(log_factorial(200), 863.231_987_192_405_5) < 1e-14);
    }

    #[test]
    fn log_factorial_table_joins_log_gamma() {
        let below = log_factorial(170);
        let above = log_factorial(171);
        assert!(rel(above - below, 171f64.ln()) < 1e-10);
    }

    #[test]
    fn e1_reference_values() {
        // 40-digit references
        assert!(rel(exp_integral_e1(1.0).unwrap(), 0.219_383_934_395_520_27) < 1e-13);
        assert!(rel(exp_integral_e1(0.1).unwrap(), 1.822_923_958_419_390_7) < 1e-13);
        assert!(rel(exp_integral_e1(0.5).unwrap(), 0.559_773_594_776_160_8) < 1e-13);
        assert!(rel(exp_integral_e1(5.0).unwrap(), 1.148_295_591_275_325_8e-3) < 1e-13);
    }

    #[test]
    fn e1_rejects_nonpositive() {
        assert!(matches!(exp_integral_e1(0.0), Err(Error::Domain(_))));
        assert!(matches!(exp_integral_e1(-1.0), Err(Error::Domain(_))));
        assert!(exp_integral_e1(f64::NAN).is_err());
    }

    #[test]
    fn e1_is_continuous_at_switchover() {
        let below = exp_integral_e1(1.0 - 1e-12).unwrap();
        let above = exp_integral_e1(1.0).unwrap();
        assert!(rel(below, above) < 1e-11);
    }

    #[test]
    fn scaled_gamma_reference_values() {
        let cases = [
            (0, 1.0, 0.596_347_362_323_194_07),
            (-1, 1.0, 0.403_652_637_676_805_93),
            (-10, 1.0, 0.090_107_086_735_935_38),
            (-5, 0.01, 1_995_016_584.132_678_9),
            (-20, 0.01, 4.997_369_882_181_477_6e38),
            (-3, 10.0, 7.277_767_670_198_635e-5),
            (-20, 100.0, 8.276_174_202_810_03e-43),
            (0, 1e5, 9.999_900_001_999_94e-6),
            (-24, 1e6, 9.999_750_006_499_825e-151),
        ];
        for (a, x, expected) in cases {
            let got = scaled_upper_gamma_nonpos(a, x).unwrap();
            assert!(
                rel(got, expected) < 1e-12,
                "a={a} x={x}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn scaled_gamma_large_argument_asymptote() {
        let x = 1e5;
        let got = scaled_upper_gamma_nonpos(0, x).unwrap();
        assert!(got.is_finite());
        assert!(rel(got, 1.0 / x - 1.0 / (x * x)) < 1e-9);
    }

    #[test]
    fn scaled_gamma_domain_errors() {
        assert!(scaled_upper_gamma_nonpos(1, 1.0).is_err());
        assert!(scaled_upper_gamma_nonpos(0, 0.0).is_err());
        assert!(scaled_upper_gamma_nonpos(-2, -3.0).is_err());
    }

    #[test]
    fn normalized_sequence_matches_pointwise_values() {
        for &x in &[1e-6, 0.3, 0.999, 1.0, 7.5, 400.0] {
            let seq = normalized_upper_gamma_sequence(12, x).unwrap();
            for (j, &u) in seq.iter().enumerate() {
                let direct = scaled_upper_gamma_nonpos(-(j as i64), x).unwrap() * x.powi(j as i32);
                assert!(rel(u, direct) < 1e-12, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn signed_sum_examples() {
        let five = signed_log_sum(&[
            SignedLogValue::new(2f64.ln(), 1),
            SignedLogValue::new(3f64.ln(), 1),
        ]);
        assert_eq!(five.value.sign, 1);
        assert!(rel(five.value.to_f64(), 5.0) < 1e-15);
        assert!(rel(five.condition, 1.0) < 1e-15);

        let x = SignedLogValue::from_f64(3.7);
        let cancelled = signed_log_sum(&[x, SignedLogValue::new(x.log_magnitude, -1)]);
        assert_eq!(cancelled.value.sign, 0);
        assert!(cancelled.condition.is_infinite());

        let near = signed_log_sum(&[
            SignedLogValue::new(1e12f64.ln(), 1),
            SignedLogValue::new((1e12f64 - 1.0).ln(), -1),
        ]);
        assert_eq!(near.value.sign, 1);
        // the logs themselves carry ~1e-15 relative error at 1e12 scale
        assert!((near.value.to_f64() - 1.0).abs() < 1e-2);
        assert!(rel(near.condition, 2e12) < 1e-2);
    }

    #[test]
    fn signed_sum_of_nothing_is_zero() {
        let empty = signed_log_sum(&[]);
        assert!(empty.value.is_zero());
        let zeros = signed_log_sum(&[SignedLogValue::ZERO, SignedLogValue::from_f64(0.0)]);
        assert!(zeros.value.is_zero());
    }
}
