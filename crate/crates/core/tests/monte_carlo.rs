//! Monte-Carlo moment checks for the signal model, the estimator and the
//! rate oracle.

use num_complex::Complex64;

use rtri_mimo::estimation::{empirical_mse, lmmse_estimate, LmmseFilter};
use rtri_mimo::exec::{estimate_mean, Execution};
use rtri_mimo::model::{
    data_rx, make_orthogonal_training, received_signal, sample_channel, sample_data_symbols,
    sample_distortion, training_rx,
};
use rtri_mimo::rate::{closed_form_rate, mc_rate, EffectiveSnr, RateMethod};
use rtri_mimo::rng::{experiment_id, RandomSource, TrialStreams};
use rtri_mimo::{ComplexMatrix, LinkConfig};

const TRIALS: usize = 100_000;

fn streams(tag: &str) -> TrialStreams {
    TrialStreams::new(2024, experiment_id(tag, &[]))
}

/// Mean per-entry power of matrices produced by `f`.
fn mean_entry_power(
    tag: &str,
    f: impl Fn(&mut RandomSource) -> ComplexMatrix + Sync + Send,
) -> f64 {
    estimate_mean(&streams(tag), TRIALS, |rng| {
        let m = f(rng);
        Ok(m.frobenius_norm_sqr() / (m.rows() * m.cols()) as f64)
    })
    .unwrap()
    .mean
}

#[test]
fn channel_entries_have_unit_variance_and_are_uncorrelated() {
    let var = mean_entry_power("channel_var", |rng| sample_channel(4, 4, rng));
    assert!((0.99..=1.01).contains(&var), "{var}");
    // E[h_00 conj(h_01)] = 0
    let s = streams("channel_corr");
    let re = estimate_mean(&s, TRIALS, |rng| {
        let h = sample_channel(2, 2, rng);
        Ok((h.get(0, 0) * h.get(0, 1).conj()).re)
    })
    .unwrap();
    assert!(re.mean.abs() <= 3.0 / (TRIALS as f64).sqrt(), "{}", re.mean);
}

#[test]
fn distortion_variance_and_column_independence() {
    let var = mean_entry_power("distortion_var", |rng| sample_distortion(0.175, 4, 4, rng));
    let target = 0.175f64 * 0.175;
    assert!((var / target - 1.0).abs() <= 0.03, "{var}");

    let mut rng = RandomSource::new(5, 5);
    let zero = sample_distortion(0.0, 4, 6, &mut rng);
    assert_eq!(zero.frobenius_norm_sqr(), 0.0);

    let est = estimate_mean(&streams("distortion_cols"), TRIALS, |rng| {
        let d = sample_distortion(0.175, 4, 2, rng);
        let mut cross = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            cross += d.get(i, 0) * d.get(i, 1).conj();
        }
        Ok(cross.re)
    })
    .unwrap();
    assert!(
        est.mean.abs() <= 3.0 * est.std_err,
        "{} vs {}",
        est.mean,
        est.std_err
    );
}

#[test]
fn evm_identity() {
    let delta = 0.08;
    let (mut dist, mut sig) = (0.0, 0.0);
    let mut rng = RandomSource::new(17, 1);
    for _ in 0..20_000 {
        sig += sample_data_symbols(4, 10, &mut rng).frobenius_norm_sqr();
        dist += sample_distortion(delta, 4, 10, &mut rng).frobenius_norm_sqr();
    }
    let evm = (dist / sig).sqrt();
    assert!((evm / delta - 1.0).abs() < 0.01, "{evm}");
}

#[test]
fn received_power_matches_second_moments() {
    let delta = 0.175;
    let s_p = make_orthogonal_training(4, 4).unwrap();
    let rho_p = 10.0;
    let p_train = mean_entry_power("train_power", |rng| {
        let h = sample_channel(4, 4, rng);
        training_rx(&h, &s_p, rho_p, delta, rng).unwrap()
    });
    let expected = rho_p * (1.0 + delta * delta) + 1.0;
    assert!(
        (p_train / expected - 1.0).abs() < 0.02,
        "{p_train} vs {expected}"
    );

    let rho_d = 3.0;
    let p_data = mean_entry_power("data_power", |rng| {
        let h = sample_channel(4, 4, rng);
        let s_d = sample_data_symbols(4, 8, rng);
        data_rx(&h, &s_d, rho_d, delta, rng).unwrap()
    });
    let expected = rho_d * (1.0 + delta * delta) + 1.0;
    assert!(
        (p_data / expected - 1.0).abs() < 0.02,
        "{p_data} vs {expected}"
    );

    let sym = estimate_mean(&streams("symbol_power"), TRIALS, |rng| {
        Ok(sample_data_symbols(4, 96, rng).frobenius_norm_sqr())
    })
    .unwrap();
    assert!((sym.mean / (4.0 * 96.0) - 1.0).abs() < 0.02);
}

#[test]
fn noiseless_observation_is_deterministic_product() {
    let mut rng = RandomSource::new(1, 2);
    let h = sample_channel(3, 2, &mut rng);
    let s = make_orthogonal_training(2, 5).unwrap();
    let zero_d = ComplexMatrix::zeros(2, 5);
    let zero_v = ComplexMatrix::zeros(3, 5);
    let y = received_signal(&h, &s, 8.0, &zero_d, &zero_v).unwrap();
    let expected = h.matmul(&s).unwrap().scale(2.0);
    assert_eq!(y.max_abs_diff(&expected).unwrap(), 0.0);
    assert!(received_signal(&h, &ComplexMatrix::zeros(3, 5), 8.0, &zero_d, &zero_v).is_err());
}

#[test]
fn sampling_is_reproducible_and_streams_differ() {
    let a = sample_channel(4, 4, &mut RandomSource::new(9, 77));
    let b = sample_channel(4, 4, &mut RandomSource::new(9, 77));
    let c = sample_channel(4, 4, &mut RandomSource::new(9, 78));
    assert_eq!(a, b);
    assert_ne!(a, c);

    // cross-correlation of two streams stays in the sampling band
    let (mut ra, mut rb) = (RandomSource::new(9, 1), RandomSource::new(9, 2));
    let n = TRIALS;
    let corr: f64 = (0..n)
        .map(|_| (ra.complex_gaussian() * rb.complex_gaussian().conj()).re)
        .sum::<f64>()
        / n as f64;
    assert!(corr.abs() < 4.0 * (0.5 / n as f64).sqrt(), "{corr}");
}

#[test]
fn lmmse_noiseless_high_snr_recovers_channel() {
    let mut rng = RandomSource::new(3, 3);
    let h = sample_channel(4, 4, &mut rng);
    let s_p = make_orthogonal_training(4, 4).unwrap();
    let rho_p = 1e8;
    let y = received_signal(
        &h,
        &s_p,
        rho_p,
        &ComplexMatrix::zeros(4, 4),
        &ComplexMatrix::zeros(4, 4),
    )
    .unwrap();
    let est = lmmse_estimate(&y, &s_p, rho_p, 0.0).unwrap();
    assert!(est.h_hat.max_abs_diff(&h).unwrap() <= 1e-3);
    assert!((est.est_var + est.err_var - 1.0).abs() < 1e-12);
    assert!(lmmse_estimate(&ComplexMatrix::zeros(4, 3), &s_p, rho_p, 0.0).is_err());
}

#[test]
fn empirical_mse_examples() {
    let config = LinkConfig::default();
    let ideal = empirical_mse(&config, 4, 10.0, TRIALS, &streams("mse_ideal")).unwrap();
    assert!((ideal.mean - 1.0 / 11.0).abs() <= 3.0 * ideal.std_err);
    assert!((ideal.mean * 11.0 - 1.0).abs() < 0.02);

    let impaired = config.with_delta(0.175);
    let floor = empirical_mse(&impaired, 4, 1e4, TRIALS, &streams("mse_floor")).unwrap();
    assert!((floor.mean / 0.029_714_978_775 - 1.0).abs() < 0.05);

    let low_a = empirical_mse(&impaired, 4, 0.1, TRIALS, &streams("mse_low_a")).unwrap();
    let low_b = empirical_mse(&config, 4, 0.1, TRIALS, &streams("mse_low_b")).unwrap();
    let pooled = (low_a.std_err.powi(2) + low_b.std_err.powi(2)).sqrt();
    assert!((low_a.mean - low_b.mean).abs() < 3.0 * pooled);
}

#[test]
fn estimate_and_error_variances_decompose() {
    let delta = 0.08;
    let rho_p = 10.0;
    let s_p = make_orthogonal_training(4, 4).unwrap();
    let filter = LmmseFilter::new(&s_p, rho_p, delta).unwrap();
    let s = streams("decomposition");
    let est = estimate_mean(&s, TRIALS, |rng| {
        let h = sample_channel(4, 4, rng);
        let y = training_rx(&h, &s_p, rho_p, delta, rng)?;
        let h_hat = filter.apply(&y)?.h_hat;
        let err = h.sub(&h_hat)?;
        Ok((h_hat.frobenius_norm_sqr() + err.frobenius_norm_sqr()) / 16.0)
    })
    .unwrap();
    assert!((est.mean - 1.0).abs() < 0.02, "{}", est.mean);
    assert!((filter.est_var() + filter.err_var() - 1.0).abs() < 1e-12);
}

#[test]
fn mc_rate_examples() {
    let one = EffectiveSnr::new(1.0).unwrap();
    let siso = mc_rate(one, 1, 1, 96, 100, TRIALS, &streams("siso")).unwrap();
    assert_eq!(siso.method, RateMethod::MonteCarlo);
    assert!((siso.bits_per_use - 0.860_347_382_270_886 * 0.96).abs() <= 3.0 * siso.std_err);

    let zero = mc_rate(
        EffectiveSnr::new(0.0).unwrap(),
        4,
        4,
        96,
        100,
        10,
        &streams("zero"),
    )
    .unwrap();
    assert_eq!(zero.bits_per_use, 0.0);
    assert_eq!(zero.std_err, 0.0);

    let rho = EffectiveSnr::new(400.0 / 84.0).unwrap();
    let mc = mc_rate(rho, 4, 4, 96, 100, TRIALS, &streams("mimo")).unwrap();
    let closed = closed_form_rate(rho, 4, 4, 96, 100).unwrap();
    assert!((mc.bits_per_use - closed.bits_per_use).abs() <= 3.0 * mc.std_err);

    let small = mc_rate(rho, 4, 4, 96, 100, 20_000, &streams("halving")).unwrap();
    let large = mc_rate(rho, 4, 4, 96, 100, 40_000, &streams("halving")).unwrap();
    let ratio = large.std_err / small.std_err;
    assert!((ratio * 2f64.sqrt() - 1.0).abs() < 0.2, "{ratio}");
}

#[test]
fn results_do_not_depend_on_execution_mode() {
    let config = LinkConfig::default().with_delta(0.175);
    let seq = streams("exec_mode").with_execution(Execution::Sequential);
    let par = streams("exec_mode").with_execution(Execution::Parallel);
    let a = empirical_mse(&config, 4, 10.0, 5_000, &seq).unwrap();
    let b = empirical_mse(&config, 4, 10.0, 5_000, &par).unwrap();
    assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
}
