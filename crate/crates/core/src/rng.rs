//! Reproducible random streams for Monte-Carlo trials.
//!
//! Each `(seed, stream_id)` pair selects an independent ChaCha8 keystream.
//! Monte-Carlo trial `k` of an experiment uses `stream_id = mix(experiment_id, k)`,
//! so a trial's samples never depend on which worker runs it or in what order.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::exec::Execution;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id of trial `trial` within experiment `experiment_id`.
pub fn trial_stream_id(experiment_id: u64, trial: u64) -> u64 {
    mix64(experiment_id.wrapping_add(mix64(trial.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

/// Derives an experiment id from a tag and a list of grid coordinates.
pub fn experiment_id(tag: &str, coords: &[u64]) -> u64 {
    // FNV-1a over the tag, then fold in coordinates
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for &c in coords {
        h = mix64(h ^ mix64(c.wrapping_add(0x2545_f491_4f6c_dd1d)));
    }
    h
}

#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn for_trial(seed: u64, experiment_id: u64, trial: u64) -> Self {
        Self::new(seed, trial_stream_id(experiment_id, trial))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `(0, 1]` with 53 random bits.
    pub fn uniform_open_closed(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (Lemire's multiply-shift with rejection).
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index range must be non-empty");
        let n = n as u64;
        let threshold = n.wrapping_neg() % n;
        loop {
            let product = u128::from(self.rng.next_u64()) * u128::from(n);
            if (product as u64) >= threshold {
                return (product >> 64) as usize;
            }
        }
    }

    /// Circularly-symmetric `CN(0, 1)` sample by the Box–Muller transform:
    /// real and imaginary parts are independent `N(0, 1/2)`.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let radius = (-self.uniform_open_closed().ln()).sqrt();
        let angle = std::f64::consts::TAU * self.uniform();
        let (sin, cos) = angle.sin_cos();
        Complex64::new(radius * cos, radius * sin)
    }
}

/// The family of per-trial streams belonging to one Monte-Carlo experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStreams {
    pub seed: u64,
    pub experiment_id: u64,
    pub execution: Execution,
}

impl TrialStreams {
    pub fn new(seed: u64, experiment_id: u64) -> Self {
        Self {
            seed,
            experiment_id,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn source(&self, trial: u64) -> RandomSource {
        RandomSource::for_trial(self.seed, self.experiment_id, trial)
    }
}
