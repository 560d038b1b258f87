//! Data-parallel execution with a deterministic reduction order.
//!
//! Trials are grouped into fixed-size blocks. Each block is reduced
//! sequentially and the block summaries are merged in block order, so the
//! floating-point result is the same for one worker or many.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::{RandomSource, TrialStreams};

/// Trials per reduction block.
pub const BLOCK_SIZE: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Uses the current rayon pool; identical to `Sequential` when the crate
    /// is built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Evaluates `f(0..n)` and returns results in index order.
pub fn map_indexed<T, F>(execution: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Sample mean of a Monte-Carlo functional with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√trials`; zero for a single trial.
    pub std_err: f64,
    pub trials: usize,
}

/// Running (count, mean, M2) summary, merged with Chan's formula.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return other;
        }
        if other.count == 0 {
            return self;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / count as f64;
        Moments {
            count,
            mean: self.mean + delta * w,
            m2: self.m2 + other.m2 + delta * delta * self.count as f64 * w,
        }
    }
}

/// Runs `trials` independent trials of `f` and returns the sample mean and
/// its standard error. Trial `k` receives `streams.source(k)`.
pub fn estimate_mean<F>(streams: &TrialStreams, trials: usize, f: F) -> Result<MeanEstimate>
where
    F: Fn(&mut RandomSource) -> Result<f64> + Sync + Send,
{
    let blocks = trials.div_ceil(BLOCK_SIZE);
    let summaries = map_indexed(streams.execution, blocks, |block| -> Result<Moments> {
        let start = block * BLOCK_SIZE;
        let end = (start + BLOCK_SIZE).min(trials);
        let mut moments = Moments::default();
        for trial in start..end {
            let mut source = streams.source(trial as u64);
            moments.push(f(&mut source)?);
        }
        Ok(moments)
    });
    let mut total = Moments::default();
    for summary in summaries {
        total = total.merge(summary?);
    }
    let std_err = if total.count > 1 {
        (total.m2 / (total.count - 1) as f64 / total.count as f64).sqrt()
    } else {
        0.0
    };
    Ok(MeanEstimate {
        mean: total.mean,
        std_err,
        trials: total.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_direct() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.25).collect();
        let mut direct = Moments::default();
        xs.iter().for_each(|&x| direct.push(x));
        let mut left = Moments::default();
        let mut right = Moments::default();
        xs[..313].iter().for_each(|&x| left.push(x));
        xs[313..].iter().for_each(|&x| right.push(x));
        let merged = left.merge(right);
        assert_eq!(merged.count, direct.count);
        assert!((merged.mean - direct.mean).abs() < 1e-12);
        assert!((merged.m2 - direct.m2).abs() < 1e-8 * direct.m2);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let streams = TrialStreams::new(11, 99);
        let f = |src: &mut RandomSource| Ok(src.complex_gaussian().norm_sqr());
        let seq = estimate_mean(&streams.with_execution(Execution::Sequential), 5000, f).unwrap();
        let par = estimate_mean(&streams.with_execution(Execution::Parallel), 5000, f).unwrap();
        assert_eq!(seq, par);
        assert!((seq.mean - 1.0).abs() < 4.0 * seq.std_err);
    }

    #[test]
    fn single_trial_has_zero_std_err() {
        let est = estimate_mean(&TrialStreams::new(0, 0), 1, |_| Ok(3.5)).unwrap();
        assert_eq!(est.mean, 3.5);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn errors_propagate() {
        let res = estimate_mean(&TrialStreams::new(0, 0), 10, |_| {
            Err(crate::Error::Internal("boom".into()))
        });
        assert!(res.is_err());
    }
}
