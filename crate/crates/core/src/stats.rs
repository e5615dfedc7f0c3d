//! Percentiles and bootstrap confidence intervals.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::config::StatConfig;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty input")]
    EmptyInput,
    #[error("percentile {p} is outside [0, 100]")]
    BadPercentile { p: f64 },
    #[error("confidence level {level} is outside (0, 1)")]
    BadConfidence { level: f64 },
}

/// Linear-interpolation percentile over an ascending-sorted slice: the value
/// at fractional rank `p/100 * (n-1)`.
pub fn percentile_linear(sorted: &[f64], p: f64) -> Result<f64, StatsError> {
    if sorted.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(StatsError::BadPercentile { p });
    }
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let frac = rank - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        Ok(sorted[lo])
    } else {
        Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub low: f64,
    pub high: f64,
}

/// Percentile bootstrap of the mean.
///
/// The resampling stream is part of this function's contract, so independent
/// re-implementations can reproduce it bit for bit: a `ChaCha8Rng` seeded
/// with `seed_from_u64(cfg.rng_seed)` draws, for each of the
/// `cfg.bootstrap_iterations` iterations, exactly `values.len()` indices via
/// `random_range(0..n)`; the resampled values are summed in draw order and
/// divided by `n`. Interval bounds are `percentile_linear` of the sorted
/// means at `100*(1-level)/2` and `100*(1+level)/2`.
pub fn bootstrap_ci(values: &[f64], cfg: &StatConfig) -> Result<BootstrapCi, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if !(0.0 < cfg.confidence_level && cfg.confidence_level < 1.0) {
        return Err(StatsError::BadConfidence { level: cfg.confidence_level });
    }
    let n = values.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut means = Vec::with_capacity(cfg.bootstrap_iterations as usize);
    for _ in 0..cfg.bootstrap_iterations {
        let mut sum = 0.0;
        for _ in 0..n {
            sum += values[rng.random_range(0..n)];
        }
        means.push(sum / n as f64);
    }
    means.sort_by(f64::total_cmp);
    let alpha = 1.0 - cfg.confidence_level;
    Ok(BootstrapCi {
        low: percentile_linear(&means, 100.0 * alpha / 2.0)?,
        high: percentile_linear(&means, 100.0 * (1.0 - alpha / 2.0))?,
    })
}
