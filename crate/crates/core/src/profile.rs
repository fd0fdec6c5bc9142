use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile needs as many rates as breakpoint times ({times} times, {rates} rates)")]
    LengthMismatch { times: usize, rates: usize },
    #[error("profile times must be finite and strictly increasing")]
    NonIncreasing,
    #[error("profile rate {0} must be finite and non-negative")]
    BadRate(f64),
}

/// Right-continuous piecewise-constant rate (vehicle/hour).
///
/// `rates[i]` holds on `[times[i], times[i + 1])`; the last rate holds forever
/// and the rate before `times[0]` is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepProfile {
    times: Vec<f64>,
    rates: Vec<f64>,
}

impl StepProfile {
    pub fn new(times: Vec<f64>, rates: Vec<f64>) -> Result<Self, ProfileError> {
        if times.len() != rates.len() {
            return Err(ProfileError::LengthMismatch { times: times.len(), rates: rates.len() });
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ProfileError::NonIncreasing);
        }
        if let Some(&bad) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(ProfileError::BadRate(bad));
        }
        Ok(Self { times, rates })
    }

    pub fn zero() -> Self {
        Self { times: Vec::new(), rates: Vec::new() }
    }

    pub fn constant(rate: f64) -> Self {
        Self::new(vec![0.0], vec![rate]).expect("constant profile")
    }

    /// Profile switching between consecutive rates every `step`, starting at zero.
    pub fn from_steps(step: f64, rates: &[f64]) -> Result<Self, ProfileError> {
        let times = (0..rates.len()).map(|i| i as f64 * step).collect();
        Self::new(times, rates.to_vec())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 0.0,
            i => self.rates[i - 1],
        }
    }

    /// Exact integral of the rate over `[0, t]` (zero for `t <= 0`).
    pub fn cumulative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        for (i, (&start, &rate)) in self.times.iter().zip(&self.rates).enumerate() {
            let start = start.max(0.0);
            if t <= start {
                break;
            }
            let end = self.times.get(i + 1).map_or(t, |&e| e.min(t));
            if end > start {
                total += rate * (end - start);
            }
        }
        total
    }

    /// Mean rate over `[t0, t1]`.
    pub fn mean_rate(&self, t0: f64, t1: f64) -> f64 {
        // Single-piece intervals are the common case on grid-aligned profiles; avoid
        // the cancellation of a cumulative difference there.
        let i0 = self.times.partition_point(|&s| s <= t0);
        let i1 = self.times.partition_point(|&s| s < t1);
        if i0 == i1 {
            return self.rate_at(t0);
        }
        (self.cumulative(t1) - self.cumulative(t0)) / (t1 - t0)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Breakpoint times inside `(t0, t1)`.
    pub fn switches_between(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.times.iter().copied().filter(move |&s| s > t0 && s < t1)
    }

    /// Copy that is zero from `t` onwards.
    pub fn truncated(&self, t: f64) -> Self {
        let mut times: Vec<f64> = self.times.iter().copied().filter(|&s| s < t).collect();
        let mut rates: Vec<f64> = self.rates[..times.len()].to_vec();
        times.push(t);
        rates.push(0.0);
        Self { times, rates }
    }

    /// Copy shifted later in time by `delay`.
    pub fn delayed(&self, delay: f64) -> Self {
        Self { times: self.times.iter().map(|t| t + delay).collect(), rates: self.rates.clone() }
    }
}
