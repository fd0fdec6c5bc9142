//! Piecewise-linear cumulative vehicle counts at a link boundary.

use thiserror::Error;

/// Absolute slack (vehicles) allowed on the Lipschitz bound of a curve.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("time {t_next} does not follow the last breakpoint at {t_last}")]
    NonMonotoneTime { t_last: f64, t_next: f64 },
    #[error("rate {rate} outside [0, {cap}]")]
    RateOutOfRange { rate: f64, cap: f64 },
    #[error("curve must start at N(0) = 0, got ({t}, {n})")]
    BadOrigin { t: f64, n: f64 },
    #[error("count decreases or exceeds the Lipschitz bound between t = {t0} and t = {t1}")]
    NotLipschitz { t0: f64, t1: f64 },
    #[error("query at t = {t} beyond the last breakpoint at {t_last}")]
    BeyondHorizon { t: f64, t_last: f64 },
}

/// Nondecreasing, Lipschitz, piecewise-linear `N(t)` with `N(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeCurve {
    times: Vec<f64>,
    counts: Vec<f64>,
    cap: f64,
}

impl CumulativeCurve {
    /// Curve holding only the origin `(0, 0)`.
    pub fn new(cap: f64) -> Self {
        Self { times: vec![0.0], counts: vec![0.0], cap }
    }

    pub fn from_breakpoints(points: &[(f64, f64)], cap: f64) -> Result<Self, CurveError> {
        let Some(&(t0, n0)) = points.first() else {
            return Ok(Self::new(cap));
        };
        if t0 != 0.0 || n0 != 0.0 {
            return Err(CurveError::BadOrigin { t: t0, n: n0 });
        }
        let mut curve = Self::new(cap);
        for &(t, n) in &points[1..] {
            curve.push_point(t, n)?;
        }
        Ok(curve)
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.counts.iter().copied())
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("curve is never empty")
    }

    pub fn last_count(&self) -> f64 {
        *self.counts.last().expect("curve is never empty")
    }

    /// Linear interpolation; zero before the first breakpoint and the last count after the last.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.counts[0];
        }
        let i = self.times.partition_point(|&s| s < t);
        if i == self.times.len() {
            return self.last_count();
        }
        let (t1, n1) = (self.times[i], self.counts[i]);
        if t == t1 {
            return n1;
        }
        let (t0, n0) = (self.times[i - 1], self.counts[i - 1]);
        n0 + (n1 - n0) * (t - t0) / (t1 - t0)
    }

    /// Like [`eval`](Self::eval) but refuses queries past the last breakpoint.
    pub fn eval_within(&self, t: f64) -> Result<f64, CurveError> {
        let t_last = self.last_time();
        if t > t_last + 1e-12 * t_last.abs().max(1.0) {
            return Err(CurveError::BeyondHorizon { t, t_last });
        }
        Ok(self.eval(t))
    }

    /// Extends the curve to `t_next` at constant `rate`.
    pub fn append(&mut self, t_next: f64, rate: f64) -> Result<(), CurveError> {
        if !(rate >= 0.0 && rate <= self.cap + LIPSCHITZ_SLACK) {
            return Err(CurveError::RateOutOfRange { rate, cap: self.cap });
        }
        let t_last = self.last_time();
        if t_next.is_nan() || t_next <= t_last {
            return Err(CurveError::NonMonotoneTime { t_last, t_next });
        }
        let n = self.last_count() + rate * (t_next - t_last);
        self.times.push(t_next);
        self.counts.push(n);
        Ok(())
    }

    /// Extends the curve with an explicit breakpoint.
    pub fn push_point(&mut self, t: f64, n: f64) -> Result<(), CurveError> {
        let t_last = self.last_time();
        if t.is_nan() || t <= t_last {
            return Err(CurveError::NonMonotoneTime { t_last, t_next: t });
        }
        let dn = n - self.last_count();
        if !(dn >= -LIPSCHITZ_SLACK && dn <= self.cap * (t - t_last) + LIPSCHITZ_SLACK) {
            return Err(CurveError::NotLipschitz { t0: t_last, t1: t });
        }
        self.times.push(t);
        self.counts.push(n);
        Ok(())
    }

    /// Mean slope over `[t0, t1]`.
    pub fn mean_rate(&self, t0: f64, t1: f64) -> f64 {
        (self.eval(t1) - self.eval(t0)) / (t1 - t0)
    }
}

/// Vehicles between the two boundaries of a link at time `t`.
pub fn vehicles_on_link(up: &CumulativeCurve, down: &CumulativeCurve, t: f64) -> f64 {
    up.eval(t) - down.eval(t)
}
