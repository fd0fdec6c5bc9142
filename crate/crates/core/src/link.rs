//! Link dynamics expressed entirely through the two boundary cumulative curves.
//!
//! With a triangular fundamental diagram and an initially empty link, the
//! vehicle count `N(t, x)` anywhere on the link is the lower envelope of a
//! free-flow term transported forward from the entrance at speed `k` and a
//! congested term transported backward from the exit at speed `w`. The demand,
//! the supply, the location of the separating shock and the spillback test all
//! follow from comparing those two terms.

use thiserror::Error;

use crate::curve::{CumulativeCurve, CurveError};
use crate::fd::{LinkParams, Regime};

/// Default tolerance (vehicles) for equalities between cumulative counts.
pub const DEFAULT_EPS_N: f64 = 1e-6;

/// Bisection stops once the shock is bracketed this tightly (mile).
pub const SHOCK_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("boundary flow history ends at step {len}, step {step} requested")]
    MissingHistory { step: usize, len: usize },
}

/// Where the separating shock sits at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShockLocation {
    /// Congestion reaches the entrance: spillback.
    Entrance,
    /// Free flow up to `x`, congestion downstream of it.
    Interior(f64),
    /// The whole link is in free flow.
    Exit,
}

/// Boundary histories of one link on a uniform time grid of step `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkState {
    pub params: LinkParams,
    pub dt: f64,
    pub up: CumulativeCurve,
    pub down: CumulativeCurve,
    /// Entry flow held over `[n dt, (n + 1) dt)`.
    pub q_in: Vec<f64>,
    /// Exit flow held over `[n dt, (n + 1) dt)`.
    pub q_out: Vec<f64>,
}

impl LinkState {
    pub fn new(params: LinkParams, dt: f64) -> Self {
        Self {
            params,
            dt,
            up: CumulativeCurve::new(params.capacity),
            down: CumulativeCurve::new(params.capacity),
            q_in: Vec::new(),
            q_out: Vec::new(),
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> usize {
        self.q_in.len()
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }

    /// Holds `q_in`, `q_out` over the next step and extends both curves.
    pub fn advance(&mut self, q_in: f64, q_out: f64) -> Result<(), LinkError> {
        let t_next = self.time(self.steps() + 1);
        self.up.append(t_next, q_in)?;
        self.down.append(t_next, q_out)?;
        self.q_in.push(q_in);
        self.q_out.push(q_out);
        Ok(())
    }

    /// Entry flow at time `t` from the step history (zero before the start).
    pub fn inflow_at(&self, t: f64) -> Result<f64, LinkError> {
        history_at(&self.q_in, t, self.dt)
    }

    pub fn outflow_at(&self, t: f64) -> Result<f64, LinkError> {
        history_at(&self.q_out, t, self.dt)
    }

    /// Largest flow the link can discharge over `[t, t + dt)`.
    ///
    /// In free flow at the exit (`N_up(t - L/k) = N_down(t)`) this is the entry
    /// flow of `L/k` earlier, averaged over the step; otherwise it is capacity,
    /// limited only by what can physically arrive within the step.
    pub fn demand(&self, t: f64, dt: f64) -> Result<f64, LinkError> {
        let p = &self.params;
        let arrived = self.up.eval_within(t + dt - p.free_flow_time())?;
        let departed = self.down.eval_within(t)?;
        Ok(((arrived - departed) / dt).clamp(0.0, p.capacity))
    }

    /// Largest flow the link can accept over `[t, t + dt)`.
    ///
    /// Under spillback (`N_up(t) = N_down(t - L/w) + rho_jam L`) this is the exit
    /// flow of `L/w` earlier; otherwise capacity, limited by the storage the
    /// backward wave frees within the step.
    pub fn supply(&self, t: f64, dt: f64) -> Result<f64, LinkError> {
        let p = &self.params;
        let room = self.down.eval_within(t + dt - p.backward_wave_time())? + p.jam_storage();
        let entered = self.up.eval_within(t)?;
        Ok(((room - entered) / dt).clamp(0.0, p.capacity))
    }

    /// Regime at the exit from the count equality, with ties resolved to free flow.
    pub fn exit_regime(&self, t: f64, eps: f64) -> Regime {
        if self.detect_freeflow_exit(t, eps) {
            Regime::FreeFlow
        } else {
            Regime::Congested
        }
    }

    /// Regime at the entrance, with ties resolved to congestion.
    pub fn entrance_regime(&self, t: f64, eps: f64) -> Regime {
        if self.detect_spillback(t, eps) {
            Regime::Congested
        } else {
            Regime::FreeFlow
        }
    }

    /// Congestion has reached the entrance.
    pub fn detect_spillback(&self, t: f64, eps: f64) -> bool {
        let p = &self.params;
        self.up.eval(t) >= self.down.eval(t - p.backward_wave_time()) + p.jam_storage() - eps
    }

    /// Nothing is queued at the exit.
    pub fn detect_freeflow_exit(&self, t: f64, eps: f64) -> bool {
        self.up.eval(t - self.params.free_flow_time()) <= self.down.eval(t) + eps
    }

    /// Free-flow term of the envelope at distance `x` from the entrance.
    fn upstream_term(&self, t: f64, x: f64) -> f64 {
        self.up.eval(t - x / self.params.k)
    }

    /// Congested term of the envelope at distance `x` from the entrance.
    fn downstream_term(&self, t: f64, x: f64) -> f64 {
        let p = &self.params;
        let to_exit = p.length - x;
        self.down.eval(t - to_exit / p.w) + p.rho_jam * to_exit
    }

    /// Vehicle count `N(t, x)` for `x` in `[0, L]` measured from the entrance.
    pub fn count_at(&self, t: f64, x: f64) -> f64 {
        self.upstream_term(t, x).min(self.downstream_term(t, x))
    }

    /// Free-flow term minus congested term. Nondecreasing in `x`; negative
    /// upstream of the separating shock and positive downstream of it.
    pub fn shock_gap(&self, t: f64, x: f64) -> f64 {
        self.upstream_term(t, x) - self.downstream_term(t, x)
    }

    pub fn locate_shock(&self, t: f64, eps: f64) -> ShockLocation {
        if self.detect_spillback(t, eps) {
            return ShockLocation::Entrance;
        }
        if self.detect_freeflow_exit(t, eps) {
            return ShockLocation::Exit;
        }
        let (mut lo, mut hi) = (0.0, self.params.length);
        while hi - lo > SHOCK_TOL {
            let mid = 0.5 * (lo + hi);
            if self.shock_gap(t, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ShockLocation::Interior(0.5 * (lo + hi))
    }

    /// Position of the separating shock, `0` under spillback and `L` in free flow.
    pub fn shock_position(&self, t: f64, eps: f64) -> f64 {
        match self.locate_shock(t, eps) {
            ShockLocation::Entrance => 0.0,
            ShockLocation::Interior(x) => x,
            ShockLocation::Exit => self.params.length,
        }
    }

    pub fn reconstruct_moskowitz(&self, times: &[f64], positions: &[f64], eps: f64) -> MoskowitzGrid {
        let values = times.iter().map(|&t| positions.iter().map(|&x| self.count_at(t, x)).collect()).collect();
        let shock = times.iter().map(|&t| self.shock_position(t, eps)).collect();
        MoskowitzGrid { times: times.to_vec(), positions: positions.to_vec(), values, shock }
    }
}

fn history_at(history: &[f64], t: f64, dt: f64) -> Result<f64, LinkError> {
    if t < 0.0 {
        return Ok(0.0);
    }
    // Snap times that sit on a grid point up to rounding.
    let s = t / dt;
    let step = (s + 1e-9).floor() as usize;
    history.get(step).copied().ok_or(LinkError::MissingHistory { step, len: history.len() })
}

/// `N(t, x)` sampled on a grid, with the separating shock at each time.
#[derive(Debug, Clone, PartialEq)]
pub struct MoskowitzGrid {
    pub times: Vec<f64>,
    /// Distances from the entrance (mile).
    pub positions: Vec<f64>,
    /// `values[i][j] = N(times[i], positions[j])`.
    pub values: Vec<Vec<f64>>,
    /// Shock position at each time (mile from the entrance).
    pub shock: Vec<f64>,
}

impl MoskowitzGrid {
    /// Densities `-dN/dx` by forward differences at time index `i`.
    pub fn densities(&self, i: usize) -> Vec<f64> {
        self.values[i].windows(2).zip(self.positions.windows(2)).map(|(n, x)| -(n[1] - n[0]) / (x[1] - x[0])).collect()
    }
}

/// Evenly spaced points on `[0, L]`.
pub fn uniform_positions(length: f64, points: usize) -> Vec<f64> {
    assert!(points >= 2, "need at least the two boundaries");
    (0..points).map(|j| length * j as f64 / (points - 1) as f64).collect()
}
