//! Triangular fundamental diagram and the (flow, regime) state representation.
//!
//! Units are fixed throughout the crate: vehicles, miles and hours.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for the capacity consistency identity `C = k w rho_jam / (k + w)`.
pub const CAPACITY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("link parameter `{name}` must be strictly positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("capacity {given} is inconsistent with k*w*rho_jam/(k+w) = {expected}")]
    InconsistentCapacity { given: f64, expected: f64 },
    #[error("density {rho} outside [0, {rho_jam}]")]
    DensityOutOfRange { rho: f64, rho_jam: f64 },
    #[error("flow {q} outside [0, {capacity}]")]
    FlowOutOfRange { q: f64, capacity: f64 },
    #[error("wave speed {u} outside [-{w}, {k}]")]
    SpeedOutOfRange { u: f64, k: f64, w: f64 },
    #[error("shock speed undefined: both states have density {rho}")]
    DegenerateShock { rho: f64 },
}

/// Geometry and triangular fundamental diagram of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Jam density (vehicle/mile).
    pub rho_jam: f64,
    /// Forward (free-flow) wave speed (mile/hour).
    pub k: f64,
    /// Backward wave speed (mile/hour).
    pub w: f64,
    /// Flow capacity (vehicle/hour).
    pub capacity: f64,
    /// Length (mile).
    pub length: f64,
}

impl LinkParams {
    /// Validates positivity and the capacity identity. `capacity` is stored as
    /// given, never silently recomputed.
    pub fn new(rho_jam: f64, k: f64, w: f64, capacity: f64, length: f64) -> Result<Self, ModelError> {
        for (name, value) in [("rho_jam", rho_jam), ("k", k), ("w", w), ("capacity", capacity), ("length", length)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NonPositive { name, value });
            }
        }
        let expected = Self::consistent_capacity(rho_jam, k, w);
        if ((capacity - expected) / expected).abs() > CAPACITY_REL_TOL {
            return Err(ModelError::InconsistentCapacity { given: capacity, expected });
        }
        Ok(Self { rho_jam, k, w, capacity, length })
    }

    /// Capacity implied by the triangle's two branches meeting at the critical density.
    pub fn consistent_capacity(rho_jam: f64, k: f64, w: f64) -> f64 {
        k * w * rho_jam / (k + w)
    }

    /// Critical density `C / k`.
    pub fn critical_density(&self) -> f64 {
        self.capacity / self.k
    }

    /// Free-flow traversal time `L / k`.
    pub fn free_flow_time(&self) -> f64 {
        self.length / self.k
    }

    /// Backward-wave traversal time `L / w`.
    pub fn backward_wave_time(&self) -> f64 {
        self.length / self.w
    }

    /// Number of vehicles stored on the link at jam density.
    pub fn jam_storage(&self) -> f64 {
        self.rho_jam * self.length
    }

    pub fn flux(&self, rho: f64) -> Result<f64, ModelError> {
        if !(0.0..=self.rho_jam).contains(&rho) {
            return Err(ModelError::DensityOutOfRange { rho, rho_jam: self.rho_jam });
        }
        Ok(self.flux_unchecked(rho))
    }

    /// `min(k rho, w (rho_jam - rho))`, the branch form of the triangle.
    pub(crate) fn flux_unchecked(&self, rho: f64) -> f64 {
        if rho <= self.critical_density() {
            self.k * rho
        } else {
            self.w * (self.rho_jam - rho)
        }
    }

    /// Density of the state `(q, r)`.
    pub fn psi(&self, state: TrafficState) -> Result<f64, ModelError> {
        self.check_flow(state.q)?;
        Ok(self.psi_unchecked(state))
    }

    pub(crate) fn psi_unchecked(&self, state: TrafficState) -> f64 {
        match state.regime {
            Regime::FreeFlow => state.q / self.k,
            Regime::Congested => self.rho_jam - state.q / self.w,
        }
    }

    /// Concave transform `sup_rho { f(rho) - u rho } = C - rho_c u` for `u` in `[-w, k]`.
    pub fn legendre(&self, u: f64) -> Result<f64, ModelError> {
        if !(-self.w..=self.k).contains(&u) {
            return Err(ModelError::SpeedOutOfRange { u, k: self.k, w: self.w });
        }
        Ok(self.capacity - self.critical_density() * u)
    }

    /// Rankine-Hugoniot speed of the discontinuity between `left` and `right`.
    pub fn shock_speed(&self, left: TrafficState, right: TrafficState) -> Result<f64, ModelError> {
        let rho_l = self.psi(left)?;
        let rho_r = self.psi(right)?;
        if rho_l == rho_r {
            return Err(ModelError::DegenerateShock { rho: rho_l });
        }
        Ok((right.q - left.q) / (rho_r - rho_l))
    }

    /// Largest flow the link can send from a boundary state (demand).
    pub fn sending(&self, state: TrafficState) -> f64 {
        match state.regime {
            Regime::FreeFlow => state.q,
            Regime::Congested => self.capacity,
        }
    }

    /// Largest flow the link can accept into a boundary state (supply).
    pub fn receiving(&self, state: TrafficState) -> f64 {
        match state.regime {
            Regime::FreeFlow => self.capacity,
            Regime::Congested => state.q,
        }
    }

    /// State at a given density; capacity flow is reported as free flow.
    pub fn state_at_density(&self, rho: f64) -> Result<TrafficState, ModelError> {
        let q = self.flux(rho)?;
        Ok(if rho <= self.critical_density() { TrafficState::free(q) } else { TrafficState::congested(q) })
    }

    fn check_flow(&self, q: f64) -> Result<(), ModelError> {
        if !(0.0..=self.capacity).contains(&q) {
            return Err(ModelError::FlowOutOfRange { q, capacity: self.capacity });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    FreeFlow,
    Congested,
}

impl Regime {
    pub fn flag(self) -> u8 {
        match self {
            Regime::FreeFlow => 0,
            Regime::Congested => 1,
        }
    }
}

/// Flow plus regime. Together with a [`LinkParams`] this fixes a unique density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficState {
    pub q: f64,
    pub regime: Regime,
}

impl TrafficState {
    pub const EMPTY: TrafficState = TrafficState { q: 0.0, regime: Regime::FreeFlow };

    pub fn free(q: f64) -> Self {
        Self { q, regime: Regime::FreeFlow }
    }

    pub fn congested(q: f64) -> Self {
        Self { q, regime: Regime::Congested }
    }

    /// Jam state: zero flow at jam density.
    pub fn jam() -> Self {
        Self::congested(0.0)
    }

    /// Critical state of a link, canonicalized to the free-flow regime.
    pub fn critical(params: &LinkParams) -> Self {
        Self::free(params.capacity)
    }
}
