//! Cell Transmission Model on the whole network.
//!
//! Each link is cut into cells of length `dx`; interface flows are the
//! minimum of the upstream cell's sending flow and the downstream cell's
//! receiving flow, and nodes use the same junction solvers as the engine.

use thiserror::Error;

use crate::curve::{CumulativeCurve, CurveError};
use crate::engine::Profiles;
use crate::junction::{solve_diverge, solve_merge};
use crate::network::{LinkId, Network, NodeKind};
use crate::profile::StepProfile;

/// Relative margin above critical density for a cell to count as congested.
const CONGESTED_MARGIN: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CtmError {
    #[error("CTM step {dt} violates the CFL bound {limit} on link `{link}`")]
    Cfl { link: String, dt: f64, limit: f64 },
    #[error("cell size {dx} does not divide the length {length} of link `{link}`")]
    CellSize { link: String, length: f64, dx: f64 },
    #[error("horizon {horizon} is not a positive multiple of the CTM step {dt}")]
    BadHorizon { horizon: f64, dt: f64 },
    #[error("node `{node}` references missing profile `{profile}`")]
    MissingProfile { node: String, profile: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtmConfig {
    pub dx: f64,
    pub dt: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone)]
pub struct CtmOutput {
    pub config: CtmConfig,
    pub up: Vec<CumulativeCurve>,
    pub down: Vec<CumulativeCurve>,
    /// Cell densities at the horizon, entrance first.
    pub densities: Vec<Vec<f64>>,
    /// First time the entrance cell of each link is congested.
    pub spillback_onset: Vec<Option<f64>>,
}

impl CtmOutput {
    pub fn n_down_at_horizon(&self, link: LinkId) -> f64 {
        self.down[link.0].last_count()
    }
}

struct CellLink {
    rho: Vec<f64>,
    rho_jam: f64,
    k: f64,
    w: f64,
    capacity: f64,
}

impl CellLink {
    fn sending(&self, c: usize) -> f64 {
        (self.k * self.rho[c]).min(self.capacity)
    }

    fn receiving(&self, c: usize) -> f64 {
        (self.w * (self.rho_jam - self.rho[c])).min(self.capacity)
    }
}

pub fn ctm_run(network: &Network, profiles: &Profiles, config: CtmConfig) -> Result<CtmOutput, CtmError> {
    let CtmConfig { dx, dt, horizon } = config;
    let mut cells = Vec::new();
    for link in network.links() {
        let p = link.params;
        let limit = dx / p.k.max(p.w);
        if dt > limit * (1.0 + 1e-12) {
            return Err(CtmError::Cfl { link: link.name.clone(), dt, limit });
        }
        let n = (p.length / dx).round();
        if n < 1.0 || (n * dx - p.length).abs() > 1e-9 * p.length {
            return Err(CtmError::CellSize { link: link.name.clone(), length: p.length, dx });
        }
        cells.push(CellLink { rho: vec![0.0; n as usize], rho_jam: p.rho_jam, k: p.k, w: p.w, capacity: p.capacity });
    }
    let steps = (horizon / dt).round();
    if !(steps >= 1.0 && (steps * dt - horizon).abs() <= 1e-9 * horizon) {
        return Err(CtmError::BadHorizon { horizon, dt });
    }
    let steps = steps as usize;

    let lookup = |node: &str, name: &str| -> Result<&StepProfile, CtmError> {
        profiles.get(name).ok_or_else(|| CtmError::MissingProfile { node: node.to_string(), profile: name.to_string() })
    };
    let mut node_profiles = Vec::new();
    for node in network.nodes() {
        node_profiles.push(match &node.kind {
            NodeKind::Origin { profile } => Some(lookup(&node.name, profile)?),
            NodeKind::Destination { capacity_profile: Some(p) } => Some(lookup(&node.name, p)?),
            _ => None,
        });
    }

    let mut up: Vec<CumulativeCurve> = cells.iter().map(|c| CumulativeCurve::new(c.capacity)).collect();
    let mut down = up.clone();
    let mut queues = vec![0.0; network.nodes().len()];
    let mut onset = vec![None; cells.len()];
    let mut q_in = vec![0.0; cells.len()];
    let mut q_out = vec![0.0; cells.len()];

    for n in 0..steps {
        let t = n as f64 * dt;
        let demand: Vec<f64> = cells.iter().map(|c| c.sending(c.rho.len() - 1)).collect();
        let supply: Vec<f64> = cells.iter().map(|c| c.receiving(0)).collect();
        for (v, node) in network.nodes().iter().enumerate() {
            match &node.kind {
                NodeKind::Origin { .. } => {
                    let first = node.outgoing[0].0;
                    let rate = node_profiles[v].expect("origin profile").mean_rate(t, t + dt);
                    let release = (rate + queues[v] / dt).min(cells[first].capacity).min(supply[first]).max(0.0);
                    queues[v] = (queues[v] + (rate - release) * dt).max(0.0);
                    q_in[first] = release;
                }
                NodeKind::Destination { .. } => {
                    let last = node.incoming[0].0;
                    let cap = node_profiles[v].map_or(f64::INFINITY, |p| p.mean_rate(t, t + dt));
                    q_out[last] = demand[last].min(cap);
                }
                NodeKind::Diverge { alpha } => {
                    let (i, [a, b]) = (node.incoming[0].0, [node.outgoing[0].0, node.outgoing[1].0]);
                    let f = solve_diverge(demand[i], supply[a], supply[b], *alpha);
                    q_out[i] = f.exits[0];
                    q_in[a] = f.entries[0];
                    q_in[b] = f.entries[1];
                }
                NodeKind::Merge { priority } => {
                    let ([a, b], o) = ([node.incoming[0].0, node.incoming[1].0], node.outgoing[0].0);
                    let f = solve_merge(demand[a], demand[b], supply[o], *priority);
                    q_out[a] = f.exits[0];
                    q_out[b] = f.exits[1];
                    q_in[o] = f.entries[0];
                }
            }
        }
        let t_next = (n + 1) as f64 * dt;
        for (l, c) in cells.iter_mut().enumerate() {
            let m = c.rho.len();
            let mut flows = Vec::with_capacity(m + 1);
            flows.push(q_in[l]);
            for i in 0..m - 1 {
                flows.push(c.sending(i).min(c.receiving(i + 1)));
            }
            flows.push(q_out[l]);
            for i in 0..m {
                c.rho[i] += (flows[i] - flows[i + 1]) * dt / dx;
            }
            up[l].append(t_next, q_in[l].clamp(0.0, c.capacity))?;
            down[l].append(t_next, q_out[l].clamp(0.0, c.capacity))?;
            let critical = c.capacity / c.k;
            if onset[l].is_none() && c.rho[0] > critical * (1.0 + CONGESTED_MARGIN) {
                onset[l] = Some(t_next);
            }
        }
    }

    Ok(CtmOutput { config, up, down, densities: cells.into_iter().map(|c| c.rho).collect(), spillback_onset: onset })
}
