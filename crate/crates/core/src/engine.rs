//! Fixed-step integration of the network loading equations.
//!
//! Every step reads demands and supplies from the boundary histories up to the
//! current time, resolves each node, and then extends all cumulative curves
//! with the node flows held constant over the step.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CumulativeCurve, CurveError};
use crate::fd::{LinkParams, ModelError};
use crate::junction::{solve_diverge, solve_merge, JunctionFlows};
use crate::link::{LinkError, LinkState, DEFAULT_EPS_N};
use crate::network::{LinkId, Network, NodeId, NodeKind};
use crate::profile::StepProfile;

/// Slack allowed on `0 <= q <= C` before a run is aborted.
pub const FLOW_SLACK: f64 = 1e-9;

/// Named boundary profiles: origin demands and optional destination capacities.
pub type Profiles = BTreeMap<String, StepProfile>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("time step {0} must be positive and finite")]
    BadStep(f64),
    #[error("time step {dt} exceeds the shortest wave traversal time {limit} (link `{link}`)")]
    StepTooLong { dt: f64, limit: f64, link: String },
    #[error("horizon {horizon} is not a positive integer multiple of the step {dt}")]
    BadHorizon { horizon: f64, dt: f64 },
    #[error("node `{node}` references missing profile `{profile}`")]
    MissingProfile { node: String, profile: String },
    #[error("node `{node}`: flow {flow} on link `{link}` outside [0, {capacity}] at t = {t}")]
    FlowOutOfRange { node: String, link: String, flow: f64, capacity: f64, t: f64 },
    #[error("origin `{node}`: desired rate {rate} exceeds the virtual link capacity {capacity}")]
    VirtualLinkOverflow { node: String, rate: f64, capacity: f64 },
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How vehicles wait at an origin when the first link cannot take them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OriginModel {
    /// Vertical queue releasing `min(h + queue / dt, C, S)`.
    #[default]
    PointQueue,
    /// Long virtual link with a one-step free-flow traversal feeding the origin
    /// node. Equivalent to the point queue with the demand delayed by one step.
    VirtualLink,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub eps_n: f64,
    #[serde(default)]
    pub origin_model: OriginModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { dt: 0.05, horizon: 5.0, seed: 0, eps_n: DEFAULT_EPS_N, origin_model: OriginModel::PointQueue }
    }
}

impl SimConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self, network: &Network) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::BadStep(self.dt));
        }
        for link in network.links() {
            let limit = link.params.free_flow_time().min(link.params.backward_wave_time());
            if self.dt > limit * (1.0 + 1e-12) {
                return Err(SimError::StepTooLong { dt: self.dt, limit, link: link.name.clone() });
            }
        }
        let ratio = self.horizon / self.dt;
        if !(ratio.is_finite() && ratio >= 0.5 && (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0)) {
            return Err(SimError::BadHorizon { horizon: self.horizon, dt: self.dt });
        }
        Ok(())
    }
}

/// Desired and actual departures at one origin.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginQueue {
    pub node: NodeId,
    pub desired: CumulativeCurve,
    pub released: CumulativeCurve,
    /// Queue length at each grid time.
    pub queue: Vec<f64>,
    virtual_link: Option<LinkState>,
}

impl OriginQueue {
    fn new(node: NodeId, desired_cap: f64, released_cap: f64) -> Self {
        Self {
            node,
            desired: CumulativeCurve::new(desired_cap),
            released: CumulativeCurve::new(released_cap),
            queue: vec![0.0],
            virtual_link: None,
        }
    }

    pub fn current_queue(&self) -> f64 {
        *self.queue.last().expect("queue starts at zero")
    }
}

/// Complete record of one run.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub network: Network,
    pub config: SimConfig,
    pub links: Vec<LinkState>,
    /// `spillback[l][n]`: spillback detected on link `l` at `n dt`.
    pub spillback: Vec<Vec<bool>>,
    pub origins: Vec<OriginQueue>,
    pub wall_time: f64,
}

impl SimOutput {
    pub fn steps(&self) -> usize {
        self.config.steps()
    }

    /// Grid times `0, dt, ..., horizon`.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps()).map(|n| n as f64 * self.config.dt).collect()
    }

    pub fn link(&self, name: &str) -> Option<&LinkState> {
        self.network.link_id(name).map(|id| &self.links[id.0])
    }

    pub fn link_state(&self, id: LinkId) -> &LinkState {
        &self.links[id.0]
    }

    /// First grid time at which the link spills back.
    pub fn spillback_onset(&self, id: LinkId) -> Option<f64> {
        self.spillback[id.0].iter().position(|&f| f).map(|n| n as f64 * self.config.dt)
    }

    /// First grid time at which vehicles queue at the link exit.
    pub fn congested_exit_onset(&self, id: LinkId) -> Option<f64> {
        let link = &self.links[id.0];
        self.times().into_iter().find(|&t| !link.detect_freeflow_exit(t, self.config.eps_n))
    }

    /// Vehicles released at origins minus vehicles on links and absorbed at destinations.
    pub fn vehicle_balance_residual(&self) -> f64 {
        let t = self.config.horizon;
        let released: f64 = self.origins.iter().map(|o| o.released.eval(t)).sum();
        let on_links: f64 = self.links.iter().map(|l| l.up.eval(t) - l.down.eval(t)).sum();
        let absorbed: f64 = self
            .network
            .nodes()
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Destination { .. }))
            .map(|n| self.links[n.incoming[0].0].down.eval(t))
            .sum();
        released - on_links - absorbed
    }

    /// Largest relative mismatch between inflow and outflow at any junction and step.
    pub fn max_junction_imbalance(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for node in self.network.nodes() {
            if !matches!(node.kind, NodeKind::Merge { .. } | NodeKind::Diverge { .. }) {
                continue;
            }
            for n in 0..self.steps() {
                let out: f64 = node.incoming.iter().map(|l| self.links[l.0].q_out[n]).sum();
                let inn: f64 = node.outgoing.iter().map(|l| self.links[l.0].q_in[n]).sum();
                let scale = out.abs().max(inn.abs()).max(1.0);
                worst = worst.max((out - inn).abs() / scale);
            }
        }
        worst
    }
}

/// Per-step Uniform(0, cap) draws on `[start, end)`, zero elsewhere.
///
/// The draw sequence comes from `Pcg64` seeded through `seed_from_u64`, so a
/// seed fixes the series on every platform.
pub fn generate_inflow(cap: f64, interval: (f64, f64), step: f64, horizon: f64, seed: u64) -> StepProfile {
    let mut rng = Pcg64::seed_from_u64(seed);
    let steps = (horizon / step).round() as usize;
    let tol = 1e-9 * step;
    let rates: Vec<f64> = (0..steps)
        .map(|n| {
            let t = n as f64 * step;
            if t >= interval.0 - tol && t < interval.1 - tol {
                rng.random_range(0.0..cap)
            } else {
                0.0
            }
        })
        .collect();
    StepProfile::from_steps(step, &rates).expect("uniform draws are valid rates")
}

/// Stepper over a validated network.
pub struct Simulation<'a> {
    network: &'a Network,
    config: SimConfig,
    links: Vec<LinkState>,
    origins: Vec<OriginQueue>,
    demand_profiles: Vec<Option<&'a StepProfile>>,
    capacity_profiles: Vec<Option<&'a StepProfile>>,
    step: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(network: &'a Network, profiles: &'a Profiles, config: SimConfig) -> Result<Self, SimError> {
        config.validate(network)?;
        let links = network.links().iter().map(|l| LinkState::new(l.params, config.dt)).collect();
        let lookup = |node: &str, name: &str| {
            profiles
                .get(name)
                .ok_or_else(|| SimError::MissingProfile { node: node.to_string(), profile: name.to_string() })
        };
        let mut origins = Vec::new();
        let mut demand_profiles = vec![None; network.nodes().len()];
        let mut capacity_profiles = vec![None; network.nodes().len()];
        for (v, node) in network.nodes().iter().enumerate() {
            match &node.kind {
                NodeKind::Origin { profile } => {
                    let profile = lookup(&node.name, profile)?;
                    demand_profiles[v] = Some(profile);
                    let first = network.link(node.outgoing[0]).params;
                    let mut origin =
                        OriginQueue::new(NodeId(v), profile.max_rate().max(first.capacity), first.capacity);
                    if config.origin_model == OriginModel::VirtualLink {
                        if profile.max_rate() > first.capacity + FLOW_SLACK {
                            return Err(SimError::VirtualLinkOverflow {
                                node: node.name.clone(),
                                rate: profile.max_rate(),
                                capacity: first.capacity,
                            });
                        }
                        let params = virtual_link_params(&first, &config)?;
                        origin.virtual_link = Some(LinkState::new(params, config.dt));
                    }
                    origins.push(origin);
                }
                NodeKind::Destination { capacity_profile: Some(name) } => {
                    capacity_profiles[v] = Some(lookup(&node.name, name)?);
                }
                _ => {}
            }
        }
        Ok(Self { network, config, links, origins, demand_profiles, capacity_profiles, step: 0 })
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn links(&self) -> &[LinkState] {
        &self.links
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.steps()
    }

    /// Advances every link and origin by one step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let dt = self.config.dt;
        let t = self.time();
        let demand = self.links.iter().map(|l| l.demand(t, dt)).collect::<Result<Vec<_>, _>>()?;
        let supply = self.links.iter().map(|l| l.supply(t, dt)).collect::<Result<Vec<_>, _>>()?;

        let mut q_in = vec![0.0; self.links.len()];
        let mut q_out = vec![0.0; self.links.len()];
        let mut origin_index = 0;
        for (v, node) in self.network.nodes().iter().enumerate() {
            let flows = match &node.kind {
                NodeKind::Diverge { alpha } => {
                    let [o1, o2] = [node.outgoing[0].0, node.outgoing[1].0];
                    solve_diverge(demand[node.incoming[0].0], supply[o1], supply[o2], *alpha)
                }
                NodeKind::Merge { priority } => {
                    let [i1, i2] = [node.incoming[0].0, node.incoming[1].0];
                    solve_merge(demand[i1], demand[i2], supply[node.outgoing[0].0], *priority)
                }
                NodeKind::Origin { .. } => {
                    let profile = self.demand_profiles[v].expect("origin profiles resolved at construction");
                    let first = node.outgoing[0].0;
                    let origin = &mut self.origins[origin_index];
                    origin_index += 1;
                    let release = advance_origin(origin, profile, &self.links[first].params, supply[first], t, dt)?;
                    JunctionFlows { exits: vec![], entries: vec![release] }
                }
                NodeKind::Destination { .. } => {
                    let last = node.incoming[0].0;
                    let exit_cap = match self.capacity_profiles[v] {
                        Some(p) => p.mean_rate(t, t + dt),
                        None => self.links[last].params.capacity,
                    };
                    JunctionFlows { exits: vec![demand[last].min(exit_cap)], entries: vec![] }
                }
            };
            for (l, q) in node.incoming.iter().zip(&flows.exits) {
                q_out[l.0] = *q;
            }
            for (l, q) in node.outgoing.iter().zip(&flows.entries) {
                q_in[l.0] = *q;
            }
        }

        for (i, link) in self.links.iter().enumerate() {
            let capacity = link.params.capacity;
            for (flow, node) in [(q_in[i], self.network.tail(LinkId(i))), (q_out[i], self.network.head(LinkId(i)))] {
                if !(flow >= -FLOW_SLACK && flow <= capacity + FLOW_SLACK) {
                    return Err(SimError::FlowOutOfRange {
                        node: self.network.node(node).name.clone(),
                        link: self.network.link(LinkId(i)).name.clone(),
                        flow,
                        capacity,
                        t,
                    });
                }
            }
        }
        for (i, link) in self.links.iter_mut().enumerate() {
            let cap = link.params.capacity;
            link.advance(q_in[i].clamp(0.0, cap), q_out[i].clamp(0.0, cap))?;
        }
        self.step += 1;
        Ok(())
    }

    pub fn finish(self, wall_time: f64) -> SimOutput {
        let eps = self.config.eps_n;
        let steps = self.step;
        let spillback =
            self.links.iter().map(|l| (0..=steps).map(|n| l.detect_spillback(l.time(n), eps)).collect()).collect();
        SimOutput {
            network: self.network.clone(),
            config: self.config,
            links: self.links,
            spillback,
            origins: self.origins,
            wall_time,
        }
    }
}

/// Releases vehicles from an origin into its first link and records the queue.
fn advance_origin(
    origin: &mut OriginQueue,
    profile: &StepProfile,
    first: &LinkParams,
    supply: f64,
    t: f64,
    dt: f64,
) -> Result<f64, SimError> {
    let desired = profile.mean_rate(t, t + dt);
    let release = match origin.virtual_link.as_mut() {
        None => (desired + origin.current_queue() / dt).min(first.capacity).min(supply),
        Some(link) => {
            let release = link.demand(t, dt)?.min(supply);
            link.advance(desired, release)?;
            release
        }
    };
    let release = release.max(0.0);
    origin.desired.append(t + dt, desired)?;
    origin.released.append(t + dt, release)?;
    let queue = (origin.desired.last_count() - origin.released.last_count()).max(0.0);
    origin.queue.push(queue);
    Ok(release)
}

/// Virtual link with the first link's capacity and backward speed, a one-step
/// free-flow traversal, and more storage than the horizon can fill.
fn virtual_link_params(first: &LinkParams, config: &SimConfig) -> Result<LinkParams, ModelError> {
    let length = first.w * (config.horizon + 1.0);
    let k = length / config.dt;
    let rho_jam = first.capacity * (k + first.w) / (k * first.w);
    LinkParams::new(rho_jam, k, first.w, first.capacity, length)
}

pub fn run(network: &Network, profiles: &Profiles, config: SimConfig) -> Result<SimOutput, SimError> {
    let started = Instant::now();
    let mut sim = Simulation::new(network, profiles, config)?;
    while !sim.is_finished() {
        sim.step()?;
    }
    Ok(sim.finish(started.elapsed().as_secs_f64()))
}
