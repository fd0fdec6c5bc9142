//! Exact wave-front tracking for the triangular fundamental diagram.
//!
//! With a piecewise-linear flux every Riemann problem is solved by at most two
//! straight fronts, so piecewise-constant data stays piecewise constant and the
//! evolution is exact between events. An event is a front collision, a front
//! reaching a link end, a change in boundary data, or an origin queue running
//! empty. At link ends the boundary fluxes are recomputed from the adjacent
//! traces with the same junction solvers the engine uses.
//!
//! Meant for single links and single junctions, though nothing below depends
//! on the network being that small.

use thiserror::Error;

use crate::curve::{CumulativeCurve, CurveError};
use crate::engine::Profiles;
use crate::fd::{LinkParams, TrafficState};
use crate::junction::{solve_diverge, solve_merge};
use crate::network::{LinkId, Network, NodeId, NodeKind};
use crate::profile::StepProfile;

/// Default bound on the number of processed events.
pub const EVENT_CAP: usize = 1_000_000;

/// Two fronts closer than this (mile) are treated as coincident.
const POS_TOL: f64 = 1e-9;
/// Queues below this many vehicles count as empty.
const QUEUE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FrontTrackError {
    #[error("front tracking stopped after {events} events at t = {t}; the interaction cascade does not terminate")]
    EventCap { events: usize, t: f64 },
    #[error("node `{node}` references missing profile `{profile}`")]
    MissingProfile { node: String, profile: String },
    #[error("initial data for link `{link}`: {message}")]
    BadInitial { link: String, message: String },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// A straight discontinuity between two constant states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Front {
    /// Distance from the link entrance (mile).
    pub position: f64,
    pub speed: f64,
    pub left: TrafficState,
    pub right: TrafficState,
}

/// Piecewise-constant initial data on one link: `states[i]` holds between
/// `breaks[i - 1]` and `breaks[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkInitial {
    pub breaks: Vec<f64>,
    pub states: Vec<TrafficState>,
}

impl LinkInitial {
    pub fn uniform(state: TrafficState) -> Self {
        Self { breaks: vec![], states: vec![state] }
    }
}

fn density(params: &LinkParams, s: TrafficState) -> f64 {
    params.psi_unchecked(s)
}

fn density_tol(params: &LinkParams) -> f64 {
    1e-12 * params.rho_jam
}

fn same_state(params: &LinkParams, a: TrafficState, b: TrafficState) -> bool {
    (density(params, a) - density(params, b)).abs() <= density_tol(params)
}

/// Speed of the single front joining `left` and `right`. States on the same
/// branch of the triangle travel together at `k` or `-w`.
fn front_speed(params: &LinkParams, left: TrafficState, right: TrafficState) -> f64 {
    let (rl, rr) = (density(params, left), density(params, right));
    let rc = params.critical_density();
    let tol = density_tol(params);
    if rl <= rc + tol && rr <= rc + tol {
        params.k
    } else if rl >= rc - tol && rr >= rc - tol {
        -params.w
    } else {
        (right.q - left.q) / (rr - rl)
    }
}

/// Fronts solving the Riemann problem `left | right` at the origin.
///
/// An increase in density is a single shock. A decrease is a single contact
/// when both states sit on one branch, and otherwise a fan that collapses to
/// two fronts through the critical state.
pub fn solve_riemann(left: TrafficState, right: TrafficState, params: &LinkParams) -> Vec<Front> {
    if same_state(params, left, right) {
        return vec![];
    }
    let (rl, rr) = (density(params, left), density(params, right));
    let rc = params.critical_density();
    let tol = density_tol(params);
    if rl > rr && rl > rc + tol && rr < rc - tol {
        let mid = TrafficState::critical(params);
        return vec![
            Front { position: 0.0, speed: -params.w, left, right: mid },
            Front { position: 0.0, speed: params.k, left: mid, right },
        ];
    }
    vec![Front { position: 0.0, speed: front_speed(params, left, right), left, right }]
}

#[derive(Debug, Clone, PartialEq)]
struct LinkWaves {
    params: LinkParams,
    positions: Vec<f64>,
    speeds: Vec<f64>,
    states: Vec<TrafficState>,
}

impl LinkWaves {
    fn new(params: LinkParams, initial: &LinkInitial) -> Self {
        let mut waves = Self { params, positions: vec![], speeds: vec![], states: vec![initial.states[0]] };
        for (x, &s) in initial.breaks.iter().zip(&initial.states[1..]) {
            waves.append_state(*x, s);
        }
        waves
    }

    /// Adds `state` to the right of the current last state, joined at `x`.
    fn append_state(&mut self, x: f64, state: TrafficState) {
        let left = *self.states.last().expect("states are never empty");
        for front in solve_riemann(left, state, &self.params) {
            self.positions.push(x);
            self.speeds.push(front.speed);
            self.states.push(front.right);
        }
    }

    fn entrance(&self) -> TrafficState {
        self.states[0]
    }

    fn exit(&self) -> TrafficState {
        *self.states.last().expect("states are never empty")
    }

    /// Replaces the entrance state, emitting the waves that enter the link.
    fn set_entrance(&mut self, state: TrafficState) {
        let fronts = solve_riemann(state, self.entrance(), &self.params);
        debug_assert!(fronts.iter().all(|f| f.speed >= 0.0), "entrance waves must enter the link");
        for f in fronts.iter().rev() {
            self.positions.insert(0, 0.0);
            self.speeds.insert(0, f.speed);
            self.states.insert(0, f.left);
        }
    }

    fn set_exit(&mut self, state: TrafficState) {
        let fronts = solve_riemann(self.exit(), state, &self.params);
        debug_assert!(fronts.iter().all(|f| f.speed <= 0.0), "exit waves must enter the link");
        let length = self.params.length;
        for f in fronts {
            self.positions.push(length);
            self.speeds.push(f.speed);
            self.states.push(f.right);
        }
    }

    fn advance(&mut self, dt: f64) {
        for (x, s) in self.positions.iter_mut().zip(&self.speeds) {
            *x += s * dt;
        }
    }

    /// Resolves coincident converging fronts and drops fronts that left the link.
    fn settle(&mut self) {
        loop {
            let hit = (0..self.positions.len().saturating_sub(1)).find(|&i| {
                self.positions[i + 1] - self.positions[i] <= POS_TOL && self.speeds[i] >= self.speeds[i + 1] - 1e-12
            });
            let Some(i) = hit else { break };
            let x = 0.5 * (self.positions[i] + self.positions[i + 1]);
            let (left, right) = (self.states[i], self.states[i + 2]);
            self.positions.drain(i..i + 2);
            self.speeds.drain(i..i + 2);
            self.states.remove(i + 1);
            let fronts = solve_riemann(left, right, &self.params);
            if fronts.is_empty() {
                self.states.remove(i + 1);
            }
            for (j, f) in fronts.iter().enumerate() {
                self.positions.insert(i + j, x);
                self.speeds.insert(i + j, f.speed);
                if j + 1 < fronts.len() {
                    self.states.insert(i + 1 + j, f.right);
                }
            }
        }
        while !self.positions.is_empty() && self.positions[0] <= POS_TOL && self.speeds[0] <= 0.0 {
            self.positions.remove(0);
            self.speeds.remove(0);
            self.states.remove(0);
        }
        let length = self.params.length;
        while let (Some(&x), Some(&s)) = (self.positions.last(), self.speeds.last()) {
            if x >= length - POS_TOL && s >= 0.0 {
                self.positions.pop();
                self.speeds.pop();
                self.states.pop();
            } else {
                break;
            }
        }
    }

    fn next_event(&self) -> f64 {
        let mut next = f64::INFINITY;
        for i in 0..self.positions.len().saturating_sub(1) {
            let closing = self.speeds[i] - self.speeds[i + 1];
            if closing > 1e-12 {
                next = next.min(((self.positions[i + 1] - self.positions[i]) / closing).max(0.0));
            }
        }
        if let Some((&x, &s)) = self.positions.first().zip(self.speeds.first()) {
            if s < 0.0 {
                next = next.min((x / -s).max(0.0));
            }
        }
        if let Some((&x, &s)) = self.positions.last().zip(self.speeds.last()) {
            if s > 0.0 {
                next = next.min(((self.params.length - x) / s).max(0.0));
            }
        }
        next
    }

    fn snapshot(&self) -> LinkSnapshot {
        LinkSnapshot { positions: self.positions.clone(), speeds: self.speeds.clone(), states: self.states.clone() }
    }
}

/// Fronts and states of one link right after an event.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSnapshot {
    pub positions: Vec<f64>,
    pub speeds: Vec<f64>,
    pub states: Vec<TrafficState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub links: Vec<LinkSnapshot>,
}

/// A change in the demands or supplies seen by a junction.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub t: f64,
    pub node: NodeId,
    /// Demands of the incoming links followed by supplies of the outgoing links.
    pub inputs_before: Vec<f64>,
    pub inputs_after: Vec<f64>,
    pub through_before: f64,
    pub through_after: f64,
}

#[derive(Debug, Clone)]
pub struct FrontTrackingSolution {
    pub horizon: f64,
    /// States after each event, starting at `t = 0`.
    pub snapshots: Vec<Snapshot>,
    /// Exact cumulative counts at each link entrance.
    pub up: Vec<CumulativeCurve>,
    pub down: Vec<CumulativeCurve>,
    pub interactions: Vec<Interaction>,
    pub events: usize,
    params: Vec<LinkParams>,
}

impl FrontTrackingSolution {
    pub fn event_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.snapshots.iter().map(|s| s.t)
    }

    fn snapshot_at(&self, t: f64) -> &Snapshot {
        let i = self.snapshots.partition_point(|s| s.t <= t);
        &self.snapshots[i.saturating_sub(1)]
    }

    /// Fronts on a link at time `t`.
    pub fn fronts_at(&self, link: LinkId, t: f64) -> Vec<Front> {
        let snap = self.snapshot_at(t);
        let l = &snap.links[link.0];
        (0..l.positions.len())
            .map(|i| Front {
                position: l.positions[i] + l.speeds[i] * (t - snap.t),
                speed: l.speeds[i],
                left: l.states[i],
                right: l.states[i + 1],
            })
            .collect()
    }

    /// State at `(t, x)`; a point on a front gets the state to its right.
    pub fn sample(&self, link: LinkId, t: f64, x: f64) -> TrafficState {
        let snap = self.snapshot_at(t);
        let l = &snap.links[link.0];
        let dt = t - snap.t;
        let region = l.positions.iter().zip(&l.speeds).filter(|(p, s)| *p + *s * dt <= x).count();
        l.states[region]
    }

    /// Vehicles on a link at time `t`, integrating the density between fronts.
    pub fn vehicles_on(&self, link: LinkId, t: f64) -> f64 {
        let params = &self.params[link.0];
        let fronts = self.fronts_at(link, t);
        let snap = &self.snapshot_at(t).links[link.0];
        let mut edges = vec![0.0];
        edges.extend(fronts.iter().map(|f| f.position.clamp(0.0, params.length)));
        edges.push(params.length);
        snap.states.iter().enumerate().map(|(i, s)| density(params, *s) * (edges[i + 1] - edges[i])).sum()
    }

    /// First event time at which the entrance state of a link is congested.
    pub fn spillback_onset(&self, link: LinkId) -> Option<f64> {
        let params = &self.params[link.0];
        let critical = params.critical_density();
        self.snapshots
            .iter()
            .find(|s| density(params, s.links[link.0].states[0]) > critical + density_tol(params))
            .map(|s| s.t)
    }

    /// Count `N(t, x)` from the entrance count and the density profile.
    /// Consistent with `down` only when the link starts empty.
    pub fn count_at(&self, link: LinkId, t: f64, x: f64) -> f64 {
        let params = &self.params[link.0];
        let snap = &self.snapshot_at(t).links[link.0];
        let fronts = self.fronts_at(link, t);
        let mut n = self.up[link.0].eval(t);
        let mut from = 0.0;
        for (i, s) in snap.states.iter().enumerate() {
            let to = fronts.get(i).map_or(params.length, |f| f.position.clamp(0.0, params.length)).min(x);
            if to > from {
                n -= density(params, *s) * (to - from);
                from = to;
            }
        }
        n
    }
}

struct Boundary<'a> {
    node: NodeId,
    kind: BoundaryKind<'a>,
}

enum BoundaryKind<'a> {
    Origin { profile: &'a StepProfile, link: usize, queue: f64 },
    Destination { capacity: Option<&'a StepProfile>, link: usize },
    Diverge { alpha: [f64; 2], incoming: usize, outgoing: [usize; 2], last: Option<(Vec<f64>, f64)> },
    Merge { priority: f64, incoming: [usize; 2], outgoing: usize, last: Option<(Vec<f64>, f64)> },
}

/// Entrance state carrying `flux` given the current entrance trace.
fn entrance_state(params: &LinkParams, trace: TrafficState, flux: f64) -> TrafficState {
    match trace.regime {
        crate::fd::Regime::Congested if flux >= trace.q - 1e-9 * params.capacity => trace,
        _ => TrafficState::free(flux),
    }
}

/// Exit state carrying `flux` given the current exit trace.
fn exit_state(params: &LinkParams, trace: TrafficState, flux: f64) -> TrafficState {
    match trace.regime {
        crate::fd::Regime::FreeFlow if flux >= trace.q - 1e-9 * params.capacity => trace,
        _ => TrafficState::congested(flux),
    }
}

fn origin_release(profile: &StepProfile, queue: f64, params: &LinkParams, trace: TrafficState, t: f64) -> f64 {
    let demand = if queue > QUEUE_TOL { params.capacity } else { profile.rate_at(t) };
    demand.min(params.receiving(trace))
}

/// Tracks fronts on every link of `network` from `t = 0` to `horizon`.
///
/// `initial` gives one entry per link; an empty slice means an empty network.
pub fn front_track(
    network: &Network,
    profiles: &Profiles,
    initial: &[LinkInitial],
    horizon: f64,
) -> Result<FrontTrackingSolution, FrontTrackError> {
    front_track_capped(network, profiles, initial, horizon, EVENT_CAP)
}

pub fn front_track_capped(
    network: &Network,
    profiles: &Profiles,
    initial: &[LinkInitial],
    horizon: f64,
    event_cap: usize,
) -> Result<FrontTrackingSolution, FrontTrackError> {
    let params: Vec<LinkParams> = network.links().iter().map(|l| l.params).collect();
    let mut links = Vec::with_capacity(params.len());
    for (i, p) in params.iter().enumerate() {
        let init = initial.get(i).cloned().unwrap_or_else(|| LinkInitial::uniform(TrafficState::EMPTY));
        let name = || network.links()[i].name.clone();
        if init.states.len() != init.breaks.len() + 1 {
            return Err(FrontTrackError::BadInitial {
                link: name(),
                message: "need one more state than breaks".into(),
            });
        }
        if !init.breaks.windows(2).all(|w| w[0] < w[1]) || init.breaks.iter().any(|&x| !(x > 0.0 && x < p.length)) {
            return Err(FrontTrackError::BadInitial {
                link: name(),
                message: "breaks must increase inside the link".into(),
            });
        }
        if init.states.iter().any(|s| !(0.0..=p.capacity).contains(&s.q)) {
            return Err(FrontTrackError::BadInitial { link: name(), message: "flow outside [0, C]".into() });
        }
        links.push(LinkWaves::new(*p, &init));
    }

    let lookup = |node: &str, name: &str| {
        profiles
            .get(name)
            .ok_or_else(|| FrontTrackError::MissingProfile { node: node.to_string(), profile: name.to_string() })
    };
    let mut boundaries = Vec::new();
    let mut switch_profiles = Vec::new();
    for (v, node) in network.nodes().iter().enumerate() {
        let kind = match &node.kind {
            NodeKind::Origin { profile } => {
                let profile = lookup(&node.name, profile)?;
                switch_profiles.push(profile);
                BoundaryKind::Origin { profile, link: node.outgoing[0].0, queue: 0.0 }
            }
            NodeKind::Destination { capacity_profile } => {
                let capacity = capacity_profile.as_deref().map(|p| lookup(&node.name, p)).transpose()?;
                switch_profiles.extend(capacity);
                BoundaryKind::Destination { capacity, link: node.incoming[0].0 }
            }
            NodeKind::Diverge { alpha } => BoundaryKind::Diverge {
                alpha: *alpha,
                incoming: node.incoming[0].0,
                outgoing: [node.outgoing[0].0, node.outgoing[1].0],
                last: None,
            },
            NodeKind::Merge { priority } => BoundaryKind::Merge {
                priority: *priority,
                incoming: [node.incoming[0].0, node.incoming[1].0],
                outgoing: node.outgoing[0].0,
                last: None,
            },
        };
        boundaries.push(Boundary { node: NodeId(v), kind });
    }
    let mut switches: Vec<f64> = switch_profiles.iter().flat_map(|p| p.times().iter().copied()).collect();
    switches.sort_by(f64::total_cmp);
    switches.dedup();

    let mut up: Vec<CumulativeCurve> = params.iter().map(|p| CumulativeCurve::new(p.capacity)).collect();
    let mut down = up.clone();
    let mut interactions = Vec::new();
    let mut t = 0.0;
    resolve_boundaries(&mut links, &mut boundaries, t, &mut interactions);
    let mut snapshots = vec![Snapshot { t, links: links.iter().map(LinkWaves::snapshot).collect() }];
    let mut events = 0;

    while t < horizon {
        let mut next = horizon;
        for l in &links {
            next = next.min(t + l.next_event());
        }
        if let Some(&s) = switches.iter().find(|&&s| s > t) {
            next = next.min(s);
        }
        for b in &boundaries {
            if let BoundaryKind::Origin { profile, link, queue } = &b.kind {
                let release = links[*link].entrance().q;
                let arrival = profile.rate_at(t);
                if *queue > QUEUE_TOL && release > arrival {
                    next = next.min(t + queue / (release - arrival));
                }
            }
        }

        let dt = next - t;
        if dt > 0.0 {
            for (i, l) in links.iter_mut().enumerate() {
                let n_up = up[i].last_count() + l.entrance().q * dt;
                let n_down = down[i].last_count() + l.exit().q * dt;
                up[i].push_point(next, n_up)?;
                down[i].push_point(next, n_down)?;
                l.advance(dt);
            }
            for b in &mut boundaries {
                if let BoundaryKind::Origin { profile, link, queue } = &mut b.kind {
                    let release = links[*link].entrance().q;
                    *queue = (*queue + (profile.rate_at(t) - release) * dt).max(0.0);
                    if *queue <= QUEUE_TOL * 1e3 && profile.rate_at(t) < release {
                        *queue = 0.0;
                    }
                }
            }
        }
        t = next;
        for l in &mut links {
            l.settle();
        }
        resolve_boundaries(&mut links, &mut boundaries, t, &mut interactions);
        snapshots.push(Snapshot { t, links: links.iter().map(LinkWaves::snapshot).collect() });
        events += 1;
        if events > event_cap {
            return Err(FrontTrackError::EventCap { events, t });
        }
    }

    Ok(FrontTrackingSolution { horizon, snapshots, up, down, interactions, events, params })
}

fn resolve_boundaries(links: &mut [LinkWaves], boundaries: &mut [Boundary], t: f64, log: &mut Vec<Interaction>) {
    for b in boundaries.iter_mut() {
        match &mut b.kind {
            BoundaryKind::Origin { profile, link, queue } => {
                let l = &mut links[*link];
                let flux = origin_release(profile, *queue, &l.params, l.entrance(), t);
                let state = entrance_state(&l.params, l.entrance(), flux);
                l.set_entrance(state);
            }
            BoundaryKind::Destination { capacity, link } => {
                let l = &mut links[*link];
                let cap = capacity.map_or(f64::INFINITY, |p| p.rate_at(t));
                let flux = l.params.sending(l.exit()).min(cap);
                let state = exit_state(&l.params, l.exit(), flux);
                l.set_exit(state);
            }
            BoundaryKind::Diverge { alpha, incoming, outgoing, last } => {
                let d = links[*incoming].params.sending(links[*incoming].exit());
                let s: Vec<f64> = outgoing.iter().map(|&o| links[o].params.receiving(links[o].entrance())).collect();
                let flows = solve_diverge(d, s[0], s[1], *alpha);
                let inputs = vec![d, s[0], s[1]];
                record(log, last, b.node, t, inputs, flows.total());
                let i = &mut links[*incoming];
                let st = exit_state(&i.params, i.exit(), flows.exits[0]);
                i.set_exit(st);
                for (&o, &q) in outgoing.iter().zip(&flows.entries) {
                    let l = &mut links[o];
                    let st = entrance_state(&l.params, l.entrance(), q);
                    l.set_entrance(st);
                }
            }
            BoundaryKind::Merge { priority, incoming, outgoing, last } => {
                let d: Vec<f64> = incoming.iter().map(|&i| links[i].params.sending(links[i].exit())).collect();
                let s = links[*outgoing].params.receiving(links[*outgoing].entrance());
                let flows = solve_merge(d[0], d[1], s, *priority);
                record(log, last, b.node, t, vec![d[0], d[1], s], flows.total());
                for (&i, &q) in incoming.iter().zip(&flows.exits) {
                    let l = &mut links[i];
                    let st = exit_state(&l.params, l.exit(), q);
                    l.set_exit(st);
                }
                let l = &mut links[*outgoing];
                let st = entrance_state(&l.params, l.entrance(), flows.entries[0]);
                l.set_entrance(st);
            }
        }
    }
}

fn record(
    log: &mut Vec<Interaction>,
    last: &mut Option<(Vec<f64>, f64)>,
    node: NodeId,
    t: f64,
    inputs: Vec<f64>,
    through: f64,
) {
    if let Some((before, through_before)) = last.as_ref() {
        let changed = before.iter().zip(&inputs).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0));
        if changed {
            log.push(Interaction {
                t,
                node,
                inputs_before: before.clone(),
                inputs_after: inputs.clone(),
                through_before: *through_before,
                through_after: through,
            });
        }
    }
    *last = Some((inputs, through));
}
