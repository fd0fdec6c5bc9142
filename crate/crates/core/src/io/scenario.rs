//! JSON scenario files: network, boundary profiles and run settings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{generate_inflow, OriginModel, Profiles, SimConfig, SimError};
use crate::fd::{LinkParams, ModelError};
use crate::link::DEFAULT_EPS_N;
use crate::network::{Link, Network, NetworkError, NodeKind, NodeSpec};
use crate::profile::{ProfileError, StepProfile};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema { line: usize, column: usize, message: String },
    #[error("link `{link}`: {source}")]
    Link { link: String, source: ModelError },
    #[error("node `{node}`: {message}")]
    Node { node: String, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("profile `{name}`: {source}")]
    Profile { name: String, source: ProfileError },
    #[error("profile `{name}`: {message}")]
    BadUniform { name: String, message: String },
    #[error("sim: {0}")]
    Sim(#[from] SimError),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Schema { line: e.line(), column: e.column(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub network: NetworkSection,
    #[serde(default)]
    pub demand: BTreeMap<String, DemandEntry>,
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub links: Vec<LinkEntry>,
    pub nodes: Vec<NodeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub id: String,
    pub rho_jam: f64,
    pub k: f64,
    pub w: f64,
    pub capacity: f64,
    pub length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindTag {
    Diverge,
    Merge,
    Origin,
    Destination,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    pub kind: NodeKindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub priority: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_profile: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub incoming: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DemandEntry {
    /// Piecewise-constant rates switching at `times`.
    Steps { times: Vec<f64>, rates: Vec<f64> },
    /// Independent Uniform(0, cap) rate on every `step`-long interval of `[start, end)`.
    Uniform(UniformEntry),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformEntry {
    pub cap: f64,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Moskowitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps_n: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<OutputKind>,
    #[serde(default)]
    pub origin_model: OriginModel,
}

fn default_eps() -> f64 {
    DEFAULT_EPS_N
}

/// Boundary rate description, materialised once the horizon is known.
#[derive(Debug, Clone, PartialEq)]
pub enum DemandSpec {
    Steps(StepProfile),
    Uniform { cap: f64, start: f64, end: f64, step: f64, seed: Option<u64> },
}

impl DemandSpec {
    pub fn materialize(&self, horizon: f64, default_seed: u64) -> StepProfile {
        match self {
            DemandSpec::Steps(p) => p.clone(),
            DemandSpec::Uniform { cap, start, end, step, seed } => {
                generate_inflow(*cap, (*start, *end), *step, horizon, seed.unwrap_or(default_seed))
            }
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    pub demand: BTreeMap<String, DemandSpec>,
    pub config: SimConfig,
    pub outputs: Vec<OutputKind>,
}

impl Scenario {
    pub fn profiles(&self) -> Profiles {
        self.demand
            .iter()
            .map(|(name, spec)| (name.clone(), spec.materialize(self.config.horizon, self.config.seed)))
            .collect()
    }

    /// Replaces the run seed, including any seed fixed on a uniform profile.
    pub fn override_seed(&mut self, seed: u64) {
        self.config.seed = seed;
        for spec in self.demand.values_mut() {
            if let DemandSpec::Uniform { seed: s, .. } = spec {
                *s = None;
            }
        }
    }

    pub fn to_file(&self) -> ScenarioFile {
        let links = self
            .network
            .links()
            .iter()
            .map(|l| LinkEntry {
                id: l.name.clone(),
                rho_jam: l.params.rho_jam,
                k: l.params.k,
                w: l.params.w,
                capacity: l.params.capacity,
                length: l.params.length,
            })
            .collect();
        let nodes = self
            .network
            .node_specs()
            .into_iter()
            .map(|n| {
                let mut entry = NodeEntry {
                    id: n.name,
                    kind: NodeKindTag::Origin,
                    alpha: None,
                    priority: None,
                    profile: None,
                    capacity_profile: None,
                    incoming: n.incoming,
                    outgoing: n.outgoing,
                };
                match n.kind {
                    NodeKind::Diverge { alpha } => {
                        entry.kind = NodeKindTag::Diverge;
                        entry.alpha = Some(alpha);
                    }
                    NodeKind::Merge { priority } => {
                        entry.kind = NodeKindTag::Merge;
                        entry.priority = Some(priority);
                    }
                    NodeKind::Origin { profile } => entry.profile = Some(profile),
                    NodeKind::Destination { capacity_profile } => {
                        entry.kind = NodeKindTag::Destination;
                        entry.capacity_profile = capacity_profile;
                    }
                }
                entry
            })
            .collect();
        let demand = self
            .demand
            .iter()
            .map(|(name, spec)| {
                let entry = match spec {
                    DemandSpec::Steps(p) => DemandEntry::Steps { times: p.times().to_vec(), rates: p.rates().to_vec() },
                    DemandSpec::Uniform { cap, start, end, step, seed } => DemandEntry::Uniform(UniformEntry {
                        cap: *cap,
                        start: *start,
                        end: *end,
                        step: Some(*step),
                        seed: *seed,
                    }),
                };
                (name.clone(), entry)
            })
            .collect();
        ScenarioFile {
            network: NetworkSection { links, nodes },
            demand,
            sim: SimSection {
                dt: self.config.dt,
                horizon: self.config.horizon,
                seed: self.config.seed,
                eps_n: self.config.eps_n,
                outputs: self.outputs.clone(),
                origin_model: self.config.origin_model,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serialises")
    }
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    file.validate()
}

impl ScenarioFile {
    pub fn validate(self) -> Result<Scenario, ScenarioError> {
        let links = self
            .network
            .links
            .into_iter()
            .map(|l| {
                LinkParams::new(l.rho_jam, l.k, l.w, l.capacity, l.length)
                    .map(|params| Link { name: l.id.clone(), params })
                    .map_err(|source| ScenarioError::Link { link: l.id, source })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let nodes = self.network.nodes.into_iter().map(node_spec).collect::<Result<Vec<_>, _>>()?;
        let network = Network::new(links, nodes)?;

        let sim = self.sim;
        let mut demand = BTreeMap::new();
        for (name, entry) in self.demand {
            let spec = match entry {
                DemandEntry::Steps { times, rates } => DemandSpec::Steps(
                    StepProfile::new(times, rates)
                        .map_err(|source| ScenarioError::Profile { name: name.clone(), source })?,
                ),
                DemandEntry::Uniform(u) => {
                    let step = u.step.unwrap_or(sim.dt);
                    if !(u.cap.is_finite() && u.cap >= 0.0 && step > 0.0 && u.start <= u.end) {
                        return Err(ScenarioError::BadUniform {
                            name,
                            message: "need cap >= 0, step > 0 and start <= end".into(),
                        });
                    }
                    DemandSpec::Uniform { cap: u.cap, start: u.start, end: u.end, step, seed: u.seed }
                }
            };
            demand.insert(name, spec);
        }
        for node in network.nodes() {
            let referenced = match &node.kind {
                NodeKind::Origin { profile } => Some(profile),
                NodeKind::Destination { capacity_profile } => capacity_profile.as_ref(),
                _ => None,
            };
            if let Some(profile) = referenced {
                if !demand.contains_key(profile) {
                    return Err(ScenarioError::Node {
                        node: node.name.clone(),
                        message: format!("profile `{profile}` is not defined in the demand section"),
                    });
                }
            }
        }
        let config = SimConfig {
            dt: sim.dt,
            horizon: sim.horizon,
            seed: sim.seed,
            eps_n: sim.eps_n,
            origin_model: sim.origin_model,
        };
        config.validate(&network)?;
        Ok(Scenario { network, demand, config, outputs: sim.outputs })
    }
}

fn node_spec(entry: NodeEntry) -> Result<NodeSpec, ScenarioError> {
    let missing = |field: &str| ScenarioError::Node { node: entry.id.clone(), message: format!("missing `{field}`") };
    let unexpected = |field: &str, kind: &str| ScenarioError::Node {
        node: entry.id.clone(),
        message: format!("`{field}` is not valid on a {kind} node"),
    };
    let kind = match entry.kind {
        NodeKindTag::Diverge => NodeKind::Diverge { alpha: entry.alpha.ok_or_else(|| missing("alpha"))? },
        NodeKindTag::Merge => NodeKind::Merge { priority: entry.priority.ok_or_else(|| missing("priority"))? },
        NodeKindTag::Origin => NodeKind::Origin { profile: entry.profile.clone().ok_or_else(|| missing("profile"))? },
        NodeKindTag::Destination => NodeKind::Destination { capacity_profile: entry.capacity_profile.clone() },
    };
    let name = kind.name();
    let stray = [
        ("alpha", entry.alpha.is_some() && entry.kind != NodeKindTag::Diverge),
        ("priority", entry.priority.is_some() && entry.kind != NodeKindTag::Merge),
        ("profile", entry.profile.is_some() && entry.kind != NodeKindTag::Origin),
        ("capacity_profile", entry.capacity_profile.is_some() && entry.kind != NodeKindTag::Destination),
    ];
    if let Some((field, _)) = stray.iter().find(|(_, bad)| *bad) {
        return Err(unexpected(field, name));
    }
    Ok(NodeSpec { name: entry.id, kind, incoming: entry.incoming, outgoing: entry.outgoing })
}
