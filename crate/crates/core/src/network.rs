//! Directed road network of links joined by diverge, merge, origin and
//! destination nodes.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fd::LinkParams;

/// Tolerance on `alpha_12 + alpha_13 = 1`.
const SPLIT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate link id `{0}`")]
    DuplicateLink(String),
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("node `{node}` references unknown link `{link}`")]
    UnknownLink { node: String, link: String },
    #[error("node `{node}`: {kind} nodes need {expected_in} incoming and {expected_out} outgoing links, got {got_in} and {got_out}")]
    Arity { node: String, kind: &'static str, expected_in: usize, expected_out: usize, got_in: usize, got_out: usize },
    #[error("node `{node}`: turning fractions {alpha:?} must lie in [0, 1] and sum to 1")]
    BadSplit { node: String, alpha: [f64; 2] },
    #[error("node `{node}`: right-of-way {priority} must lie strictly inside (0, 1)")]
    BadPriority { node: String, priority: f64 },
    #[error("link `{link}` has {count} {end} nodes, expected exactly one")]
    LinkEnds { link: String, end: &'static str, count: usize },
    #[error("network is not connected")]
    Disconnected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    /// One incoming, two outgoing links; `alpha` are the turning fractions.
    Diverge { alpha: [f64; 2] },
    /// Two incoming, one outgoing link; the exit flows satisfy `q_second = priority * q_first`
    /// whenever the outgoing supply binds and the rule is feasible.
    Merge { priority: f64 },
    /// Entry point fed by the named demand profile through a point queue.
    Origin { profile: String },
    /// Exit point. Without a capacity profile it never restricts outflow.
    Destination { capacity_profile: Option<String> },
}

impl NodeKind {
    pub fn name(&self) -> &'static str {
        match self {
            NodeKind::Diverge { .. } => "diverge",
            NodeKind::Merge { .. } => "merge",
            NodeKind::Origin { .. } => "origin",
            NodeKind::Destination { .. } => "destination",
        }
    }

    fn arity(&self) -> (usize, usize) {
        match self {
            NodeKind::Diverge { .. } => (1, 2),
            NodeKind::Merge { .. } => (2, 1),
            NodeKind::Origin { .. } => (0, 1),
            NodeKind::Destination { .. } => (1, 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub name: String,
    pub params: LinkParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub incoming: Vec<LinkId>,
    pub outgoing: Vec<LinkId>,
}

/// Node description by link names, as read from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

/// Validated network. Links and nodes are addressed by dense indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    links: Vec<Link>,
    nodes: Vec<Node>,
    tail: Vec<NodeId>,
    head: Vec<NodeId>,
}

impl Network {
    pub fn new(links: Vec<Link>, specs: Vec<NodeSpec>) -> Result<Self, NetworkError> {
        let mut link_index = HashMap::new();
        for (i, link) in links.iter().enumerate() {
            if link_index.insert(link.name.clone(), LinkId(i)).is_some() {
                return Err(NetworkError::DuplicateLink(link.name.clone()));
            }
        }
        let mut seen = HashMap::new();
        let mut nodes = Vec::with_capacity(specs.len());
        for spec in specs {
            if seen.insert(spec.name.clone(), ()).is_some() {
                return Err(NetworkError::DuplicateNode(spec.name));
            }
            let resolve = |names: &[String]| -> Result<Vec<LinkId>, NetworkError> {
                names
                    .iter()
                    .map(|n| {
                        link_index
                            .get(n)
                            .copied()
                            .ok_or_else(|| NetworkError::UnknownLink { node: spec.name.clone(), link: n.clone() })
                    })
                    .collect()
            };
            let incoming = resolve(&spec.incoming)?;
            let outgoing = resolve(&spec.outgoing)?;
            validate_kind(&spec.name, &spec.kind, incoming.len(), outgoing.len())?;
            nodes.push(Node { name: spec.name, kind: spec.kind, incoming, outgoing });
        }

        let mut tails = vec![Vec::new(); links.len()];
        let mut heads = vec![Vec::new(); links.len()];
        for (v, node) in nodes.iter().enumerate() {
            for l in &node.outgoing {
                tails[l.0].push(NodeId(v));
            }
            for l in &node.incoming {
                heads[l.0].push(NodeId(v));
            }
        }
        let mut tail = Vec::with_capacity(links.len());
        let mut head = Vec::with_capacity(links.len());
        for (i, link) in links.iter().enumerate() {
            for (end, found, out) in [("tail", &tails[i], &mut tail), ("head", &heads[i], &mut head)] {
                if found.len() != 1 {
                    return Err(NetworkError::LinkEnds { link: link.name.clone(), end, count: found.len() });
                }
                out.push(found[0]);
            }
        }

        let network = Self { links, nodes, tail, head };
        if !network.is_connected() {
            return Err(NetworkError::Disconnected);
        }
        Ok(network)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn link_id(&self, name: &str) -> Option<LinkId> {
        self.links.iter().position(|l| l.name == name).map(LinkId)
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    /// Node at the upstream end of a link.
    pub fn tail(&self, id: LinkId) -> NodeId {
        self.tail[id.0]
    }

    /// Node at the downstream end of a link.
    pub fn head(&self, id: LinkId) -> NodeId {
        self.head[id.0]
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> {
        (0..self.links.len()).map(LinkId)
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Node descriptions by name, the inverse of [`Network::new`].
    pub fn node_specs(&self) -> Vec<NodeSpec> {
        let names = |ids: &[LinkId]| ids.iter().map(|l| self.links[l.0].name.clone()).collect();
        self.nodes
            .iter()
            .map(|n| NodeSpec {
                name: n.name.clone(),
                kind: n.kind.clone(),
                incoming: names(&n.incoming),
                outgoing: names(&n.outgoing),
            })
            .collect()
    }

    /// Number of junction (merge or diverge) nodes.
    pub fn junction_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Merge { .. } | NodeKind::Diverge { .. })).count()
    }

    fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for l in 0..self.links.len() {
            let a = find(&mut parent, self.tail[l].0);
            let b = find(&mut parent, self.head[l].0);
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        (0..self.nodes.len()).all(|v| find(&mut parent, v) == root)
    }
}

fn validate_kind(name: &str, kind: &NodeKind, got_in: usize, got_out: usize) -> Result<(), NetworkError> {
    let (expected_in, expected_out) = kind.arity();
    if (got_in, got_out) != (expected_in, expected_out) {
        return Err(NetworkError::Arity {
            node: name.to_string(),
            kind: kind.name(),
            expected_in,
            expected_out,
            got_in,
            got_out,
        });
    }
    match *kind {
        NodeKind::Diverge { alpha } => {
            let in_range = alpha.iter().all(|a| (0.0..=1.0).contains(a));
            if !in_range || (alpha[0] + alpha[1] - 1.0).abs() > SPLIT_SUM_TOL {
                return Err(NetworkError::BadSplit { node: name.to_string(), alpha });
            }
        }
        NodeKind::Merge { priority } if !(priority > 0.0 && priority < 1.0) => {
            return Err(NetworkError::BadPriority { node: name.to_string(), priority });
        }
        _ => {}
    }
    Ok(())
}
