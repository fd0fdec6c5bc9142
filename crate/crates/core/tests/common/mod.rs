//! Networks and boundary data shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use kinewave::engine::Profiles;
use kinewave::network::{Link, NodeKind, NodeSpec};
use kinewave::{LinkParams, Network, StepProfile};

/// Offset of a third of the coarsest step, so inflow switches fall at the same
/// relative position inside a step at dt = 0.05, 0.025 and 0.0125.
pub const THIRD: f64 = 0.05 / 3.0;

pub fn table1_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/table1.json")
}

/// Table 1 link with `k = 30`, `w = 10`, `L = 3`.
pub fn table1_link(rho_jam: f64, capacity: f64) -> LinkParams {
    LinkParams::new(rho_jam, 30.0, 10.0, capacity, 3.0).unwrap()
}

pub fn i1() -> LinkParams {
    table1_link(400.0, 3000.0)
}

pub fn i2() -> LinkParams {
    table1_link(200.0, 1500.0)
}

pub fn i4() -> LinkParams {
    table1_link(100.0, 750.0)
}

pub fn link(name: &str, params: LinkParams) -> Link {
    Link { name: name.into(), params }
}

pub fn node(name: &str, kind: NodeKind, incoming: &[&str], outgoing: &[&str]) -> NodeSpec {
    NodeSpec {
        name: name.into(),
        kind,
        incoming: incoming.iter().map(|s| s.to_string()).collect(),
        outgoing: outgoing.iter().map(|s| s.to_string()).collect(),
    }
}

pub fn origin(name: &str, profile: &str, link: &str) -> NodeSpec {
    node(name, NodeKind::Origin { profile: profile.into() }, &[], &[link])
}

pub fn destination(name: &str, link: &str, capacity: Option<&str>) -> NodeSpec {
    node(name, NodeKind::Destination { capacity_profile: capacity.map(String::from) }, &[link], &[])
}

/// Step profile from `(switch time, rate)` pairs.
pub fn steps(points: &[(f64, f64)]) -> StepProfile {
    StepProfile::new(points.iter().map(|p| p.0).collect(), points.iter().map(|p| p.1).collect()).unwrap()
}

pub fn single_link(params: LinkParams, capacity: bool) -> Network {
    Network::new(
        vec![link("L", params)],
        vec![origin("o", "in", "L"), destination("s", "L", capacity.then_some("cap"))],
    )
    .unwrap()
}

pub fn profiles(entries: &[(&str, StepProfile)]) -> Profiles {
    entries.iter().map(|(n, p)| (n.to_string(), p.clone())).collect()
}

/// A single-link or single-junction test problem.
pub struct Riemann {
    pub name: &'static str,
    pub network: Network,
    pub profiles: Profiles,
    pub horizon: f64,
}

/// Five Riemann-type problems: free transport, an exit bottleneck, a blocked
/// exit that spills back into an origin queue, a diverge with one branch
/// blocked and reopened, and a supply-limited merge.
pub fn riemann_scenarios() -> Vec<Riemann> {
    let t = THIRD;
    vec![
        Riemann {
            name: "transport",
            network: single_link(i1(), false),
            profiles: profiles(&[("in", steps(&[(0.0, 0.0), (t, 1500.0), (0.5 + t, 500.0), (1.0 + t, 0.0)]))]),
            horizon: 1.5,
        },
        Riemann {
            name: "bottleneck",
            network: single_link(i2(), true),
            profiles: profiles(&[
                ("in", steps(&[(0.0, 0.0), (t, 1200.0), (1.0 + t, 0.0)])),
                ("cap", steps(&[(0.0, 1500.0), (0.2, 600.0)])),
            ]),
            horizon: 2.5,
        },
        Riemann {
            name: "blocked exit",
            network: single_link(i4(), true),
            profiles: profiles(&[
                ("in", steps(&[(0.0, 0.0), (t, 600.0), (1.45, 0.0)])),
                ("cap", steps(&[(0.0, 750.0), (0.3, 0.0), (1.0, 750.0)])),
            ]),
            horizon: 2.5,
        },
        Riemann {
            name: "diverge",
            network: Network::new(
                vec![link("I1", i1()), link("I2", i2()), link("I3", i1())],
                vec![
                    origin("o", "in", "I1"),
                    node("a", NodeKind::Diverge { alpha: [0.5, 0.5] }, &["I1"], &["I2", "I3"]),
                    destination("s2", "I2", Some("cap")),
                    destination("s3", "I3", None),
                ],
            )
            .unwrap(),
            profiles: profiles(&[
                ("in", steps(&[(0.0, 0.0), (t, 2000.0)])),
                ("cap", steps(&[(0.0, 1500.0), (0.2, 0.0), (0.8, 1500.0)])),
            ]),
            horizon: 2.0,
        },
        Riemann {
            name: "merge",
            network: Network::new(
                vec![link("I3", i1()), link("I4", i4()), link("I6", i2())],
                vec![
                    origin("o3", "in3", "I3"),
                    origin("o4", "in4", "I4"),
                    node("c", NodeKind::Merge { priority: 0.5 }, &["I3", "I4"], &["I6"]),
                    destination("s", "I6", None),
                ],
            )
            .unwrap(),
            profiles: profiles(&[
                ("in3", steps(&[(0.0, 0.0), (t, 1200.0), (1.0 + t, 0.0)])),
                ("in4", steps(&[(0.0, 0.0), (t, 600.0), (1.0 + t, 0.0)])),
            ]),
            horizon: 2.5,
        },
    ]
}
