//! Continuous-time link transmission model for first-order kinematic-wave
//! traffic on networks of merge and diverge junctions.
//!
//! Link dynamics are carried by the cumulative vehicle counts at the two ends
//! of every link; the count field inside a link, its separating shock and any
//! spillback are recovered from those boundary curves alone.

pub mod curve;
pub mod engine;
pub mod fd;
pub mod io;
pub mod junction;
pub mod link;
pub mod network;
pub mod oracles;
pub mod profile;

pub use curve::CumulativeCurve;
pub use engine::{run, SimConfig, SimError, SimOutput};
pub use fd::{LinkParams, Regime, TrafficState};
pub use link::LinkState;
pub use network::{LinkId, Network, NodeId, NodeKind};
pub use profile::StepProfile;
