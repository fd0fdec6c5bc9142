//! Demand-supply Riemann solvers for the two elementary junctions.
//!
//! Both solvers maximise the flow through the node subject to the demands of
//! the incoming links and the supplies of the outgoing links. The diverge keeps
//! the turning fractions fixed (first in, first out); the merge, whose
//! flux-maximising set is generally a segment, picks the point of that segment
//! closest to the right-of-way line.

/// Exit flows of the incoming links and entry flows of the outgoing links.
#[derive(Debug, Clone, PartialEq)]
pub struct JunctionFlows {
    /// One entry per incoming link, in node order.
    pub exits: Vec<f64>,
    /// One entry per outgoing link, in node order.
    pub entries: Vec<f64>,
}

impl JunctionFlows {
    pub fn total(&self) -> f64 {
        self.exits.iter().sum()
    }

    pub fn zero(incoming: usize, outgoing: usize) -> Self {
        Self { exits: vec![0.0; incoming], entries: vec![0.0; outgoing] }
    }
}

/// One incoming link (demand `demand`) splitting into two outgoing links.
///
/// A zero turning fraction removes the corresponding supply from the minimum.
pub fn solve_diverge(demand: f64, supply_a: f64, supply_b: f64, alpha: [f64; 2]) -> JunctionFlows {
    let bound = |supply: f64, fraction: f64| if fraction > 0.0 { supply / fraction } else { f64::INFINITY };
    let through = demand.min(bound(supply_a, alpha[0])).min(bound(supply_b, alpha[1])).max(0.0);
    JunctionFlows { exits: vec![through], entries: vec![alpha[0] * through, alpha[1] * through] }
}

/// Two incoming links (demands `demand_a`, `demand_b`) merging into one.
///
/// When the supply binds the exits satisfy `q_b = priority * q_a` unless that
/// would exceed one of the demands, in which case the other link takes the
/// remaining supply.
pub fn solve_merge(demand_a: f64, demand_b: f64, supply: f64, priority: f64) -> JunctionFlows {
    let (qa, qb) = if demand_a + demand_b <= supply {
        (demand_a, demand_b)
    } else {
        let qa = supply / (1.0 + priority);
        let qb = priority * supply / (1.0 + priority);
        if qa > demand_a {
            (demand_a, supply - demand_a)
        } else if qb > demand_b {
            (supply - demand_b, demand_b)
        } else {
            (qa, qb)
        }
    };
    JunctionFlows { exits: vec![qa, qb], entries: vec![qa + qb] }
}
