//! Brute-force grid search over the feasible flows of a junction.
//!
//! Slow and independent of the closed forms in [`crate::junction`]; meant for
//! tests only. Candidate coordinates are a uniform grid plus the vertices of
//! the feasible polytope, so exact optima on a vertex are always found.

use crate::junction::JunctionFlows;

/// Relative slack when comparing candidate totals against the best one.
const TOTAL_SLACK: f64 = 1e-9;

fn axis(upper: f64, resolution: f64, extra: &[f64]) -> Vec<f64> {
    let mut values = Vec::new();
    if resolution > 0.0 {
        let n = (upper / resolution).floor() as usize;
        values.extend((0..=n).map(|i| i as f64 * resolution));
    }
    values.push(0.0);
    values.push(upper);
    values.extend(extra.iter().copied().filter(|v| (0.0..=upper).contains(v)));
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// Largest through flow of a diverge on a grid of step `resolution`.
pub fn lp_diverge(demand: f64, supply_a: f64, supply_b: f64, alpha: [f64; 2], resolution: f64) -> JunctionFlows {
    let mut vertices = vec![demand];
    for (s, a) in [(supply_a, alpha[0]), (supply_b, alpha[1])] {
        if a > 0.0 {
            vertices.push(s / a);
        }
    }
    let feasible = |q: f64| alpha[0] * q <= supply_a * (1.0 + 1e-12) && alpha[1] * q <= supply_b * (1.0 + 1e-12);
    let best = axis(demand, resolution, &vertices).into_iter().filter(|&q| feasible(q)).fold(0.0, f64::max);
    JunctionFlows { exits: vec![best], entries: vec![alpha[0] * best, alpha[1] * best] }
}

/// Flux-maximising merge flows on a grid of step `resolution`; ties go to the
/// point closest to the line `q_b = priority * q_a`.
pub fn lp_merge(demand_a: f64, demand_b: f64, supply: f64, priority: f64, resolution: f64) -> JunctionFlows {
    let xs = axis(demand_a, resolution, &[supply - demand_b, supply]);
    let mut ys_extra: Vec<f64> = xs.iter().map(|x| supply - x).collect();
    ys_extra.push(supply - demand_a);
    let ys = axis(demand_b, resolution, &ys_extra);

    let mut candidates = Vec::new();
    for &x in &xs {
        for &y in &ys {
            if x + y <= supply * (1.0 + 1e-12) + 1e-12 {
                candidates.push((x, y));
            }
        }
    }
    let best_total = candidates.iter().map(|(x, y)| x + y).fold(0.0, f64::max);
    let slack = TOTAL_SLACK * best_total.max(1.0);
    let norm = (1.0 + priority * priority).sqrt();
    let (qa, qb) = candidates
        .into_iter()
        .filter(|(x, y)| x + y >= best_total - slack)
        .min_by(|a, b| {
            let da = (a.1 - priority * a.0).abs() / norm;
            let db = (b.1 - priority * b.0).abs() / norm;
            da.total_cmp(&db)
        })
        .unwrap_or((0.0, 0.0));
    JunctionFlows { exits: vec![qa, qb], entries: vec![qa + qb] }
}
