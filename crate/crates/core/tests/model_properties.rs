//! Randomised invariants of the fundamental diagram, boundary curves and junction solvers.

use proptest::prelude::*;

use kinewave::curve::CumulativeCurve;
use kinewave::fd::{LinkParams, TrafficState};
use kinewave::junction::{solve_diverge, solve_merge};

fn params() -> impl Strategy<Value = LinkParams> {
    (50.0..500.0f64, 5.0..60.0f64, 2.0..30.0f64, 0.5..5.0f64)
        .prop_map(|(rho, k, w, l)| LinkParams::new(rho, k, w, LinkParams::consistent_capacity(rho, k, w), l).unwrap())
}

proptest! {
    #[test]
    fn density_round_trips_through_state(p in params(), frac in 0.0..=1.0f64) {
        let rho = frac * p.rho_jam;
        let state = p.state_at_density(rho).unwrap();
        prop_assert!((p.psi(state).unwrap() - rho).abs() <= 1e-9 * p.rho_jam);
        prop_assert!(state.q <= p.capacity * (1.0 + 1e-12));
    }

    #[test]
    fn demand_and_supply_bracket_the_flow(p in params(), frac in 0.0..=1.0f64) {
        let state = p.state_at_density(frac * p.rho_jam).unwrap();
        prop_assert!(p.sending(state) >= state.q && p.receiving(state) >= state.q);
        prop_assert!(p.sending(state).min(p.receiving(state)) == state.q || (state.q - p.capacity).abs() < 1e-9);
    }

    #[test]
    fn shock_speeds_lie_between_the_wave_speeds(p in params(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let l = p.state_at_density(a * p.rho_jam).unwrap();
        let r = p.state_at_density(b * p.rho_jam).unwrap();
        let s = p.shock_speed(l, r).unwrap();
        prop_assert!(s >= -p.w - 1e-9 && s <= p.k + 1e-9);
    }

    #[test]
    fn legendre_is_the_supremum(p in params(), u_frac in 0.0..=1.0f64) {
        let u = (-p.w + u_frac * (p.k + p.w)).clamp(-p.w, p.k);
        let exact = p.legendre(u).unwrap();
        let sampled = (0..=400).map(|i| {
            let rho = (p.rho_jam * i as f64 / 400.0).min(p.rho_jam);
            p.flux(rho).unwrap() - u * rho
        }).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(exact >= sampled - 1e-6 * p.capacity);
    }

    #[test]
    fn appended_curves_stay_monotone_and_lipschitz(rates in prop::collection::vec(0.0..=1.0f64, 1..40)) {
        let cap = 1500.0;
        let mut curve = CumulativeCurve::new(cap);
        for (i, r) in rates.iter().enumerate() {
            curve.append((i + 1) as f64 * 0.05, r * cap).unwrap();
        }
        for w in curve.counts().windows(2) {
            prop_assert!(w[1] >= w[0] && w[1] - w[0] <= cap * 0.05 + 1e-9);
        }
        let t = 0.05 * rates.len() as f64 * 0.37;
        let n = curve.eval(t);
        prop_assert!(n >= 0.0 && n <= curve.last_count());
    }

    #[test]
    fn diverge_conserves_and_respects_bounds(d in 0.0..3000.0f64, sa in 0.0..3000.0f64, sb in 0.0..3000.0f64, a in 0.0..=1.0f64) {
        let f = solve_diverge(d, sa, sb, [a, 1.0 - a]);
        prop_assert!((f.exits[0] - f.entries.iter().sum::<f64>()).abs() <= 1e-9 * d.max(1.0));
        prop_assert!(f.exits[0] >= 0.0 && f.exits[0] <= d);
        prop_assert!(f.entries[0] <= sa + 1e-9 && f.entries[1] <= sb + 1e-9);
        if f.exits[0] > 0.0 && a > 0.0 && a < 1.0 {
            prop_assert!((f.entries[0] * (1.0 - a) - f.entries[1] * a).abs() <= 1e-9 * d);
        }
    }

    #[test]
    fn merge_conserves_and_respects_bounds(da in 0.0..3000.0f64, db in 0.0..3000.0f64, s in 0.0..3000.0f64, p in 0.01..0.99f64) {
        let f = solve_merge(da, db, s, p);
        prop_assert!((f.total() - f.entries[0]).abs() <= 1e-9 * s.max(1.0));
        prop_assert!(f.exits[0] >= 0.0 && f.exits[0] <= da + 1e-9);
        prop_assert!(f.exits[1] >= 0.0 && f.exits[1] <= db + 1e-9);
        prop_assert!(f.entries[0] <= s + 1e-9);
        prop_assert!((f.total() - (da + db).min(s)).abs() <= 1e-9 * s.max(1.0));
        if da + db > s && s / (1.0 + p) <= da && p * s / (1.0 + p) <= db {
            prop_assert!((f.exits[1] - p * f.exits[0]).abs() <= 1e-9 * s);
        }
    }

    #[test]
    fn through_flux_is_monotone_in_every_input(
        x in prop::array::uniform4(0.0..3000.0f64),
        bump in 0.0..500.0f64,
        which in 0usize..4,
        a in 0.0..=1.0f64,
    ) {
        let mut y = x;
        y[which] += bump;
        let div = |v: [f64; 4]| solve_diverge(v[0], v[1], v[2], [a, 1.0 - a]).total();
        let mer = |v: [f64; 4]| solve_merge(v[0], v[1], v[2], 0.05 + 0.9 * a).total();
        prop_assert!(div(y) >= div(x) - 1e-9);
        prop_assert!(mer(y) >= mer(x) - 1e-9);
    }

    #[test]
    fn solvers_have_no_hidden_state(d in 0.0..3000.0f64, s in 0.0..3000.0f64) {
        let first = (solve_diverge(d, s, s, [0.3, 0.7]), solve_merge(d, s, s, 0.4));
        for _ in 0..3 {
            solve_merge(s, d, d, 0.9);
        }
        let again = (solve_diverge(d, s, s, [0.3, 0.7]), solve_merge(d, s, s, 0.4));
        prop_assert_eq!(first, again);
    }
}

#[test]
fn merge_exits_are_not_monotone_in_the_competing_demand() {
    // Raising the second demand takes supply away from the first link once the clamp releases.
    let low = solve_merge(800.0, 200.0, 900.0, 0.5);
    let high = solve_merge(800.0, 300.0, 900.0, 0.5);
    assert_eq!(low.exits[0], 700.0);
    assert_eq!(high.exits[0], 600.0);
    assert!(high.total() >= low.total());
}

#[test]
fn capacity_state_sits_on_both_branches() {
    let p = LinkParams::new(400.0, 30.0, 10.0, 3000.0, 3.0).unwrap();
    let free = p.psi(TrafficState::free(3000.0)).unwrap();
    let congested = p.psi(TrafficState::congested(3000.0)).unwrap();
    assert!((free - congested).abs() < 1e-12);
}
