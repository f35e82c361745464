//! Killed heat flow against the reflection-principle survival mass.

use frogline_core::heat::{atom_state, normal_cdf, survival_mass_analytic, KilledHeatState};
use frogline_core::rng::replica_stream;
use rand_distr::{Distribution, StandardNormal};

fn advance(state: &mut KilledHeatState, until: f64, dt: f64) {
    while state.time() < until - 1e-12 {
        let h = dt.min(until - state.time());
        state.step(h).unwrap();
    }
}

#[test]
fn analytic_values() {
    assert_eq!(survival_mass_analytic(0.0, 0.0, 1.0).unwrap(), 0.0);
    assert_eq!(survival_mass_analytic(-0.3, 0.0, 0.0).unwrap(), 1.0);
    let expected = 2.0 * normal_cdf(1.0) - 1.0;
    assert!((survival_mass_analytic(-1.0, 0.0, 1.0).unwrap() - expected).abs() < 1e-15);
    assert!((expected - 0.682_689_492_137_086).abs() < 1e-12);
    assert!(survival_mass_analytic(1.0, 0.0, 1.0).is_err());
}

#[test]
fn survival_matches_reflection_principle() {
    // dx = 1e-3, left wall far enough away to be invisible.
    let dx = 1e-3;
    for (t, dt) in [(0.01, 2e-6), (0.1, 2e-5), (1.0, 1e-4)] {
        for d in [0.05, 0.2, 1.0] {
            let mut s = atom_state(-d, 1.0, -8.0, 0.0, dx, 0.0).unwrap();
            advance(&mut s, t, dt);
            let exact = survival_mass_analytic(-d, 0.0, t).unwrap();
            let err = (s.mass() - exact).abs();
            assert!(err <= 1e-4, "t = {t}, d = {d}: numeric {} vs exact {exact} (err {err:.2e})", s.mass());
            assert!((s.mass() + s.killed_cum() - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn unit_time_example() {
    let mut s = atom_state(-1.0, 1.0, -8.0, 0.0, 1e-3, 0.0).unwrap();
    advance(&mut s, 1.0, 1e-4);
    assert!((s.killed_cum() - 0.317_311).abs() < 1e-4);
    assert!((s.mass() - 0.682_689).abs() < 1e-4);
}

#[test]
fn random_walk_monte_carlo_agrees() {
    // Gaussian random walk with the first-order correction for discrete
    // monitoring: the barrier is pulled in by 0.5826·√h.
    let steps = 1000;
    let h: f64 = 1.0 / steps as f64;
    let paths = 100_000;
    let barrier = 1.0 - 0.5826 * h.sqrt();
    let mut rng = replica_stream(11, 0);
    let mut alive = 0usize;
    'path: for _ in 0..paths {
        let mut x = 0.0f64;
        for _ in 0..steps {
            let g: f64 = StandardNormal.sample(&mut rng);
            x += g * h.sqrt();
            if x >= barrier {
                continue 'path;
            }
        }
        alive += 1;
    }
    let p = alive as f64 / paths as f64;
    let exact = survival_mass_analytic(-1.0, 0.0, 1.0).unwrap();
    let se = (exact * (1.0 - exact) / paths as f64).sqrt();
    assert!((p - exact).abs() < 4.0 * se, "monte carlo {p} vs {exact}");
}

#[test]
fn conservation_drift_per_unit_time() {
    let mut s = atom_state(-0.5, 1.0, -6.0, 0.0, 1e-3, 0.0).unwrap();
    advance(&mut s, 1.0, 1e-3);
    assert!((s.mass() + s.killed_cum() - 1.0).abs() <= 1e-6);
    let mut free = atom_state(-0.5, 1.0, -6.0, 6.0, 1e-3, f64::INFINITY).unwrap();
    advance(&mut free, 1.0, 1e-3);
    assert!((free.mass() - 1.0).abs() <= 1e-10);
}

#[test]
fn barrier_move_stops_old_killing() {
    let mut s = atom_state(-0.2, 1.0, -4.0, 1.0, 1e-3, 0.0).unwrap();
    advance(&mut s, 0.1, 1e-4);
    let before = s.mass();
    s.reset_killed();
    let mut stay = s.clone();
    s.set_barrier(0.5).unwrap();
    advance(&mut s, 0.2, 1e-4);
    advance(&mut stay, 0.2, 1e-4);
    assert!(s.killed_cum() < 0.1 * stay.killed_cum());
    assert!((s.mass() + s.killed_cum() - before).abs() < 1e-10);
    let grid = &s.profile().density;
    let nb = grid.edge_index(0.5).unwrap();
    assert!(grid.values()[nb..].iter().all(|v| *v == 0.0));
}
