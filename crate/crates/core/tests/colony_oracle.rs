//! One-colony solutions against numerical ODE integration and Monte Carlo.

use frogline_core::colony::{sample_w, solve_mp1, solve_mp2, w_cdf, ConstantRate, ImmigrationSchedule, PiecewiseRate};
use frogline_core::rng::{open_unit, replica_stream};
use frogline_core::stats::{ks_one_sample, z_test};

/// RK4 for x1' = θ(t) − c·x1.
fn integrate(x1: f64, theta: impl Fn(f64) -> f64, c: f64, from: f64, to: f64) -> f64 {
    let n = 100_000;
    let h = (to - from) / n as f64;
    let f = |t: f64, x: f64| theta(t) - c * x;
    let mut x = x1;
    for k in 0..n {
        let t = from + k as f64 * h;
        let k1 = f(t, x);
        let k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
        let k4 = f(t + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    x
}

#[test]
fn constant_rate_with_emigration_matches_ode() {
    let theta = ConstantRate(1.0);
    let path = solve_mp2(0.0, 1.0, &theta, 1.0, 1.0, 5.0).unwrap();
    assert_eq!(path.tau(), Some(1.0));
    for t in [1.5, 2.0, 4.0] {
        let closed = 2.0 * (-(t - 1.0_f64)).exp() + (1.0 - (-(t - 1.0_f64)).exp());
        let ode = integrate(2.0, |_| 1.0, 1.0, 1.0, t);
        assert!((path.state_at(t).x1 - closed).abs() < 1e-12);
        assert!((path.state_at(t).x1 - ode).abs() < 1e-8);
    }
}

#[test]
fn piecewise_rate_matches_ode() {
    let theta = PiecewiseRate::new(vec![0.0, 0.5, 1.5], vec![2.0, 0.0, 0.7]).unwrap();
    let rate = |t: f64| {
        if t < 0.5 {
            2.0
        } else if t < 1.5 {
            0.0
        } else {
            0.7
        }
    };
    let path = solve_mp2(0.0, 0.5, &theta, 0.3, 0.8, 4.0).unwrap();
    assert_eq!(path.tau(), Some(0.4));
    let start = path.mass_at_wake().unwrap();
    assert!((start - 1.3).abs() < 1e-12);
    for t in [0.45, 1.0, 2.0, 3.7] {
        // Integrate knot to knot so the steps never straddle a rate change.
        let mut x = start;
        let mut a = 0.4;
        for b in [0.5, 1.5, f64::INFINITY] {
            let b = b.min(t);
            if b > a {
                // Constant on the open segment; sample it at the midpoint.
                let r = rate(0.5 * (a + b));
                x = integrate(x, |_| r, 0.3, a, b);
                a = b;
            }
        }
        let ode = x;
        assert!((path.state_at(t).x1 - ode).abs() < 1e-8, "t = {t}: {} vs {ode}", path.state_at(t).x1);
    }
    // Pathwise conservation with emigration: x1 + x2 = x2_0 + Θ − c∫x1.
    let t = 3.0;
    // h = 1e-5 puts the wake time on a cell edge.
    let n = 300_000;
    let h = t / n as f64;
    let integral: f64 = (0..n).map(|k| path.state_at((k as f64 + 0.5) * h).x1 * h).sum();
    let s = path.state_at(t);
    assert!((s.x1 + s.x2 - (0.5 + theta.cumulative(t) - 0.3 * integral)).abs() < 1e-6);
}

#[test]
fn mp1_conservation_and_single_jump() {
    let path = solve_mp1(1.0, 2.0, 5.0).unwrap();
    assert_eq!(path.tau(), Some(2.0));
    for s in path.trajectory(500) {
        assert!((s.x1 + s.x2 - (1.0 + s.time)).abs() < 1e-12);
        assert!(s.x1 * s.x2 == 0.0);
    }
    assert_eq!(path.state_at(1.999).x2, 2.999);
    assert_eq!(path.state_at(2.0).x2, 0.0);
    assert_eq!(path.state_at(2.0).x1, 3.0);
}

#[test]
fn w_scaling_is_exact() {
    for u in [0.01, 0.3, 0.5, 0.77, 0.999] {
        for lambda in [0.5, 2.0, 8.0] {
            assert_eq!(sample_w(lambda * 1.0, u).unwrap(), lambda * sample_w(1.0, u).unwrap());
        }
    }
}

#[test]
fn w_law_and_martingale() {
    let mut rng = replica_stream(21, 0);
    let ws: Vec<f64> = (0..100_000).map(|_| sample_w(1.0, open_unit(&mut rng)).unwrap()).collect();
    assert!(ks_one_sample("W(1)", &ws, |r| w_cdf(1.0, r), 0.01).unwrap().pass);

    for t in [0.5, 1.0, 2.0] {
        let x2: Vec<f64> = ws[..10_000].iter().map(|w| solve_mp1(1.0, *w, t).unwrap().state_at(t).x2).collect();
        let rep = z_test("E x2", &x2, 1.0, 3.0).unwrap();
        assert!(rep.pass, "t = {t}: z = {:?}", rep.z_score);
    }
}
