//! Laws of the sampled Poisson process and of the thresholds built from it.

use frogline_core::colony::w_cdf;
use frogline_core::measures::GridDensity;
use frogline_core::ppp::{build_w_from_j, sample_j, Rect};
use frogline_core::rng::replica_stream;
use frogline_core::stats::{correlation, ks_one_sample, poisson_count_test};

#[test]
fn marks_have_inverse_square_tail() {
    let f = GridDensity::uniform(0.0, 1.0, 0.01, 1.0).unwrap();
    let mut rng = replica_stream(51, 0);
    let mut marks = Vec::new();
    while marks.len() < 100_000 {
        marks.extend(sample_j(&f, 0.1, &mut rng).unwrap().points().iter().map(|p| p.1));
    }
    marks.truncate(100_000);
    let rep = ks_one_sample("r", &marks, |c| if c < 0.1 { 0.0 } else { 1.0 - 0.1 / c }, 0.01).unwrap();
    assert!(rep.pass, "{rep:?}");
}

#[test]
fn rectangle_counts_are_poisson() {
    let f = GridDensity::from_fn(0.0, 1.0, 0.01, |z| 2.0 * z).unwrap();
    let rects = [Rect::upper(0.0, 0.5, 0.05), Rect::upper(0.5, 1.0, 0.2), Rect { x1: 0.2, x2: 0.9, s: 0.01, s_hi: 0.03 }];
    let mut counts = vec![Vec::new(); rects.len()];
    for rep in 0..10_000 {
        let mut rng = replica_stream(52, rep);
        let j = sample_j(&f, 0.005, &mut rng).unwrap();
        for (c, r) in counts.iter_mut().zip(&rects) {
            c.push(j.count(r) as u64);
        }
    }
    for (c, r) in counts.iter().zip(&rects) {
        let mean = r.intensity(&f).unwrap();
        let rep = poisson_count_test("count", c, mean, 0.01 / 3.0).unwrap();
        assert!(rep.pass, "{r:?}: {rep:?}");
    }
}

#[test]
fn thresholds_have_the_w_tail_and_are_independent() {
    let eta = 0.05;
    let f = GridDensity::uniform(0.0, 0.1, 0.01, 1.0).unwrap();
    let n = 100_000;
    let r_min = 1e-3;
    let levels = [2e-3, 1e-2, 5e-2, 0.2];
    let mut above = [[0usize; 4]; 2];
    let mut pairs = (Vec::new(), Vec::new());
    for rep in 0..n {
        let mut rng = replica_stream(53, rep);
        let j = sample_j(&f, r_min, &mut rng).unwrap();
        let w = build_w_from_j(&j, &f, eta).unwrap();
        assert_eq!(w.len(), 2);
        for (i, b) in w.iter().enumerate() {
            for (k, r) in levels.iter().enumerate() {
                if !b.censored && b.value >= *r {
                    above[i][k] += 1;
                }
            }
        }
        if !w[0].censored && !w[1].censored {
            pairs.0.push(w_cdf(eta, w[0].value));
            pairs.1.push(w_cdf(eta, w[1].value));
        }
    }
    for cell in above {
        for (k, r) in levels.iter().enumerate() {
            let p = eta / (eta + r);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let got = cell[k] as f64 / n as f64;
            assert!((got - p).abs() <= 3.0 * se, "r = {r}: {got} vs {p}");
        }
    }
    let rho = correlation(&pairs.0, &pairs.1).unwrap();
    assert!(rho.abs() <= 3.0 / (pairs.0.len() as f64).sqrt(), "rho = {rho}");
}
