//! The space-indexed description of the front.
//!
//! `J` is a Poisson process on space × marks with intensity `f(z) dz ⊗ r⁻² dr`.
//! Only points with `r >= r_min` can be sampled, since the mark intensity is
//! not integrable at zero; every statement below is exact above that band.
//!
//! Grouping the points of `J` into the cells `((i−1)η, iη]` yields wake
//! thresholds
//!
//! ```text
//! Wᵢ = sup { r − μ([(i−1)η, z)) : (z, r) ∈ J, z ∈ ((i−1)η, iη] }
//! ```
//!
//! which are independent with `P[Wᵢ >= r] = xᵢ / (xᵢ + r)`. The front started
//! by wake mass `s` stalls at the first point with `r > s + μ([0, z))`.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, Result};
use crate::measures::{GridDensity, Measure};
use crate::rng::open_unit;

/// Finite set of `(z, r)` points, sorted by `z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointPattern {
    points: Vec<(f64, f64)>,
    /// Marks below this level were not sampled.
    r_min: f64,
}

impl PointPattern {
    pub fn from_points(mut points: Vec<(f64, f64)>, r_min: f64) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        PointPattern { points, r_min }
    }

    pub fn empty(r_min: f64) -> Self {
        PointPattern { points: Vec::new(), r_min }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points inside `rect`.
    pub fn count(&self, rect: &Rect) -> usize {
        self.points.iter().filter(|(z, r)| rect.contains(*z, *r)).count()
    }
}

/// `[x1, x2] × [s, s_hi)` in space × marks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x1: f64,
    pub x2: f64,
    pub s: f64,
    #[serde(default = "infinity")]
    pub s_hi: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}

impl Rect {
    /// `[x1, x2] × [s, ∞)`.
    pub fn upper(x1: f64, x2: f64, s: f64) -> Self {
        Rect { x1, x2, s, s_hi: f64::INFINITY }
    }

    pub fn contains(&self, z: f64, r: f64) -> bool {
        self.x1 <= z && z <= self.x2 && self.s <= r && r < self.s_hi
    }

    /// `∫_C f(z) r⁻² dz dr`.
    pub fn intensity(&self, f: &GridDensity) -> Result<f64> {
        let mark = 1.0 / self.s - if self.s_hi.is_finite() { 1.0 / self.s_hi } else { 0.0 };
        Ok(f.measure_of_interval(self.x1, self.x2, crate::measures::IntervalEnds::Closed)? * mark)
    }
}

/// Samples `J` restricted to marks `r >= r_min`.
pub fn sample_j<R: Rng + ?Sized>(f: &GridDensity, r_min: f64, rng: &mut R) -> Result<PointPattern> {
    if !(r_min > 0.0 && r_min.is_finite()) {
        bail_arg!("r_min must be positive (got {r_min})");
    }
    let cum = f.cumulative();
    let total = cum.total();
    if !(total > 0.0) {
        return Ok(PointPattern::empty(r_min));
    }
    let mean = total / r_min;
    let poisson = match Poisson::new(mean) {
        Ok(p) => p,
        Err(_) => bail_arg!("point count mean {mean} is out of range"),
    };
    let n = poisson.sample(rng) as usize;
    let points = (0..n)
        .map(|_| {
            let z = cum.quantile(open_unit(rng) * total);
            let r = r_min / open_unit(rng);
            (z, r)
        })
        .collect();
    Ok(PointPattern::from_points(points, r_min))
}

/// One threshold built from `J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuiltW {
    pub value: f64,
    /// Set when the true value may depend on points below `r_min`; `value`
    /// is then 0.
    pub censored: bool,
}

/// Thresholds `Wᵢ`, `i = 1..⌈R/η⌉`, with `R` the right end of `mu`'s grid.
pub fn build_w_from_j(j: &PointPattern, mu: &GridDensity, eta: f64) -> Result<Vec<BuiltW>> {
    if !(eta > 0.0 && eta.is_finite()) {
        bail_arg!("eta must be positive (got {eta})");
    }
    let n = GridDensity::cells_between(0.0, mu.right(), eta);
    let cum = mu.cumulative();
    let mut best = alloc::vec![f64::NEG_INFINITY; n];
    for &(z, r) in j.points() {
        let i = libm::ceil(z / eta) as i64;
        if i < 1 || i as usize > n {
            continue;
        }
        let i = i as usize;
        let left = (i - 1) as f64 * eta;
        let v = r - cum.between(left, z);
        if v > best[i - 1] {
            best[i - 1] = v;
        }
    }
    // A missing point has r < r_min and so contributes less than r_min.
    Ok(best
        .into_iter()
        .map(|v| if v >= j.r_min() { BuiltW { value: v, censored: false } } else { BuiltW { value: 0.0, censored: true } })
        .collect())
}

/// Where the front started by wake mass `s` stalls: the first `z` with
/// `r > s + μ([0, z))`, or the right end of `mu`'s support.
pub fn ustar_from_j(j: &PointPattern, s: f64, mu: &GridDensity) -> Result<f64> {
    if !(s > j.r_min()) {
        bail_arg!("s = {s} must exceed r_min = {}: censored points could trigger the stall", j.r_min());
    }
    let cum = mu.cumulative();
    for &(z, r) in j.points() {
        if r > s + cum.between(0.0, z) {
            return Ok(z);
        }
    }
    Ok(mu.support().map_or(mu.right(), |(_, hi)| hi))
}

/// Counts of one rectangle under `J` and under each `J^η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectCounts {
    pub rect: Rect,
    pub j: usize,
    /// One entry per `η`, in the order given.
    pub j_eta: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub etas: Vec<f64>,
    pub rects: Vec<RectCounts>,
}

impl CouplingReport {
    /// Whether every `J^η` count at `η <= eta_max` equals the `J` count.
    pub fn agrees_below(&self, eta_max: f64) -> bool {
        self.rects.iter().all(|rc| self.etas.iter().zip(&rc.j_eta).filter(|(eta, _)| **eta <= eta_max).all(|(_, c)| *c == rc.j))
    }
}

/// Builds `J^η = {(iη, Wᵢ)}` from one sample of `J` for each `η` and
/// compares rectangle counts.
pub fn coupling_convergence_report(j: &PointPattern, f: &GridDensity, etas: &[f64], rects: &[Rect]) -> Result<CouplingReport> {
    if let Some(r) = rects.iter().find(|r| !(r.s >= 2.0 * j.r_min()) || !(r.x1 <= r.x2) || !(r.s < r.s_hi)) {
        bail_arg!("rectangle {r:?} is empty or reaches into the censoring band below 2 r_min = {}", 2.0 * j.r_min());
    }
    let mut out: Vec<RectCounts> =
        rects.iter().map(|rect| RectCounts { rect: *rect, j: j.count(rect), j_eta: Vec::with_capacity(etas.len()) }).collect();
    for &eta in etas {
        let w = build_w_from_j(j, f, eta)?;
        for rc in &mut out {
            let c = w.iter().enumerate().filter(|(i, b)| !b.censored && rc.rect.contains((i + 1) as f64 * eta, b.value)).count();
            rc.j_eta.push(c);
        }
    }
    Ok(CouplingReport { etas: etas.to_vec(), rects: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_stream;
    use approx::assert_relative_eq;

    fn unit() -> GridDensity {
        GridDensity::uniform(0.0, 1.0, 0.01, 1.0).unwrap()
    }

    #[test]
    fn w_from_j_examples() {
        let j = PointPattern::from_points(alloc::vec![(0.3, 0.9)], 1e-4);
        let w = build_w_from_j(&j, &unit(), 0.5).unwrap();
        assert_eq!(w.len(), 2);
        assert_relative_eq!(w[0].value, 0.6, max_relative = 1e-12);
        assert!(!w[0].censored);
        assert_eq!(w[1], BuiltW { value: 0.0, censored: true });

        let j = PointPattern::from_points(alloc::vec![(0.4, 2.0), (0.1, 1.0)], 1e-4);
        let w = build_w_from_j(&j, &unit(), 0.5).unwrap();
        assert_relative_eq!(w[0].value, 1.6, max_relative = 1e-12);
    }

    #[test]
    fn ustar_examples() {
        let j = PointPattern::from_points(alloc::vec![(0.3, 0.9), (0.6, 2.0)], 1e-4);
        assert_eq!(ustar_from_j(&j, 0.5, &unit()).unwrap(), 0.3);
        assert_eq!(ustar_from_j(&PointPattern::empty(1e-4), 0.5, &unit()).unwrap(), 1.0);
        assert!(ustar_from_j(&j, 1e-4, &unit()).is_err());
        let mut last = 0.0;
        for k in 1..40 {
            let u = ustar_from_j(&j, 0.05 * k as f64, &unit()).unwrap();
            assert!(u >= last);
            last = u;
        }
    }

    #[test]
    fn sample_j_edge_cases() {
        let mut rng = replica_stream(5, 0);
        assert!(sample_j(&unit(), 0.0, &mut rng).is_err());
        let zero = GridDensity::zeros(0.0, 0.01, 100).unwrap();
        assert!(sample_j(&zero, 0.1, &mut rng).unwrap().is_empty());
        let j = sample_j(&unit(), 0.1, &mut rng).unwrap();
        assert!(j.points().iter().all(|(z, r)| (0.0..=1.0).contains(z) && *r >= 0.1));
        assert!(j.points().windows(2).all(|w| w[0].0 <= w[1].0));
    }

    #[test]
    fn sample_j_mean_count() {
        let mut rng = replica_stream(6, 0);
        let n = 4000;
        let total: usize = (0..n).map(|_| sample_j(&unit(), 0.1, &mut rng).unwrap().len()).sum();
        let mean = total as f64 / n as f64;
        // Poisson(10): standard error sqrt(10 / n) = 0.05.
        assert!((mean - 10.0).abs() < 0.25, "mean {mean}");
    }

    #[test]
    fn coupling_single_point() {
        let j = PointPattern::from_points(alloc::vec![(0.314, 0.7)], 1e-4);
        let rect = Rect::upper(0.2, 0.4, 0.5);
        let etas = [0.05, 0.02, 0.01, 0.005];
        let rep = coupling_convergence_report(&j, &unit(), &etas, &[rect]).unwrap();
        assert_eq!(rep.rects[0].j, 1);
        assert_eq!(rep.rects[0].j_eta, alloc::vec![1; 4]);
        assert!(rep.agrees_below(0.05));

        let empty = PointPattern::empty(1e-4);
        let rep = coupling_convergence_report(&empty, &unit(), &etas, &[rect]).unwrap();
        assert!(rep.rects[0].j_eta.iter().all(|c| *c == 0));

        assert!(coupling_convergence_report(&j, &unit(), &etas, &[Rect::upper(0.2, 0.4, 1e-4)]).is_err());
    }
}
