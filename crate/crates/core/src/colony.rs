//! One dormant colony fed by a deterministic immigration schedule.
//!
//! A colony holds `x2_0` dormant frogs. Wake frogs arrive according to a
//! cumulative schedule `Θ((0, t])`; while the colony sleeps every arrival
//! falls asleep and `x2` grows. The colony wakes the first time the arrivals
//! reach a random threshold `W(x2_0)` with `P[W > r] = x2_0 / (x2_0 + r)`.
//! From then on `x2 = 0` and `x1` solves `∂ₜx1 = θₜ − c·x1` started from
//! everything accumulated at the wake time.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, Result};

/// Inverse-CDF draw of the wake threshold for a pile of size `x`:
/// `W = x·u / (1 − u)`.
pub fn sample_w(x: f64, u: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        bail_arg!("pile size must be positive (got {x})");
    }
    if !(u > 0.0 && u < 1.0) {
        bail_arg!("uniform draw must lie in (0, 1) (got {u})");
    }
    Ok(x * u / (1.0 - u))
}

/// `P[W(x) <= r] = r / (x + r)`.
pub fn w_cdf(x: f64, r: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else if r == f64::INFINITY {
        1.0
    } else {
        r / (x + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColonyState {
    pub x1: f64,
    pub x2: f64,
    pub time: f64,
}

/// A continuous, nondecreasing cumulative immigration `t ↦ Θ((0, t])`.
pub trait ImmigrationSchedule {
    fn cumulative(&self, t: f64) -> f64;

    /// `inf{t >= 0 : Θ((0, t]) >= level}`, or `None` if never reached.
    fn first_passage(&self, level: f64) -> Option<f64>;

    /// `∫_(from, to] e^{−c(to − s)} Θ(ds)`.
    fn discounted(&self, c: f64, from: f64, to: f64) -> f64;
}

/// Immigration at a constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantRate(pub f64);

impl ImmigrationSchedule for ConstantRate {
    fn cumulative(&self, t: f64) -> f64 {
        self.0 * t
    }

    fn first_passage(&self, level: f64) -> Option<f64> {
        if level <= 0.0 {
            Some(0.0)
        } else if self.0 > 0.0 {
            Some(level / self.0)
        } else {
            None
        }
    }

    fn discounted(&self, c: f64, from: f64, to: f64) -> f64 {
        self.0 * discount_factor(c, to - from)
    }
}

/// `∫_0^h e^{−c s} ds`.
fn discount_factor(c: f64, h: f64) -> f64 {
    if c == 0.0 {
        h
    } else {
        -libm::expm1(-c * h) / c
    }
}

/// Piecewise-constant immigration rate: `rates[k]` applies on
/// `[knots[k], knots[k+1])`, and the last rate continues forever.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseRate {
    knots: Vec<f64>,
    rates: Vec<f64>,
    /// `Θ((0, knots[k]])`.
    levels: Vec<f64>,
}

impl PiecewiseRate {
    pub fn new(knots: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots[0] != 0.0 || knots.len() != rates.len() {
            bail_arg!("need one rate per knot and a first knot at 0");
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            bail_arg!("knots must be strictly increasing");
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            bail_arg!("rates must be finite and nonnegative");
        }
        let mut levels = Vec::with_capacity(knots.len());
        levels.push(0.0);
        for k in 1..knots.len() {
            levels.push(levels[k - 1] + rates[k - 1] * (knots[k] - knots[k - 1]));
        }
        Ok(PiecewiseRate { knots, rates, levels })
    }

    fn segment(&self, t: f64) -> usize {
        self.knots.partition_point(|k| *k <= t).saturating_sub(1)
    }
}

impl ImmigrationSchedule for PiecewiseRate {
    fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.segment(t);
        self.levels[k] + self.rates[k] * (t - self.knots[k])
    }

    fn first_passage(&self, level: f64) -> Option<f64> {
        if level <= 0.0 {
            return Some(0.0);
        }
        // First segment whose end level reaches `level`.
        for k in 0..self.knots.len() {
            let end_level = match self.knots.get(k + 1) {
                Some(_) => self.levels[k + 1],
                None => f64::INFINITY,
            };
            if end_level >= level {
                if self.rates[k] == 0.0 {
                    return None;
                }
                return Some(self.knots[k] + (level - self.levels[k]) / self.rates[k]);
            }
        }
        None
    }

    fn discounted(&self, c: f64, from: f64, to: f64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let mut total = 0.0;
        let mut a = from;
        let mut k = self.segment(from);
        while a < to {
            let b = self.knots.get(k + 1).copied().unwrap_or(f64::INFINITY).min(to);
            // ∫_a^b e^{−c(to − s)} ds = e^{−c(to − b)} ∫_0^{b−a} e^{−c u} du
            total += self.rates[k] * libm::exp(-c * (to - b)) * discount_factor(c, b - a);
            a = b;
            k += 1;
        }
        total
    }
}

/// Exact path of the one-colony system for a realized wake threshold.
#[derive(Debug, Clone)]
pub struct ColonyPath<'a, S: ?Sized> {
    schedule: &'a S,
    x1_0: f64,
    x2_0: f64,
    c: f64,
    tau: Option<f64>,
    horizon: f64,
}

/// Solves the one-colony martingale problem with immigration `theta`,
/// emigration rate `c` and realized wake threshold `w`.
///
/// The colony wakes at `τ = inf{t : Θ((0, t]) >= w}`; a colony that starts
/// awake (`x2_0 = 0`) has `τ = 0`.
pub fn solve_mp2<'a, S: ImmigrationSchedule + ?Sized>(
    x1_0: f64,
    x2_0: f64,
    theta: &'a S,
    c: f64,
    w: f64,
    horizon: f64,
) -> Result<ColonyPath<'a, S>> {
    if !(x1_0 >= 0.0 && x2_0 >= 0.0 && c >= 0.0 && horizon >= 0.0) {
        bail_arg!("initial masses, rate c and horizon must be nonnegative");
    }
    if x1_0 > 0.0 && x2_0 > 0.0 {
        bail_arg!("a colony cannot hold both types at once (x1 = {x1_0}, x2 = {x2_0})");
    }
    if x2_0 > 0.0 && !(w > 0.0) {
        bail_arg!("wake threshold must be positive (got {w})");
    }
    let tau = if x2_0 == 0.0 { Some(0.0) } else { theta.first_passage(w) };
    Ok(ColonyPath { schedule: theta, x1_0, x2_0, c, tau, horizon })
}

/// The unit-rate, no-emigration special case.
pub fn solve_mp1(x2_0: f64, w: f64, horizon: f64) -> Result<ColonyPath<'static, ConstantRate>> {
    static UNIT: ConstantRate = ConstantRate(1.0);
    if !(x2_0 > 0.0) {
        bail_arg!("pile must be positive (got {x2_0})");
    }
    solve_mp2(0.0, x2_0, &UNIT, 0.0, w, horizon)
}

impl<S: ImmigrationSchedule + ?Sized> ColonyPath<'_, S> {
    /// Wake time, `None` if the colony never wakes.
    pub fn tau(&self) -> Option<f64> {
        self.tau
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Mass held at the wake time, which becomes the initial wake mass.
    pub fn mass_at_wake(&self) -> Option<f64> {
        self.tau.map(|tau| self.x1_0 + self.x2_0 + self.schedule.cumulative(tau))
    }

    pub fn state_at(&self, t: f64) -> ColonyState {
        match self.tau {
            Some(tau) if t >= tau => {
                let start = self.x1_0 + self.x2_0 + self.schedule.cumulative(tau);
                let x1 = start * libm::exp(-self.c * (t - tau)) + self.schedule.discounted(self.c, tau, t);
                ColonyState { x1, x2: 0.0, time: t }
            }
            _ => ColonyState { x1: 0.0, x2: self.x2_0 + self.schedule.cumulative(t), time: t },
        }
    }

    /// States on `n + 1` equally spaced times covering `[0, horizon]`.
    pub fn trajectory(&self, n: usize) -> Vec<ColonyState> {
        let n = n.max(1);
        (0..=n).map(|k| self.state_at(self.horizon * k as f64 / n as f64)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn w_inverse_cdf_examples() {
        assert_relative_eq!(sample_w(1.0, 0.5).unwrap(), 1.0);
        assert_relative_eq!(sample_w(2.0, 0.9).unwrap(), 18.0, max_relative = 1e-12);
        assert!(sample_w(0.0, 0.5).is_err());
        assert!(sample_w(1.0, 1.0).is_err());
        assert!(sample_w(1.0, 0.0).is_err());
    }

    #[test]
    fn w_is_homogeneous() {
        for &u in &[0.01, 0.3, 0.77, 0.999] {
            for &lambda in &[0.25, 1.0, 3.0, 1e3] {
                let scaled = sample_w(lambda * 1.7, u).unwrap();
                assert_relative_eq!(scaled, lambda * sample_w(1.7, u).unwrap(), max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn unit_rate_no_emigration() {
        let theta = ConstantRate(1.0);
        let p = solve_mp2(0.0, 1.0, &theta, 0.0, 2.0, 5.0).unwrap();
        assert_eq!(p.tau(), Some(2.0));
        assert_relative_eq!(p.state_at(1.5).x2, 2.5);
        assert_eq!(p.state_at(1.5).x1, 0.0);
        for t in [2.0, 3.0, 4.5] {
            let s = p.state_at(t);
            assert_eq!(s.x2, 0.0);
            assert_relative_eq!(s.x1, 3.0 + (t - 2.0), max_relative = 1e-14);
        }
    }

    #[test]
    fn no_immigration_never_wakes() {
        let p = solve_mp2(0.0, 1.3, &ConstantRate(0.0), 0.5, 0.1, 10.0).unwrap();
        assert_eq!(p.tau(), None);
        assert!(p.trajectory(20).iter().all(|s| s.x2 == 1.3 && s.x1 == 0.0));
    }

    #[test]
    fn emigration_closed_form() {
        let p = solve_mp2(0.0, 1.0, &ConstantRate(1.0), 1.0, 1.0, 5.0).unwrap();
        assert_eq!(p.tau(), Some(1.0));
        for t in [1.0, 1.5, 3.0, 5.0] {
            let e = libm::exp(-(t - 1.0));
            assert_relative_eq!(p.state_at(t).x1, 2.0 * e + (1.0 - e), max_relative = 1e-13);
        }
    }

    #[test]
    fn mp1_conservation_and_collapse() {
        let p = solve_mp1(1.0, 2.0, 4.0).unwrap();
        assert_eq!(p.tau(), Some(2.0));
        assert_relative_eq!(p.state_at(2.0 - 1e-12).x2, 3.0, max_relative = 1e-9);
        assert_eq!(p.state_at(2.0).x2, 0.0);
        for s in p.trajectory(40) {
            assert_relative_eq!(s.x1 + s.x2, 1.0 + s.time, max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_states_outside_e() {
        assert!(solve_mp2(1.0, 1.0, &ConstantRate(1.0), 0.0, 1.0, 1.0).is_err());
        assert!(solve_mp2(-1.0, 0.0, &ConstantRate(1.0), 0.0, 1.0, 1.0).is_err());
        assert!(solve_mp1(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn awake_colony_just_decays() {
        let p = solve_mp2(2.0, 0.0, &ConstantRate(0.0), 0.5, 1.0, 3.0).unwrap();
        assert_eq!(p.tau(), Some(0.0));
        assert_relative_eq!(p.state_at(2.0).x1, 2.0 * libm::exp(-1.0), max_relative = 1e-14);
    }

    #[test]
    fn piecewise_schedule_inverts_cumulative() {
        let s = PiecewiseRate::new(alloc::vec![0.0, 1.0, 2.5], alloc::vec![2.0, 0.0, 0.5]).unwrap();
        assert_relative_eq!(s.cumulative(0.5), 1.0);
        assert_relative_eq!(s.cumulative(2.0), 2.0);
        assert_relative_eq!(s.cumulative(3.5), 2.5);
        assert_eq!(s.first_passage(1.0), Some(0.5));
        // Flat stretch: the generalized inverse picks the left end.
        assert_eq!(s.first_passage(2.0), Some(1.0));
        assert_relative_eq!(s.first_passage(2.25).unwrap(), 3.0);
        let flat = PiecewiseRate::new(alloc::vec![0.0, 1.0], alloc::vec![1.0, 0.0]).unwrap();
        assert_eq!(flat.first_passage(1.5), None);
    }
}
