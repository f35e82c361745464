//! The continuous-space frog process with atomic dormant piles.
//!
//! Wake mass `X¹` follows the heat flow killed at the interface `ℓ`, the
//! position of the leftmost pile still asleep. Killed mass joins that pile,
//! so its size is `Y = xᵢ + K` with `K` the mass absorbed since the
//! interface arrived. The pile wakes once `K` reaches its wake threshold:
//! the whole pile `xᵢ + K` becomes a wake atom at `zᵢ` and the interface
//! jumps to the next pile. After the last pile wakes there is no killing.
//!
//! Two samplers decide when a pile wakes:
//!
//! * [`simulate_space_driven`] takes one threshold `Wᵢ` per pile up front
//!   and wakes pile `i` when `K >= Wᵢ`.
//! * [`simulate_hazard_driven`] integrates the hazard `I = θ / Y`
//!   (absorption rate over pile size) along the flow and wakes the pile when
//!   the integral passes a fresh `Exp(1)` draw. Over a step the integral of
//!   `θ / Y = (dK/dt) / (xᵢ + K)` is exactly `ln((xᵢ + K₁) / (xᵢ + K₀))`.
//!
//! With `Wᵢ ~ W(xᵢ)` the two produce the same law.
//!
//! A pile can only ever absorb the wake mass that exists, namely
//! `X¹₀(1) + Σ_{j<i} xⱼ`. A pile whose threshold is at least that large
//! never wakes and the front stalls there.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, bail_config, Result};
use crate::heat::{HeatConfig, KilledHeatState};
use crate::measures::{AtomicMeasure, GridDensity, HybridMeasure, Measure};
use crate::ppp::PointPattern;
use crate::rng::exp1;

pub const DEFAULT_SNAPSHOTS: usize = 64;
pub const DEFAULT_EVENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrogConfig {
    pub heat: HeatConfig,
    /// Reflecting wall on the left; far enough out that little mass reaches it.
    pub domain_left: f64,
    /// Reflecting wall on the right, beyond the last pile.
    pub domain_right: f64,
    pub horizon: f64,
    /// Evenly spaced snapshots over `(0, horizon]`, on top of one per event.
    pub snapshots: usize,
    /// Event times are localized to this fraction of the step that holds them.
    pub event_tol: f64,
    /// Stop as soon as the front has either passed every pile or stalled,
    /// instead of flowing on to the horizon.
    pub stop_when_settled: bool,
    /// Keep the density profile at every evenly spaced snapshot.
    pub record_profiles: bool,
}

impl FrogConfig {
    pub fn new(heat: HeatConfig, domain_left: f64, domain_right: f64, horizon: f64) -> Self {
        FrogConfig {
            heat,
            domain_left,
            domain_right,
            horizon,
            snapshots: DEFAULT_SNAPSHOTS,
            event_tol: DEFAULT_EVENT_TOL,
            stop_when_settled: false,
            record_profiles: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.heat.validate()?;
        if !(self.domain_left.is_finite() && self.domain_right.is_finite() && self.domain_right > self.domain_left) {
            bail_config!("domain must be a finite interval (got [{}, {}])", self.domain_left, self.domain_right);
        }
        if !(self.horizon > 0.0) || (self.horizon.is_infinite() && !self.stop_when_settled) {
            bail_config!("horizon must be positive, and finite unless stop_when_settled is set");
        }
        if !(self.event_tol > 0.0 && self.event_tol < 1.0) {
            bail_config!("event_tol must lie in (0, 1)");
        }
        Ok(())
    }
}

/// One wake-up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    /// Pile position.
    pub site: f64,
    /// Pile size when it woke: initial mass plus absorbed wake mass.
    pub jump_size: f64,
    /// Absorbed wake mass.
    pub v: f64,
    /// Pile index, counted from the left starting at 0.
    pub index: usize,
}

/// Mass bookkeeping at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub time: f64,
    pub x1_mass: f64,
    /// Size of the pile at the interface.
    pub y: f64,
    /// Piles right of the interface, not yet touched.
    pub untouched: f64,
    pub interface: f64,
}

impl Snapshot {
    pub fn total(&self) -> f64 {
        self.x1_mass + self.y + self.untouched
    }
}

/// Interface move: the pile at the old interface has just woken and the
/// next pile is picked up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PileAdvance {
    pub time: f64,
    /// `Y` just before the move (the pile that woke).
    pub y_before: f64,
    /// `Y` just after: the mass of the pile picked up.
    pub y_after: f64,
}

impl PileAdvance {
    /// Upward part of the discontinuity of `Y`.
    pub fn upward_jump(&self) -> f64 {
        (self.y_after - self.y_before).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    /// Every pile woke.
    Completed { time: f64 },
    /// The pile at `position` can never wake.
    Stalled { index: usize, position: f64 },
    /// The horizon came first while a wakeable pile was still asleep.
    Pending { index: usize, position: f64 },
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct FrogState {
    pub heat: KilledHeatState,
    /// Piles right of the interface that have not been touched yet.
    pub piles: AtomicMeasure,
    /// Size of the pile at the interface (0 once all piles woke).
    pub y: f64,
    /// Index of the interface pile; equals the pile count once all woke.
    pub pile_index: usize,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrogRun {
    pub events: Vec<EventRecord>,
    pub snapshots: Vec<Snapshot>,
    pub advances: Vec<PileAdvance>,
    /// Density profiles at the evenly spaced snapshots, when requested.
    pub profiles: Vec<(f64, GridDensity)>,
    pub outcome: Outcome,
    pub final_state: FrogState,
}

impl FrogRun {
    /// Rightmost point the wake front ever reaches: the stall pile, or the
    /// last pile if all woke. `None` while undecided at the horizon.
    pub fn ustar(&self, piles: &AtomicMeasure) -> Option<f64> {
        match self.outcome {
            Outcome::Completed { .. } => piles.positions().last(),
            Outcome::Stalled { position, .. } => Some(position),
            Outcome::Pending { .. } => None,
        }
    }

    /// Wake time of pile `index`, if it woke.
    pub fn wake_time(&self, index: usize) -> Option<f64> {
        self.events.iter().find(|e| e.index == index).map(|e| e.time)
    }
}

/// Decides when the interface pile wakes.
trait WakeClock {
    /// Pile `index` of size `x` becomes the interface while `available` wake
    /// mass exists in total. Returns whether it can ever wake.
    fn arrive(&mut self, index: usize, x: f64, available: f64) -> bool;
    /// Whether the pile has woken once the absorbed mass moved from
    /// `k_start` to `k_end` during the current step.
    fn rings(&self, k_start: f64, k_end: f64) -> bool;
    /// Commits a step that ended without a wake-up.
    fn advance(&mut self, k_start: f64, k_end: f64);
}

struct Thresholds<'a> {
    w: &'a [f64],
    current: f64,
}

impl WakeClock for Thresholds<'_> {
    fn arrive(&mut self, index: usize, _x: f64, available: f64) -> bool {
        self.current = self.w[index];
        self.current < available
    }

    fn rings(&self, _k_start: f64, k_end: f64) -> bool {
        k_end >= self.current
    }

    fn advance(&mut self, _k_start: f64, _k_end: f64) {}
}

struct Hazard<'r, R: ?Sized> {
    rng: &'r mut R,
    x: f64,
    target: f64,
    accumulated: f64,
}

impl<R: Rng + ?Sized> Hazard<'_, R> {
    fn increment(&self, k_start: f64, k_end: f64) -> f64 {
        libm::log1p((k_end - k_start) / (self.x + k_start))
    }
}

impl<R: Rng + ?Sized> WakeClock for Hazard<'_, R> {
    fn arrive(&mut self, _index: usize, x: f64, available: f64) -> bool {
        self.x = x;
        self.target = exp1(self.rng);
        self.accumulated = 0.0;
        // The hazard integral is bounded by ln(1 + available / x).
        libm::log1p(available / x) > self.target
    }

    fn rings(&self, k_start: f64, k_end: f64) -> bool {
        self.accumulated + self.increment(k_start, k_end) >= self.target
    }

    fn advance(&mut self, k_start: f64, k_end: f64) {
        self.accumulated += self.increment(k_start, k_end);
    }
}

/// Runs the process with pre-drawn wake thresholds, one per pile.
pub fn simulate_space_driven(x1_0: &GridDensity, piles: &AtomicMeasure, thresholds: &[f64], cfg: &FrogConfig) -> Result<FrogRun> {
    if thresholds.len() != piles.len() {
        bail_arg!("need one threshold per pile ({} thresholds, {} piles)", thresholds.len(), piles.len());
    }
    if let Some(w) = thresholds.iter().find(|w| !(**w > 0.0)) {
        bail_arg!("thresholds must be positive (got {w})");
    }
    Driver::new(x1_0, piles, cfg)?.run(Thresholds { w: thresholds, current: 0.0 })
}

/// Runs the process with wake-ups driven by the hazard `θ / Y`.
pub fn simulate_hazard_driven<R: Rng + ?Sized>(
    x1_0: &GridDensity,
    piles: &AtomicMeasure,
    rng: &mut R,
    cfg: &FrogConfig,
) -> Result<FrogRun> {
    Driver::new(x1_0, piles, cfg)?.run(Hazard { rng, x: 0.0, target: 0.0, accumulated: 0.0 })
}

struct Driver<'a> {
    cfg: &'a FrogConfig,
    piles: &'a AtomicMeasure,
    heat: KilledHeatState,
    initial_x1: f64,
    /// `untouched_after[i]`: total mass of piles `i+1..`.
    untouched_after: Vec<f64>,
}

impl<'a> Driver<'a> {
    fn new(x1_0: &GridDensity, piles: &'a AtomicMeasure, cfg: &'a FrogConfig) -> Result<Self> {
        cfg.validate()?;
        let dx = cfg.heat.dx;
        let n = GridDensity::cells_between(cfg.domain_left, cfg.domain_right, dx);
        let grid = x1_0.resample(cfg.domain_left, dx, n)?;
        let initial_x1 = x1_0.total_mass();
        if (grid.total_mass() - initial_x1).abs() > 1e-12 * initial_x1.max(1e-300) {
            bail_config!("initial wake mass does not fit inside the domain [{}, {}]", cfg.domain_left, cfg.domain_right);
        }
        for z in piles.positions() {
            if grid.edge_index(z).is_none() || z <= cfg.domain_left || z >= grid.right() {
                bail_config!("pile at {z} is not an interior cell edge (dx = {dx} must divide pile spacing)");
            }
        }
        let barrier = match piles.positions().next() {
            Some(z) => {
                if x1_0.mass_in(z, f64::INFINITY)? > 0.0 {
                    bail_arg!("initial wake mass must lie left of the first pile at {z}");
                }
                z
            }
            None => f64::INFINITY,
        };
        let heat = KilledHeatState::new(HybridMeasure::from_density(grid), barrier)?;
        let masses: Vec<f64> = piles.masses().collect();
        let mut untouched_after = alloc::vec![0.0; masses.len()];
        for i in (0..masses.len().saturating_sub(1)).rev() {
            untouched_after[i] = untouched_after[i + 1] + masses[i + 1];
        }
        Ok(Driver { cfg, piles, heat, initial_x1, untouched_after })
    }

    fn run<C: WakeClock>(mut self, mut clock: C) -> Result<FrogRun> {
        let cfg = self.cfg;
        let piles = self.piles.atoms();
        let n_piles = piles.len();
        let mut events = Vec::new();
        let mut snapshots = Vec::new();
        let mut advances = Vec::new();
        let mut profiles = Vec::new();

        let snap_times: Vec<f64> = if cfg.horizon.is_finite() {
            (1..=cfg.snapshots).map(|k| cfg.horizon * k as f64 / cfg.snapshots as f64).collect()
        } else {
            Vec::new()
        };
        let mut next_snap = 0;

        let mut index = 0;
        let mut available = self.initial_x1;
        // Whether the interface pile can still wake.
        let mut waiting = false;
        let mut outcome = Outcome::Completed { time: 0.0 };
        if let Some(&(z, x)) = piles.first() {
            waiting = clock.arrive(0, x, available);
            outcome =
                if waiting { Outcome::Pending { index: 0, position: z } } else { Outcome::Stalled { index: 0, position: z } };
        }

        let y_now = |heat: &KilledHeatState, index: usize| piles.get(index).map_or(0.0, |p| p.1 + heat.killed_cum());
        let snapshot = |heat: &KilledHeatState, index: usize, untouched: &[f64]| Snapshot {
            time: heat.time(),
            x1_mass: heat.mass(),
            y: y_now(heat, index),
            untouched: untouched.get(index).copied().unwrap_or(0.0),
            interface: piles.get(index.min(n_piles.saturating_sub(1))).map_or(f64::NAN, |p| p.0),
        };
        snapshots.push(snapshot(&self.heat, index, &self.untouched_after));
        if cfg.record_profiles {
            profiles.push((0.0, self.heat.profile().density.clone()));
        }

        let mut dt = cfg.heat.dt;
        let mut backup = self.heat.clone();
        loop {
            let settled = !matches!(outcome, Outcome::Pending { .. });
            let time = self.heat.time();
            if (settled && cfg.stop_when_settled) || time >= cfg.horizon {
                break;
            }
            let stop = snap_times.get(next_snap).copied().unwrap_or(cfg.horizon).min(cfg.horizon);
            let (h, lands) = if dt >= stop - time { (stop - time, true) } else { (dt, false) };
            let k_start = self.heat.killed_cum();
            if waiting {
                backup.copy_from(&self.heat);
            }
            self.heat.step(h)?;
            if lands {
                self.heat.align_time(stop);
            }

            if waiting && clock.rings(k_start, self.heat.killed_cum()) {
                let (mut lo, mut hi) = (0.0, h);
                while hi - lo > cfg.event_tol * h {
                    let mid = 0.5 * (lo + hi);
                    self.heat.copy_from(&backup);
                    self.heat.step(mid)?;
                    if clock.rings(k_start, self.heat.killed_cum()) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                self.heat.copy_from(&backup);
                self.heat.step(hi)?;
                if lands && hi == h {
                    self.heat.align_time(stop);
                }

                let (z, x) = piles[index];
                let v = self.heat.killed_cum();
                let t = self.heat.time();
                events.push(EventRecord { time: t, site: z, jump_size: x + v, v, index });
                self.heat.add_atom(z, x + v)?;
                self.heat.reset_killed();
                available += x;
                index += 1;
                if let Some(&(z_next, x_next)) = piles.get(index) {
                    self.heat.set_barrier(z_next)?;
                    advances.push(PileAdvance { time: t, y_before: x + v, y_after: x_next });
                    waiting = clock.arrive(index, x_next, available);
                    outcome = if waiting {
                        Outcome::Pending { index, position: z_next }
                    } else {
                        Outcome::Stalled { index, position: z_next }
                    };
                } else {
                    self.heat.set_barrier(f64::INFINITY)?;
                    waiting = false;
                    outcome = Outcome::Completed { time: t };
                }
                snapshots.push(snapshot(&self.heat, index, &self.untouched_after));
                dt = cfg.heat.dt;
            } else {
                if waiting {
                    clock.advance(k_start, self.heat.killed_cum());
                }
                dt = (dt * cfg.heat.dt_growth).min(cfg.heat.dt_max);
            }

            if self.heat.time() >= stop && next_snap < snap_times.len() {
                snapshots.push(snapshot(&self.heat, index, &self.untouched_after));
                if cfg.record_profiles {
                    profiles.push((self.heat.time(), self.heat.profile().density.clone()));
                }
                next_snap += 1;
            }
        }

        let final_snapshot = snapshot(&self.heat, index, &self.untouched_after);
        if snapshots.last() != Some(&final_snapshot) {
            snapshots.push(final_snapshot);
        }
        let remaining = AtomicMeasure::new(piles.get(index + 1..).map(|p| p.to_vec()).unwrap_or_default())?;
        let time = self.heat.time();
        let final_state = FrogState { y: y_now(&self.heat, index), heat: self.heat, piles: remaining, pile_index: index, time };
        Ok(FrogRun { events, snapshots, advances, profiles, outcome, final_state })
    }
}

/// Wake jumps indexed by space: `(site, absorbed mass)` per event.
pub fn extract_l(events: &[EventRecord], piles: &AtomicMeasure) -> PointPattern {
    let points = events.iter().map(|e| (e.site, e.jump_size - piles.mass_at(e.site))).collect();
    PointPattern::from_points(points, 0.0)
}

/// Position of the first pile that can never wake,
/// `min{i : Wᵢ >= Σ_{j<i} xⱼ + X¹₀(1)}`, or of the last pile if none.
pub fn compute_ustar(thresholds: &[f64], piles: &AtomicMeasure, initial_x1_mass: f64) -> Result<f64> {
    if thresholds.len() != piles.len() {
        bail_arg!("need one threshold per pile");
    }
    let Some(&(last, _)) = piles.atoms().last() else {
        bail_arg!("no piles");
    };
    let mut available = initial_x1_mass;
    for (&w, &(z, x)) in thresholds.iter().zip(piles.atoms()) {
        if w >= available {
            return Ok(z);
        }
        available += x;
    }
    Ok(last)
}

/// Smallest initial wake mass that wakes every pile in turn:
/// `max_i (Wᵢ − (x₁ + … + x_{i−1}))`.
pub fn wake_threshold(ws: &[f64], xs: &[f64]) -> Result<f64> {
    if ws.len() != xs.len() {
        bail_arg!("need as many thresholds as piles ({} vs {})", ws.len(), xs.len());
    }
    if ws.is_empty() {
        bail_arg!("no piles");
    }
    let mut below = 0.0;
    let mut worst = f64::NEG_INFINITY;
    for (w, x) in ws.iter().zip(xs) {
        worst = worst.max(w - below);
        below += x;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_left() -> GridDensity {
        GridDensity::uniform(-1.0, 0.0, 0.01, 1.0).unwrap()
    }

    fn cfg(horizon: f64) -> FrogConfig {
        FrogConfig::new(HeatConfig::fixed(0.01, 1e-3), -4.0, 1.0, horizon)
    }

    #[test]
    fn wake_threshold_examples() {
        assert_eq!(wake_threshold(&[2.0, 5.0], &[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(wake_threshold(&[1.0, 1.0, 10.0], &[2.0, 3.0, 4.0]).unwrap(), 5.0);
        assert!(wake_threshold(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ustar_examples() {
        let eta = 0.1;
        let piles = AtomicMeasure::new(alloc::vec![(eta, 1.0), (2.0 * eta, 1.0)]).unwrap();
        assert_eq!(compute_ustar(&[2.0, 5.0], &piles, 4.5).unwrap(), 2.0 * eta);
        assert_eq!(compute_ustar(&[2.0, 5.0], &piles, 3.0).unwrap(), 2.0 * eta);
        assert_eq!(compute_ustar(&[2.0, 5.0], &piles, 1.0).unwrap(), eta);
        let single = AtomicMeasure::new(alloc::vec![(0.5, 7.0)]).unwrap();
        assert_eq!(compute_ustar(&[3.0], &single, 3.0).unwrap(), 0.5);
    }

    #[test]
    fn extract_l_examples() {
        let piles = AtomicMeasure::new(alloc::vec![(0.25, 0.25)]).unwrap();
        assert!(extract_l(&[], &piles).points().is_empty());
        let e = EventRecord { time: 1.0, site: 0.25, jump_size: 0.4, v: 0.15, index: 0 };
        let l = extract_l(&[e], &piles);
        assert_eq!(l.points().len(), 1);
        assert_eq!(l.points()[0].0, 0.25);
        assert_relative_eq!(l.points()[0].1, 0.15, max_relative = 1e-12);
    }

    #[test]
    fn unreachable_single_pile_never_wakes() {
        let piles = AtomicMeasure::new(alloc::vec![(0.0, 1.0)]).unwrap();
        let run = simulate_space_driven(&unit_left(), &piles, &[1.0], &cfg(0.5)).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.outcome, Outcome::Stalled { index: 0, position: 0.0 });
        assert_eq!(run.ustar(&piles), Some(0.0));
        let last = run.snapshots.last().unwrap();
        assert!(last.y > 1.0);
        assert_relative_eq!(last.total(), 2.0, max_relative = 1e-10);
    }

    #[test]
    fn tiny_thresholds_wake_in_order() {
        let piles = AtomicMeasure::new(alloc::vec![(0.1, 0.1), (0.2, 0.1), (0.3, 0.1), (0.4, 0.1)]).unwrap();
        let run = simulate_space_driven(&unit_left(), &piles, &[1e-12; 4], &cfg(0.2)).unwrap();
        assert_eq!(run.events.len(), 4);
        assert!(run.events.windows(2).all(|w| w[1].time > w[0].time && w[1].index == w[0].index + 1));
        assert!(matches!(run.outcome, Outcome::Completed { .. }));
        for s in &run.snapshots {
            assert_relative_eq!(s.total(), 1.4, max_relative = 1e-10);
        }
    }

    #[test]
    fn wake_injects_whole_pile() {
        let piles = AtomicMeasure::new(alloc::vec![(0.0, 1.0)]).unwrap();
        let run = simulate_space_driven(&unit_left(), &piles, &[0.2], &cfg(1.0)).unwrap();
        assert_eq!(run.events.len(), 1);
        let e = run.events[0];
        assert_relative_eq!(e.v, 0.2, max_relative = 1e-6);
        assert_relative_eq!(e.jump_size, 1.0 + e.v);
        assert_relative_eq!(run.final_state.heat.mass(), 2.0, max_relative = 1e-12);
        assert_eq!(run.final_state.heat.barrier(), f64::INFINITY);
    }

    #[test]
    fn no_wake_mass_no_events() {
        let piles = AtomicMeasure::new(alloc::vec![(0.1, 0.5), (0.2, 0.5)]).unwrap();
        let zero = GridDensity::zeros(-1.0, 0.01, 100).unwrap();
        let mut rng = crate::rng::replica_stream(3, 0);
        let run = simulate_hazard_driven(&zero, &piles, &mut rng, &cfg(0.3)).unwrap();
        assert!(run.events.is_empty());
        assert_eq!(run.outcome, Outcome::Stalled { index: 0, position: 0.1 });
    }

    #[test]
    fn rejects_bad_inputs() {
        let piles = AtomicMeasure::new(alloc::vec![(0.105, 0.5)]).unwrap();
        assert!(simulate_space_driven(&unit_left(), &piles, &[0.1], &cfg(1.0)).is_err());
        let piles = AtomicMeasure::new(alloc::vec![(0.1, 0.5)]).unwrap();
        assert!(simulate_space_driven(&unit_left(), &piles, &[0.1, 0.2], &cfg(1.0)).is_err());
        assert!(simulate_space_driven(&unit_left(), &piles, &[0.0], &cfg(1.0)).is_err());
        let right = GridDensity::uniform(0.0, 0.5, 0.01, 1.0).unwrap();
        assert!(simulate_space_driven(&right, &piles, &[0.1], &cfg(1.0)).is_err());
    }
}
