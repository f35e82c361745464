//! Exact simulation of the finitely-many-sites system.
//!
//! Wake mass moves by the adjoint `A*` of a Markov generator `A`. At a
//! dormant site (`x2 > 0`) the wake mass is pinned to zero and everything
//! flowing in is added to the pile; the pile wakes with hazard
//! `H(k) = (A*x1)(k) / x2(k)`. Between wake-ups the system is a linear ODE,
//! integrated with classical RK4.
//!
//! Because `dx2(k)/dt = (A*x1)(k)` at a dormant site, the hazard integrates
//! in closed form along any flow segment: `∫H(k) dt = ln(x2(k, t) / x2(k, t₀))`.
//! The simulator accumulates this exact integral instead of a quadrature.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, Error, Result};
use crate::rng::{exp1, open_unit};

/// Piles below this size with positive inflow are woken immediately.
pub const PILE_FLOOR: f64 = 1e-14;
/// Time tolerance when localizing a jump inside a step.
pub const JUMP_TIME_TOL: f64 = 1e-10;

/// Site labels and the generator `A` (rows sum to zero).
///
/// JSON form: `{"sites": [..], "q": [[..], ..]}` with `q[k][l]` the rate from
/// site `k` to site `l`, or `"adjoint": true` when `q` already holds `A*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem", into = "RawSystem")]
pub struct SiteSystem {
    sites: Vec<i64>,
    /// `A*`, row-major: `adjoint[k * n + l] = A(l, k)`.
    adjoint: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSystem {
    sites: Vec<i64>,
    q: Vec<Vec<f64>>,
    /// Set when `q` already holds `A*` rather than `A`.
    #[serde(default)]
    adjoint: bool,
}

impl TryFrom<RawSystem> for SiteSystem {
    type Error = Error;

    fn try_from(raw: RawSystem) -> Result<Self> {
        let q = if raw.adjoint { transpose(&raw.q) } else { raw.q };
        SiteSystem::new(raw.sites, q)
    }
}

impl From<SiteSystem> for RawSystem {
    fn from(sys: SiteSystem) -> Self {
        RawSystem { q: sys.q_matrix(), sites: sys.sites, adjoint: false }
    }
}

fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    (0..n).map(|i| (0..n).map(|j| m.get(j).and_then(|r| r.get(i)).copied().unwrap_or(f64::NAN)).collect()).collect()
}

impl SiteSystem {
    /// `q[k][l]` is the jump rate of the chain from site `k` to site `l`.
    pub fn new(sites: Vec<i64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let n = sites.len();
        if n == 0 {
            bail_arg!("need at least one site");
        }
        if q.len() != n || q.iter().any(|row| row.len() != n) {
            bail_arg!("q-matrix must be {n} x {n}");
        }
        for (k, row) in q.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                bail_arg!("q-matrix row {k} has a non-finite entry");
            }
            if row.iter().enumerate().any(|(l, v)| l != k && *v < 0.0) {
                bail_arg!("q-matrix row {k} has a negative off-diagonal rate");
            }
            let scale: f64 = row.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            if row.iter().sum::<f64>().abs() > 1e-12 * scale {
                bail_arg!("q-matrix row {k} does not sum to zero");
            }
        }
        let mut adjoint = alloc::vec![0.0; n * n];
        for (l, row) in q.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                adjoint[k * n + l] = *v;
            }
        }
        Ok(SiteSystem { sites, adjoint })
    }

    /// Nearest-neighbour walk on consecutive labels `first..=last` jumping
    /// left and right at `rate` each; the end sites only jump inward.
    pub fn nearest_neighbor(first: i64, last: i64, rate: f64) -> Result<Self> {
        if last < first || !(rate > 0.0) {
            bail_arg!("need first <= last and a positive rate");
        }
        let sites: Vec<i64> = (first..=last).collect();
        let n = sites.len();
        let mut q = alloc::vec![alloc::vec![0.0; n]; n];
        for k in 0..n {
            if k > 0 {
                q[k][k - 1] = rate;
            }
            if k + 1 < n {
                q[k][k + 1] = rate;
            }
            q[k][k] = -q[k].iter().sum::<f64>();
        }
        SiteSystem::new(sites, q)
    }

    pub fn sites(&self) -> &[i64] {
        &self.sites
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// The generator `A` as nested rows.
    pub fn q_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        (0..n).map(|k| (0..n).map(|l| self.adjoint[l * n + k]).collect()).collect()
    }

    /// `‖A‖_∞`.
    pub fn norm(&self) -> f64 {
        self.q_matrix().iter().map(|row| row.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// `out = A* x`.
    pub fn apply_adjoint(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.adjoint[k * n..(k + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// RK4 step bound `min(0.01, 0.1/‖A‖)`.
    pub fn max_step(&self) -> f64 {
        let norm = self.norm();
        if norm > 0.0 {
            (0.1 / norm).min(0.01)
        } else {
            0.01
        }
    }

    fn index_of(&self, label: i64) -> Option<usize> {
        self.sites.iter().position(|s| *s == label)
    }
}

/// Wake and dormant masses per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsState {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub time: f64,
}

impl MpsState {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>) -> Result<Self> {
        if x1.len() != x2.len() {
            bail_arg!("x1 and x2 must have the same length");
        }
        for (k, (a, b)) in x1.iter().zip(&x2).enumerate() {
            if !(*a >= 0.0 && *b >= 0.0 && a.is_finite() && b.is_finite()) {
                bail_arg!("masses must be finite and nonnegative (site {k})");
            }
            if *a > 0.0 && *b > 0.0 {
                bail_arg!("site {k} holds both types");
            }
        }
        Ok(MpsState { x1, x2, time: 0.0 })
    }

    pub fn total_mass(&self) -> f64 {
        self.x1.iter().sum::<f64>() + self.x2.iter().sum::<f64>()
    }

    pub fn dormant_mass(&self) -> f64 {
        self.x2.iter().sum()
    }

    fn check(&self, sys: &SiteSystem) -> Result<()> {
        if self.x1.len() != sys.len() || self.x2.len() != sys.len() {
            bail_arg!("state has {} sites, system has {}", self.x1.len(), sys.len());
        }
        Ok(())
    }
}

/// Time derivative with the dormancy pattern frozen: dormant sites collect
/// their inflow in `x2`, awake sites move it through `x1`.
fn derivative(sys: &SiteSystem, dormant: &[bool], x1: &[f64], d1: &mut [f64], d2: &mut [f64]) {
    sys.apply_adjoint(x1, d1);
    for k in 0..dormant.len() {
        if dormant[k] {
            d2[k] = d1[k];
            d1[k] = 0.0;
        } else {
            d2[k] = 0.0;
        }
    }
}

/// Scratch space for RK4.
#[derive(Debug, Clone)]
struct Rk4 {
    k1: [Vec<f64>; 2],
    k2: [Vec<f64>; 2],
    k3: [Vec<f64>; 2],
    k4: [Vec<f64>; 2],
    tmp: [Vec<f64>; 2],
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = || [alloc::vec![0.0; n], alloc::vec![0.0; n]];
        Rk4 { k1: z(), k2: z(), k3: z(), k4: z(), tmp: z() }
    }

    fn step(&mut self, sys: &SiteSystem, dormant: &[bool], s: &mut MpsState, h: f64) {
        let n = dormant.len();
        let Rk4 { k1, k2, k3, k4, tmp } = self;
        {
            let [d1, d2] = &mut *k1;
            derivative(sys, dormant, &s.x1, d1, d2);
        }
        for i in 0..n {
            tmp[0][i] = s.x1[i] + 0.5 * h * k1[0][i];
        }
        {
            let [d1, d2] = &mut *k2;
            derivative(sys, dormant, &tmp[0], d1, d2);
        }
        for i in 0..n {
            tmp[0][i] = s.x1[i] + 0.5 * h * k2[0][i];
        }
        {
            let [d1, d2] = &mut *k3;
            derivative(sys, dormant, &tmp[0], d1, d2);
        }
        for i in 0..n {
            tmp[0][i] = s.x1[i] + h * k3[0][i];
        }
        {
            let [d1, d2] = &mut *k4;
            derivative(sys, dormant, &tmp[0], d1, d2);
        }
        for i in 0..n {
            s.x1[i] += h / 6.0 * (k1[0][i] + 2.0 * k2[0][i] + 2.0 * k3[0][i] + k4[0][i]);
            s.x2[i] += h / 6.0 * (k1[1][i] + 2.0 * k2[1][i] + 2.0 * k3[1][i] + k4[1][i]);
            if dormant[i] {
                s.x1[i] = 0.0;
            } else {
                // Awake sites cannot hold dormant mass; clear round-off.
                s.x2[i] = 0.0;
            }
        }
        s.time += h;
    }
}

fn dormancy(s: &MpsState) -> Vec<bool> {
    s.x2.iter().map(|v| *v > 0.0).collect()
}

/// Deterministic flow over `dt` with no wake-ups.
pub fn flow_between_jumps(state: &MpsState, sys: &SiteSystem, dt: f64) -> Result<MpsState> {
    state.check(sys)?;
    if !(dt >= 0.0) {
        bail_arg!("flow duration must be nonnegative (got {dt})");
    }
    let mut s = state.clone();
    let dormant = dormancy(&s);
    let mut rk = Rk4::new(sys.len());
    let h_max = sys.max_step();
    let end = s.time + dt;
    while s.time < end {
        let h = h_max.min(end - s.time);
        if h <= 0.0 {
            break;
        }
        rk.step(sys, &dormant, &mut s, h);
    }
    s.time = end;
    Ok(s)
}

/// Cumulative hazard added by moving dormant piles from `before` to `after`.
fn hazard_between(dormant: &[bool], before: &[f64], after: &[f64]) -> f64 {
    dormant.iter().zip(before.iter().zip(after)).filter(|(d, _)| **d).map(|(_, (b, a))| libm::log(a / b)).sum()
}

/// A wake-up at a site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    /// Index into the system's site list.
    pub site: usize,
}

/// Flows `state` forward until the next wake-up or `horizon`, whichever is
/// first, and returns the wake-up if there is one.
///
/// The jump time solves `∫₀^τ H_s ds = e` for `e ~ Exp(1)`, localized inside
/// an RK4 step by bisection; the site is drawn with probability
/// `H_{τ−}(k) / H_{τ−}`. On return `state` is at `τ−` (or at `horizon`).
pub fn next_jump<R: Rng + ?Sized>(state: &mut MpsState, sys: &SiteSystem, rng: &mut R, horizon: f64) -> Result<Option<Jump>> {
    state.check(sys)?;
    if !horizon.is_finite() {
        bail_arg!("horizon must be finite");
    }
    let n = sys.len();
    let dormant = dormancy(state);
    let mut inflow = alloc::vec![0.0; n];
    let mut rk = Rk4::new(n);
    let h_max = sys.max_step();
    if !dormant.iter().any(|d| *d) {
        *state = flow_between_jumps(state, sys, (horizon - state.time).max(0.0))?;
        return Ok(None);
    }
    let target = exp1(rng);
    let mut accumulated = 0.0;
    let mut trial = state.clone();
    while state.time < horizon {
        sys.apply_adjoint(&state.x1, &mut inflow);
        if let Some(k) = (0..n).find(|&k| dormant[k] && state.x2[k] < PILE_FLOOR && inflow[k] > 0.0) {
            return Ok(Some(Jump { time: state.time, site: k }));
        }
        let h = h_max.min(horizon - state.time);
        trial.clone_from(state);
        rk.step(sys, &dormant, &mut trial, h);
        let gained = hazard_between(&dormant, &state.x2, &trial.x2);
        if accumulated + gained < target {
            accumulated += gained;
            core::mem::swap(state, &mut trial);
            continue;
        }
        // The clock rings inside this step.
        let (mut lo, mut hi) = (0.0, h);
        while hi - lo > JUMP_TIME_TOL {
            let mid = 0.5 * (lo + hi);
            trial.clone_from(state);
            rk.step(sys, &dormant, &mut trial, mid);
            if accumulated + hazard_between(&dormant, &state.x2, &trial.x2) >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        trial.clone_from(state);
        rk.step(sys, &dormant, &mut trial, hi);
        core::mem::swap(state, &mut trial);
        return Ok(Some(Jump { time: state.time, site: pick_site(state, sys, &dormant, rng) }));
    }
    state.time = horizon;
    Ok(None)
}

/// Draws the waking site with probability proportional to its hazard.
fn pick_site<R: Rng + ?Sized>(state: &MpsState, sys: &SiteSystem, dormant: &[bool], rng: &mut R) -> usize {
    let mut inflow = alloc::vec![0.0; sys.len()];
    sys.apply_adjoint(&state.x1, &mut inflow);
    let hazards: Vec<f64> = (0..sys.len()).map(|k| if dormant[k] { (inflow[k] / state.x2[k]).max(0.0) } else { 0.0 }).collect();
    let total: f64 = hazards.iter().sum();
    if !(total > 0.0) {
        // Only reachable through round-off; fall back to the largest pile
        // with any inflow.
        return (0..sys.len()).filter(|&k| dormant[k]).max_by(|&a, &b| inflow[a].total_cmp(&inflow[b])).unwrap_or(0);
    }
    let mut u = open_unit(rng) * total;
    for (k, h) in hazards.iter().enumerate() {
        if *h > 0.0 {
            if u < *h {
                return k;
            }
            u -= h;
        }
    }
    hazards.iter().rposition(|h| *h > 0.0).unwrap_or(0)
}

/// Wakes the pile at `site`: its dormant mass becomes wake mass.
pub fn apply_jump(state: &mut MpsState, site: usize) -> Result<()> {
    match state.x2.get(site) {
        Some(v) if *v > 0.0 => {}
        _ => return Err(Error::Logic(alloc::format!("site {site} has no dormant pile to wake"))),
    }
    state.x1[site] += state.x2[site];
    state.x2[site] = 0.0;
    Ok(())
}

/// One wake-up in a finite-site run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpsEvent {
    pub t: f64,
    /// Site label.
    pub site: i64,
    /// Dormant mass at the moment of waking.
    pub pile: f64,
    /// `min{k : x2(k) > 0}` (capped at the last label) just before the jump.
    #[serde(skip)]
    pub leftmost: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpsRun {
    pub events: Vec<MpsEvent>,
    /// States at the requested checkpoints, in order.
    pub checkpoints: Vec<MpsState>,
    pub final_state: MpsState,
}

fn leftmost_dormant(state: &MpsState, sys: &SiteSystem) -> i64 {
    let last = *sys.sites().last().expect("nonempty system");
    state.x2.iter().zip(sys.sites()).filter(|(v, _)| **v > 0.0).map(|(_, s)| *s).min().map_or(last, |s| s.min(last))
}

/// Runs flow / wake-up cycles until `horizon`, recording the state at each
/// checkpoint (checkpoints must lie in `[0, horizon]`).
pub fn simulate_mps<R: Rng + ?Sized>(
    sys: &SiteSystem,
    initial: &MpsState,
    horizon: f64,
    checkpoints: &[f64],
    rng: &mut R,
) -> Result<MpsRun> {
    initial.check(sys)?;
    if !(horizon.is_finite() && horizon >= initial.time) {
        bail_arg!("horizon must be finite and not before the initial time");
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) || checkpoints.iter().any(|t| *t < initial.time || *t > horizon) {
        bail_arg!("checkpoints must be sorted and within [start, horizon]");
    }
    let mut state = initial.clone();
    let mut events = Vec::new();
    let mut snaps = Vec::with_capacity(checkpoints.len());
    for &stop in checkpoints.iter().chain(core::iter::once(&horizon)) {
        while let Some(jump) = next_jump(&mut state, sys, rng, stop)? {
            let leftmost = leftmost_dormant(&state, sys);
            events.push(MpsEvent { t: jump.time, site: sys.sites()[jump.site], pile: state.x2[jump.site], leftmost });
            apply_jump(&mut state, jump.site)?;
        }
        snaps.push(state.clone());
    }
    snaps.pop();
    Ok(MpsRun { events, checkpoints: snaps, final_state: state })
}

/// Looks up a site index by label.
pub fn site_index(sys: &SiteSystem, label: i64) -> Result<usize> {
    sys.index_of(label).ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown site label {label}")))
}
