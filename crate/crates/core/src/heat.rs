//! Heat flow `∂ₜu = ½∂²ₓu` on a uniform grid, killed at a movable right
//! barrier.
//!
//! The scheme is backward Euler in time with the standard three-point stencil
//! in space. Its matrix is an M-matrix, so nonnegative data stay nonnegative
//! for every step size. The barrier sits on a cell edge and imposes `u = 0`
//! there through a mirrored ghost cell; the far ends of the grid are
//! reflecting walls. Mass absorbed at the barrier is read off the discrete
//! balance of the step, which makes
//! `mass(u) + killed_cum` invariant up to round-off.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, bail_config, Result};
use crate::measures::{GridDensity, HybridMeasure, Measure};

/// Diffusion coefficient of the generator `½∂²ₓ`.
const DIFFUSIVITY: f64 = 0.5;

pub const DEFAULT_DX: f64 = 1e-3;
pub const DEFAULT_DT: f64 = 1e-4;

/// Grid and time-step settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatConfig {
    pub dx: f64,
    /// Base time step.
    pub dt: f64,
    /// Factor applied to the step after every step without an event
    /// (1 keeps the step fixed).
    pub dt_growth: f64,
    /// Upper bound for the grown step.
    pub dt_max: f64,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig { dx: DEFAULT_DX, dt: DEFAULT_DT, dt_growth: 1.0, dt_max: DEFAULT_DT }
    }
}

impl HeatConfig {
    pub fn fixed(dx: f64, dt: f64) -> Self {
        HeatConfig { dx, dt, dt_growth: 1.0, dt_max: dt }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx.is_finite() && self.dx > 0.0) {
            bail_config!("dx must be positive (got {})", self.dx);
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            bail_config!("dt must be positive (got {})", self.dt);
        }
        if !(self.dt_growth.is_finite() && self.dt_growth >= 1.0) {
            bail_config!("dt_growth must be >= 1 (got {})", self.dt_growth);
        }
        if !(self.dt_max >= self.dt) {
            bail_config!("dt_max must be >= dt (got {} < {})", self.dt_max, self.dt);
        }
        Ok(())
    }
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Mass surviving at time `t` when a unit atom at `x0` diffuses under
/// `½∂²ₓ` and is killed at `z`: `2Φ((z − x0)/√t) − 1`.
pub fn survival_mass_analytic(x0: f64, z: f64, t: f64) -> Result<f64> {
    if x0.is_nan() || z.is_nan() || x0 > z {
        bail_arg!("start must not lie right of the barrier (x0 = {x0}, z = {z})");
    }
    if !(t >= 0.0) {
        bail_arg!("time must be nonnegative (got {t})");
    }
    if x0 == z {
        return Ok(if t == 0.0 { 1.0 } else { 0.0 });
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    // 2Φ(a) − 1 = erf(a/√2), which keeps precision for small a.
    Ok(libm::erf((z - x0) / libm::sqrt(t) / core::f64::consts::SQRT_2))
}

/// Wake-frog profile under killed heat flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KilledHeatState {
    u: HybridMeasure,
    /// Killing position; `+∞` disables killing.
    barrier: f64,
    killed_cum: f64,
    time: f64,
    #[serde(skip)]
    scratch: Vec<f64>,
}

impl KilledHeatState {
    /// Starts a flow from `u`, killed at `barrier`.
    ///
    /// A finite barrier must fall on an edge of `u`'s grid and `u` may carry
    /// no mass right of it.
    pub fn new(u: HybridMeasure, barrier: f64) -> Result<Self> {
        let mut state = KilledHeatState { u, barrier: f64::INFINITY, killed_cum: 0.0, time: 0.0, scratch: Vec::new() };
        let nb = state.barrier_cells(barrier)?;
        if state.u.density.values()[nb..].iter().any(|v| *v > 0.0) {
            bail_arg!("initial density has mass right of the barrier at {barrier}");
        }
        if state.u.atoms.positions().any(|z| z > barrier) {
            bail_arg!("initial atoms lie right of the barrier at {barrier}");
        }
        state.barrier = barrier;
        Ok(state)
    }

    /// Number of active cells left of `barrier`.
    fn barrier_cells(&self, barrier: f64) -> Result<usize> {
        let grid = &self.u.density;
        if barrier == f64::INFINITY {
            return Ok(grid.len());
        }
        match grid.edge_index(barrier) {
            Some(k) => Ok(k),
            None => bail_config!(
                "barrier {barrier} is not a cell edge of the grid [{}, {}] with dx = {}",
                grid.left(),
                grid.right(),
                grid.dx()
            ),
        }
    }

    pub fn profile(&self) -> &HybridMeasure {
        &self.u
    }

    pub fn barrier(&self) -> f64 {
        self.barrier
    }

    pub fn killed_cum(&self) -> f64 {
        self.killed_cum
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn mass(&self) -> f64 {
        self.u.total_mass()
    }

    fn active_cells(&self) -> usize {
        // Validated whenever the barrier is set.
        self.barrier_cells(self.barrier).unwrap_or(0)
    }

    /// Places an atom in the profile; it is spread onto the grid at the start
    /// of the next step.
    pub fn add_atom(&mut self, z: f64, mass: f64) -> Result<()> {
        if z > self.barrier {
            bail_arg!("atom at {z} lies right of the barrier at {}", self.barrier);
        }
        self.u.atoms.add_atom(z, mass)
    }

    /// Moves the barrier to the right (or to `+∞`).
    pub fn set_barrier(&mut self, barrier: f64) -> Result<()> {
        if !(barrier >= self.barrier) {
            bail_arg!("barrier may only move right ({} -> {barrier})", self.barrier);
        }
        self.barrier_cells(barrier)?;
        self.barrier = barrier;
        Ok(())
    }

    /// Zeroes the absorbed-mass accumulator.
    pub fn reset_killed(&mut self) {
        self.killed_cum = 0.0;
    }

    /// Instantaneous absorption rate at the barrier, `½|∂ₓ⁻u|`, evaluated
    /// with the same one-sided difference the scheme uses.
    pub fn boundary_flux(&self) -> f64 {
        let nb = self.active_cells();
        if self.barrier == f64::INFINITY || nb == 0 {
            return 0.0;
        }
        let grid = &self.u.density;
        // Gradient between the last active cell center and the barrier,
        // half a cell away.
        DIFFUSIVITY * grid.values()[nb - 1] / (0.5 * grid.dx())
    }

    /// Spreads pending atoms onto the grid, preserving each atom's mass and
    /// (away from the barrier) its center of mass. Returns the mass killed
    /// because it sat on or beyond the barrier.
    fn deposit_atoms(&mut self, nb: usize) -> f64 {
        if self.u.atoms.is_empty() {
            return 0.0;
        }
        let atoms = self.u.atoms.take();
        let dx = self.u.density.dx();
        let left = self.u.density.left();
        let n = self.u.density.len();
        let mut killed = 0.0;
        let values = self.u.density.values_mut();
        for (z, m) in atoms {
            if z >= self.barrier || nb == 0 {
                killed += m;
                continue;
            }
            // Linear weights between the two nearest cell centers.
            let s = ((z - left) / dx - 0.5).clamp(0.0, (nb.min(n) - 1) as f64);
            let k = libm::floor(s) as usize;
            let w = s - k as f64;
            if k + 1 < nb && w > 0.0 {
                values[k] += (1.0 - w) * m / dx;
                values[k + 1] += w * m / dx;
            } else {
                values[k] += m / dx;
            }
        }
        killed
    }

    /// Advances the flow by `dt` and returns the mass absorbed at the barrier
    /// during the step.
    pub fn step(&mut self, dt: f64) -> Result<f64> {
        if !(dt.is_finite() && dt > 0.0) {
            bail_arg!("time step must be positive (got {dt})");
        }
        let nb = self.active_cells();
        let mut killed = self.deposit_atoms(nb);
        let killing = self.barrier.is_finite();
        let dx = self.u.density.dx();
        let r = DIFFUSIVITY * dt / (dx * dx);
        if nb > 0 {
            self.scratch.resize(nb, 0.0);
            let u = &mut self.u.density.values_mut()[..nb];
            solve_backward_euler(u, &mut self.scratch, r, killing);
            if killing {
                // Flux through the Dirichlet face over the step, as mass.
                killed += 2.0 * r * u[nb - 1] * dx;
            }
        }
        self.killed_cum += killed;
        self.time += dt;
        Ok(killed)
    }

    /// Snaps the clock onto `t` after a step meant to end there, so that
    /// accumulated rounding does not drift snapshot times.
    pub(crate) fn align_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Copies `other` into `self`, reusing allocations.
    pub fn copy_from(&mut self, other: &Self) {
        self.u.density.clone_from(&other.u.density);
        self.u.atoms.clone_from(&other.u.atoms);
        self.barrier = other.barrier;
        self.killed_cum = other.killed_cum;
        self.time = other.time;
    }

    /// `(x, density)` rows at cell centers.
    pub fn profile_rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let g = &self.u.density;
        g.values().iter().enumerate().map(move |(k, v)| (g.center(k), *v))
    }
}

/// Solves `(I − r·L) u_new = u_old` in place, where `L` is the second
/// difference with a reflecting left wall and either a Dirichlet (ghost value
/// `−u`) or reflecting right end.
fn solve_backward_euler(u: &mut [f64], c_prime: &mut [f64], r: f64, dirichlet_right: bool) {
    let n = u.len();
    let diag = |i: usize| {
        let mut d = 1.0;
        if i > 0 {
            d += r;
        }
        if i + 1 < n {
            d += r;
        } else if dirichlet_right {
            d += 2.0 * r;
        }
        d
    };
    // Thomas algorithm; off-diagonals are all −r.
    let mut denom = diag(0);
    c_prime[0] = -r / denom;
    u[0] /= denom;
    for i in 1..n {
        denom = diag(i) + r * c_prime[i - 1];
        c_prime[i] = -r / denom;
        u[i] = (u[i] + r * u[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        u[i] -= c_prime[i] * u[i + 1];
    }
}

/// Convenience constructor: an atom of `mass` at `x0` on a grid covering
/// `[left, right]`, killed at `barrier`.
pub fn atom_state(x0: f64, mass: f64, left: f64, right: f64, dx: f64, barrier: f64) -> Result<KilledHeatState> {
    let density = GridDensity::zeros(left, dx, GridDensity::cells_between(left, right, dx))?;
    let mut u = HybridMeasure::from_density(density);
    u.atoms.add_atom(x0, mass)?;
    KilledHeatState::new(u, barrier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn run(state: &mut KilledHeatState, t: f64, dt: f64) {
        let steps = libm::round(t / dt) as usize;
        for _ in 0..steps {
            state.step(dt).unwrap();
        }
    }

    #[test]
    fn analytic_survival_examples() {
        assert_eq!(survival_mass_analytic(0.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(survival_mass_analytic(-1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(survival_mass_analytic(-1.0, 0.0, 1.0).unwrap(), 0.682_689_492_137_085_9, epsilon = 1e-12);
        assert!(survival_mass_analytic(1.0, 0.0, 1.0).is_err());
        assert_relative_eq!(normal_cdf(1.0), 0.841_344_746_068_542_9, epsilon = 1e-14);
    }

    #[test]
    fn zero_profile_is_fixed() {
        let mut s = KilledHeatState::new(HybridMeasure::from_density(GridDensity::zeros(-1.0, 0.01, 150).unwrap()), 0.0).unwrap();
        assert_eq!(s.step(0.01).unwrap(), 0.0);
        assert!(s.profile().density.values().iter().all(|v| *v == 0.0));
        assert_eq!(s.boundary_flux(), 0.0);
    }

    #[test]
    fn free_flow_conserves_mass() {
        let mut s = atom_state(0.0, 1.0, -6.0, 6.0, 1e-3, f64::INFINITY).unwrap();
        run(&mut s, 1.0, 1e-2);
        assert_relative_eq!(s.mass(), 1.0, max_relative = 1e-10);
        assert_eq!(s.killed_cum(), 0.0);
    }

    #[test]
    fn balance_holds_with_killing() {
        let mut s = atom_state(-0.3, 2.0, -4.0, 1.0, 1e-3, 0.0).unwrap();
        for _ in 0..200 {
            s.step(5e-3).unwrap();
            assert!(s.profile().density.values().iter().all(|v| *v >= 0.0));
            // Exact up to round-off in the tridiagonal solve.
            assert_relative_eq!(s.mass() + s.killed_cum(), 2.0, max_relative = 1e-10);
        }
        assert!(s.profile().density.values()[4000..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reset_keeps_profile() {
        let mut s = atom_state(-0.2, 1.0, -2.0, 0.5, 1e-2, 0.0).unwrap();
        run(&mut s, 0.1, 1e-3);
        let before = s.clone();
        s.reset_killed();
        assert_eq!(s.killed_cum(), 0.0);
        assert_eq!(s.profile(), before.profile());
        assert_eq!(s.time(), before.time());
        let once = s.clone();
        s.reset_killed();
        assert_eq!(s, once);
    }

    #[test]
    fn linear_profile_flux_is_one_half() {
        let dx = 1e-4;
        let g = GridDensity::from_fn(-1.0, 0.5, dx, |x| (-x).max(0.0)).unwrap();
        let s = KilledHeatState::new(HybridMeasure::from_density(g), 0.0).unwrap();
        assert_relative_eq!(s.boundary_flux(), 0.5, max_relative = 1e-9);
    }

    #[test]
    fn flux_matches_killed_rate() {
        let mut s = atom_state(-0.5, 1.0, -5.0, 0.5, 1e-3, 0.0).unwrap();
        run(&mut s, 0.2, 1e-4);
        let flux = s.boundary_flux();
        let dt = 1e-6;
        let killed = s.step(dt).unwrap();
        assert_relative_eq!(killed / dt, flux, max_relative = 1e-3);
    }

    #[test]
    fn barrier_moves_right_only_and_on_edges() {
        let mut s = atom_state(-0.5, 1.0, -1.0, 1.0, 0.1, 0.0).unwrap();
        assert!(s.set_barrier(-0.1).is_err());
        assert!(s.set_barrier(0.25).is_err());
        s.set_barrier(0.3).unwrap();
        s.set_barrier(f64::INFINITY).unwrap();
        assert!(s.step(0.0).is_err());
    }

    #[test]
    fn atom_on_barrier_dies_at_once() {
        let mut s = atom_state(0.0, 1.0, -1.0, 1.0, 0.01, 0.0).unwrap();
        assert_eq!(s.step(1e-3).unwrap(), 1.0);
        assert_eq!(s.mass(), 0.0);
    }
}
