//! Finite measures on the line: sorted atoms, piecewise-constant grid
//! densities, and their sum.
//!
//! Interval masses use the half-open convention `(a, b]` unless another
//! [`IntervalEnds`] is requested. Grid cell `k` covers
//! `(left + k·dx, left + (k+1)·dx]`, so a point on a cell edge belongs to the
//! cell on its left.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{bail_arg, Error, Result};

/// Which endpoints an interval includes. Only matters for atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalEnds {
    /// `(a, b]`
    #[default]
    LeftOpen,
    /// `[a, b)`
    RightOpen,
    /// `[a, b]`
    Closed,
    /// `(a, b)`
    Open,
}

impl IntervalEnds {
    fn contains(self, a: f64, b: f64, x: f64) -> bool {
        match self {
            IntervalEnds::LeftOpen => a < x && x <= b,
            IntervalEnds::RightOpen => a <= x && x < b,
            IntervalEnds::Closed => a <= x && x <= b,
            IntervalEnds::Open => a < x && x < b,
        }
    }
}

pub trait Measure {
    /// `⟨m, 1⟩`.
    fn total_mass(&self) -> f64;

    /// Mass of the interval from `a` to `b` with the given endpoint convention.
    fn measure_of_interval(&self, a: f64, b: f64, ends: IntervalEnds) -> Result<f64>;

    /// Mass of `(a, b]`.
    fn mass_in(&self, a: f64, b: f64) -> Result<f64> {
        self.measure_of_interval(a, b, IntervalEnds::LeftOpen)
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_nan() || b.is_nan() || a > b {
        bail_arg!("interval endpoints must satisfy a <= b (got a = {a}, b = {b})");
    }
    Ok(())
}

/// A finite sum of point masses with strictly increasing positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawAtoms", into = "RawAtoms")]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RawAtoms {
    atoms: Vec<(f64, f64)>,
}

impl TryFrom<RawAtoms> for AtomicMeasure {
    type Error = Error;

    fn try_from(raw: RawAtoms) -> Result<Self> {
        AtomicMeasure::new(raw.atoms)
    }
}

impl From<AtomicMeasure> for RawAtoms {
    fn from(m: AtomicMeasure) -> Self {
        RawAtoms { atoms: m.atoms }
    }
}

impl AtomicMeasure {
    /// Builds a measure from `(position, mass)` pairs in any order.
    ///
    /// Atoms sharing a position are merged and zero-mass atoms dropped.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(z, m) in &atoms {
            if !z.is_finite() {
                bail_arg!("atom position must be finite (got {z})");
            }
            if !(m.is_finite() && m >= 0.0) {
                bail_arg!("atom mass must be finite and nonnegative (got {m} at {z})");
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (z, m) in atoms {
            if m == 0.0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == z => last.1 += m,
                _ => merged.push((z, m)),
            }
        }
        Ok(AtomicMeasure { atoms: merged })
    }

    pub fn empty() -> Self {
        AtomicMeasure { atoms: Vec::new() }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.0)
    }

    pub fn masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    /// Mass sitting exactly at `z`.
    pub fn mass_at(&self, z: f64) -> f64 {
        self.atoms.binary_search_by(|a| a.0.partial_cmp(&z).unwrap_or(Ordering::Less)).map(|i| self.atoms[i].1).unwrap_or(0.0)
    }

    /// Adds `mass` at `z`, merging with an existing atom there.
    pub fn add_atom(&mut self, z: f64, mass: f64) -> Result<()> {
        if !z.is_finite() || !(mass.is_finite() && mass >= 0.0) {
            bail_arg!("cannot add atom of mass {mass} at {z}");
        }
        if mass == 0.0 {
            return Ok(());
        }
        match self.atoms.binary_search_by(|a| a.0.partial_cmp(&z).unwrap_or(Ordering::Less)) {
            Ok(i) => self.atoms[i].1 += mass,
            Err(i) => self.atoms.insert(i, (z, mass)),
        }
        Ok(())
    }

    /// Removes and returns all atoms.
    pub fn take(&mut self) -> Vec<(f64, f64)> {
        core::mem::take(&mut self.atoms)
    }
}

impl Measure for AtomicMeasure {
    fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    fn measure_of_interval(&self, a: f64, b: f64, ends: IntervalEnds) -> Result<f64> {
        check_interval(a, b)?;
        Ok(self.atoms.iter().filter(|(z, _)| ends.contains(a, b, *z)).map(|(_, m)| m).sum())
    }
}

/// A piecewise-constant density on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridDensity {
    left: f64,
    dx: f64,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    left: f64,
    dx: f64,
    values: Vec<f64>,
}

impl TryFrom<RawGrid> for GridDensity {
    type Error = Error;

    fn try_from(raw: RawGrid) -> Result<Self> {
        GridDensity::new(raw.left, raw.dx, raw.values)
    }
}

impl From<GridDensity> for RawGrid {
    fn from(g: GridDensity) -> Self {
        RawGrid { left: g.left, dx: g.dx, values: g.values }
    }
}

impl GridDensity {
    pub fn new(left: f64, dx: f64, values: Vec<f64>) -> Result<Self> {
        if !left.is_finite() {
            bail_arg!("grid origin must be finite (got {left})");
        }
        if !(dx.is_finite() && dx > 0.0) {
            bail_arg!("cell width must be positive (got {dx})");
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            bail_arg!("density values must be finite and nonnegative (got {v})");
        }
        Ok(GridDensity { left, dx, values })
    }

    /// All-zero density with `n` cells.
    pub fn zeros(left: f64, dx: f64, n: usize) -> Result<Self> {
        Self::new(left, dx, alloc::vec![0.0; n])
    }

    /// Number of cells needed to cover `[left, right]` with width `dx`,
    /// tolerating round-off when the span is a whole number of cells.
    pub fn cells_between(left: f64, right: f64, dx: f64) -> usize {
        let n = (right - left) / dx;
        let rounded = libm::round(n);
        if (n - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            libm::ceil(n) as usize
        }
    }

    /// Samples `density` at cell midpoints on `[left, right]`.
    ///
    /// Cell masses are exact for densities that are linear on each cell.
    pub fn from_fn(left: f64, right: f64, dx: f64, density: impl Fn(f64) -> f64) -> Result<Self> {
        if !(right > left) {
            bail_arg!("grid must have right > left (got [{left}, {right}])");
        }
        let n = Self::cells_between(left, right, dx);
        let values = (0..n).map(|k| density(left + (k as f64 + 0.5) * dx)).collect();
        Self::new(left, dx, values)
    }

    /// Constant density `level` on `[left, right]`.
    pub fn uniform(left: f64, right: f64, dx: f64, level: f64) -> Result<Self> {
        Self::from_fn(left, right, dx, |_| level)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn right(&self) -> f64 {
        self.edge(self.values.len())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of cell edge `k` (edge 0 is the grid origin).
    pub fn edge(&self, k: usize) -> f64 {
        self.left + k as f64 * self.dx
    }

    pub fn center(&self, k: usize) -> f64 {
        self.left + (k as f64 + 0.5) * self.dx
    }

    /// Index of the edge at `x`, if `x` lies on one (within 1e-9 cells).
    pub fn edge_index(&self, x: f64) -> Option<usize> {
        let k = (x - self.left) / self.dx;
        let rounded = libm::round(k);
        if rounded < 0.0 || rounded > self.values.len() as f64 {
            return None;
        }
        ((k - rounded).abs() <= 1e-9 * rounded.max(1.0)).then_some(rounded as usize)
    }

    /// Largest density value.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Mass per cell.
    pub fn cell_masses(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |v| v * self.dx)
    }

    /// Smallest interval containing all positive-density cells.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.values.iter().position(|v| *v > 0.0)?;
        let last = self.values.iter().rposition(|v| *v > 0.0)?;
        Some((self.edge(first), self.edge(last + 1)))
    }

    /// Mass-exact projection onto another uniform grid.
    pub fn resample(&self, left: f64, dx: f64, n: usize) -> Result<GridDensity> {
        let values = (0..n)
            .map(|k| {
                let a = left + k as f64 * dx;
                self.mass_in(a, a + dx).map(|m| m / dx)
            })
            .collect::<Result<Vec<_>>>()?;
        GridDensity::new(left, dx, values)
    }

    /// Prefix sums of cell masses, for O(1) queries of `μ([left, z))`.
    pub fn cumulative(&self) -> CumulativeMass<'_> {
        let mut prefix = Vec::with_capacity(self.values.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for m in self.cell_masses() {
            acc += m;
            prefix.push(acc);
        }
        CumulativeMass { grid: self, prefix }
    }
}

impl Measure for GridDensity {
    fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }

    fn measure_of_interval(&self, a: f64, b: f64, _ends: IntervalEnds) -> Result<f64> {
        check_interval(a, b)?;
        let lo = a.max(self.left);
        let hi = b.min(self.right());
        if lo >= hi {
            return Ok(0.0);
        }
        let first = (libm::floor((lo - self.left) / self.dx) as usize).min(self.values.len() - 1);
        let mut mass = 0.0;
        for k in first..self.values.len() {
            let (c0, c1) = (self.edge(k), self.edge(k + 1));
            if c0 >= hi {
                break;
            }
            let overlap = c1.min(hi) - c0.max(lo);
            if overlap > 0.0 {
                mass += overlap * self.values[k];
            }
        }
        Ok(mass)
    }
}

/// Distribution function `z ↦ μ([left, z))` of a grid density.
#[derive(Debug, Clone)]
pub struct CumulativeMass<'a> {
    grid: &'a GridDensity,
    prefix: Vec<f64>,
}

impl CumulativeMass<'_> {
    pub fn below(&self, z: f64) -> f64 {
        let g = self.grid;
        if z <= g.left {
            return 0.0;
        }
        let n = g.values.len();
        let pos = (z - g.left) / g.dx;
        if pos >= n as f64 {
            return self.prefix[n];
        }
        let k = libm::floor(pos) as usize;
        self.prefix[k] + (z - g.edge(k)) * g.values[k]
    }

    pub fn total(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }

    /// Mass of `[a, b)`.
    pub fn between(&self, a: f64, b: f64) -> f64 {
        self.below(b) - self.below(a)
    }

    /// Smallest `z` with `μ([left, z)) >= target`, for `0 <= target <= total`.
    pub fn quantile(&self, target: f64) -> f64 {
        let g = self.grid;
        let k = self.prefix.partition_point(|p| *p < target);
        if k == 0 {
            return g.left;
        }
        let cell = (k - 1).min(g.values.len() - 1);
        let rest = target - self.prefix[cell];
        if g.values[cell] > 0.0 {
            (g.edge(cell) + rest / g.values[cell]).min(g.edge(cell + 1))
        } else {
            g.edge(cell + 1)
        }
    }
}

/// Grid density plus atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridMeasure {
    pub density: GridDensity,
    #[serde(flatten)]
    pub atoms: AtomicMeasure,
}

impl HybridMeasure {
    pub fn from_density(density: GridDensity) -> Self {
        HybridMeasure { density, atoms: AtomicMeasure::empty() }
    }
}

impl Measure for HybridMeasure {
    fn total_mass(&self) -> f64 {
        self.density.total_mass() + self.atoms.total_mass()
    }

    fn measure_of_interval(&self, a: f64, b: f64, ends: IntervalEnds) -> Result<f64> {
        Ok(self.density.measure_of_interval(a, b, ends)? + self.atoms.measure_of_interval(a, b, ends)?)
    }
}

/// Lumps `x2` into piles: an atom at `i·η` carrying the mass of
/// `((i−1)η, iη]`, for `i = 1..⌈R/η⌉` where `R` is the right end of the grid.
pub fn discretize_initial(x2: &GridDensity, eta: f64) -> Result<AtomicMeasure> {
    if !(eta.is_finite() && eta > 0.0) {
        bail_arg!("eta must be positive (got {eta})");
    }
    if x2.left() < 0.0 && x2.measure_of_interval(x2.left(), 0.0, IntervalEnds::Closed)? > 0.0 {
        bail_arg!("dormant density must be supported in [0, inf)");
    }
    let n = GridDensity::cells_between(0.0, x2.right(), eta);
    let atoms = (1..=n)
        .map(|i| {
            let b = i as f64 * eta;
            x2.mass_in(b - eta, b).map(|m| (b, m))
        })
        .collect::<Result<Vec<_>>>()?;
    AtomicMeasure::new(atoms)
}
