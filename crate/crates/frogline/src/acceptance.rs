//! The acceptance battery: thirteen criteria, each reduced to a list of
//! test reports and a pass flag.
//!
//! Statistical criteria use `α = 0.01` per criterion, split evenly over the
//! tests inside it. The family budget is written into the report header.

use frogline_core::colony::{sample_w, solve_mp1, w_cdf};
use frogline_core::frog::{
    compute_ustar, extract_l, simulate_hazard_driven, simulate_space_driven, wake_threshold, FrogConfig, FrogRun, Outcome,
};
use frogline_core::heat::{atom_state, survival_mass_analytic, HeatConfig, KilledHeatState};
use frogline_core::measures::{discretize_initial, AtomicMeasure, GridDensity, Measure};
use frogline_core::ppp::{coupling_convergence_report, sample_j, ustar_from_j, PointPattern, Rect};
use frogline_core::rng::{open_unit, replica_stream, StreamRng};
use frogline_core::sites::{next_jump, simulate_mps, MpsState, SiteSystem};
use frogline_core::stats::{
    ks_distance, ks_one_sample, ks_two_sample, martingale_drift, poisson_count_test, FamilyBudget, TestReport, DEFAULT_ALPHA,
    DEFAULT_Z_BOUND,
};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::commands::{event_log, frog_runs, max_drift};
use crate::config::{DensitySpec, RunConfig, Sampler};
use crate::io::content_version;
use crate::runner::try_run_indexed;

pub const ALL: [u32; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13];

/// Criteria that cannot pass at the prescribed parameters. They are still
/// run in full and reported as failures.
pub const KNOWN_UNATTAINABLE: &[u32] = &[11];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    /// Full replica counts.
    Acceptance,
    /// One twentieth of the replicas; a smoke run, not a verdict.
    Quick,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Acceptance => "acceptance",
            Suite::Quick => "quick",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceOptions {
    pub seed: u64,
    pub threads: usize,
    pub suite: Suite,
}

impl AcceptanceOptions {
    fn n(&self, full: usize) -> usize {
        match self.suite {
            Suite::Acceptance => full,
            Suite::Quick => (full / 20).max(50).min(full),
        }
    }

    /// Stream for replica `r` of criterion `id`, part `part`.
    fn rng(&self, id: u32, part: u32, r: usize) -> StreamRng {
        let key = self.seed ^ ((id as u64) << 40) ^ ((part as u64) << 32);
        replica_stream(key, r as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: u32,
    pub title: String,
    pub pass: bool,
    pub summary: String,
    pub reports: Vec<TestReport>,
    /// Diagnostics that do not enter the verdict.
    pub info: Vec<TestReport>,
}

impl Criterion {
    fn new(id: u32, title: &str, reports: Vec<TestReport>, summary: String) -> Self {
        let pass = !reports.is_empty() && reports.iter().all(|r| r.pass);
        Criterion { id, title: title.into(), pass, summary, reports, info: Vec::new() }
    }

    fn with_info(mut self, info: Vec<TestReport>) -> Self {
        self.info = info;
        self
    }

    pub fn known_unattainable(&self) -> bool {
        KNOWN_UNATTAINABLE.contains(&self.id)
    }

    /// One line: id, verdict, title, summary.
    pub fn line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        format!("criterion {:>2} {verdict}  {}: {}", self.id, self.title, self.summary)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub content_version: String,
    pub suite: Suite,
    pub seed: u64,
    /// Per-criterion level; each criterion splits it over its tests.
    pub alpha_per_criterion: f64,
    pub z_bound: f64,
    /// Number of criteria with a stochastic verdict, and the resulting
    /// bound on the battery's false-failure probability.
    pub stochastic_criteria: usize,
    pub family_alpha: f64,
    pub known_unattainable: Vec<u32>,
    pub all_pass: bool,
    pub criteria: Vec<Criterion>,
}

const STOCHASTIC: [u32; 6] = [1, 2, 4, 5, 7, 11];

impl Report {
    pub fn new(opts: &AcceptanceOptions, criteria: &[Criterion]) -> Self {
        Report {
            content_version: content_version(),
            suite: opts.suite,
            seed: opts.seed,
            alpha_per_criterion: DEFAULT_ALPHA,
            z_bound: DEFAULT_Z_BOUND,
            stochastic_criteria: STOCHASTIC.len(),
            family_alpha: STOCHASTIC.len() as f64 * DEFAULT_ALPHA,
            known_unattainable: KNOWN_UNATTAINABLE.to_vec(),
            all_pass: criteria.iter().all(|c| c.pass),
            criteria: criteria.to_vec(),
        }
    }
}

/// A deterministic check reported in test form.
fn check(name: impl Into<String>, statistic: f64, threshold: f64, n: usize, pass: bool) -> TestReport {
    TestReport { name: name.into(), statistic, p_value: None, z_score: None, n, pass, threshold, approximate: false }
}

/// Mass-conservation maxima gathered from every frog batch of a run.
#[derive(Debug, Default)]
struct DriftLog {
    batches: Vec<(String, f64, usize)>,
}

impl DriftLog {
    fn record(&mut self, name: &str, runs: &[FrogRun], initial: f64) {
        let worst = runs.iter().map(|r| max_drift(r, initial)).fold(0.0, f64::max);
        self.batches.push((name.into(), worst, runs.len()));
    }
}

pub fn run_one(id: u32, opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    run_with(id, opts, &mut DriftLog::default())
}

/// Runs every criterion; the conservation criterion also covers the frog
/// paths simulated by the others.
pub fn run_all(opts: &AcceptanceOptions) -> anyhow::Result<Vec<Criterion>> {
    let mut log = DriftLog::default();
    let mut out = Vec::new();
    for id in ALL.iter().copied().filter(|id| *id != 6).chain([6]) {
        out.push(run_with(id, opts, &mut log)?);
    }
    out.sort_by_key(|c| c.id);
    Ok(out)
}

fn run_with(id: u32, opts: &AcceptanceOptions, log: &mut DriftLog) -> anyhow::Result<Criterion> {
    match id {
        1 => c1_wake_threshold_law(opts),
        2 => c2_one_colony_martingale(opts),
        3 => c3_heat_engine(),
        4 => c4_finite_sites(opts),
        5 => c5_sampler_equivalence(opts, log),
        6 => c6_conservation(opts, log),
        7 => c7_end_to_end(opts, log),
        8 => c8_coupling(opts),
        9 => c9_threshold_oracle(opts),
        10 => c10_ustar_vs_stall(opts),
        11 => c11_run_probability(opts),
        12 => c12_no_upward_jumps(opts, log),
        13 => c13_determinism(opts),
        _ => anyhow::bail!("no criterion {id}; valid ids are 1..=13"),
    }
}

fn c1_wake_threshold_law(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    // Cheap, and the 2% median tolerance needs the full count in every suite.
    let n = 100_000;
    let xs = [0.5, 1.0, 3.0];
    let budget = FamilyBudget::new(DEFAULT_ALPHA, xs.len());
    let mut reports = Vec::new();
    for (k, &x) in xs.iter().enumerate() {
        let mut rng = opts.rng(1, k as u32, 0);
        let mut w = (0..n).map(|_| sample_w(x, open_unit(&mut rng))).collect::<Result<Vec<_>, _>>()?;
        reports.push(ks_one_sample(&format!("KS W({x})"), &w, |r| w_cdf(x, r), budget.per_test())?);
        w.sort_by(f64::total_cmp);
        let median = 0.5 * (w[(n - 1) / 2] + w[n / 2]);
        let rel = (median / x - 1.0).abs();
        reports.push(check(format!("median W({x}) / x - 1"), rel, 0.02, n, rel <= 0.02));
    }
    let summary = format!("{n} draws per x, max KS D {:.4}", reports.iter().step_by(2).map(|r| r.statistic).fold(0.0, f64::max));
    Ok(Criterion::new(1, "wake-threshold law", reports, summary))
}

fn c2_one_colony_martingale(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let n = opts.n(10_000);
    let times = [0.5, 1.0, 2.0, 5.0];
    let mut rng = opts.rng(2, 0, 0);
    let values = (0..n)
        .map(|_| {
            let w = sample_w(1.0, open_unit(&mut rng))?;
            let path = solve_mp1(1.0, w, 5.0)?;
            Ok(times.iter().map(|t| path.state_at(*t).x2).collect())
        })
        .collect::<anyhow::Result<Vec<Vec<f64>>>>()?;
    let reports: Vec<_> = martingale_drift(&values, 1.0, DEFAULT_Z_BOUND)?
        .into_iter()
        .zip(times)
        .map(|(r, t)| r.with_name(format!("E x2({t}) = x2(0)")))
        .collect();
    let worst = reports.iter().filter_map(|r| r.z_score).fold(0.0, |a: f64, z| a.max(z.abs()));
    Ok(Criterion::new(2, "one-colony martingale", reports, format!("{n} replicas, max |z| {worst:.2}")))
}

fn advance(state: &mut KilledHeatState, until: f64, dt: f64) -> anyhow::Result<()> {
    while state.time() < until - 1e-12 {
        state.step(dt.min(until - state.time()))?;
    }
    Ok(())
}

fn c3_heat_engine() -> anyhow::Result<Criterion> {
    let dx = 1e-3;
    let mut reports = Vec::new();
    let mut worst: f64 = 0.0;
    for (t, dt) in [(0.01, 2e-6), (0.1, 2e-5), (1.0, 1e-4)] {
        for d in [0.05, 0.2, 1.0] {
            let mut s = atom_state(-d, 1.0, -8.0, 0.0, dx, 0.0)?;
            advance(&mut s, t, dt)?;
            let err = (s.mass() - survival_mass_analytic(-d, 0.0, t)?).abs();
            worst = worst.max(err);
            reports.push(check(format!("survival error, atom at -{d}, t = {t}"), err, 1e-4, 1, err <= 1e-4));
        }
    }
    // Unit time with a coarse step, killed and free.
    let mut killed = atom_state(-0.5, 1.0, -6.0, 0.0, dx, 0.0)?;
    advance(&mut killed, 1.0, 1e-3)?;
    let drift = (killed.mass() + killed.killed_cum() - 1.0).abs();
    reports.push(check("conservation drift over unit time, killed", drift, 1e-6, 1, drift <= 1e-6));
    let mut free = atom_state(-0.5, 1.0, -6.0, 6.0, dx, f64::INFINITY)?;
    advance(&mut free, 1.0, 1e-3)?;
    let drift_free = (free.mass() - 1.0).abs();
    reports.push(check("conservation drift over unit time, free", drift_free, 1e-6, 1, drift_free <= 1e-6));
    let summary = format!("max survival error {worst:.2e}, drift {:.1e}", drift.max(drift_free));
    Ok(Criterion::new(3, "heat engine", reports, summary))
}

fn c4_finite_sites(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let n = opts.n(10_000);
    let sys = SiteSystem::nearest_neighbor(0, 2, 1.0)?;
    let init = MpsState::new(vec![1.0, 0.0, 0.0], vec![0.0, 0.5, 0.5])?;
    let checkpoints = [0.5, 1.0, 2.0, 4.0];
    let runs = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(4, 0, r);
        Ok(simulate_mps(&sys, &init, 4.0, &checkpoints, &mut rng)?)
    })?;
    let mut reports = Vec::new();
    for k in 1..3 {
        let values: Vec<Vec<f64>> = runs.iter().map(|run| run.checkpoints.iter().map(|s| s.x2[k]).collect()).collect();
        for (rep, t) in martingale_drift(&values, init.x2[k], DEFAULT_Z_BOUND)?.into_iter().zip(checkpoints) {
            reports.push(rep.with_name(format!("x2 martingale, site {k}, t = {t}")));
        }
    }
    let jumps: usize = runs.iter().map(|r| r.events.len()).sum();
    let off = runs.iter().flat_map(|r| &r.events).filter(|e| e.site != e.leftmost).count();
    reports.push(check("jumps away from the interface", off as f64, 0.0, jumps, off == 0));

    // A single dormant site fed by a draining neighbour absorbs W(x) capped
    // at the mass available.
    let drain = SiteSystem::new(vec![0, 1], vec![vec![-1.0, 1.0], vec![0.0, 0.0]])?;
    let (x, m) = (0.5, 2.0);
    let start = MpsState::new(vec![m, 0.0], vec![0.0, x])?;
    let v = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(4, 1, r);
        let mut s = start.clone();
        Ok(match next_jump(&mut s, &drain, &mut rng, 60.0)? {
            Some(j) => s.x2[j.site] - x,
            None => f64::INFINITY,
        })
    })?;
    reports.push(ks_one_sample("KS absorbed mass at a single dormant site", &v, |r| w_cdf(x, r.min(m)), DEFAULT_ALPHA)?);
    let worst = reports.iter().filter_map(|r| r.z_score).fold(0.0, |a: f64, z| a.max(z.abs()));
    let summary = format!("{n} replicas, {jumps} jumps, {off} off-interface, max |z| {worst:.2}");
    Ok(Criterion::new(4, "finite-site construction", reports, summary))
}

fn two_pile_setup() -> anyhow::Result<(GridDensity, AtomicMeasure, FrogConfig)> {
    let x1 = GridDensity::uniform(-0.5, 0.0, 0.01, 2.0)?;
    let piles = AtomicMeasure::new(vec![(0.1, 0.1), (0.2, 0.1)])?;
    let cfg = FrogConfig::new(HeatConfig { dx: 0.01, dt: 1e-3, dt_growth: 1.05, dt_max: 0.02 }, -1.5, 0.5, 2.0);
    Ok((x1, piles, cfg))
}

fn c5_sampler_equivalence(opts: &AcceptanceOptions, log: &mut DriftLog) -> anyhow::Result<Criterion> {
    let n = opts.n(10_000);
    let (x1, piles, cfg) = two_pile_setup()?;
    let hazard = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(5, 0, r);
        Ok(simulate_hazard_driven(&x1, &piles, &mut rng, &cfg)?)
    })?;
    let space = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(5, 1, r);
        let ws = piles.masses().map(|x| sample_w(x, open_unit(&mut rng))).collect::<Result<Vec<_>, _>>()?;
        Ok(simulate_space_driven(&x1, &piles, &ws, &cfg)?)
    })?;
    let initial = x1.total_mass() + piles.total_mass();
    log.record("two-pile, hazard sampler", &hazard, initial);
    log.record("two-pile, space sampler", &space, initial);
    let budget = FamilyBudget::new(DEFAULT_ALPHA, 2);
    let mut reports = Vec::new();
    for k in 0..2 {
        let tau = |runs: &[FrogRun]| runs.iter().map(|r| r.wake_time(k).unwrap_or(f64::INFINITY)).collect::<Vec<_>>();
        let (a, b) = (tau(&hazard), tau(&space));
        reports.push(ks_two_sample(&format!("KS wake time of pile {}", k + 1), &a, &b, budget.per_test())?);
    }
    let summary = format!(
        "{n} replicas per sampler, D = {:.4} / {:.4}, p = {:.3} / {:.3}",
        reports[0].statistic,
        reports[1].statistic,
        reports[0].p_value.unwrap_or(f64::NAN),
        reports[1].p_value.unwrap_or(f64::NAN)
    );
    Ok(Criterion::new(5, "sampler equivalence", reports, summary))
}

fn c6_conservation(opts: &AcceptanceOptions, log: &mut DriftLog) -> anyhow::Result<Criterion> {
    let mut cfg = RunConfig::default();
    cfg.model.eta = 0.02;
    cfg.model.horizon = 3.0;
    cfg.solver = crate::config::SolverSection { dt_growth: 1.05, dt_max: 0.02, ..cfg.solver };
    cfg.sampling.replicas = opts.n(500);
    cfg.sampling.seed = opts.seed ^ (6 << 40);
    let (setup, runs) = frog_runs(&cfg, cfg.model.eta, opts.threads)?;
    log.record("uniform piles, eta = 0.02, evenly spaced snapshots", &runs, setup.total_mass());
    let reports: Vec<_> = log
        .batches
        .iter()
        .map(|(name, worst, n)| check(format!("max relative mass drift: {name}"), *worst, 1e-5, *n, *worst <= 1e-5))
        .collect();
    let paths: usize = log.batches.iter().map(|b| b.2).sum();
    let worst = log.batches.iter().map(|b| b.1).fold(0.0, f64::max);
    Ok(Criterion::new(6, "frog mass conservation", reports, format!("{paths} paths, max relative drift {worst:.1e}")))
}

fn unit_uniform() -> anyhow::Result<GridDensity> {
    Ok(GridDensity::uniform(0.0, 1.0, 0.01, 1.0)?)
}

/// `η⌈u/η⌉`, computed as the pile positions are.
fn to_pile(u: f64, eta: f64, n: usize) -> f64 {
    let i = (u / eta).ceil().clamp(1.0, n as f64);
    i * eta
}

fn c7_end_to_end(opts: &AcceptanceOptions, log: &mut DriftLog) -> anyhow::Result<Criterion> {
    let n = opts.n(10_000);
    let eta = 0.02;
    let s0 = 0.5;
    let f = unit_uniform()?;
    let x1 = GridDensity::uniform(-0.5, 0.0, 0.01, 1.0)?;
    let piles = discretize_initial(&f, eta)?;
    let mut cfg = FrogConfig::new(HeatConfig { dx: 0.01, dt: 1e-3, dt_growth: 1.25, dt_max: 2.0 }, -1.0, 1.02, f64::INFINITY);
    cfg.stop_when_settled = true;
    let runs = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(7, 0, r);
        let ws = piles.masses().map(|x| sample_w(x, open_unit(&mut rng))).collect::<Result<Vec<_>, _>>()?;
        Ok(simulate_space_driven(&x1, &piles, &ws, &cfg)?)
    })?;
    log.record("uniform piles, eta = 0.02, run until settled", &runs, x1.total_mass() + piles.total_mass());

    // Marks at or below s0 never decide the stall, so sampling J above
    // s0 / 2 gives the exact stall position.
    let j_rmin = 0.5 * s0;
    let from_j = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(7, 1, r);
        let j = sample_j(&f, j_rmin, &mut rng)?;
        Ok(ustar_from_j(&j, s0, &f)?)
    })?;
    let frog_u = runs.iter().map(|r| r.ustar(&piles).unwrap_or(f64::NAN)).collect::<Vec<_>>();
    anyhow::ensure!(frog_u.iter().all(|u| u.is_finite()), "a settled run has no stall position");
    let j_u: Vec<f64> = from_j.iter().map(|u| to_pile(*u, eta, piles.len())).collect();

    let mut reports = vec![ks_two_sample("KS stall position, simulation vs J on the pile grid", &frog_u, &j_u, DEFAULT_ALPHA)?];
    let raw = ks_distance(&frog_u, &from_j)?;
    let info = vec![check("KS D, simulation vs J before rounding to piles", raw, f64::NAN, n, true)];

    let full: Vec<PointPattern> =
        runs.iter().filter(|r| matches!(r.outcome, Outcome::Completed { .. })).map(|r| extract_l(&r.events, &piles)).collect();
    // Each lies below s0 + μ([0, x1)), so full waking does not cut it, and
    // its Bernoulli-vs-Poisson bias at this η keeps the false-reject rate
    // near the nominal level at ~3300 fully woken replicas.
    let rects = [
        Rect { x1: 0.11, x2: 0.29, s: 0.5, s_hi: 0.6 },
        Rect { x1: 0.31, x2: 0.69, s: 0.7, s_hi: 0.8 },
        Rect { x1: 0.71, x2: 0.99, s: 0.9, s_hi: 1.2 },
    ];
    let budget = FamilyBudget::new(DEFAULT_ALPHA, rects.len());
    for rect in &rects {
        let counts: Vec<u64> = full.iter().map(|l| l.count(rect) as u64).collect();
        let mean = rect.intensity(&f)?;
        let name = format!("Poisson counts of L in [{}, {}] x [{}, {})", rect.x1, rect.x2, rect.s, rect.s_hi);
        reports.push(poisson_count_test(&name, &counts, mean, budget.per_test())?);
    }
    let summary = format!(
        "{n} replicas, {} fully woken, stall KS D {:.4} (p {:.3}), count p-values {}",
        full.len(),
        reports[0].statistic,
        reports[0].p_value.unwrap_or(f64::NAN),
        reports[1..].iter().map(|r| format!("{:.3}", r.p_value.unwrap_or(f64::NAN))).collect::<Vec<_>>().join(" / ")
    );
    Ok(Criterion::new(7, "end-to-end stall law and jump field", reports, summary).with_info(info))
}

/// Rectangles whose counts are insensitive to the perturbation of size
/// `eps` that grouping points into cells can cause.
fn robust_rects(j: &PointPattern, eps: f64, want: usize) -> Vec<Rect> {
    let mut out = Vec::new();
    for x1 in [0.05, 0.15, 0.25, 0.35, 0.45, 0.55] {
        for width in [0.2, 0.3, 0.4] {
            for s in [0.2, 0.3, 0.5, 0.8] {
                let rect = Rect::upper(x1, x1 + width, s);
                let near: Vec<(f64, f64)> =
                    j.points().iter().copied().filter(|(z, _)| *z >= rect.x1 - eps && *z <= rect.x2 + eps).collect();
                let marks_clear = near.iter().all(|(_, r)| (r - s).abs() >= eps);
                let relevant: Vec<f64> = near.iter().filter(|(_, r)| *r >= s - eps).map(|p| p.0).collect();
                let edges_clear = relevant.iter().all(|z| (z - rect.x1).abs() >= eps && (z - rect.x2).abs() >= eps);
                let apart = relevant.windows(2).all(|w| w[1] - w[0] >= eps);
                if marks_clear && edges_clear && apart {
                    out.push(rect);
                    if out.len() == want {
                        return out;
                    }
                }
            }
        }
    }
    out
}

fn c8_coupling(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let n = opts.n(100).max(20);
    let f = unit_uniform()?;
    let etas = [0.02, 0.01, 0.005, 0.0025];
    let eps = 0.025;
    let results = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(8, 0, r);
        let j = sample_j(&f, 1e-4, &mut rng)?;
        let rects = robust_rects(&j, eps, 3);
        Ok((rects.len(), coupling_convergence_report(&j, &f, &etas, &rects)?))
    })?;
    let rect_total: usize = results.iter().map(|r| r.0).sum();
    let without = results.iter().filter(|r| r.0 == 0).count();
    let disagree = results.iter().filter(|r| !r.1.agrees_below(0.01)).count();
    let coarse = results.iter().filter(|r| r.1.agrees_below(0.02)).count();
    let reports = vec![
        check("patterns with a count mismatch at eta <= 0.01", disagree as f64, 0.0, rect_total, disagree == 0),
        check("patterns without a usable rectangle", without as f64, 0.0, n, without == 0),
    ];
    let info = vec![check("patterns already matching at eta = 0.02", coarse as f64, f64::NAN, n, true)];
    let summary = format!("{n} patterns, {rect_total} rectangles, {disagree} mismatches, {coarse}/{n} exact already at 0.02");
    Ok(Criterion::new(8, "cell-grouping coupling", reports, summary).with_info(info))
}

/// Pile-by-pile ruin accounting: start with just enough for the first
/// pile, carry it forward with each woken pile, top up when short.
fn bookkeeping(ws: &[f64], xs: &[f64]) -> f64 {
    let mut needed = ws[0];
    let mut carry = ws[0];
    for (w, x) in ws.iter().zip(xs) {
        if carry < *w {
            needed += w - carry;
            carry = *w;
        }
        carry += x;
    }
    needed
}

fn c9_threshold_oracle(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let n = 1000;
    let mut rng = opts.rng(9, 0, 0);
    let mut mismatches = 0;
    for _ in 0..n {
        // Multiples of 1/1024 keep every partial sum exact.
        let len = rng.random_range(1..=20);
        let ws: Vec<f64> = (0..len).map(|_| rng.random_range(1..=8192u32) as f64 / 1024.0).collect();
        let xs: Vec<f64> = (0..len).map(|_| rng.random_range(1..=1024u32) as f64 / 1024.0).collect();
        if wake_threshold(&ws, &xs)? != bookkeeping(&ws, &xs) {
            mismatches += 1;
        }
    }
    let reports = vec![check("instances where the closed form differs", mismatches as f64, 0.0, n, mismatches == 0)];
    Ok(Criterion::new(9, "wake-threshold closed form", reports, format!("{n} dyadic instances, {mismatches} mismatches")))
}

fn c10_ustar_vs_stall(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let n = 100;
    let mut cfg = FrogConfig::new(HeatConfig { dx: 0.01, dt: 1e-3, dt_growth: 1.2, dt_max: 2.0 }, -2.0, 1.2, f64::INFINITY);
    cfg.stop_when_settled = true;
    let outcomes = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(10, 0, r);
        let count = rng.random_range(1..=10);
        let piles = AtomicMeasure::new((1..=count).map(|i| (i as f64 * 0.1, 0.02 + 0.2 * open_unit(&mut rng))).collect())?;
        let x1 = GridDensity::uniform(-0.5, 0.0, 0.01, 0.1 + open_unit(&mut rng))?;
        let ws = piles.masses().map(|x| sample_w(x, open_unit(&mut rng))).collect::<Result<Vec<_>, _>>()?;
        let run = simulate_space_driven(&x1, &piles, &ws, &cfg)?;
        Ok(run.ustar(&piles) == Some(compute_ustar(&ws, &piles, x1.total_mass())?))
    })?;
    let mismatches = outcomes.iter().filter(|ok| !**ok).count();
    let reports = vec![check("configurations where stall positions differ", mismatches as f64, 0.0, n, mismatches == 0)];
    Ok(Criterion::new(10, "stall position vs simulation", reports, format!("{n} configurations, {mismatches} mismatches")))
}

/// Fraction of replicas with `⌈δ/η⌉` consecutive thresholds below `δ²`
/// starting inside `[a, 1 − a]`, for unit-density piles of size `η`.
fn run_probability(opts: &AcceptanceOptions, part: u32, eta: f64, delta: f64, a: f64, n: usize) -> anyhow::Result<(f64, f64)> {
    let piles = ((1.0 / eta) - 1e-9).ceil() as usize;
    let k = ((delta / eta) - 1e-9).ceil() as usize;
    let first = ((a / eta) - 1e-9).ceil() as usize;
    let last = (((1.0 - a) / eta) - 1e-9).ceil() as usize;
    let low = delta * delta;
    let hits = try_run_indexed(opts.threads, n, |r| {
        let mut rng = opts.rng(11, part, r);
        let ws = (0..piles).map(|_| sample_w(eta, open_unit(&mut rng))).collect::<Result<Vec<_>, _>>()?;
        // Thresholds W_{j+1}, …, W_{j+k} in 1-based numbering.
        let hit = (first..=last).filter(|j| j + k <= piles).any(|j| ws[j..j + k].iter().all(|w| *w < low));
        Ok(hit)
    })?;
    let p = hits.iter().filter(|h| **h).count() as f64 / n as f64;
    Ok((p, (p * (1.0 - p) / n as f64).sqrt()))
}

fn c11_run_probability(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let n = opts.n(10_000);
    let a = 0.1;
    // Unit density: δ⁻¹ · inf of the mass of δ/2-windows is 1/2.
    let lower: f64 = 0.5;
    let delta = lower / (12.0 * (12.0 / lower).ln());
    let bound = (-lower / (3.0 * delta)).exp();
    let mut reports = Vec::new();
    for (part, eta) in [(0, 0.01), (1, 0.005)] {
        let (p, se) = run_probability(opts, part, eta, delta, a, n)?;
        let limit = bound + 3.0 * se;
        reports.push(check(format!("run probability at eta = {eta} (bound {bound:.2e} + 3 se)"), p, limit, n, p <= limit));
    }
    // With runs as long as δ/η ≈ 1/δ the estimate falls under the bound.
    let (p, se) = run_probability(opts, 2, 1e-4, delta, a, opts.n(1000))?;
    let info = vec![check("run probability at eta = 1e-4", p, bound + 3.0 * se, opts.n(1000), p <= bound + 3.0 * se)];
    let summary = format!(
        "delta = {delta:.5}, bound {bound:.2e}; observed {:.4} / {:.4} at eta 0.01 / 0.005",
        reports[0].statistic, reports[1].statistic
    );
    Ok(Criterion::new(11, "run-probability bound", reports, summary).with_info(info))
}

fn c12_no_upward_jumps(opts: &AcceptanceOptions, log: &mut DriftLog) -> anyhow::Result<Criterion> {
    let mut cfg = RunConfig::default();
    cfg.model.horizon = 3.0;
    cfg.solver = crate::config::SolverSection { dt_growth: 1.05, dt_max: 0.02, ..cfg.solver };
    cfg.sampling.replicas = opts.n(200);
    cfg.sampling.sampler = Sampler::Hazard;
    cfg.model.x2_0 = DensitySpec::unit_uniform();
    let sup = cfg.model.x2_0.to_grid(cfg.solver.dx)?.sup();
    let mut reports = Vec::new();
    let mut info = Vec::new();
    for (part, eta) in [(0u64, 0.1), (1, 0.05), (2, 0.02)] {
        cfg.model.eta = eta;
        cfg.sampling.seed = opts.seed ^ (12 << 40) ^ (part << 32);
        let (setup, runs) = frog_runs(&cfg, eta, opts.threads)?;
        log.record(&format!("uniform piles, eta = {eta}, to time 3"), &runs, setup.total_mass());
        let atoms = setup.piles.atoms();
        let limit = sup * eta * (1.0 + 1e-12);
        let (mut advances, mut wrong, mut over) = (0usize, 0usize, 0usize);
        let mut largest: f64 = 0.0;
        for run in &runs {
            for (k, adv) in run.advances.iter().enumerate() {
                advances += 1;
                if atoms.get(k + 1).map(|p| p.1) != Some(adv.y_after) {
                    wrong += 1;
                }
                if adv.y_after > limit {
                    over += 1;
                }
                largest = largest.max(adv.y_after);
            }
        }
        reports.push(check(
            format!("pickups differing from the pile mass, eta = {eta}"),
            wrong as f64,
            0.0,
            advances,
            wrong == 0,
        ));
        reports.push(check(format!("largest pickup, eta = {eta} (limit sup x2 * eta)"), largest, limit, advances, over == 0));
        info.push(check(
            format!("largest upward jump over y_before, eta = {eta}"),
            runs.iter().flat_map(|r| &r.advances).map(|a| a.upward_jump()).fold(0.0, f64::max),
            f64::NAN,
            advances,
            true,
        ));
    }
    let summary = format!(
        "largest pickup {} at eta = 0.1 / 0.05 / 0.02",
        reports.iter().skip(1).step_by(2).map(|r| format!("{:.4}", r.statistic)).collect::<Vec<_>>().join(" / ")
    );
    Ok(Criterion::new(12, "upward jumps bounded by one pile", reports, summary).with_info(info))
}

fn c13_determinism(opts: &AcceptanceOptions) -> anyhow::Result<Criterion> {
    let mut reports = Vec::new();
    for sampler in [Sampler::Hazard, Sampler::Space] {
        let mut cfg = RunConfig::default();
        cfg.model.horizon = 1.0;
        cfg.sampling.seed = opts.seed ^ (13 << 40);
        cfg.sampling.replicas = 8;
        cfg.sampling.sampler = sampler;
        let reference = event_log(&frog_runs(&cfg, cfg.model.eta, 1)?.1)?;
        let again = event_log(&frog_runs(&cfg, cfg.model.eta, 1)?.1)?;
        let mut same = reference == again && !reference.is_empty();
        for threads in [2, 3, 4] {
            same &= event_log(&frog_runs(&cfg, cfg.model.eta, threads)?.1)? == reference;
        }
        let name = format!("{sampler:?} sampler: event log identical across repeats and 1-4 workers");
        reports.push(check(name, reference.len() as f64, 0.0, 8, same));
    }
    let summary = "event logs byte-identical across repeats and worker counts".to_string();
    Ok(Criterion::new(13, "determinism", reports, summary))
}
