//! The subcommands, as library calls returning what they wrote.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context;
use frogline_core::colony::{sample_w, solve_mp2, ConstantRate};
use frogline_core::frog::{simulate_hazard_driven, simulate_space_driven, FrogRun, Outcome};
use frogline_core::measures::{discretize_initial, AtomicMeasure, GridDensity, Measure};
use frogline_core::ppp::{build_w_from_j, coupling_convergence_report, sample_j, ustar_from_j, Rect};
use frogline_core::rng::{open_unit, replica_stream};
use frogline_core::sites::{simulate_mps, MpsState, SiteSystem};
use frogline_core::stats::{martingale_drift, TestReport, DEFAULT_Z_BOUND};
use serde::{Deserialize, Serialize};

use crate::acceptance::{self, AcceptanceOptions, Criterion, Suite};
use crate::config::{RunConfig, Sampler};
use crate::io::{self, Manifest, RunDir};
use crate::runner::try_run_indexed;

/// Initial data of a frog run on the solver grid.
#[derive(Debug, Clone)]
pub struct FrogSetup {
    pub x1: GridDensity,
    pub x2: GridDensity,
    pub piles: AtomicMeasure,
}

impl FrogSetup {
    pub fn new(cfg: &RunConfig, eta: f64) -> anyhow::Result<Self> {
        let x1 = cfg.model.x1_0.to_grid(cfg.solver.dx)?;
        let x2 = cfg.model.x2_0.to_grid(cfg.solver.dx)?;
        let piles = discretize_initial(&x2, eta)?;
        Ok(FrogSetup { x1, x2, piles })
    }

    pub fn total_mass(&self) -> f64 {
        self.x1.total_mass() + self.piles.total_mass()
    }
}

/// Runs one replica; the replica's stream depends only on `(seed, replica)`.
pub fn frog_replica(cfg: &RunConfig, setup: &FrogSetup, replica: usize) -> anyhow::Result<FrogRun> {
    let frog = cfg.frog_config();
    let mut rng = replica_stream(cfg.sampling.seed, replica as u64);
    let run = match cfg.sampling.sampler {
        Sampler::Hazard => simulate_hazard_driven(&setup.x1, &setup.piles, &mut rng, &frog)?,
        Sampler::Space => {
            let ws = setup.piles.masses().map(|x| sample_w(x, open_unit(&mut rng))).collect::<Result<Vec<_>, _>>()?;
            simulate_space_driven(&setup.x1, &setup.piles, &ws, &frog)?
        }
    };
    Ok(run)
}

pub fn frog_runs(cfg: &RunConfig, eta: f64, threads: usize) -> anyhow::Result<(FrogSetup, Vec<FrogRun>)> {
    let setup = FrogSetup::new(cfg, eta)?;
    let runs = try_run_indexed(threads, cfg.sampling.replicas, |r| frog_replica(cfg, &setup, r))?;
    Ok((setup, runs))
}

/// The event log of a set of runs, as written to `events.jsonl`.
pub fn event_log(runs: &[FrogRun]) -> anyhow::Result<Vec<u8>> {
    io::frog_events_jsonl(runs.iter().enumerate().map(|(r, run)| (r, run.events.as_slice())))
}

fn run_id(cfg: &RunConfig, command: &str) -> anyhow::Result<String> {
    Ok(match &cfg.output.run_id {
        Some(id) => id.clone(),
        None => format!("{command}-{}-s{}", &io::config_hash(cfg)?[..12], cfg.sampling.seed),
    })
}

fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::Completed { .. } => "completed",
        Outcome::Stalled { .. } => "stalled",
        Outcome::Pending { .. } => "pending",
    }
}

/// Largest relative deviation of the snapshot totals from `initial`.
pub fn max_drift(run: &FrogRun, initial: f64) -> f64 {
    run.snapshots.iter().map(|s| (s.total() - initial).abs() / initial).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub replica: usize,
    pub outcome: String,
    pub ustar: Option<f64>,
    pub wakeups: usize,
    pub end_time: f64,
    pub max_mass_drift: f64,
}

fn summarize(setup: &FrogSetup, runs: &[FrogRun]) -> Vec<ReplicaSummary> {
    let total = setup.total_mass();
    runs.iter()
        .enumerate()
        .map(|(replica, run)| ReplicaSummary {
            replica,
            outcome: outcome_label(&run.outcome).into(),
            ustar: run.ustar(&setup.piles),
            wakeups: run.events.len(),
            end_time: run.final_state.time,
            max_mass_drift: max_drift(run, total),
        })
        .collect()
}

pub fn simulate(cfg: &RunConfig, threads: usize) -> anyhow::Result<PathBuf> {
    let (setup, runs) = frog_runs(cfg, cfg.model.eta, threads)?;
    let id = run_id(cfg, "simulate")?;
    let mut dir = RunDir::create(&cfg.output.out_dir, &id)?;
    dir.write("events.jsonl", &event_log(&runs)?)?;
    dir.write("snapshots.csv", &io::snapshots_csv(runs.iter().enumerate().map(|(r, run)| (r, run.snapshots.as_slice()))))?;
    if cfg.output.profiles {
        if let Some(first) = runs.first() {
            dir.write("profiles.csv", &io::profiles_csv(&first.profiles))?;
        }
    }
    dir.write_json("summary.json", &summarize(&setup, &runs))?;
    let root = dir.root.clone();
    dir.finish(Manifest::new("simulate", &id, cfg.sampling.seed, cfg.sampling.replicas, cfg)?)?;
    Ok(root)
}

pub fn sweep(cfg: &RunConfig, threads: usize) -> anyhow::Result<PathBuf> {
    let id = run_id(cfg, "sweep")?;
    let mut dir = RunDir::create(&cfg.output.out_dir, &id)?;
    let mut aggregate = String::from("eta,replica,outcome,ustar,wakeups,end_time,max_mass_drift\n");
    for &eta in &cfg.model.etas {
        let mut sub = cfg.clone();
        sub.model.eta = eta;
        let (setup, runs) = frog_runs(&sub, eta, threads)?;
        for (summary, run) in summarize(&setup, &runs).iter().zip(&runs) {
            let r = summary.replica;
            let run_dir = format!("runs/eta-{eta}/replica-{r}");
            dir.write(&format!("{run_dir}/events.jsonl"), &io::frog_events_jsonl([(r, run.events.as_slice())])?)?;
            let mut manifest = Manifest::new("sweep", &id, sub.sampling.seed, 1, &sub)?;
            manifest.run_id = format!("{id}/eta-{eta}/replica-{r}");
            manifest.outputs = vec!["events.jsonl".into()];
            dir.write_json(&format!("{run_dir}/manifest.json"), &manifest)?;
            let ustar = summary.ustar.map_or(String::new(), |u| u.to_string());
            let _ = writeln!(
                aggregate,
                "{eta},{r},{},{ustar},{},{},{}",
                summary.outcome, summary.wakeups, summary.end_time, summary.max_mass_drift
            );
        }
    }
    dir.write("aggregate.csv", aggregate.as_bytes())?;
    let root = dir.root.clone();
    dir.finish(Manifest::new("sweep", &id, cfg.sampling.seed, cfg.sampling.replicas, cfg)?)?;
    Ok(root)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mp0Options {
    pub x1_0: f64,
    pub x2_0: f64,
    pub rate: f64,
    pub c: f64,
    pub horizon: f64,
    pub checkpoints: Vec<f64>,
    pub points: usize,
}

impl Default for Mp0Options {
    fn default() -> Self {
        Mp0Options { x1_0: 0.0, x2_0: 1.0, rate: 1.0, c: 0.0, horizon: 5.0, checkpoints: vec![0.5, 1.0, 2.0, 5.0], points: 200 }
    }
}

/// One-colony ensemble. Returns the run directory and the drift reports of
/// `x2` against its initial value.
pub fn mp0(cfg: &RunConfig, opts: &Mp0Options, threads: usize) -> anyhow::Result<(PathBuf, Vec<TestReport>)> {
    let theta = ConstantRate(opts.rate);
    let seed = cfg.sampling.seed;
    let paths = try_run_indexed(threads, cfg.sampling.replicas, |r| {
        let mut rng = replica_stream(seed, r as u64);
        let w = if opts.x2_0 > 0.0 { sample_w(opts.x2_0, open_unit(&mut rng))? } else { 1.0 };
        let path = solve_mp2(opts.x1_0, opts.x2_0, &theta, opts.c, w, opts.horizon)?;
        let at: Vec<f64> = opts.checkpoints.iter().map(|t| path.state_at(*t).x2).collect();
        let trajectory = if r == 0 { path.trajectory(opts.points) } else { Vec::new() };
        Ok((at, trajectory, path.tau()))
    })?;
    let id = run_id(cfg, "mp0")?;
    let mut dir = RunDir::create(&cfg.output.out_dir, &id)?;
    let mut csv = String::from("time,x1,x2\n");
    for s in &paths[0].1 {
        let _ = writeln!(csv, "{},{},{}", s.time, s.x1, s.x2);
    }
    dir.write("trajectory.csv", csv.as_bytes())?;
    let mut taus = String::from("replica,tau\n");
    for (r, p) in paths.iter().enumerate() {
        let _ = writeln!(taus, "{r},{}", p.2.map_or("inf".to_string(), |t| t.to_string()));
    }
    dir.write("wake_times.csv", taus.as_bytes())?;
    let values: Vec<Vec<f64>> = paths.into_iter().map(|p| p.0).collect();
    let reports = if values.len() >= 2 { martingale_drift(&values, opts.x2_0, DEFAULT_Z_BOUND)? } else { Vec::new() };
    dir.write_json("reports/martingale.json", &reports)?;
    let root = dir.root.clone();
    dir.finish(Manifest::new("mp0", &id, seed, cfg.sampling.replicas, &(cfg, opts))?)?;
    Ok((root, reports))
}

/// A finite-site system with its initial state, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpsInput {
    #[serde(flatten)]
    pub system: SiteSystem,
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl MpsInput {
    /// Three sites in a row, wake mass on the left, two piles to its right.
    pub fn three_site() -> Self {
        MpsInput {
            system: SiteSystem::nearest_neighbor(0, 2, 1.0).expect("valid chain"),
            x1: vec![1.0, 0.0, 0.0],
            x2: vec![0.0, 0.5, 0.5],
        }
    }
}

pub fn mps(cfg: &RunConfig, input: &MpsInput, threads: usize) -> anyhow::Result<(PathBuf, Vec<TestReport>)> {
    let init = MpsState::new(input.x1.clone(), input.x2.clone())?;
    let horizon = cfg.model.horizon;
    let checkpoints: Vec<f64> = (1..=4).map(|k| horizon * k as f64 / 4.0).collect();
    let seed = cfg.sampling.seed;
    let runs = try_run_indexed(threads, cfg.sampling.replicas, |r| {
        let mut rng = replica_stream(seed, r as u64);
        Ok(simulate_mps(&input.system, &init, horizon, &checkpoints, &mut rng)?)
    })?;
    let id = run_id(cfg, "mps")?;
    let mut dir = RunDir::create(&cfg.output.out_dir, &id)?;
    dir.write("events.jsonl", &io::mps_events_jsonl(runs.iter().enumerate().map(|(r, run)| (r, run.events.as_slice())))?)?;
    let mut reports = Vec::new();
    if runs.len() >= 2 {
        for (k, label) in input.system.sites().iter().enumerate() {
            let values: Vec<Vec<f64>> = runs.iter().map(|run| run.checkpoints.iter().map(|s| s.x2[k]).collect()).collect();
            for (rep, t) in martingale_drift(&values, input.x2[k], DEFAULT_Z_BOUND)?.into_iter().zip(&checkpoints) {
                reports.push(rep.with_name(format!("x2 at site {label}, t = {t}")));
            }
        }
    }
    dir.write_json("reports/martingale.json", &reports)?;
    let root = dir.root.clone();
    dir.finish(Manifest::new("mps", &id, seed, cfg.sampling.replicas, &(cfg, input))?)?;
    Ok((root, reports))
}

pub fn ppp(cfg: &RunConfig, etas: &[f64], rects: &[Rect], threads: usize) -> anyhow::Result<PathBuf> {
    let f = cfg.model.x2_0.to_grid(cfg.solver.dx)?;
    let s = cfg.model.x1_0.to_grid(cfg.solver.dx)?.total_mass();
    let r_min = cfg.sampling.r_min;
    let seed = cfg.sampling.seed;
    let results = try_run_indexed(threads, cfg.sampling.replicas, |r| {
        let mut rng = replica_stream(seed, r as u64);
        let j = sample_j(&f, r_min, &mut rng)?;
        let report = coupling_convergence_report(&j, &f, etas, rects)?;
        let ustar = ustar_from_j(&j, s, &f).ok();
        Ok((j, report, ustar))
    })?;
    let id = run_id(cfg, "ppp")?;
    let mut dir = RunDir::create(&cfg.output.out_dir, &id)?;
    if let Some((j, _, _)) = results.first() {
        dir.write("pattern.jsonl", &io::pattern_jsonl(j.points())?)?;
        let mut csv = String::from("eta,i,value,censored\n");
        for &eta in etas {
            for (i, w) in build_w_from_j(j, &f, eta)?.iter().enumerate() {
                let _ = writeln!(csv, "{eta},{},{},{}", i + 1, w.value, w.censored);
            }
        }
        dir.write("thresholds.csv", csv.as_bytes())?;
    }
    let mut csv = String::from("replica,points,ustar\n");
    for (r, (j, _, u)) in results.iter().enumerate() {
        let _ = writeln!(csv, "{r},{},{}", j.len(), u.map_or(String::new(), |u| u.to_string()));
    }
    dir.write("ustar.csv", csv.as_bytes())?;
    let reports: Vec<_> = results.into_iter().map(|(_, rep, _)| rep).collect();
    dir.write_json("reports/coupling.json", &reports)?;
    let root = dir.root.clone();
    dir.finish(Manifest::new("ppp", &id, seed, cfg.sampling.replicas, &(cfg, etas, rects))?)?;
    Ok(root)
}

/// Runs a verification suite, writes its report and returns the criteria.
pub fn verify(cfg: &RunConfig, suite: Suite, threads: usize, only: &[u32]) -> anyhow::Result<(PathBuf, Vec<Criterion>)> {
    let opts = AcceptanceOptions { seed: cfg.sampling.seed, threads, suite };
    let criteria = if only.is_empty() {
        let all = acceptance::run_all(&opts)?;
        for c in &all {
            println!("{}", c.line());
        }
        all
    } else {
        let mut picked = Vec::new();
        for &id in only {
            let c = acceptance::run_one(id, &opts).with_context(|| format!("criterion {id}"))?;
            println!("{}", c.line());
            picked.push(c);
        }
        picked
    };
    let id = match &cfg.output.run_id {
        Some(id) => id.clone(),
        None => format!("verify-{}-s{}", suite.name(), cfg.sampling.seed),
    };
    let mut dir = RunDir::create(&cfg.output.out_dir, &id)?;
    dir.write_json("reports/acceptance.json", &acceptance::Report::new(&opts, &criteria))?;
    let root = dir.root.clone();
    dir.finish(Manifest::new("verify", &id, cfg.sampling.seed, 1, &opts)?)?;
    Ok((root, criteria))
}
