//! Run configuration: one TOML file, every field overridable from the
//! command line.

use std::path::{Path, PathBuf};

use frogline_core::frog::FrogConfig;
use frogline_core::heat::HeatConfig;
use frogline_core::measures::GridDensity;
use serde::{Deserialize, Serialize};

/// A density on a bounded interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DensitySpec {
    /// Constant density carrying `mass` on `[left, right]`.
    Uniform {
        left: f64,
        right: f64,
        mass: f64,
    },
    /// Density growing linearly from 0 at `left`, carrying `mass`.
    Triangular {
        left: f64,
        right: f64,
        mass: f64,
    },
    CustomGrid {
        left: f64,
        dx: f64,
        values: Vec<f64>,
    },
}

impl DensitySpec {
    pub fn unit_uniform() -> Self {
        DensitySpec::Uniform { left: 0.0, right: 1.0, mass: 1.0 }
    }

    /// Cell averages on a grid of width `dx`.
    pub fn to_grid(&self, dx: f64) -> anyhow::Result<GridDensity> {
        let grid = match *self {
            DensitySpec::Uniform { left, right, mass } => {
                anyhow::ensure!(right > left, "uniform density needs right > left");
                GridDensity::uniform(left, right, dx, mass / (right - left))?
            }
            DensitySpec::Triangular { left, right, mass } => {
                anyhow::ensure!(right > left, "triangular density needs right > left");
                let w = right - left;
                GridDensity::from_fn(left, right, dx, |x| 2.0 * mass * (x - left) / (w * w))?
            }
            DensitySpec::CustomGrid { left, dx: own, ref values } => {
                let g = GridDensity::new(left, own, values.clone())?;
                if (own - dx).abs() <= 1e-12 * dx {
                    g
                } else {
                    let n = GridDensity::cells_between(left, g.right(), dx);
                    g.resample(left, dx, n)?
                }
            }
        };
        Ok(grid)
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            DensitySpec::Uniform { left, right, .. } | DensitySpec::Triangular { left, right, .. } => (left, right),
            DensitySpec::CustomGrid { left, dx, ref values } => (left, left + dx * values.len() as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    /// Wake-ups driven by the hazard integral.
    Hazard,
    /// Wake thresholds drawn up front.
    Space,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub x1_0: DensitySpec,
    pub x2_0: DensitySpec,
    pub eta: f64,
    /// Grid of `η` for sweeps.
    pub etas: Vec<f64>,
    pub horizon: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            x1_0: DensitySpec::Uniform { left: -0.5, right: 0.0, mass: 0.5 },
            x2_0: DensitySpec::unit_uniform(),
            eta: 0.05,
            etas: vec![0.1, 0.05, 0.02],
            horizon: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub dx: f64,
    pub dt: f64,
    pub dt_growth: f64,
    pub dt_max: f64,
    /// Only the implicit scheme is implemented.
    pub scheme: String,
    pub domain_left: f64,
    pub domain_right: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            dx: 0.01,
            dt: 1e-3,
            dt_growth: 1.0,
            dt_max: 1e-3,
            scheme: "backward-euler".into(),
            domain_left: -3.0,
            domain_right: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingSection {
    pub seed: u64,
    pub replicas: usize,
    pub r_min: f64,
    pub sampler: Sampler,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection { seed: 0, replicas: 1, r_min: 1e-4, sampler: Sampler::Hazard }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub out_dir: PathBuf,
    /// Defaults to a name derived from the subcommand and config hash.
    pub run_id: Option<String>,
    pub snapshots: usize,
    pub profiles: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { out_dir: PathBuf::from("out"), run_id: None, snapshots: 64, profiles: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub solver: SolverSection,
    pub sampling: SamplingSection,
    pub output: OutputSection,
}

/// A configuration problem, pointing at the offending line when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{}:{line}: {}", file.display(), self.message),
            (Some(file), None) => write!(f, "{}: {}", file.display(), self.message),
            (None, _) => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of `key = ...` inside `[section]`.
pub(crate) fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl RunConfig {
    pub fn from_toml_str(text: &str, file: Option<&Path>) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError { file: file.map(Path::to_path_buf), line, message: e.message().to_string() }
        })?;
        cfg.validate().map_err(|(section, key, message)| ConfigError {
            file: file.map(Path::to_path_buf),
            line: locate(text, section, key),
            message: format!("{section}.{key}: {message}"),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: Some(path.to_path_buf()),
            line: None,
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, Some(path))
    }

    /// Checks the standing assumptions; errors name `(section, key, why)`.
    pub fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let s = &self.solver;
        let m = &self.model;
        if !(s.dx > 0.0 && s.dx.is_finite()) {
            return Err(("solver", "dx", format!("must be positive (got {})", s.dx)));
        }
        if !(s.dt > 0.0 && s.dt_max >= s.dt && s.dt_growth >= 1.0) {
            return Err(("solver", "dt", "need dt > 0, dt_max >= dt and dt_growth >= 1".into()));
        }
        if s.scheme != "backward-euler" {
            return Err(("solver", "scheme", format!("unsupported scheme {:?}; only \"backward-euler\"", s.scheme)));
        }
        for (key, eta) in std::iter::once(("eta", m.eta)).chain(m.etas.iter().map(|e| ("etas", *e))) {
            if !(eta > 0.0) {
                return Err(("model", key, format!("eta must be positive (got {eta})")));
            }
            let ratio = eta / s.dx;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
                return Err(("model", key, format!("dx = {} must divide eta = {eta}", s.dx)));
            }
        }
        if !(m.horizon > 0.0) {
            return Err(("model", "horizon", format!("must be positive (got {})", m.horizon)));
        }
        if self.sampling.replicas < 1 {
            return Err(("sampling", "replicas", "must be at least 1".into()));
        }
        if !(self.sampling.r_min > 0.0) {
            return Err(("sampling", "r_min", "must be positive".into()));
        }
        let (lo, hi) = m.x2_0.bounds();
        if lo < 0.0 || hi > 1.0 + 1e-12 {
            return Err(("model", "x2_0", format!("dormant density must live in [0, 1] (got [{lo}, {hi}])")));
        }
        let x2 = m.x2_0.to_grid(s.dx).map_err(|e| ("model", "x2_0", e.to_string()))?;
        let interior_zero = x2.values().iter().enumerate().any(|(k, v)| {
            let c = x2.center(k);
            c > 0.0 && c < 1.0 && *v <= 0.0
        });
        if interior_zero || hi < 1.0 - 1e-12 || lo > 1e-12 {
            return Err(("model", "x2_0", "dormant density must be positive throughout (0, 1)".into()));
        }
        let (l1, r1) = m.x1_0.bounds();
        if r1 > 1e-12 {
            return Err(("model", "x1_0", format!("wake density must lie left of 0 (right end {r1})")));
        }
        m.x1_0.to_grid(s.dx).map_err(|e| ("model", "x1_0", e.to_string()))?;
        if !(s.domain_left <= l1 && s.domain_right > 1.0) {
            return Err(("solver", "domain_left", "domain must contain the wake density and extend past 1".into()));
        }
        Ok(())
    }

    pub fn frog_config(&self) -> FrogConfig {
        let s = &self.solver;
        let mut cfg = FrogConfig::new(
            HeatConfig { dx: s.dx, dt: s.dt, dt_growth: s.dt_growth, dt_max: s.dt_max },
            s.domain_left,
            s.domain_right,
            self.model.horizon,
        );
        cfg.snapshots = self.output.snapshots;
        cfg.record_profiles = self.output.profiles;
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn parse_and_locate_errors() {
        let text = "[model]\neta = 0.015\n\n[solver]\ndx = 0.01\n";
        let err = RunConfig::from_toml_str(text, Some(Path::new("run.toml"))).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.to_string().starts_with("run.toml:2: model.eta"));

        let err = RunConfig::from_toml_str("[model]\nbogus = 1\n", None).unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn densities() {
        let text = "[model]\nx2_0 = { kind = \"triangular\", left = 0.0, right = 1.0, mass = 1.0 }\n";
        let cfg = RunConfig::from_toml_str(text, None).unwrap();
        let g = cfg.model.x2_0.to_grid(0.01).unwrap();
        use frogline_core::measures::Measure;
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
        assert!((g.mass_in(0.0, 0.5).unwrap() - 0.25).abs() < 1e-12);
    }
}
