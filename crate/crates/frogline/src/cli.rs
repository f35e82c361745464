//! Argument parsing and exit codes.
//!
//! Exit 0 on success, 1 when a verification suite fails, 2 on a bad config
//! or any other error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use frogline_core::ppp::Rect;

use crate::acceptance::Suite;
use crate::commands::{self, Mp0Options, MpsInput};
use crate::config::{locate, ConfigError, RunConfig, Sampler};
use crate::io;

#[derive(Debug, Parser)]
#[command(name = "frogline", version, about = "Wake-front simulator for two-type populations")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; they override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub run_id: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    #[arg(long, global = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub dx: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub sampler: Option<Sampler>,
    /// Worker threads; 0 uses every core. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One colony with constant immigration: trajectory and martingale check.
    Mp0 {
        #[arg(long, default_value_t = 1.0)]
        x2: f64,
        #[arg(long, default_value_t = 0.0)]
        x1: f64,
        /// Immigration rate.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Emigration rate.
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,5")]
        checkpoints: Vec<f64>,
    },
    /// Finite-site system from a JSON file (three sites in a row by default).
    Mps {
        #[arg(long)]
        system: Option<PathBuf>,
    },
    /// Frog replicas at one η.
    Simulate {
        /// Keep density profiles of replica 0.
        #[arg(long)]
        profiles: bool,
    },
    /// Frog replicas over a list of η.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        etas: Option<Vec<f64>>,
    },
    /// Samples of the space-indexed point process and the cell coupling.
    Ppp {
        #[arg(long)]
        rmin: Option<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.01,0.005")]
        eta_list: Vec<f64>,
        /// `x1,x2,s` or `x1,x2,s,s_hi`; repeatable.
        #[arg(long = "rect", value_parser = parse_rect)]
        rects: Vec<Rect>,
    },
    /// Runs a verification suite and exits 1 if any criterion fails.
    Verify {
        #[arg(long, value_enum, default_value = "acceptance")]
        suite: Suite,
        /// Only these criteria.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
}

fn parse_rect(s: &str) -> Result<Rect, String> {
    let v = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"))).collect::<Result<Vec<_>, _>>()?;
    match v[..] {
        [x1, x2, s] => Ok(Rect::upper(x1, x2, s)),
        [x1, x2, s, s_hi] => Ok(Rect { x1, x2, s, s_hi }),
        _ => Err("expected x1,x2,s or x1,x2,s,s_hi".into()),
    }
}

/// File config with flags applied on top, validated as a whole.
pub fn resolve_config(common: &Common) -> Result<RunConfig, ConfigError> {
    let (mut cfg, text) = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
                file: Some(path.clone()),
                line: None,
                message: e.to_string(),
            })?;
            (RunConfig::from_toml_str(&text, Some(path))?, Some(text))
        }
        None => (RunConfig::default(), None),
    };
    let mut flagged: Vec<(&str, &str)> = Vec::new();
    if let Some(v) = &common.out_dir {
        cfg.output.out_dir = v.clone();
    }
    if let Some(v) = &common.run_id {
        cfg.output.run_id = Some(v.clone());
    }
    if let Some(v) = common.seed {
        cfg.sampling.seed = v;
    }
    if let Some(v) = common.replicas {
        cfg.sampling.replicas = v;
        flagged.push(("sampling", "replicas"));
    }
    if let Some(v) = common.eta {
        cfg.model.eta = v;
        flagged.push(("model", "eta"));
    }
    if let Some(v) = common.horizon {
        cfg.model.horizon = v;
        flagged.push(("model", "horizon"));
    }
    if let Some(v) = common.dx {
        cfg.solver.dx = v;
        flagged.push(("solver", "dx"));
    }
    if let Some(v) = common.sampler {
        cfg.sampling.sampler = v;
    }
    revalidate(&cfg, common.config.as_deref(), text.as_deref(), &flagged)?;
    Ok(cfg)
}

fn revalidate(cfg: &RunConfig, file: Option<&Path>, text: Option<&str>, flagged: &[(&str, &str)]) -> Result<(), ConfigError> {
    cfg.validate().map_err(|(section, key, message)| {
        if flagged.contains(&(section, key)) || text.is_none() {
            return ConfigError { file: None, line: None, message: format!("{section}.{key}: {message}") };
        }
        let line = text.and_then(|t| locate(t, section, key));
        ConfigError { file: file.map(Path::to_path_buf), line, message: format!("{section}.{key}: {message}") }
    })
}

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Other(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

/// Runs a parsed command; `Ok(false)` means a verification suite failed.
pub fn run(cli: &Cli) -> Result<bool, Failure> {
    let mut cfg = resolve_config(&cli.common)?;
    let threads = cli.common.threads;
    match &cli.command {
        Command::Mp0 { x2, x1, rate, c, checkpoints } => {
            let horizon = checkpoints.iter().copied().fold(cfg.model.horizon, f64::max);
            let opts =
                Mp0Options { x1_0: *x1, x2_0: *x2, rate: *rate, c: *c, horizon, checkpoints: checkpoints.clone(), points: 200 };
            let (root, reports) = commands::mp0(&cfg, &opts, threads)?;
            report_path(&root);
            for r in reports.iter().filter(|r| !r.pass) {
                eprintln!("drift: {} z = {:?}", r.name, r.z_score);
            }
            Ok(true)
        }
        Command::Mps { system } => {
            let input = match system {
                Some(path) => io::read_json::<MpsInput>(path)?,
                None => MpsInput::three_site(),
            };
            let (root, _) = commands::mps(&cfg, &input, threads)?;
            report_path(&root);
            Ok(true)
        }
        Command::Simulate { profiles } => {
            cfg.output.profiles |= *profiles;
            report_path(&commands::simulate(&cfg, threads)?);
            Ok(true)
        }
        Command::Sweep { etas } => {
            if let Some(etas) = etas {
                cfg.model.etas = etas.clone();
                revalidate(&cfg, None, None, &[("model", "etas")])?;
            }
            report_path(&commands::sweep(&cfg, threads)?);
            Ok(true)
        }
        Command::Ppp { rmin, eta_list, rects } => {
            if let Some(r) = rmin {
                cfg.sampling.r_min = *r;
                revalidate(&cfg, None, None, &[("sampling", "r_min")])?;
            }
            let rects =
                if rects.is_empty() { vec![Rect::upper(0.2, 0.5, 0.3), Rect::upper(0.5, 0.9, 0.5)] } else { rects.clone() };
            report_path(&commands::ppp(&cfg, eta_list, &rects, threads)?);
            Ok(true)
        }
        Command::Verify { suite, criteria } => {
            let (root, results) = commands::verify(&cfg, *suite, threads, criteria)?;
            report_path(&root);
            let failed: Vec<u32> = results.iter().filter(|c| !c.pass).map(|c| c.id).collect();
            if !failed.is_empty() {
                eprintln!("failed criteria: {failed:?}");
            }
            Ok(failed.is_empty())
        }
    }
}

fn report_path(root: &Path) {
    println!("wrote {}", root.display());
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_flags() {
        assert_eq!(parse_rect("0.1,0.4,0.5").unwrap(), Rect::upper(0.1, 0.4, 0.5));
        assert_eq!(parse_rect("0.1, 0.4, 0.5, 2").unwrap().s_hi, 2.0);
        assert!(parse_rect("0.1,0.4").is_err());
        assert!(parse_rect("a,b,c").is_err());
    }

    #[test]
    fn flags_override_and_revalidate() {
        let common = Common { eta: Some(0.015), ..Common::default() };
        let err = resolve_config(&common).unwrap_err();
        assert!(err.line.is_none());
        assert!(err.message.starts_with("model.eta"));
        let common = Common { eta: Some(0.02), seed: Some(9), ..Common::default() };
        let cfg = resolve_config(&common).unwrap();
        assert_eq!((cfg.model.eta, cfg.sampling.seed), (0.02, 9));
    }
}
