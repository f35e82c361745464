//! File formats: JSON lines for events and patterns, CSV for tables,
//! pretty JSON for manifests and reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use frogline_core::frog::{EventRecord, Snapshot};
use frogline_core::measures::GridDensity;
use frogline_core::sites::MpsEvent;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Sources hashed into the content version, in a fixed order.
const SOURCES: &[&str] = &[
    include_str!("../../core/src/colony.rs"),
    include_str!("../../core/src/error.rs"),
    include_str!("../../core/src/frog.rs"),
    include_str!("../../core/src/heat.rs"),
    include_str!("../../core/src/lib.rs"),
    include_str!("../../core/src/measures.rs"),
    include_str!("../../core/src/ppp.rs"),
    include_str!("../../core/src/rng.rs"),
    include_str!("../../core/src/sites.rs"),
    include_str!("../../core/src/stats.rs"),
    include_str!("acceptance.rs"),
    include_str!("commands.rs"),
    include_str!("config.rs"),
    include_str!("io.rs"),
    include_str!("runner.rs"),
];

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Hash over the simulator sources, so two builds with the same value run
/// the same code.
pub fn content_version() -> String {
    let mut h = Sha256::new();
    for src in SOURCES {
        h.update((src.len() as u64).to_le_bytes());
        h.update(src.as_bytes());
    }
    hex(&h.finalize()[..10])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub content_version: String,
    pub command: String,
    pub run_id: String,
    pub seed: u64,
    pub replicas: usize,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, run_id: &str, seed: u64, replicas: usize, config: &C) -> anyhow::Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            content_version: content_version(),
            command: command.into(),
            run_id: run_id.into(),
            seed,
            replicas,
            config_hash: config_hash(&config)?,
            config,
            outputs: Vec::new(),
        })
    }
}

pub fn config_hash<C: Serialize>(config: &C) -> anyhow::Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

/// Output directory of one run.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
    written: Vec<String>,
}

impl RunDir {
    pub fn create(out_dir: &Path, run_id: &str) -> anyhow::Result<Self> {
        let root = out_dir.join(run_id);
        fs::create_dir_all(&root).with_context(|| format!("creating {}", root.display()))?;
        Ok(RunDir { root, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes the manifest last, listing everything written before it.
    pub fn finish(mut self, mut manifest: Manifest) -> anyhow::Result<PathBuf> {
        manifest.outputs = std::mem::take(&mut self.written);
        self.write_json("manifest.json", &manifest)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn push_line<T: Serialize>(out: &mut Vec<u8>, value: &T) -> anyhow::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.push(b'\n');
    Ok(())
}

#[derive(Serialize)]
struct FrogEventLine<'a> {
    replica: usize,
    #[serde(flatten)]
    event: &'a EventRecord,
}

/// One wake-up per line, replicas in order.
pub fn frog_events_jsonl<'a>(runs: impl IntoIterator<Item = (usize, &'a [EventRecord])>) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for (replica, events) in runs {
        for event in events {
            push_line(&mut out, &FrogEventLine { replica, event })?;
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct MpsEventLine {
    replica: usize,
    t: f64,
    site: i64,
    pile: f64,
}

pub fn mps_events_jsonl<'a>(runs: impl IntoIterator<Item = (usize, &'a [MpsEvent])>) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for (replica, events) in runs {
        for e in events {
            push_line(&mut out, &MpsEventLine { replica, t: e.t, site: e.site, pile: e.pile })?;
        }
    }
    Ok(out)
}

pub const SNAPSHOT_HEADER: &str = "replica,time,x1_mass,y,untouched,interface,total";

pub fn snapshots_csv<'a>(runs: impl IntoIterator<Item = (usize, &'a [Snapshot])>) -> Vec<u8> {
    let mut s = String::from(SNAPSHOT_HEADER);
    s.push('\n');
    for (replica, snaps) in runs {
        for p in snaps {
            let _ = writeln!(s, "{replica},{},{},{},{},{},{}", p.time, p.x1_mass, p.y, p.untouched, p.interface, p.total());
        }
    }
    s.into_bytes()
}

/// `time,x,density` rows at cell centers.
pub fn profiles_csv(profiles: &[(f64, GridDensity)]) -> Vec<u8> {
    let mut s = String::from("time,x,density\n");
    for (t, g) in profiles {
        for (k, v) in g.values().iter().enumerate() {
            let _ = writeln!(s, "{t},{},{v}", g.center(k));
        }
    }
    s.into_bytes()
}

/// One `[z, r]` array per line.
pub fn pattern_jsonl(points: &[(f64, f64)]) -> anyhow::Result<Vec<u8>> {
    let mut out = Vec::new();
    for p in points {
        push_line(&mut out, &[p.0, p.1])?;
    }
    Ok(out)
}

pub fn parse_pattern_jsonl(text: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let [z, r]: [f64; 2] = serde_json::from_str(l).with_context(|| format!("line {}", i + 1))?;
            Ok((z, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_and_version() {
        assert_eq!(hex(&[0, 15, 255]), "000fff");
        assert_eq!(content_version().len(), 20);
        assert_eq!(content_version(), content_version());
    }

    #[test]
    fn pattern_roundtrip() {
        let pts = vec![(0.1, 0.25), (0.3, 1e-4 / 0.123456789)];
        let bytes = pattern_jsonl(&pts).unwrap();
        assert_eq!(parse_pattern_jsonl(std::str::from_utf8(&bytes).unwrap()).unwrap(), pts);
    }
}
