//! Experiment harness for `bdl`: configuration, runs, manifests, resumable
//! sweeps and plot data.

pub mod config;
pub mod plot;
mod runs;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{Config, ExperimentKind, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl From<bdl_core::Error> for HarnessError {
    fn from(e: bdl_core::Error) -> Self {
        use bdl_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::InsufficientSample { .. } | E::Malformed(_) => Self::Validation(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

/// Files produced by a run, in the order they are written.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    pub failed_realizations: usize,
    /// scalar results collected by sweeps
    pub metrics: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentKind,
    pub config: String,
    pub seed: u64,
    pub derived_seeds: Vec<u64>,
    pub failed_realizations: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
    #[serde(default)]
    pub metrics: Vec<(String, f64)>,
}

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Validation(format!("manifest {}: {e}", path.display())))
    }

    /// Every listed output exists under `dir` with the recorded digest.
    pub fn verify(&self, dir: &Path) -> bool {
        self.outputs.iter().all(|o| fs::read(dir.join(&o.path)).is_ok_and(|b| sha256_hex(&b) == o.sha256))
    }
}

/// Runs `kind` from `config` and writes outputs plus manifest into `out`.
pub fn run_experiment(config: &Config, kind: ExperimentKind, out: &Path) -> Result<RunManifest, HarnessError> {
    config.validate(kind)?;
    let start = Instant::now();
    let output = match kind {
        ExperimentKind::Sweep => sweep(config, out)?,
        _ => runs::run(config, kind)?,
    };
    let manifest = commit(config, kind, out, output, start)?;
    info!("{} finished, {} files in {}", kind.as_str(), manifest.outputs.len(), out.display());
    Ok(manifest)
}

fn commit(
    config: &Config,
    kind: ExperimentKind,
    out: &Path,
    output: RunOutput,
    start: Instant,
) -> Result<RunManifest, HarnessError> {
    fs::create_dir_all(out)?;
    let mut outputs = Vec::with_capacity(output.files.len());
    for (name, body) in &output.files {
        let path = out.join(name);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(&path, body)?;
        outputs.push(OutputFile { path: name.clone(), sha256: sha256_hex(body.as_bytes()), bytes: body.len() });
    }
    let manifest = RunManifest {
        tool: "bdl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: kind,
        config: config.to_toml(),
        seed: config.seed,
        derived_seeds: output.seeds,
        failed_realizations: output.failed_realizations,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs,
        metrics: output.metrics,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(out.join(MANIFEST), text + "\n")?;
    Ok(manifest)
}

/// Re-runs a manifest's config into `out` and lists outputs whose digest differs.
pub fn replay(manifest: &RunManifest, out: &Path) -> Result<Vec<String>, HarnessError> {
    let config = Config::parse(&manifest.config)?;
    let fresh = run_experiment(&config, manifest.experiment, out)?;
    let mut mismatched = Vec::new();
    for o in &manifest.outputs {
        match fresh.outputs.iter().find(|f| f.path == o.path) {
            Some(f) if f.sha256 == o.sha256 => {}
            _ => mismatched.push(o.path.clone()),
        }
    }
    Ok(mismatched)
}

fn point_dir(out: &Path, point: &Config, base: ExperimentKind) -> PathBuf {
    let key = format!("{}\n{}", base.as_str(), point.to_toml());
    out.join("points").join(&sha256_hex(key.as_bytes())[..16])
}

/// Cartesian product lengths × rho_ratios of the base experiment. Points
/// with a verified manifest are skipped, so an interrupted sweep resumes.
fn sweep(config: &Config, out: &Path) -> Result<RunOutput, HarnessError> {
    let s = config.sweep.as_ref().expect("validated");
    let mut rows = String::from("l,rho_ratio,metric,value\n");
    let mut seeds = Vec::new();
    let mut failed = 0;
    let mut files = Vec::new();
    for &l in &s.lengths {
        for &r in &s.rho_ratios {
            let point = config.sweep_point(l, r);
            let dir = point_dir(out, &point, s.base);
            let existing = RunManifest::load(&dir.join(MANIFEST)).ok().filter(|m| m.verify(&dir));
            let m = match existing {
                Some(m) => {
                    info!("sweep point l={l} rho_ratio={r} already complete, skipping");
                    m
                }
                None => run_experiment(&point, s.base, &dir)?,
            };
            seeds.extend(&m.derived_seeds);
            failed += m.failed_realizations;
            for (name, v) in &m.metrics {
                rows.push_str(&format!("{l:.16e},{r:.16e},{name},{v:.16e}\n"));
            }
            let rel = dir.strip_prefix(out).unwrap_or(&dir).join(MANIFEST);
            files.push(rel.to_string_lossy().into_owned());
        }
    }
    if failed > 0 {
        warn!("{failed} realizations failed across the sweep and were excluded");
    }
    let index = files.join("\n") + "\n";
    Ok(RunOutput {
        files: vec![("sweep.csv".into(), rows), ("points.txt".into(), index)],
        seeds,
        failed_realizations: failed,
        metrics: Vec::new(),
    })
}
