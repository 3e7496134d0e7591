//! Files written for each run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;
use zk_core::dynamics::{EnergyTrace, TraceSample, Trajectory};
use zk_core::snapshot::{self, SnapshotError};
use zk_core::stabilization::{DecayTheory, DecayVerdict};

pub const TRACE_HEADER: [&str; 7] = ["t", "l2_sq", "weighted", "flux0", "grad_x_sq", "grad_y_sq", "cubic"];
pub const TRACE_FILE: &str = "trace.csv";
pub const VERDICT_FILE: &str = "verdict.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: bad header, expected {}", TRACE_HEADER.join(","))]
    Header { path: PathBuf },
    #[error("{path}: row {row}: {reason}")]
    Row { path: PathBuf, row: usize, reason: String },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv { path: path.to_path_buf(), source }
}

/// 17 significant digits, enough to round-trip every `f64`.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv(path: &Path, trace: &EnergyTrace) -> Result<(), ArtifactError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(TRACE_HEADER).map_err(csv_err(path))?;
    for s in &trace.samples {
        let row = [s.t, s.l2_sq, s.weighted, s.flux0, s.grad_x_sq, s.grad_y_sq, s.cubic].map(fmt);
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io(path))
}

/// Reads a trace written by [`write_trace_csv`]; `i0_initial` is not stored and comes back empty.
pub fn read_trace_csv(path: &Path) -> Result<EnergyTrace, ArtifactError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    if r.headers().map_err(csv_err(path))?.iter().ne(TRACE_HEADER) {
        return Err(ArtifactError::Header { path: path.to_path_buf() });
    }
    let mut samples = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = k + 2;
        let mut v = [0.0; 7];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = field.trim().parse().map_err(|e| ArtifactError::Row {
                path: path.to_path_buf(),
                row,
                reason: format!("`{field}`: {e}"),
            })?;
        }
        let [t, l2_sq, weighted, flux0, grad_x_sq, grad_y_sq, cubic] = v;
        samples.push(TraceSample { t, l2_sq, weighted, flux0, grad_x_sq, grad_y_sq, cubic });
    }
    Ok(EnergyTrace { samples, i0_initial: None })
}

/// Outcome record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    /// Decay constants for the run's geometry.
    pub theory: Option<DecayTheory>,
    pub decay: Option<DecayVerdict>,
    /// Why `decay` is absent, when it is.
    pub decay_note: Option<String>,
    pub i0_initial: Option<f64>,
    /// `max |W_B - W_{1.5B}| / W(0)` for truncated-strip runs.
    pub strip_sensitivity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbortInfo {
    pub t: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: Map<String, Value>,
    pub config_hash: String,
    pub tool_version: String,
    pub wall_time_s: f64,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub aborted: Option<AbortInfo>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, ArtifactError> {
        let text = fs::read_to_string(path).map_err(io(path))?;
        serde_json::from_str(&text).map_err(|source| ArtifactError::Json { path: path.to_path_buf(), source })
    }
}

/// Everything `emit_artifacts` needs besides the trajectory.
pub struct RunRecord<'a> {
    pub config: &'a Map<String, Value>,
    pub config_hash: &'a str,
    pub verdict: &'a RunVerdict,
    pub wall_time_s: f64,
    pub aborted: Option<AbortInfo>,
    /// Extra traces written next to the main one, as `(file name, trace)`.
    pub extra_traces: Vec<(&'a str, &'a EnergyTrace)>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| ArtifactError::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text + "\n").map_err(io(path))
}

/// Writes the trace, verdict, snapshots and manifest of one run into `out_dir`.
pub fn emit_artifacts(trajectory: &Trajectory, record: &RunRecord, out_dir: &Path) -> Result<RunManifest, ArtifactError> {
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut outputs = Vec::new();

    write_trace_csv(&out_dir.join(TRACE_FILE), &trajectory.trace)?;
    outputs.push(TRACE_FILE.to_string());
    for (name, trace) in &record.extra_traces {
        write_trace_csv(&out_dir.join(name), trace)?;
        outputs.push(name.to_string());
    }

    write_json(&out_dir.join(VERDICT_FILE), record.verdict)?;
    outputs.push(VERDICT_FILE.to_string());

    let snap_dir = out_dir.join(SNAPSHOT_DIR);
    fs::create_dir_all(&snap_dir).map_err(io(&snap_dir))?;
    for (k, (t, field)) in trajectory.snapshots.iter().enumerate() {
        let name = format!("{SNAPSHOT_DIR}/u_{k:05}.bin");
        snapshot::write_snapshot(&out_dir.join(&name), field, *t)?;
        outputs.push(name);
    }

    outputs.push(MANIFEST_FILE.to_string());
    let manifest = RunManifest {
        config: record.config.clone(),
        config_hash: record.config_hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: record.wall_time_s,
        outputs,
        aborted: record.aborted,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
