use std::path::Path;
use std::time::Instant;

use zk_core::dynamics::{self, DynamicsError, EnergyTrace, Trajectory};
use zk_core::geometry::DomainKind;
use zk_core::stabilization::{self, DecayGeometry, DecayTheory};

use crate::artifacts::{emit_artifacts, AbortInfo, RunManifest, RunRecord, RunVerdict};
use crate::config::LoadedConfig;
use crate::HarnessError;

pub const WIDENED_TRACE_FILE: &str = "trace_widened.csv";

/// Decay constants matching a grid: a strip for truncated-strip runs, the rectangle otherwise.
pub fn theory_for(config: &LoadedConfig) -> Result<DecayTheory, HarnessError> {
    let g = &config.sim.grid;
    let geometry = match g.kind() {
        DomainKind::Rectangle => DecayGeometry::Rectangle { length: g.length(), half_width: g.half_width() },
        DomainKind::TruncatedStrip => DecayGeometry::Strip { length: g.length() },
    };
    Ok(stabilization::decay_theory(config.sim.alpha, geometry)?)
}

struct Completed {
    trajectory: Trajectory,
    widened: Option<EnergyTrace>,
    sensitivity: Option<f64>,
    aborted: Option<AbortInfo>,
}

fn integrate(config: &LoadedConfig) -> Result<Completed, HarnessError> {
    let result = match config.sim.grid.kind() {
        DomainKind::Rectangle => dynamics::simulate(&config.sim).map(|t| (t, None, None)),
        DomainKind::TruncatedStrip => {
            dynamics::simulate_strip(&config.sim).map(|run| (run.base, Some(run.widened.trace), Some(run.sensitivity)))
        }
    };
    match result {
        Ok((trajectory, widened, sensitivity)) => Ok(Completed { trajectory, widened, sensitivity, aborted: None }),
        Err(DynamicsError::Blowup { t, max_abs, partial: Some(p) }) => {
            Ok(Completed { trajectory: *p, widened: None, sensitivity: None, aborted: Some(AbortInfo { t, max_abs }) })
        }
        Err(e) => Err(e.into()),
    }
}

/// Runs one configuration and writes its artifacts. A blowup still writes
/// the partial trace; the manifest then carries the abort time.
pub fn run_simulation(config: &LoadedConfig, out_dir: &Path) -> Result<RunManifest, HarnessError> {
    let start = Instant::now();
    let theory = theory_for(config)?;
    let done = integrate(config)?;
    let (decay, decay_note) = if done.aborted.is_some() {
        (None, Some("run aborted before t_end".to_string()))
    } else {
        match stabilization::verdict(&done.trajectory.trace, &theory) {
            Ok(v) => (Some(v), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let verdict = RunVerdict {
        theory: Some(theory),
        decay,
        decay_note,
        i0_initial: done.trajectory.trace.i0_initial,
        strip_sensitivity: done.sensitivity,
    };
    let record = RunRecord {
        config: &config.canonical,
        config_hash: &config.hash,
        verdict: &verdict,
        wall_time_s: start.elapsed().as_secs_f64(),
        aborted: done.aborted,
        extra_traces: done.widened.as_ref().map(|w| (WIDENED_TRACE_FILE, w)).into_iter().collect(),
    };
    Ok(emit_artifacts(&done.trajectory, &record, out_dir)?)
}
