//! Command-line experiment runner: configs, artifacts, sweeps and property suites.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod cli;
pub mod config;
pub mod run;
pub mod sweep;
pub mod verify;

use std::path::PathBuf;

use thiserror::Error;
use zk_core::calculus::CalculusError;
use zk_core::dynamics::DynamicsError;
use zk_core::geometry::GeometryError;
use zk_core::spectral::SpectralError;
use zk_core::stabilization::StabilizationError;

pub use cli::cli_main;
pub use config::{load_config, parse_config, LoadedConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Artifact(#[from] artifacts::ArtifactError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Stabilization(#[from] StabilizationError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}
