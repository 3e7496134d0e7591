//! Flat JSON run configurations.
//!
//! A config is one JSON object of scalar values. Required keys are `L`, `B`,
//! `nx`, `ny`, `alpha`, `t_end` and `initial`; everything else has a default
//! or belongs to a particular initial shape. After validation the config is
//! re-emitted in canonical form (sorted keys, every default spelled out,
//! integers as integers) and hashed, so formatting changes never alter the hash.

use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;
use zk_core::dynamics::{DynamicsError, InitialCondition, Scaling, Shape, SimConfig};
use zk_core::geometry::{DomainKind, GeometryError, Grid};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config is not valid JSON: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("config must be a JSON object of key-value pairs")]
    NotObject,
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("key `{key}` must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("key `{key}`: {reason}")]
    Range { key: String, reason: String },
}

impl ConfigError {
    /// The config key this error is about, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Missing(k) | ConfigError::Unknown(k) => Some(k),
            ConfigError::Type { key, .. } | ConfigError::Range { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn range(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Range { key: key.to_string(), reason: reason.into() }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Int,
    Bool,
    Text,
}

/// Every accepted key with its type.
const KEYS: &[(&str, Kind)] = &[
    ("L", Kind::Float),
    ("B", Kind::Float),
    ("nx", Kind::Int),
    ("ny", Kind::Int),
    ("alpha", Kind::Int),
    ("t_end", Kind::Float),
    ("initial", Kind::Text),
    ("domain", Kind::Text),
    ("epsilon", Kind::Float),
    ("linear", Kind::Bool),
    ("dt", Kind::Float),
    ("trace_stride", Kind::Int),
    ("snapshot_stride", Kind::Int),
    ("linear_solver_tol", Kind::Float),
    ("scaling", Kind::Text),
    ("scale", Kind::Float),
    ("k", Kind::Int),
    ("l", Kind::Int),
    ("n", Kind::Int),
    ("radius", Kind::Float),
    ("snapshot_path", Kind::Text),
];

const REQUIRED: &[&str] = &["L", "B", "nx", "ny", "alpha", "t_end", "initial"];

/// Keys owned by one initial shape, and the shape that owns them.
const SHAPE_KEYS: &[(&str, &str)] = &[
    ("k", "stationary_mode"),
    ("l", "stationary_mode"),
    ("n", "stationary_mode"),
    ("radius", "strip_packet"),
    ("snapshot_path", "snapshot"),
];

pub fn key_kind(key: &str) -> Option<(&'static str, bool)> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(k, kind)| (*k, matches!(kind, Kind::Float | Kind::Int)))
}

/// A validated config: the simulation parameters plus their canonical echo.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub sim: SimConfig,
    pub canonical: Map<String, Value>,
    pub hash: String,
}

impl LoadedConfig {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.canonical).expect("a map of scalars always serializes")
    }
}

pub fn load_config(path: &Path) -> Result<LoadedConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    match serde_json::from_str::<Value>(text)? {
        Value::Object(map) => from_map(map),
        _ => Err(ConfigError::NotObject),
    }
}

/// Hex SHA-256 of the canonical serialization.
pub fn config_hash(canonical: &Map<String, Value>) -> String {
    let text = serde_json::to_string(canonical).expect("a map of scalars always serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn float(map: &Map<String, Value>, key: &str) -> Option<f64> {
    map.get(key).and_then(Value::as_f64)
}

fn int(map: &Map<String, Value>, key: &str) -> Option<u64> {
    map.get(key).and_then(Value::as_u64)
}

fn text<'a>(map: &'a Map<String, Value>, key: &str) -> Option<&'a str> {
    map.get(key).and_then(Value::as_str)
}

/// Checks types and normalizes numbers: integer keys accept integral floats.
fn normalize(key: &str, kind: Kind, v: Value) -> Result<Value, ConfigError> {
    let bad = |expected| ConfigError::Type { key: key.to_string(), expected };
    match kind {
        Kind::Float => {
            let x = v.as_f64().ok_or(bad("a number"))?;
            Ok(Value::Number(Number::from_f64(x).ok_or(bad("a finite number"))?))
        }
        Kind::Int => {
            if let Some(i) = v.as_u64() {
                return Ok(Value::from(i));
            }
            match v.as_f64() {
                Some(x) if x >= 0.0 && x.fract() == 0.0 && x < 2f64.powi(53) => Ok(Value::from(x as u64)),
                _ => Err(bad("a non-negative integer")),
            }
        }
        Kind::Bool => v.as_bool().map(Value::Bool).ok_or(bad("true or false")),
        Kind::Text => v.as_str().map(|s| Value::String(s.to_string())).ok_or(bad("a string")),
    }
}

fn from_dynamics(e: DynamicsError) -> ConfigError {
    match e {
        DynamicsError::InvalidConfig { key, reason } => range(key, reason),
        DynamicsError::Geometry(g) => from_geometry(g),
        other => range("initial", other.to_string()),
    }
}

fn from_geometry(e: GeometryError) -> ConfigError {
    match e {
        GeometryError::BadDimension { name, .. } => range(name, e.to_string()),
        GeometryError::TooFewPoints { axis, .. } => range(axis, e.to_string()),
        other => range("initial", other.to_string()),
    }
}

fn from_map(raw: Map<String, Value>) -> Result<LoadedConfig, ConfigError> {
    let mut m = Map::new();
    for (key, v) in raw {
        let (_, kind) = KEYS.iter().find(|(k, _)| *k == key).ok_or_else(|| ConfigError::Unknown(key.clone()))?;
        let v = normalize(&key, *kind, v)?;
        m.insert(key, v);
    }
    for key in REQUIRED {
        if !m.contains_key(*key) {
            return Err(ConfigError::Missing(key.to_string()));
        }
    }

    let alpha = int(&m, "alpha").expect("typed above");
    if alpha > 1 {
        return Err(range("alpha", format!("must be 0 or 1, got {alpha}")));
    }
    let domain = match text(&m, "domain").unwrap_or("rectangle") {
        "rectangle" => DomainKind::Rectangle,
        "truncated_strip" => DomainKind::TruncatedStrip,
        other => return Err(range("domain", format!("expected `rectangle` or `truncated_strip`, got `{other}`"))),
    };
    let grid = Grid::new(
        float(&m, "L").expect("typed above"),
        float(&m, "B").expect("typed above"),
        int(&m, "nx").expect("typed above") as usize,
        int(&m, "ny").expect("typed above") as usize,
        domain,
    )
    .map_err(from_geometry)?;

    let shape_name = text(&m, "initial").expect("typed above").to_string();
    for (key, owner) in SHAPE_KEYS {
        if m.contains_key(*key) && *owner != shape_name {
            return Err(range(key, format!("only used with initial = `{owner}`")));
        }
    }
    let positive_int = |m: &Map<String, Value>, key: &str| -> Result<u32, ConfigError> {
        let v = int(m, key).unwrap_or(1);
        u32::try_from(v).ok().filter(|v| *v >= 1).ok_or_else(|| range(key, format!("must be a positive index, got {v}")))
    };
    let shape = match shape_name.as_str() {
        "stationary_mode" => {
            let (k, l, n) = (positive_int(&m, "k")?, positive_int(&m, "l")?, positive_int(&m, "n")?);
            for (key, v) in [("k", k), ("l", l), ("n", n)] {
                m.insert(key.to_string(), Value::from(v));
            }
            Shape::StationaryMode { k, l, n }
        }
        "sine_bump" => Shape::SineBump,
        "outflow_ramp" => Shape::OutflowRamp,
        "strip_packet" => {
            let radius = float(&m, "radius").ok_or_else(|| ConfigError::Missing("radius".into()))?;
            if !(radius > 0.0) {
                return Err(range("radius", format!("must be positive, got {radius}")));
            }
            Shape::StripPacket { radius }
        }
        "snapshot" => {
            let p = text(&m, "snapshot_path").ok_or_else(|| ConfigError::Missing("snapshot_path".into()))?;
            Shape::Snapshot { path: PathBuf::from(p) }
        }
        other => {
            return Err(range(
                "initial",
                format!("unknown shape `{other}`; expected stationary_mode, sine_bump, outflow_ramp, strip_packet or snapshot"),
            ))
        }
    };

    let scaling_name = text(&m, "scaling").unwrap_or("unit").to_string();
    let scaling = match (scaling_name.as_str(), float(&m, "scale")) {
        ("unit", None) => Scaling::Unit,
        ("unit", Some(_)) => return Err(range("scale", "not used with scaling = `unit`")),
        ("amplitude" | "weighted_energy", None) => return Err(ConfigError::Missing("scale".into())),
        ("amplitude", Some(v)) => Scaling::Amplitude(v),
        ("weighted_energy", Some(v)) => Scaling::WeightedEnergy(v),
        (other, _) => return Err(range("scaling", format!("expected `unit`, `amplitude` or `weighted_energy`, got `{other}`"))),
    };
    if let Scaling::Amplitude(v) | Scaling::WeightedEnergy(v) = scaling {
        if v < 0.0 {
            return Err(range("scale", format!("must be non-negative, got {v}")));
        }
    }

    let t_end = float(&m, "t_end").expect("typed above");
    let mut sim = SimConfig::new(grid, alpha as u8, t_end, InitialCondition::new(shape, scaling));
    sim.epsilon = float(&m, "epsilon").unwrap_or(0.0);
    sim.linear = m.get("linear").and_then(Value::as_bool).unwrap_or(false);
    sim.dt = float(&m, "dt").unwrap_or(SimConfig::DEFAULT_DT);
    sim.trace_stride = int(&m, "trace_stride").map_or(SimConfig::DEFAULT_TRACE_STRIDE, |v| v as usize);
    sim.snapshot_stride = int(&m, "snapshot_stride").map_or(SimConfig::DEFAULT_SNAPSHOT_STRIDE, |v| v as usize);
    sim.linear_solver_tol = float(&m, "linear_solver_tol").unwrap_or(SimConfig::DEFAULT_SOLVER_TOL);
    sim.validate().map_err(from_dynamics)?;
    let steps = sim.t_end / sim.dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(range("dt", format!("must divide t_end = {} into whole steps", sim.t_end)));
    }

    let defaults = [
        ("domain", Value::from(if domain == DomainKind::Rectangle { "rectangle" } else { "truncated_strip" })),
        ("epsilon", Value::from(sim.epsilon)),
        ("linear", Value::from(sim.linear)),
        ("dt", Value::from(sim.dt)),
        ("trace_stride", Value::from(sim.trace_stride as u64)),
        ("snapshot_stride", Value::from(sim.snapshot_stride as u64)),
        ("linear_solver_tol", Value::from(sim.linear_solver_tol)),
        ("scaling", Value::from(scaling_name)),
    ];
    for (key, v) in defaults {
        m.entry(key.to_string()).or_insert(v);
    }
    let hash = config_hash(&m);
    Ok(LoadedConfig { sim, canonical: m, hash })
}

/// Rebuilds a config from a canonical map after one value was replaced.
pub fn with_value(base: &Map<String, Value>, key: &str, value: f64) -> Result<LoadedConfig, ConfigError> {
    let (key, numeric) = key_kind(key).ok_or_else(|| ConfigError::Unknown(key.to_string()))?;
    if !numeric {
        return Err(ConfigError::Type { key: key.to_string(), expected: "a numeric key to vary" });
    }
    let mut m = base.clone();
    m.insert(key.to_string(), Value::Number(Number::from_f64(value).ok_or_else(|| range(key, "must be finite"))?));
    from_map(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"L": 2, "B": 1, "nx": 15, "ny": 15, "alpha": 1, "t_end": 0.1, "initial": "sine_bump"}"#;

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.sim.dt, SimConfig::DEFAULT_DT);
        assert_eq!(c.sim.trace_stride, SimConfig::DEFAULT_TRACE_STRIDE);
        assert_eq!(c.sim.snapshot_stride, SimConfig::DEFAULT_SNAPSHOT_STRIDE);
        assert_eq!(c.sim.linear_solver_tol, SimConfig::DEFAULT_SOLVER_TOL);
        assert_eq!(c.sim.epsilon, 0.0);
        assert!(!c.sim.linear);
        assert_eq!(c.canonical["domain"], "rectangle");
        assert_eq!(c.canonical.len(), 15);
    }

    #[test]
    fn errors_name_the_key() {
        let cases = [
            (r#""alpha": 1"#, r#""alpha": 2"#, "alpha"),
            (r#""L": 2"#, r#""L": -2"#, "L"),
            (r#""nx": 15"#, r#""nx": 3"#, "nx"),
            (r#""nx": 15"#, r#""nx": 15.5"#, "nx"),
            (r#""L": 2"#, r#""L": "two""#, "L"),
            (r#""t_end": 0.1"#, r#""t_end": 0.1, "dt": 0.03"#, "dt"),
            (r#""t_end": 0.1"#, r#""t_end": 0.1, "colour": 1"#, "colour"),
            (r#""t_end": 0.1"#, r#""t_end": 0.1, "radius": 1"#, "radius"),
            (r#""t_end": 0.1"#, r#""t_end": 0.1, "scaling": "amplitude""#, "scale"),
            (r#""t_end": 0.1"#, r#""t_end": 0.1, "epsilon": -1"#, "epsilon"),
            (r#""initial": "sine_bump""#, r#""initial": "wave""#, "initial"),
            (r#""initial": "sine_bump""#, r#""initial": "strip_packet""#, "radius"),
            (r#", "t_end": 0.1"#, "", "t_end"),
        ];
        for (from, to, key) in cases {
            let text = MINIMAL.replace(from, to);
            let err = parse_config(&text).unwrap_err();
            assert_eq!(err.key(), Some(key), "{text}: {err}");
            assert!(err.to_string().contains(key));
        }
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = parse_config(MINIMAL).unwrap();
        let reordered = r#"{
            "initial": "sine_bump", "t_end": 1e-1, "alpha": 1,
            "ny": 15.0, "nx": 15, "B": 1.0, "L": 2.0, "dt": 0.001
        }"#;
        let b = parse_config(reordered).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_eq!(a.sim, b.sim);
        let again = parse_config(&a.canonical_json()).unwrap();
        assert_eq!(again.hash, a.hash);
        let other = parse_config(&MINIMAL.replace("0.1", "0.2")).unwrap();
        assert_ne!(other.hash, a.hash);
    }

    #[test]
    fn shape_keys_and_scaling() {
        let c = parse_config(&MINIMAL.replace("sine_bump", "stationary_mode")).unwrap();
        assert_eq!(c.sim.initial.shape, Shape::StationaryMode { k: 1, l: 1, n: 1 });
        let text = MINIMAL.replace(r#""domain""#, "").replace(
            r#""initial": "sine_bump""#,
            r#""initial": "strip_packet", "radius": 0.25, "domain": "truncated_strip", "scaling": "weighted_energy", "scale": 0.3"#,
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.sim.grid.kind(), DomainKind::TruncatedStrip);
        assert_eq!(c.sim.initial.scaling, Scaling::WeightedEnergy(0.3));
    }

    #[test]
    fn varying_a_value_revalidates() {
        let base = parse_config(MINIMAL).unwrap();
        let c = with_value(&base.canonical, "nx", 31.0).unwrap();
        assert_eq!(c.sim.grid.nx(), 31);
        assert_ne!(c.hash, base.hash);
        assert_eq!(with_value(&base.canonical, "nx", 31.5).unwrap_err().key(), Some("nx"));
        assert_eq!(with_value(&base.canonical, "initial", 1.0).unwrap_err().key(), Some("initial"));
        assert_eq!(with_value(&base.canonical, "speed", 1.0).unwrap_err().key(), Some("speed"));
    }
}
