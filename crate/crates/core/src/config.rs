//! JSON scenario files.
//!
//! ```json
//! {
//!   "dt": 0.02, "duration_s": 60, "directional_rate_hz": 20, "relative_rate_hz": 1,
//!   "agents": [{ "directions": [[0, 1, 0]], "directional_noise_cov": [0.04, 0.01, 0.09],
//!                "gyro_noise_cov": [0.09, 0.04, 0.01],
//!                "trajectory": { "kind": "oscillatory", "abs_sin": [10, 0, 0.1], "abs_cos": [0, 1, 0] } }],
//!   "relative": { "model": "physical", "Q": [0.25, 0.09, 0.04] },
//!   "fusion": { "alpha_policy": "fixed", "alpha": 0.5 },
//!   "monte_carlo": { "num_runs": 1000, "seed": 1 }
//! }
//! ```
//!
//! Covariances are either three diagonal entries or nine row-major entries.
//! Optional sections: `relative.rate_hz` (must equal `relative_rate_hz`),
//! `relative.edges`, `relative.proxy`, `initial.{offset_rad, estimate_cov}` and
//! `options.truth_from_measured_omega`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::fusion::{AlphaPolicy, ProxyChoice, RelativeModel};
use crate::gaussian::SpdMatrix3;
use crate::sim::{AgentConfig, OmegaProfile, ScenarioConfig};
use crate::so3::{Matrix3, Vec3};

const REQUIRED_KEYS: [&str; 8] = [
    "dt",
    "duration_s",
    "directional_rate_hz",
    "relative_rate_hz",
    "agents",
    "relative",
    "fusion",
    "monte_carlo",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Empty(String),
    /// Malformed JSON or a schema mismatch; `path` is the JSON path of the
    /// offending key.
    #[error("at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("bad override `{0}`: expected key=value")]
    Override(String),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dt: f64,
    pub duration_s: f64,
    pub directional_rate_hz: f64,
    pub relative_rate_hz: f64,
    pub agents: Vec<AgentSection>,
    pub relative: RelativeSection,
    pub fusion: FusionSection,
    pub monte_carlo: MonteCarloSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub directions: Vec<[f64; 3]>,
    pub directional_noise_cov: Vec<f64>,
    pub gyro_noise_cov: Vec<f64>,
    pub trajectory: TrajectorySection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectorySection {
    Oscillatory { abs_sin: [f64; 3], abs_cos: [f64; 3] },
    Constant { omega: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeSection {
    pub model: RelativeModel,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_hz: Option<f64>,
    /// `[observer, target]` pairs. Defaults to `[[1, 0]]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proxy: Option<ProxyChoice>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicyName {
    Fixed,
    Optimal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    pub alpha_policy: AlphaPolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub num_runs: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate_cov: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_from_measured_omega: Option<bool>,
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    load_config(path, &[])
}

/// Reads `path`, applies `key=value` overrides, and validates.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Empty(format!(
            "empty config; missing required keys: {}",
            REQUIRED_KEYS.join(", ")
        )));
    }
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: "$".into(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let file: ConfigFile = serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    file.resolve()
}

/// `a.b.0.c=value`. The value is parsed as JSON, falling back to a string.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    let new_value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for part in key.split('.') {
        node = match node {
            Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| invalid(key, format!("`{part}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| invalid(key, format!("index {idx} out of range (length {len})")))?
            }
            Value::Null => {
                *node = Value::Object(Default::default());
                match node {
                    Value::Object(map) => map.entry(part.to_string()).or_insert(Value::Null),
                    _ => unreachable!(),
                }
            }
            _ => return Err(invalid(key, format!("cannot descend into a scalar at `{part}`"))),
        };
    }
    *node = new_value;
    Ok(())
}

fn covariance(path: &str, entries: &[f64]) -> Result<SpdMatrix3, ConfigError> {
    let m = match entries.len() {
        3 => Matrix3::from_diagonal(&Vec3::from_column_slice(entries)),
        9 => Matrix3::from_row_slice(entries),
        n => return Err(invalid(path, format!("expected 3 or 9 entries, got {n}"))),
    };
    if !m.iter().all(|x| x.is_finite()) {
        return Err(invalid(path, "non-finite entry"));
    }
    if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max().max(1.0) {
        return Err(invalid(path, "matrix is not symmetric"));
    }
    // zero noise is allowed; negative directions are not
    let min_eig = SymmetricEigen::new(m).eigenvalues.min();
    if min_eig < 0.0 {
        return Err(invalid(
            path,
            format!("not positive semi-definite (smallest eigenvalue {min_eig})"),
        ));
    }
    Ok(SpdMatrix3::new_unchecked(m))
}

fn diag_or_full(m: &SpdMatrix3) -> Vec<f64> {
    let m = m.matrix();
    if *m == Matrix3::from_diagonal(&m.diagonal()) {
        m.diagonal().iter().copied().collect()
    } else {
        m.transpose().iter().copied().collect()
    }
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<ScenarioConfig, ConfigError> {
        let defaults = ScenarioConfig::default();
        if let Some(r) = self.relative.rate_hz {
            if r != self.relative_rate_hz {
                return Err(invalid(
                    "relative.rate_hz",
                    format!("{r} disagrees with relative_rate_hz = {}", self.relative_rate_hz),
                ));
            }
        }
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Ok(AgentConfig {
                    directions: a.directions.iter().map(|d| Vec3::from(*d)).collect(),
                    directional_noise_cov: covariance(
                        &format!("agents[{i}].directional_noise_cov"),
                        &a.directional_noise_cov,
                    )?,
                    gyro_noise_cov: covariance(&format!("agents[{i}].gyro_noise_cov"), &a.gyro_noise_cov)?,
                    trajectory: match &a.trajectory {
                        TrajectorySection::Oscillatory { abs_sin, abs_cos } => OmegaProfile::Oscillatory {
                            abs_sin: Vec3::from(*abs_sin),
                            abs_cos: Vec3::from(*abs_cos),
                        },
                        TrajectorySection::Constant { omega } => OmegaProfile::Constant(Vec3::from(*omega)),
                    },
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        let alpha_policy = match (self.fusion.alpha_policy, self.fusion.alpha) {
            (AlphaPolicyName::Fixed, Some(a)) => AlphaPolicy::Fixed(a),
            (AlphaPolicyName::Fixed, None) => {
                return Err(invalid("fusion.alpha", "required when alpha_policy is \"fixed\""))
            }
            (AlphaPolicyName::Optimal, None) => AlphaPolicy::Optimal,
            (AlphaPolicyName::Optimal, Some(_)) => {
                return Err(invalid("fusion.alpha", "must be absent when alpha_policy is \"optimal\""))
            }
        };
        let initial = self.initial.clone().unwrap_or(InitialSection {
            offset_rad: None,
            estimate_cov: None,
        });
        let initial_estimate_cov = match &initial.estimate_cov {
            Some(c) => {
                let m = covariance("initial.estimate_cov", c)?;
                SpdMatrix3::new(*m.matrix()).map_err(|e| invalid("initial.estimate_cov", e.to_string()))?
            }
            None => defaults.initial_estimate_cov,
        };
        let cfg = ScenarioConfig {
            dt: self.dt,
            duration: self.duration_s,
            directional_rate: self.directional_rate_hz,
            relative_rate: self.relative_rate_hz,
            agents,
            relative_model: self.relative.model,
            relative_noise_cov: covariance("relative.Q", &self.relative.q)?,
            edges: match &self.relative.edges {
                Some(e) => e.iter().map(|p| (p[0], p[1])).collect(),
                None if self.agents.len() >= 2 => vec![(1, 0)],
                None => vec![],
            },
            initial_offset: initial.offset_rad.unwrap_or(defaults.initial_offset),
            initial_estimate_cov,
            alpha_policy,
            proxy: self.relative.proxy.unwrap_or_default(),
            truth_from_measured_omega: self
                .options
                .as_ref()
                .and_then(|o| o.truth_from_measured_omega)
                .unwrap_or(defaults.truth_from_measured_omega),
            seed: self.monte_carlo.seed,
            num_runs: self.monte_carlo.num_runs,
        };
        cfg.validate().map_err(|e| invalid("$", e.to_string()))?;
        Ok(cfg)
    }
}

impl From<&ScenarioConfig> for ConfigFile {
    /// The fully resolved form: every optional section is written out.
    fn from(cfg: &ScenarioConfig) -> Self {
        let (alpha_policy, alpha) = match cfg.alpha_policy {
            AlphaPolicy::Fixed(a) => (AlphaPolicyName::Fixed, Some(a)),
            AlphaPolicy::Optimal => (AlphaPolicyName::Optimal, None),
        };
        ConfigFile {
            dt: cfg.dt,
            duration_s: cfg.duration,
            directional_rate_hz: cfg.directional_rate,
            relative_rate_hz: cfg.relative_rate,
            agents: cfg
                .agents
                .iter()
                .map(|a| AgentSection {
                    directions: a.directions.iter().map(|d| [d.x, d.y, d.z]).collect(),
                    directional_noise_cov: diag_or_full(&a.directional_noise_cov),
                    gyro_noise_cov: diag_or_full(&a.gyro_noise_cov),
                    trajectory: match &a.trajectory {
                        OmegaProfile::Oscillatory { abs_sin, abs_cos } => TrajectorySection::Oscillatory {
                            abs_sin: (*abs_sin).into(),
                            abs_cos: (*abs_cos).into(),
                        },
                        OmegaProfile::Constant(w) => TrajectorySection::Constant { omega: (*w).into() },
                    },
                })
                .collect(),
            relative: RelativeSection {
                model: cfg.relative_model,
                q: diag_or_full(&cfg.relative_noise_cov),
                rate_hz: Some(cfg.relative_rate),
                edges: Some(cfg.edges.iter().map(|&(o, t)| [o, t]).collect()),
                proxy: Some(cfg.proxy),
            },
            fusion: FusionSection { alpha_policy, alpha },
            monte_carlo: MonteCarloSection {
                num_runs: cfg.num_runs,
                seed: cfg.seed,
            },
            initial: Some(InitialSection {
                offset_rad: Some(cfg.initial_offset),
                estimate_cov: Some(diag_or_full(&cfg.initial_estimate_cov)),
            }),
            options: Some(OptionsSection {
                truth_from_measured_omega: Some(cfg.truth_from_measured_omega),
            }),
        }
    }
}

/// The resolved configuration as a JSON value, for echoing into outputs.
pub fn to_json(cfg: &ScenarioConfig) -> Value {
    serde_json::to_value(ConfigFile::from(cfg)).expect("config serialises")
}
