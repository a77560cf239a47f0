//! Run configuration: a JSON file whose every key has a default, plus
//! `DRONENET_` environment overrides (`DRONENET_SOLVER__TIME_LIMIT=30`).

use std::path::{Path, PathBuf};

use dronenet::analytics::{CostParams, QalyParams, SurvivalKind};
use dronenet::instance::NetworkParams;
use dronenet::simulator::{Policy, SimConfig, XiDraw};
use dronenet::solver::{Mode, SolveParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const ENV_PREFIX: &str = "DRONENET_";

const SECONDS_PER_YEAR: f64 = 365.0 * 86_400.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid: {0}")]
    Parse(String),
    #[error("environment override {key}: {msg}")]
    Env { key: String, msg: String },
    #[error("invalid config value {field}: {msg}")]
    Invalid { field: &'static str, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Historical requests: timestamp, latitude, longitude[, response_time_seconds].
    pub requests: Option<PathBuf>,
    /// Candidate bases: id, latitude, longitude.
    pub bases: Option<PathBuf>,
    /// Arrival stream for `simulate`: time_seconds, latitude, longitude.
    pub arrivals: Option<PathBuf>,
    /// Merge requests with identical coordinates into one demand point.
    pub merge_duplicates: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            requests: None,
            bases: None,
            arrivals: None,
            merge_duplicates: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub speed: f64,
    pub beta: f64,
    pub radius: f64,
    pub fleet_size: usize,
    pub max_open: usize,
    pub max_per_base: usize,
    pub epsilon_ss: f64,
    /// Utilization cap per drone; when set, epsilon_ss becomes 1 − rho_cap.
    pub rho_cap: Option<f64>,
    /// Mean non-travel service time E[ξ], seconds.
    pub xi_mean: f64,
    /// E[ξ²]; defaults to E[ξ]² (deterministic ξ).
    pub xi_second_moment: Option<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let p = NetworkParams::default();
        Self {
            speed: p.speed,
            beta: p.beta,
            radius: p.radius,
            fleet_size: p.fleet_size,
            max_open: p.max_open,
            max_per_base: p.max_per_base,
            epsilon_ss: p.epsilon_ss,
            rho_cap: None,
            xi_mean: 1_500.0,
            xi_second_moment: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mode: String,
    pub gap_tol: f64,
    pub time_limit: Option<f64>,
    pub node_limit: Option<u64>,
    pub seed: u64,
    pub trace: bool,
    /// Start the search from the greedy design.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: "OA_BC".into(),
            gap_tol: 1e-4,
            time_limit: None,
            node_limit: None,
            seed: 0,
            trace: false,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorConfig {
    pub policy: String,
    pub xi: XiDraw,
    pub takeoff: f64,
    pub landing: f64,
    pub replications: usize,
    /// Length of a generated arrival stream, seconds; defaults to the data horizon.
    pub horizon: Option<f64>,
    /// Replay the request timestamps instead of drawing Poisson arrivals.
    pub replay: bool,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        let s = SimConfig::default();
        Self {
            policy: s.policy.to_string(),
            xi: s.xi,
            takeoff: s.takeoff,
            landing: s.landing,
            replications: 1,
            horizon: None,
            replay: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsConfig {
    /// Yearly overdoses; defaults to the request count scaled to a year.
    pub overdoses_per_year: Option<f64>,
    pub ohca_rate: f64,
    pub kinds: Vec<SurvivalKind>,
    /// Drone response minutes; defaults to the solved design's mean response.
    pub drone_response_minutes: Option<f64>,
    /// Ambulance response minutes; defaults to the mean of response_time_seconds.
    pub ems_response_minutes: Option<f64>,
    pub qaly: QalyParams,
    pub cost: CostParams,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            overdoses_per_year: None,
            ohca_rate: 0.15,
            kinds: SurvivalKind::ALL.to_vec(),
            drone_response_minutes: None,
            ems_response_minutes: None,
            qaly: QalyParams::default(),
            cost: CostParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub network: NetworkConfig,
    /// Period covered by the request file, seconds.
    pub horizon_seconds: f64,
    pub solver: SolverConfig,
    pub simulator: SimulatorConfig,
    pub analytics: AnalyticsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataConfig::default(),
            network: NetworkConfig::default(),
            horizon_seconds: SECONDS_PER_YEAR,
            solver: SolverConfig::default(),
            simulator: SimulatorConfig::default(),
            analytics: AnalyticsConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies environment
    /// overrides and validates. Relative data paths resolve against the
    /// config file's directory.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, ConfigError> {
        let mut value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => serde_json::to_value(RunConfig::default()).expect("defaults serialize"),
        };
        apply_env(&mut value, env)?;
        let mut cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(dir) = path.and_then(Path::parent) {
            for p in [
                &mut cfg.data.requests,
                &mut cfg.data.bases,
                &mut cfg.data.arrivals,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = &self.network;
        let positive = [
            ("network.speed", n.speed),
            ("network.beta", n.beta),
            ("network.radius", n.radius),
            ("network.epsilon_ss", n.epsilon_ss),
            ("network.xi_mean", n.xi_mean),
            ("horizon_seconds", self.horizon_seconds),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid {
                    field,
                    msg: format!("must be positive, got {v}"),
                });
            }
        }
        if let Some(c) = n.rho_cap {
            if !(c > 0.0 && c < 1.0) {
                return Err(invalid("network.rho_cap", format!("must lie in (0, 1), got {c}")));
            }
        }
        if let Some(s) = n.xi_second_moment {
            if s < n.xi_mean * n.xi_mean {
                return Err(invalid("network.xi_second_moment", "must be at least xi_mean²".into()));
            }
        }
        if n.fleet_size == 0 || n.max_open == 0 || n.max_per_base == 0 {
            return Err(invalid("network", "fleet_size, max_open and max_per_base must be ≥ 1".into()));
        }
        self.mode()?;
        self.policy()?;
        if !(self.solver.gap_tol >= 0.0) {
            return Err(invalid("solver.gap_tol", "must be nonnegative".into()));
        }
        if self.solver.time_limit.is_some_and(|t| !(t > 0.0)) {
            return Err(invalid("solver.time_limit", "must be positive".into()));
        }
        if self.simulator.replications == 0 {
            return Err(invalid("simulator.replications", "must be ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.analytics.ohca_rate) {
            return Err(invalid("analytics.ohca_rate", "must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn mode(&self) -> Result<Mode, ConfigError> {
        self.solver.mode.parse().map_err(|m| invalid("solver.mode", m))
    }

    pub fn policy(&self) -> Result<Policy, ConfigError> {
        self.simulator.policy.parse().map_err(|m| invalid("simulator.policy", m))
    }

    pub fn network_params(&self) -> NetworkParams {
        let n = &self.network;
        NetworkParams {
            speed: n.speed,
            beta: n.beta,
            radius: n.radius,
            fleet_size: n.fleet_size,
            max_open: n.max_open,
            max_per_base: n.max_per_base,
            epsilon_ss: n.rho_cap.map_or(n.epsilon_ss, |c| 1.0 - c),
        }
    }

    pub fn solve_params(&self) -> SolveParams {
        SolveParams {
            gap_tol: self.solver.gap_tol,
            time_limit: self.solver.time_limit,
            node_limit: self.solver.node_limit,
            trace: self.solver.trace,
            warm_start: None,
        }
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            policy: self.policy().unwrap_or(Policy::Nearest),
            xi: self.simulator.xi,
            takeoff: self.simulator.takeoff,
            landing: self.simulator.landing,
        }
    }
}

fn invalid(field: &'static str, msg: String) -> ConfigError {
    ConfigError::Invalid { field, msg }
}

/// Applies `DRONENET_A__B=value` as `config.a.b = value`. The value is
/// read as JSON when it parses, otherwise as a string.
pub fn apply_env(
    value: &mut Value,
    env: impl IntoIterator<Item = (String, String)>,
) -> Result<(), ConfigError> {
    let mut pairs: Vec<(String, String)> = env
        .into_iter()
        .filter(|(k, _)| k.starts_with(ENV_PREFIX))
        .collect();
    pairs.sort();
    for (key, raw) in pairs {
        let path: Vec<String> = key[ENV_PREFIX.len()..]
            .split("__")
            .map(str::to_ascii_lowercase)
            .collect();
        let parsed = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
        let mut cur = &mut *value;
        for (depth, part) in path.iter().enumerate() {
            let Value::Object(map) = cur else {
                return Err(ConfigError::Env {
                    key: key.clone(),
                    msg: format!("{} is not a section", path[..depth].join(".")),
                });
            };
            if depth + 1 == path.len() {
                map.insert(part.clone(), parsed.clone());
                break;
            }
            cur = map
                .entry(part.clone())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}
