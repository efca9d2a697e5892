//! Experiment configuration files.
//!
//! Configs are TOML. Distributions may be given as `{ mean, width }` or
//! `{ lower, width }`; when both `mean` and `lower` appear they must agree.
//!
//! ```toml
//! horizon = 100000
//! runs = 100
//! base_seed = 1
//! algorithms = ["offline", "alg1", "eps_greedy", "thompson"]
//!
//! [system]
//! thetas = [0.6, 0.5, 0.4, 0.3, 0.2, 0.1]
//! reward = { mean = 1.0, width = 0.1 }
//! sense_cost = { mean = 0.2, width = 0.1 }
//! tx_cost = { mean = 0.5, width = 0.1 }
//!
//! [alg1]
//! L = 20.0
//! D = 24.85
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::learners::{default_offset, LearnerConfig};
use crate::model::{BoundedUniform, SystemParams};

/// Environment variable that overrides the output directory of a config file.
pub const OUT_DIR_ENV: &str = "COGSENSE_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default)]
    pub width: f64,
}

impl DistSpec {
    pub fn mean_width(mean: f64, width: f64) -> Self {
        Self {
            mean: Some(mean),
            lower: None,
            width,
        }
    }

    fn resolve(&self, field: &str) -> Result<BoundedUniform, HarnessError> {
        let dist = match (self.mean, self.lower) {
            (Some(mean), None) => BoundedUniform::from_mean(mean, self.width),
            (None, Some(lower)) => BoundedUniform::new(lower, self.width),
            (Some(mean), Some(lower)) => {
                let d = BoundedUniform::new(lower, self.width);
                if (d.mean() - mean).abs() > 1e-12 {
                    return Err(HarnessError::Config(format!(
                        "{field}: mean {mean} is inconsistent with lower {lower} + width {}/2",
                        self.width
                    )));
                }
                d
            }
            (None, None) => return Err(HarnessError::Config(format!("{field}: give either `mean` or `lower`"))),
        };
        Ok(dist)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub thetas: Vec<f64>,
    pub reward: DistSpec,
    pub sense_cost: DistSpec,
    pub tx_cost: DistSpec,
}

impl SystemSpec {
    pub fn to_params(&self) -> Result<SystemParams, HarnessError> {
        Ok(SystemParams::new(
            self.thetas.clone(),
            self.reward.resolve("system.reward")?,
            self.sense_cost.resolve("system.sense_cost")?,
            self.tx_cost.resolve("system.tx_cost")?,
        )?)
    }

    /// The reference six-channel setup.
    pub fn reference() -> Self {
        Self {
            thetas: vec![0.6, 0.5, 0.4, 0.3, 0.2, 0.1],
            reward: DistSpec::mean_width(1.0, 0.1),
            sense_cost: DistSpec::mean_width(0.2, 0.1),
            tx_cost: DistSpec::mean_width(0.5, 0.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Offline,
    Alg1,
    EpsGreedy,
    Thompson,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Offline => "offline",
            Algorithm::Alg1 => "alg1",
            Algorithm::EpsGreedy => "eps_greedy",
            Algorithm::Thompson => "thompson",
        }
    }

    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        match s.trim() {
            "offline" => Ok(Algorithm::Offline),
            "alg1" => Ok(Algorithm::Alg1),
            "eps_greedy" | "eps-greedy" => Ok(Algorithm::EpsGreedy),
            "thompson" | "ts" => Ok(Algorithm::Thompson),
            other => Err(HarnessError::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alg1Spec {
    #[serde(rename = "L")]
    pub slope: f64,
    /// Defaults to `L·ln(2K)/2`.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

impl Default for Alg1Spec {
    fn default() -> Self {
        Self {
            slope: 20.0,
            offset: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsSpec {
    pub epsilon: f64,
}

impl Default for EpsSpec {
    fn default() -> Self {
        Self { epsilon: 0.001 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThompsonSpec {
    pub known_costs: bool,
}

impl Default for ThompsonSpec {
    fn default() -> Self {
        Self { known_costs: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineTableSpec {
    /// `(p0, c0)` pairs; `b0` and the channel set come from `[system]`.
    pub pairs: Vec<(f64, f64)>,
}

impl Default for OfflineTableSpec {
    fn default() -> Self {
        Self {
            pairs: vec![
                (0.50, 0.15),
                (0.50, 0.17),
                (0.50, 0.21),
                (0.50, 0.23),
                (0.30, 0.20),
                (0.40, 0.20),
                (0.60, 0.20),
                (0.65, 0.20),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LSweepSpec {
    /// Exploration slopes; each uses `D = L·ln(2K)/2`.
    pub values: Vec<f64>,
}

impl Default for LSweepSpec {
    fn default() -> Self {
        Self {
            values: vec![10.0, 15.0, 20.0],
        }
    }
}

fn default_horizon() -> u64 {
    100_000
}

fn default_runs() -> u64 {
    100
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![
        Algorithm::Offline,
        Algorithm::Alg1,
        Algorithm::EpsGreedy,
        Algorithm::Thompson,
    ]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("results")
}

/// A fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub system: SystemSpec,
    #[serde(default)]
    pub alg1: Alg1Spec,
    #[serde(default)]
    pub eps_greedy: EpsSpec,
    #[serde(default)]
    pub thompson: ThompsonSpec,
    #[serde(default)]
    pub offline_table: OfflineTableSpec,
    #[serde(default)]
    pub l_sweep: LSweepSpec,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<u64>,
    pub horizon: Option<u64>,
    pub algorithms: Option<Vec<Algorithm>>,
}

impl ExperimentConfig {
    /// The reference experiment with default settings.
    pub fn reference() -> Self {
        Self {
            horizon: default_horizon(),
            runs: default_runs(),
            base_seed: 0,
            algorithms: default_algorithms(),
            out_dir: default_out_dir(),
            system: SystemSpec::reference(),
            alg1: Alg1Spec::default(),
            eps_greedy: EpsSpec::default(),
            thompson: ThompsonSpec::default(),
            offline_table: OfflineTableSpec::default(),
            l_sweep: LSweepSpec::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Applies overrides with precedence flag > environment > file.
    pub fn apply(&mut self, overrides: &Overrides, env_out_dir: Option<PathBuf>) -> Result<(), HarnessError> {
        if let Some(dir) = env_out_dir {
            self.out_dir = dir;
        }
        if let Some(dir) = &overrides.out_dir {
            self.out_dir = dir.clone();
        }
        if let Some(seed) = overrides.seed {
            self.base_seed = seed;
        }
        if let Some(runs) = overrides.runs {
            self.runs = runs;
        }
        if let Some(horizon) = overrides.horizon {
            self.horizon = horizon;
        }
        if let Some(algs) = &overrides.algorithms {
            self.algorithms = algs.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.horizon < 1 {
            return Err(HarnessError::Config("horizon must be at least 1".into()));
        }
        if self.runs < 1 {
            return Err(HarnessError::Config("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::Config("algorithms must not be empty".into()));
        }
        self.system.to_params()?;
        if self.alg1.slope.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)
            || self.alg1.offset.is_some_and(|d| d.is_nan() || d <= 0.0)
        {
            return Err(HarnessError::Config("alg1.L and alg1.D must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.eps_greedy.epsilon) {
            return Err(HarnessError::Config("eps_greedy.epsilon must lie in [0, 1]".into()));
        }
        if self.l_sweep.values.iter().any(|&l| l.is_nan() || l <= 0.0) {
            return Err(HarnessError::Config("l_sweep.values must be positive".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> Result<SystemParams, HarnessError> {
        self.system.to_params()
    }

    /// `(L, D)` for Alg1 with the default offset filled in.
    pub fn alg1_constants(&self) -> (f64, f64) {
        let k = self.system.thetas.len();
        let d = self.alg1.offset.unwrap_or_else(|| default_offset(self.alg1.slope, k));
        (self.alg1.slope, d)
    }

    pub fn learner_config(&self, algorithm: Algorithm) -> Option<LearnerConfig> {
        match algorithm {
            Algorithm::Offline => None,
            Algorithm::Alg1 => {
                let (l, d) = self.alg1_constants();
                Some(LearnerConfig::alg1(l, d))
            }
            Algorithm::EpsGreedy => Some(LearnerConfig::eps_greedy(self.eps_greedy.epsilon)),
            Algorithm::Thompson => Some(LearnerConfig::thompson(self.thompson.known_costs)),
        }
    }
}
