//! Experiment configuration: defaults, validation, and the flat
//! key-value config file format.
//!
//! The config file is line-oriented `key = value` text; blank lines and
//! `#` comments are ignored. Unknown keys and unparseable values are
//! rejected with the offending field named. Command-line flags override
//! file values.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::channel::TopologyConfig;
use crate::error::{Error, Result};
use crate::federation::Mode;
use crate::netsim::EnvConfig;

/// Which decision-maker an experiment trains or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgorithmChoice {
    Dqn,
    Pg,
    Wmmse,
    MaxPower,
}

impl AlgorithmChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            AlgorithmChoice::Dqn => "dqn",
            AlgorithmChoice::Pg => "pg",
            AlgorithmChoice::Wmmse => "wmmse",
            AlgorithmChoice::MaxPower => "maxpower",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, AlgorithmChoice::Dqn | AlgorithmChoice::Pg)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dqn" => Ok(AlgorithmChoice::Dqn),
            "pg" => Ok(AlgorithmChoice::Pg),
            "wmmse" => Ok(AlgorithmChoice::Wmmse),
            "maxpower" => Ok(AlgorithmChoice::MaxPower),
            other => Err(Error::config(
                "algorithm",
                format!("unknown algorithm `{other}` (expected dqn|pg|wmmse|maxpower)"),
            )),
        }
    }
}

impl fmt::Display for AlgorithmChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    match s {
        "federated" => Ok(Mode::Federated),
        "distributed" => Ok(Mode::Distributed),
        "centralized" => Ok(Mode::Centralized),
        other => Err(Error::config(
            "mode",
            format!("unknown mode `{other}` (expected federated|distributed|centralized)"),
        )),
    }
}

/// Everything one experiment needs; the seed fully determines every
/// random stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologyConfig,
    pub env: EnvConfig,
    pub agent: AgentConfig,
    pub mode: Mode,
    pub agg_period: usize,
    pub algorithm: AlgorithmChoice,
    pub learning_rate: f64,
    pub n_episodes: usize,
    pub eval_episodes: usize,
    pub seed: u64,
    pub smoothing_window: usize,
    pub out_dir: PathBuf,
    pub checkpoint_dir: Option<PathBuf>,
    /// Measure wall-clock per decision during evaluation. Off by default:
    /// timing is hardware noise and would break byte-identical reruns.
    pub record_latency: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            topology: TopologyConfig::default(),
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
            mode: Mode::Federated,
            agg_period: 100,
            algorithm: AlgorithmChoice::Dqn,
            learning_rate: 1e-3,
            n_episodes: 2000,
            eval_episodes: 200,
            seed: 1,
            smoothing_window: 100,
            out_dir: PathBuf::from("out"),
            checkpoint_dir: None,
            record_latency: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.env.validate()?;
        self.agent.validate()?;
        if self.mode == Mode::Federated && self.agg_period == 0 {
            return Err(Error::config("agg_period", "must be >= 1"));
        }
        if self.n_episodes == 0 {
            return Err(Error::config("n_episodes", "must be >= 1"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes", "must be >= 1"));
        }
        if self.smoothing_window == 0 {
            return Err(Error::config("smoothing_window", "must be >= 1"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::config("learning_rate", "must be >= 0"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", line_no + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::config(key, format!("invalid value `{value}`")))
        }
        fn boolean(key: &str, value: &str) -> Result<bool> {
            match value {
                "true" | "1" | "yes" | "on" => Ok(true),
                "false" | "0" | "no" | "off" => Ok(false),
                _ => Err(Error::config(key, format!("invalid boolean `{value}`"))),
            }
        }
        match key {
            // topology
            "grid_side" => self.topology.grid_side = num(key, value)?,
            "users_per_cell" => self.topology.users_per_cell = num(key, value)?,
            "inter_site_distance_m" => self.topology.inter_site_distance_m = num(key, value)?,
            "neighbor_count" => self.topology.neighbor_count = num(key, value)?,
            "d_min_m" => self.topology.d_min_m = num(key, value)?,
            "shadowing_sigma_db" => self.topology.shadowing_sigma_db = num(key, value)?,
            "doppler_hz" => self.topology.doppler_hz = num(key, value)?,
            "slot_duration_s" => self.topology.slot_duration_s = num(key, value)?,
            // environment
            "n_power_levels" => self.env.n_power_levels = num(key, value)?,
            "p_max_dbm" => self.env.p_max_dbm = num(key, value)?,
            "noise_dbm" => self.env.noise_dbm = num(key, value)?,
            "beta" => self.env.beta = num(key, value)?,
            "horizon_t" => self.env.horizon = num(key, value)?,
            // agent
            "gamma" => self.agent.gamma = num(key, value)?,
            "eps_start" => self.agent.eps_start = num(key, value)?,
            "eps_end" => self.agent.eps_end = num(key, value)?,
            "eps_decay_frac" => self.agent.eps_decay_frac = num(key, value)?,
            "use_baseline" => self.agent.use_baseline = boolean(key, value)?,
            "use_target_net" => self.agent.use_target_net = boolean(key, value)?,
            "replay_capacity" => self.agent.replay_capacity = num(key, value)?,
            // plan and experiment
            "mode" => self.mode = parse_mode(value)?,
            "agg_period" => self.agg_period = num(key, value)?,
            "algorithm" => self.algorithm = AlgorithmChoice::parse(value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "n_episodes" => self.n_episodes = num(key, value)?,
            "eval_episodes" => self.eval_episodes = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "smoothing_window" => self.smoothing_window = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "checkpoint_dir" => {
                self.checkpoint_dir = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "record_latency" => self.record_latency = boolean(key, value)?,
            other => {
                return Err(Error::config(other, "unknown configuration key"));
            }
        }
        Ok(())
    }
}
