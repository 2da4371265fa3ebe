//! The multi-agent environment: powers to SINRs, rates, rewards, and
//! per-BS observation vectors, advanced slot by slot over the fading
//! channel.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{
    init_fading, jakes_rho, large_scale_gains, ChannelState, GainTensor, Topology, TopologyConfig,
};
use crate::error::{Error, Result};

/// Converts a dBm figure to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Environment configuration, consumed from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Number of discrete power levels M.
    pub n_power_levels: usize,
    pub p_max_dbm: f64,
    pub noise_dbm: f64,
    /// Weight of neighbor-cell rates in the reward.
    pub beta: f64,
    /// Episode horizon T in slots.
    pub horizon: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            n_power_levels: 10,
            p_max_dbm: 38.0,
            noise_dbm: -114.0,
            beta: 1.0,
            horizon: 10,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_power_levels < 2 {
            return Err(Error::config("n_power_levels", "must be >= 2"));
        }
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::config("beta", "must be >= 0"));
        }
        if self.horizon < 1 {
            return Err(Error::config("horizon_t", "must be >= 1"));
        }
        Ok(())
    }

    pub fn p_max_watts(&self) -> f64 {
        dbm_to_watts(self.p_max_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }
}

/// Transmit power per (BS, user) link, watts, within [0, P_max].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerAllocation {
    pub p: Vec<Vec<f64>>,
}

impl PowerAllocation {
    pub fn zeros(users_per_cell: &[usize]) -> PowerAllocation {
        PowerAllocation {
            p: users_per_cell.iter().map(|&k| vec![0.0; k]).collect(),
        }
    }

    pub fn uniform(users_per_cell: &[usize], level: f64) -> PowerAllocation {
        PowerAllocation {
            p: users_per_cell.iter().map(|&k| vec![level; k]).collect(),
        }
    }
}

/// Spectral efficiency per (BS, user) link, bit/s/Hz (unit bandwidth).
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub c: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn zeros(users_per_cell: &[usize]) -> RateMatrix {
        RateMatrix {
            c: users_per_cell.iter().map(|&k| vec![0.0; k]).collect(),
        }
    }

    /// Sum rate of one cell.
    pub fn cell_sum(&self, n: usize) -> f64 {
        self.c[n].iter().sum()
    }
}

/// Maps a discrete power level index to watts:
/// A = {0, P_max/(M-1), ..., P_max}.
pub fn action_to_power(level_index: usize, n_levels: usize, p_max: f64) -> Result<f64> {
    if n_levels < 2 {
        return Err(Error::domain(
            "action_to_power",
            "need at least 2 power levels",
        ));
    }
    if level_index >= n_levels {
        return Err(Error::domain(
            "action_to_power",
            format!("level {level_index} out of range for M={n_levels}"),
        ));
    }
    Ok(level_index as f64 * p_max / (n_levels - 1) as f64)
}

/// Downlink SINR of user `k` in cell `n`.
///
/// Intra-cell interference applies the receiving user's own gain to the
/// co-scheduled users' powers; inter-cell interference sums each foreign
/// BS's total transmit power through its cross gain.
pub fn sinr(g: &GainTensor, p: &PowerAllocation, noise: f64, n: usize, k: usize) -> f64 {
    let own_gain = g[n][n][k];
    let signal = p.p[n][k] * own_gain;
    let intra: f64 = p.p[n]
        .iter()
        .enumerate()
        .filter(|&(k2, _)| k2 != k)
        .map(|(_, &pw)| own_gain * pw)
        .sum();
    let inter: f64 = (0..g.len())
        .filter(|&n2| n2 != n)
        .map(|n2| g[n2][n][k] * p.p[n2].iter().sum::<f64>())
        .sum();
    signal / (intra + inter + noise)
}

/// Rates for every link: log2(1 + SINR), unit bandwidth.
pub fn rates(g: &GainTensor, p: &PowerAllocation, noise: f64) -> RateMatrix {
    let c = (0..g.len())
        .map(|n| {
            (0..p.p[n].len())
                .map(|k| (1.0 + sinr(g, p, noise, n, k)).log2())
                .collect()
        })
        .collect();
    RateMatrix { c }
}

/// Total spectral efficiency across the network.
pub fn network_sum_rate(rates: &RateMatrix) -> f64 {
    rates.c.iter().map(|row| row.iter().sum::<f64>()).sum()
}

/// Per-BS reward: own-cell sum rate plus `beta` times the neighbor
/// cells' sum rate.
pub fn reward(n: usize, rates: &RateMatrix, beta: f64, neighbors: &[usize]) -> f64 {
    rates.cell_sum(n) + beta * neighbors.iter().map(|&m| rates.cell_sum(m)).sum::<f64>()
}

/// Fixed normalization constants for observation features.
#[derive(Debug, Clone, PartialEq)]
pub struct ObsNorm {
    pub gain_mean_db: f64,
    pub gain_scale_db: f64,
    pub rate_scale: f64,
    pub db_clip: f64,
    pub p_max: f64,
}

impl ObsNorm {
    pub fn new(p_max: f64) -> ObsNorm {
        ObsNorm {
            gain_mean_db: -100.0,
            gain_scale_db: 20.0,
            rate_scale: 5.0,
            db_clip: 40.0,
            p_max,
        }
    }

    fn gain_feature(&self, gain: f64) -> f64 {
        let db = 10.0 * gain.max(1e-20).log10();
        ((db - self.gain_mean_db) / self.gain_scale_db).clamp(-self.db_clip, self.db_clip)
    }
}

/// Per-(BS, user) feature vector of fixed dimension 3 + c.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
}

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Builds one observation: [own gain, interference gains from U_n
/// (zero-padded to `pad_to`), previous power, previous rate], all
/// normalized.
#[allow(clippy::too_many_arguments)]
pub fn build_observation(
    n: usize,
    k: usize,
    g: &GainTensor,
    neighbors: &[usize],
    pad_to: usize,
    prev_power: f64,
    prev_rate: f64,
    norm: &ObsNorm,
) -> Observation {
    let mut features = Vec::with_capacity(3 + pad_to);
    features.push(norm.gain_feature(g[n][n][k]));
    for &m in neighbors.iter().take(pad_to) {
        features.push(norm.gain_feature(g[m][n][k]));
    }
    features.resize(1 + pad_to, 0.0);
    features.push(prev_power / norm.p_max);
    features.push(prev_rate / norm.rate_scale);
    Observation { features }
}

/// One environment step: next observations, per-BS rewards, the rate
/// matrix realized this slot, and the episode-end flag.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub observations: Vec<Vec<Observation>>,
    pub rewards: Vec<f64>,
    pub rates: RateMatrix,
    pub done: bool,
}

/// The multi-cell downlink environment.
///
/// An episode draws fresh user positions, shadowing, and fading; each
/// slot maps the chosen powers to rates and rewards on the current
/// channel, then advances the fading process.
#[derive(Debug, Clone)]
pub struct NetworkEnv {
    topo: Topology,
    topo_cfg: TopologyConfig,
    cfg: EnvConfig,
    state: ChannelState,
    norm: ObsNorm,
    prev_power: PowerAllocation,
    prev_rates: RateMatrix,
    t: usize,
    done: bool,
}

impl NetworkEnv {
    pub fn new(topo_cfg: &TopologyConfig, cfg: &EnvConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        cfg.validate()?;
        let topo = Topology::build(topo_cfg, rng)?;
        let rho = jakes_rho(topo_cfg.doppler_hz, topo_cfg.slot_duration_s)?;
        let alpha = large_scale_gains(&topo, topo_cfg.shadowing_sigma_db, topo_cfg.d_min_m, rng);
        let h = init_fading(&topo, rng);
        let norm = ObsNorm::new(cfg.p_max_watts());
        let prev_power = PowerAllocation::zeros(&topo.users_per_cell);
        let prev_rates = RateMatrix::zeros(&topo.users_per_cell);
        Ok(NetworkEnv {
            topo,
            topo_cfg: topo_cfg.clone(),
            cfg: cfg.clone(),
            state: ChannelState { h, alpha, rho },
            norm,
            prev_power,
            prev_rates,
            t: 0,
            done: false,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn n_cells(&self) -> usize {
        self.topo.n_cells
    }

    pub fn obs_dim(&self) -> usize {
        3 + self.topo_cfg.neighbor_count
    }

    pub fn n_actions(&self) -> usize {
        self.cfg.n_power_levels
    }

    pub fn gains(&self) -> GainTensor {
        self.state.gains()
    }

    /// Starts a new episode: fresh user drop, shadowing, and fading.
    /// Returns the initial observations (previous power and rate zero).
    pub fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<Vec<Observation>> {
        self.topo.resample_users(self.topo_cfg.d_min_m, rng);
        self.state.alpha = large_scale_gains(
            &self.topo,
            self.topo_cfg.shadowing_sigma_db,
            self.topo_cfg.d_min_m,
            rng,
        );
        self.state.h = init_fading(&self.topo, rng);
        self.prev_power = PowerAllocation::zeros(&self.topo.users_per_cell);
        self.prev_rates = RateMatrix::zeros(&self.topo.users_per_cell);
        self.t = 0;
        self.done = false;
        self.observe()
    }

    /// Observations for the current channel and last step's powers/rates.
    pub fn observe(&self) -> Vec<Vec<Observation>> {
        let g = self.state.gains();
        self.observe_from(&g)
    }

    fn observe_from(&self, g: &GainTensor) -> Vec<Vec<Observation>> {
        let pad_to = self.topo_cfg.neighbor_count;
        (0..self.topo.n_cells)
            .map(|n| {
                (0..self.topo.users_per_cell[n])
                    .map(|k| {
                        build_observation(
                            n,
                            k,
                            g,
                            &self.topo.neighbor_sets[n],
                            pad_to,
                            self.prev_power.p[n][k],
                            self.prev_rates.c[n][k],
                            &self.norm,
                        )
                    })
                    .collect()
            })
            .collect()
    }

    /// Advances one slot using discrete action indices per (BS, user).
    pub fn step(&mut self, actions: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Result<EnvStep> {
        let p_max = self.cfg.p_max_watts();
        let m = self.cfg.n_power_levels;
        let mut power = PowerAllocation::zeros(&self.topo.users_per_cell);
        for n in 0..self.topo.n_cells {
            for k in 0..self.topo.users_per_cell[n] {
                power.p[n][k] = action_to_power(actions[n][k], m, p_max)?;
            }
        }
        self.step_powers(&power, rng)
    }

    /// Advances one slot with explicit powers (used by the continuous
    /// baseline allocators).
    pub fn step_powers(
        &mut self,
        power: &PowerAllocation,
        rng: &mut ChaCha8Rng,
    ) -> Result<EnvStep> {
        if self.done {
            return Err(Error::usage(
                "NetworkEnv::step",
                "episode is done; call reset",
            ));
        }
        let noise = self.cfg.noise_watts();
        let g = self.state.gains();
        let rate_matrix = rates(&g, power, noise);
        let rewards: Vec<f64> = (0..self.topo.n_cells)
            .map(|n| reward(n, &rate_matrix, self.cfg.beta, &self.topo.neighbor_sets[n]))
            .collect();

        self.state.step(rng);
        self.t += 1;
        self.done = self.t >= self.cfg.horizon;
        self.prev_power = power.clone();
        self.prev_rates = rate_matrix.clone();

        let next_g = self.state.gains();
        let observations = self.observe_from(&next_g);
        Ok(EnvStep {
            observations,
            rewards,
            rates: rate_matrix,
            done: self.done,
        })
    }
}
