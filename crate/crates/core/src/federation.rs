//! Model aggregation and the three training orchestrators: federated
//! (periodic weight averaging through a simulated server), distributed
//! (no sharing), and centralized (one shared model trained on pooled
//! experience).

use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Algorithm, ExplorationSchedule};
use crate::error::{Error, Result};
use crate::netsim::NetworkEnv;
use crate::nn::WeightVector;

/// Training topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Federated,
    Distributed,
    Centralized,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Federated => "federated",
            Mode::Distributed => "distributed",
            Mode::Centralized => "centralized",
        }
    }
}

/// Aggregation plan: mode, period, and per-client averaging weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationPlan {
    pub mode: Mode,
    /// Episodes between aggregation rounds (federated only).
    pub aggregation_period: usize,
    /// w_i = k_i / sum_j k_j, from the per-cell user counts.
    pub client_weights: Vec<f64>,
}

impl AggregationPlan {
    pub fn new(mode: Mode, aggregation_period: usize, users_per_cell: &[usize]) -> Result<Self> {
        if mode == Mode::Federated && aggregation_period == 0 {
            return Err(Error::config(
                "agg_period",
                "must be >= 1 for federated mode",
            ));
        }
        let total: usize = users_per_cell.iter().sum();
        if total == 0 {
            return Err(Error::usage("AggregationPlan::new", "no users in network"));
        }
        let client_weights = users_per_cell
            .iter()
            .map(|&k| k as f64 / total as f64)
            .collect();
        Ok(AggregationPlan {
            mode,
            aggregation_period,
            client_weights,
        })
    }
}

/// Normalized server round-trips per BS per episode.
pub fn comm_overhead(mode: Mode, aggregation_period: usize) -> f64 {
    match mode {
        Mode::Federated => 1.0 / aggregation_period as f64,
        Mode::Distributed => 0.0,
        Mode::Centralized => 1.0,
    }
}

/// Entrywise weighted average of client weight vectors.
pub fn fedavg(clients: &[WeightVector], weights: &[f64]) -> Result<WeightVector> {
    if clients.is_empty() {
        return Err(Error::usage("fedavg", "no clients"));
    }
    if clients.len() != weights.len() {
        return Err(Error::usage(
            "fedavg",
            format!("{} clients but {} weights", clients.len(), weights.len()),
        ));
    }
    let layout = clients[0].layout().clone();
    for c in clients {
        if c.layout() != &layout {
            return Err(Error::LayoutMismatch {
                expected: layout.hash(),
                got: c.layout().hash(),
            });
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::domain(
            "fedavg",
            format!("client weights must be nonnegative and sum to 1 (got {sum})"),
        ));
    }
    let mut avg = WeightVector::zeros(layout);
    for (client, &w) in clients.iter().zip(weights) {
        for (acc, v) in avg.values_mut().iter_mut().zip(client.values()) {
            *acc += w * v;
        }
    }
    Ok(avg)
}

/// Per-run metric series and communication counters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetrics {
    /// Per-episode mean per-user rate, bit/s/Hz.
    pub mean_rate_per_user: Vec<f64>,
    /// Per-episode, per-agent loss (value learner) or return objective
    /// (policy learner).
    pub losses: Vec<Vec<f64>>,
    /// Per-episode exploration rate (zero for the policy learner).
    pub epsilons: Vec<f64>,
    pub server_messages: u64,
    pub agent_episodes: u64,
}

impl RunMetrics {
    pub fn mean_loss(&self, episode: usize) -> f64 {
        let row = &self.losses[episode];
        row.iter().sum::<f64>() / row.len() as f64
    }

    /// Mean of the trailing `window` episodes of the rate series.
    pub fn final_window_mean(&self, window: usize) -> f64 {
        let n = self.mean_rate_per_user.len();
        let take = window.min(n).max(1);
        self.mean_rate_per_user[n - take..].iter().sum::<f64>() / take as f64
    }
}

/// Optional side effects of a training run.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// When set, the global model after every aggregation round is
    /// written here as `round_NNNNN.bin` (layout hash + LE f64 values).
    pub checkpoint_dir: Option<PathBuf>,
}

/// The simulated server: holds averaging weights and moves serialized
/// weight vectors so a networked transport can replace it unchanged.
struct Server<'a> {
    plan: &'a AggregationPlan,
}

impl Server<'_> {
    /// Full aggregation barrier: all clients upload, the server averages,
    /// all clients download. Returns the global weights.
    fn aggregate(&self, agents: &mut [Agent]) -> Result<WeightVector> {
        let layout = agents[0].weights().layout().clone();
        let uploads: Vec<WeightVector> = agents
            .iter()
            .map(|a| WeightVector::from_bytes(&a.weights().to_bytes(), &layout))
            .collect::<Result<_>>()?;
        let global = fedavg(&uploads, &self.plan.client_weights)?;
        let broadcast = global.to_bytes();
        for agent in agents.iter_mut() {
            agent.set_weights(&WeightVector::from_bytes(&broadcast, &layout)?)?;
        }
        Ok(global)
    }
}

fn write_checkpoint(dir: &Path, round: usize, global: &WeightVector) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("round_{round:05}.bin"));
    fs::write(&path, global.to_bytes()).map_err(|e| Error::io(&path, e))
}

/// Runs one episode of interaction, recording experience into the
/// per-cell agents (distributed/federated) or the single shared agent
/// (centralized).
fn run_episode(
    env: &mut NetworkEnv,
    agents: &mut [Agent],
    eps: f64,
    env_rng: &mut ChaCha8Rng,
    agent_rngs: &mut [ChaCha8Rng],
) -> Result<f64> {
    let n_cells = env.n_cells();
    let users_per_cell: Vec<usize> = env.topology().users_per_cell.clone();
    let total_users = env.topology().total_users();
    let horizon = env.config().horizon;
    let shared = agents.len() == 1 && n_cells > 1;

    let mut obs = env.reset(env_rng);
    let mut rate_acc = 0.0;
    for _ in 0..horizon {
        let mut actions: Vec<Vec<usize>> = Vec::with_capacity(n_cells);
        for n in 0..n_cells {
            let agent = if shared { &agents[0] } else { &agents[n] };
            let mut row = Vec::with_capacity(users_per_cell[n]);
            for k in 0..users_per_cell[n] {
                row.push(agent.act(&obs[n][k], eps, &mut agent_rngs[n])?);
            }
            actions.push(row);
        }
        let step = env.step(&actions, env_rng)?;
        for n in 0..n_cells {
            for k in 0..users_per_cell[n] {
                let link = if shared {
                    // Pool links from every cell into the shared agent.
                    users_per_cell[..n].iter().sum::<usize>() + k
                } else {
                    k
                };
                let agent = if shared {
                    &mut agents[0]
                } else {
                    &mut agents[n]
                };
                agent.record(
                    link,
                    &obs[n][k],
                    actions[n][k],
                    step.rewards[n],
                    &step.observations[n][k],
                    step.done,
                );
            }
        }
        rate_acc += step.rates.c.iter().flatten().sum::<f64>() / total_users as f64;
        obs = step.observations;
    }
    Ok(rate_acc / horizon as f64)
}

/// Shared training loop. All three modes execute the same episode code
/// path; they differ only in how updates and aggregation are applied, so
/// a federated run that never aggregates is bitwise identical to the
/// distributed run under the same seeds.
#[allow(clippy::too_many_arguments)]
pub fn run(
    env: &mut NetworkEnv,
    agents: &mut [Agent],
    plan: &AggregationPlan,
    schedule: &ExplorationSchedule,
    n_episodes: usize,
    env_rng: &mut ChaCha8Rng,
    agent_rngs: &mut [ChaCha8Rng],
    opts: &RunOptions,
) -> Result<RunMetrics> {
    let n_cells = env.n_cells();
    match plan.mode {
        Mode::Centralized => {
            if agents.len() != 1 {
                return Err(Error::usage(
                    "run",
                    "centralized mode takes one shared agent",
                ));
            }
        }
        _ => {
            if agents.len() != n_cells {
                return Err(Error::usage(
                    "run",
                    format!("{} agents for {} cells", agents.len(), n_cells),
                ));
            }
        }
    }

    let server = Server { plan };
    let mut metrics = RunMetrics::default();
    let mut round = 0usize;
    for episode in 0..n_episodes {
        let eps = match agents[0].algo {
            Algorithm::Dqn => schedule.epsilon(episode),
            Algorithm::Pg => 0.0,
        };
        let mean_rate = run_episode(env, agents, eps, env_rng, agent_rngs)?;
        let losses: Vec<f64> = agents
            .iter_mut()
            .map(|a| a.finish_episode())
            .collect::<Result<_>>()?;

        metrics.mean_rate_per_user.push(mean_rate);
        metrics.losses.push(losses);
        metrics.epsilons.push(eps);
        metrics.agent_episodes += agents.len() as u64;

        match plan.mode {
            Mode::Federated => {
                if (episode + 1) % plan.aggregation_period == 0 {
                    let global = server.aggregate(agents)?;
                    // One upload and one download per client.
                    metrics.server_messages += 2 * n_cells as u64;
                    round += 1;
                    if let Some(dir) = &opts.checkpoint_dir {
                        write_checkpoint(dir, round, &global)?;
                    }
                }
            }
            Mode::Centralized => {
                // Every BS ships its transitions to the server each
                // episode; the shared model update happened above.
                metrics.server_messages += n_cells as u64;
            }
            Mode::Distributed => {}
        }
    }
    Ok(metrics)
}
