//! Experiment runner: seeds every stream from one master seed, trains
//! (or skips training for the non-learning allocators), evaluates with
//! exploration off, and emits the learning curve and summary artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::agents::{Agent, Algorithm, ExplorationSchedule};
use crate::baselines::{max_power, wmmse, WMMSE_MAX_ITER, WMMSE_TOL};
use crate::config::{AlgorithmChoice, ExperimentConfig};
use crate::error::{Error, Result};
use crate::federation::{comm_overhead, run, AggregationPlan, Mode, RunMetrics, RunOptions};
use crate::netsim::{network_sum_rate, NetworkEnv, PowerAllocation};
use crate::nn::Mlp;
use crate::rng::{stream_rng, Stream};

/// Non-overlapping block means; a trailing partial block is averaged
/// over its actual length.
pub fn smooth(series: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 {
        return series.to_vec();
    }
    series
        .chunks(window)
        .map(|block| block.iter().sum::<f64>() / block.len() as f64)
        .collect()
}

/// One row of the learning-curve CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub episode: usize,
    pub mean_rate_per_user: f64,
    pub loss: f64,
    pub epsilon: f64,
}

/// Renders the curve in the stable CSV schema.
pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("episode,mean_rate_per_user,loss,epsilon\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.episode, row.mean_rate_per_user, row.loss, row.epsilon
        ));
    }
    out
}

/// The Table-style one-line summary of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub algorithm: String,
    pub mean_rate_per_user: f64,
    pub std_rate_per_user: f64,
    pub mean_decision_latency_s: f64,
    pub communication_overhead: f64,
}

/// Power allocation realized on one evaluated slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationRecord {
    pub episode: usize,
    pub slot: usize,
    pub powers_w: Vec<Vec<f64>>,
    pub sum_rate: f64,
}

/// Evaluation statistics over fresh seeded episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    /// Mean per-user rate of each evaluation episode.
    pub per_episode_rate: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub mean_decision_latency_s: f64,
    /// Per-slot allocations; collected for the non-learning allocators.
    pub allocations: Vec<AllocationRecord>,
}

/// Everything produced by one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Training series; absent for the non-learning allocators.
    pub metrics: Option<RunMetrics>,
    pub eval: EvalStats,
    pub summary: SummaryRecord,
    pub curve_rows: Vec<CurveRow>,
}

enum EvalPolicy<'a> {
    /// Greedy per-cell networks; a single network is shared by all cells.
    Greedy(&'a [Mlp]),
    MaxPower,
    Wmmse,
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Runs `episodes` fresh episodes with exploration off and records the
/// realized rates (and optionally decision latency and allocations).
fn evaluate(
    cfg: &ExperimentConfig,
    policy: &EvalPolicy,
    episodes: usize,
    rng: &mut ChaCha8Rng,
    collect_allocations: bool,
) -> Result<EvalStats> {
    let mut env = NetworkEnv::new(&cfg.topology, &cfg.env, rng)?;
    let n_cells = env.n_cells();
    let users_per_cell = env.topology().users_per_cell.clone();
    let total_users = env.topology().total_users();
    let horizon = cfg.env.horizon;
    let p_max = cfg.env.p_max_watts();
    let noise = cfg.env.noise_watts();

    let mut per_episode_rate = Vec::with_capacity(episodes);
    let mut allocations = Vec::new();
    let mut latency_acc = 0.0f64;
    let mut latency_count = 0u64;

    for episode in 0..episodes {
        let mut obs = env.reset(rng);
        let mut rate_acc = 0.0;
        for slot in 0..horizon {
            let step = match policy {
                EvalPolicy::Greedy(nets) => {
                    let mut actions: Vec<Vec<usize>> = Vec::with_capacity(n_cells);
                    for n in 0..n_cells {
                        let net = if nets.len() == 1 { &nets[0] } else { &nets[n] };
                        let mut row = Vec::with_capacity(users_per_cell[n]);
                        for k in 0..users_per_cell[n] {
                            if cfg.record_latency {
                                let t0 = Instant::now();
                                let logits = net.forward(obs[n][k].as_slice())?;
                                latency_acc += t0.elapsed().as_secs_f64();
                                latency_count += 1;
                                row.push(crate::agents::argmax(&logits));
                            } else {
                                let logits = net.forward(obs[n][k].as_slice())?;
                                row.push(crate::agents::argmax(&logits));
                            }
                        }
                        actions.push(row);
                    }
                    env.step(&actions, rng)?
                }
                EvalPolicy::MaxPower => {
                    let t0 = cfg.record_latency.then(Instant::now);
                    let powers = max_power(&users_per_cell, p_max);
                    if let Some(t0) = t0 {
                        latency_acc += t0.elapsed().as_secs_f64();
                        latency_count += 1;
                    }
                    record_allocation(
                        collect_allocations,
                        &mut allocations,
                        episode,
                        slot,
                        &powers,
                        &env,
                        noise,
                    );
                    env.step_powers(&powers, rng)?
                }
                EvalPolicy::Wmmse => {
                    let gains = env.gains();
                    let t0 = cfg.record_latency.then(Instant::now);
                    let outcome = wmmse(&gains, p_max, noise, WMMSE_TOL, WMMSE_MAX_ITER)?;
                    if let Some(t0) = t0 {
                        latency_acc += t0.elapsed().as_secs_f64();
                        latency_count += 1;
                    }
                    record_allocation(
                        collect_allocations,
                        &mut allocations,
                        episode,
                        slot,
                        &outcome.powers,
                        &env,
                        noise,
                    );
                    env.step_powers(&outcome.powers, rng)?
                }
            };
            rate_acc += network_sum_rate(&step.rates) / total_users as f64;
            obs = step.observations;
        }
        per_episode_rate.push(rate_acc / horizon as f64);
    }

    let mean = per_episode_rate.iter().sum::<f64>() / per_episode_rate.len() as f64;
    let std = sample_std(&per_episode_rate, mean);
    let mean_decision_latency_s = if latency_count > 0 {
        latency_acc / latency_count as f64
    } else {
        0.0
    };
    Ok(EvalStats {
        per_episode_rate,
        mean,
        std,
        mean_decision_latency_s,
        allocations,
    })
}

fn record_allocation(
    enabled: bool,
    out: &mut Vec<AllocationRecord>,
    episode: usize,
    slot: usize,
    powers: &PowerAllocation,
    env: &NetworkEnv,
    noise: f64,
) {
    if !enabled {
        return;
    }
    let rate = network_sum_rate(&crate::netsim::rates(&env.gains(), powers, noise));
    out.push(AllocationRecord {
        episode,
        slot,
        powers_w: powers.p.clone(),
        sum_rate: rate,
    });
}

/// Trained per-cell networks (one shared network for centralized mode).
pub struct TrainArtifacts {
    pub metrics: RunMetrics,
    pub nets: Vec<Mlp>,
}

/// Trains the configured learner and returns the metrics plus final
/// networks.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainArtifacts> {
    let algo = match cfg.algorithm {
        AlgorithmChoice::Dqn => Algorithm::Dqn,
        AlgorithmChoice::Pg => Algorithm::Pg,
        other => {
            return Err(Error::usage(
                "train",
                format!("{other} is not a learned algorithm"),
            ))
        }
    };
    let mut env_rng = stream_rng(cfg.seed, Stream::TrainEnv);
    let mut env = NetworkEnv::new(&cfg.topology, &cfg.env, &mut env_rng)?;
    let n_cells = env.n_cells();
    let users_per_cell = env.topology().users_per_cell.clone();

    // One shared seeded initialization broadcast to every agent so the
    // modes' curves are comparable.
    let dims = [env.obs_dim(), 128, 64, cfg.env.n_power_levels];
    let net0 = Mlp::init(&dims, &mut stream_rng(cfg.seed, Stream::Init));

    let n_agents = if cfg.mode == Mode::Centralized {
        1
    } else {
        n_cells
    };
    let mut agents: Vec<Agent> = (0..n_agents)
        .map(|i| {
            let n_links = if cfg.mode == Mode::Centralized {
                env.topology().total_users()
            } else {
                users_per_cell[i]
            };
            Agent::new(
                algo,
                net0.clone(),
                cfg.learning_rate,
                cfg.agent.clone(),
                n_links,
            )
        })
        .collect();

    let plan = AggregationPlan::new(cfg.mode, cfg.agg_period.max(1), &users_per_cell)?;
    let schedule = ExplorationSchedule::new(&cfg.agent, cfg.n_episodes);
    let mut agent_rngs: Vec<ChaCha8Rng> = (0..n_cells)
        .map(|i| stream_rng(cfg.seed, Stream::Agent(i)))
        .collect();
    let opts = RunOptions {
        checkpoint_dir: cfg.checkpoint_dir.clone(),
    };

    let metrics = run(
        &mut env,
        &mut agents,
        &plan,
        &schedule,
        cfg.n_episodes,
        &mut env_rng,
        &mut agent_rngs,
        &opts,
    )?;
    let nets = agents.iter().map(|a| a.network().clone()).collect();
    Ok(TrainArtifacts { metrics, nets })
}

/// Runs one full experiment: train (if a learner), evaluate, summarize.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut eval_rng = stream_rng(cfg.seed, Stream::EvalEnv);

    match cfg.algorithm {
        AlgorithmChoice::Dqn | AlgorithmChoice::Pg => {
            let artifacts = train(cfg)?;
            let eval = evaluate(
                cfg,
                &EvalPolicy::Greedy(&artifacts.nets),
                cfg.eval_episodes,
                &mut eval_rng,
                false,
            )?;
            let metrics = artifacts.metrics;
            let curve_rows: Vec<CurveRow> = (0..cfg.n_episodes)
                .map(|e| CurveRow {
                    episode: e + 1,
                    mean_rate_per_user: metrics.mean_rate_per_user[e],
                    loss: metrics.mean_loss(e),
                    epsilon: metrics.epsilons[e],
                })
                .collect();
            let summary = SummaryRecord {
                algorithm: format!("{}-{}", cfg.algorithm, cfg.mode.as_str()),
                mean_rate_per_user: eval.mean,
                std_rate_per_user: eval.std,
                mean_decision_latency_s: eval.mean_decision_latency_s,
                communication_overhead: comm_overhead(cfg.mode, cfg.agg_period.max(1)),
            };
            Ok(ExperimentOutput {
                metrics: Some(metrics),
                eval,
                summary,
                curve_rows,
            })
        }
        AlgorithmChoice::Wmmse | AlgorithmChoice::MaxPower => {
            let policy = if cfg.algorithm == AlgorithmChoice::Wmmse {
                EvalPolicy::Wmmse
            } else {
                EvalPolicy::MaxPower
            };
            let eval = evaluate(cfg, &policy, cfg.eval_episodes, &mut eval_rng, true)?;
            // No training: the curve is the flat evaluation mean, one row
            // per configured episode, so baselines plot as reference
            // lines against learning curves.
            let curve_rows: Vec<CurveRow> = (1..=cfg.n_episodes)
                .map(|episode| CurveRow {
                    episode,
                    mean_rate_per_user: eval.mean,
                    loss: 0.0,
                    epsilon: 0.0,
                })
                .collect();
            let overhead = match cfg.algorithm {
                // Full cross-link CSI at a central solver each slot.
                AlgorithmChoice::Wmmse => 1.0,
                _ => 0.0,
            };
            let summary = SummaryRecord {
                algorithm: cfg.algorithm.as_str().to_string(),
                mean_rate_per_user: eval.mean,
                std_rate_per_user: eval.std,
                mean_decision_latency_s: eval.mean_decision_latency_s,
                communication_overhead: overhead,
            };
            Ok(ExperimentOutput {
                metrics: None,
                eval,
                summary,
                curve_rows,
            })
        }
    }
}

/// Writes curve.csv, summary.json, and (for the non-learning allocators)
/// allocations.json into `dir`. Returns the written paths.
pub fn write_experiment(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let curve_path = dir.join("curve.csv");
    fs::write(&curve_path, curve_csv(&output.curve_rows)).map_err(|e| Error::io(&curve_path, e))?;
    written.push(curve_path);

    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(|e| Error::io(&summary_path, e))?;
    written.push(summary_path);

    if !output.eval.allocations.is_empty() {
        let alloc_path = dir.join("allocations.json");
        let json =
            serde_json::to_string_pretty(&output.eval.allocations).expect("records serialize");
        fs::write(&alloc_path, json + "\n").map_err(|e| Error::io(&alloc_path, e))?;
        written.push(alloc_path);
    }
    Ok(written)
}

/// One labeled series of the mode comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSeries {
    pub label: String,
    pub mode: String,
    pub aggregation_period: Option<usize>,
    pub communication_overhead: f64,
    pub final_window_episodes: usize,
    pub final_mean_rate_per_user: f64,
    pub smoothed_rate_per_user: Vec<f64>,
}

/// Aligned learning curves for distributed, centralized, and federated
/// training at several aggregation periods, under identical seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub algorithm: String,
    pub n_episodes: usize,
    pub smoothing_window: usize,
    pub series: Vec<ComparisonSeries>,
}

/// Runs {distributed, centralized, federated@{10,100,1000}} with
/// identical seeds and returns the aligned curves plus final-window
/// means.
pub fn compare_modes(base: &ExperimentConfig) -> Result<Comparison> {
    base.validate()?;
    if !base.algorithm.is_learned() {
        return Err(Error::config(
            "algorithm",
            "mode comparison requires a learned algorithm (dqn|pg)",
        ));
    }
    let cells: [(&str, Mode, usize); 5] = [
        ("distributed", Mode::Distributed, 1),
        ("centralized", Mode::Centralized, 1),
        ("federated_ag10", Mode::Federated, 10),
        ("federated_ag100", Mode::Federated, 100),
        ("federated_ag1000", Mode::Federated, 1000),
    ];
    let final_window = base.n_episodes.div_ceil(4).clamp(1, 500);
    let mut series = Vec::with_capacity(cells.len());
    for (label, mode, agg) in cells {
        let mut cfg = base.clone();
        cfg.mode = mode;
        cfg.agg_period = agg;
        cfg.checkpoint_dir = None;
        let artifacts = train(&cfg)?;
        series.push(ComparisonSeries {
            label: label.to_string(),
            mode: mode.as_str().to_string(),
            aggregation_period: (mode == Mode::Federated).then_some(agg),
            communication_overhead: comm_overhead(mode, agg),
            final_window_episodes: final_window,
            final_mean_rate_per_user: artifacts.metrics.final_window_mean(final_window),
            smoothed_rate_per_user: smooth(
                &artifacts.metrics.mean_rate_per_user,
                base.smoothing_window,
            ),
        });
    }
    Ok(Comparison {
        algorithm: base.algorithm.as_str().to_string(),
        n_episodes: base.n_episodes,
        smoothing_window: base.smoothing_window,
        series,
    })
}

/// Writes comparison.json into `dir`.
pub fn write_comparison(cmp: &Comparison, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("comparison.json");
    let json = serde_json::to_string_pretty(cmp).expect("comparison serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
