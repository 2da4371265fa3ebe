//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (visible with `cargo test -- --nocapture`).

#![allow(clippy::needless_range_loop)]

use fedpower_core::agents::{Agent, Algorithm, ExplorationSchedule};
use fedpower_core::baselines::{brute_force_power, max_power, wmmse, WMMSE_MAX_ITER, WMMSE_TOL};
use fedpower_core::channel::{jakes_rho, GainTensor, TopologyConfig};
use fedpower_core::config::{AlgorithmChoice, ExperimentConfig};
use fedpower_core::experiment::{compare_modes, curve_csv, run_experiment, smooth, train};
use fedpower_core::federation::{comm_overhead, fedavg, run, AggregationPlan, Mode, RunOptions};
use fedpower_core::netsim::{network_sum_rate, rates, EnvConfig, NetworkEnv, PowerAllocation};
use fedpower_core::nn::{grad_log_policy, grad_td_loss, log_softmax, Layout, Mlp, WeightVector};
use fedpower_core::rng::{stream_rng, Stream};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn report(criterion: usize, pass: bool, detail: &str) {
    println!(
        "[criterion {criterion}] {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

// --- Criterion 1: Jakes correlation against the independent series oracle.

fn j0_series_10(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut fact = 1.0_f64;
    for m in 0..10i32 {
        if m > 0 {
            fact *= f64::from(m);
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (x / 2.0).powi(2 * m) / (fact * fact);
    }
    sum
}

#[test]
fn criterion_1_jakes_correlation() {
    let oracle = j0_series_10(2.0 * std::f64::consts::PI * 10.0 * 0.02);
    let got = jakes_rho(10.0, 0.02).unwrap();
    let vs_frozen = (got - 0.64251).abs();
    let vs_oracle = (got - oracle).abs();
    report(
        1,
        vs_frozen <= 1e-4 && vs_oracle <= 1e-6,
        &format!("jakes_rho(10 Hz, 20 ms) = {got:.6}, |err vs 0.64251| = {vs_frozen:.2e}"),
    );
}

// --- Criterion 2: analytic gradients against central finite differences.

fn max_rel_error(net: &Mlp, analytic: &[f64], eval: &dyn Fn(&Mlp) -> f64) -> f64 {
    let h = 1e-5;
    let flat = net.flatten();
    let mut worst = 0.0f64;
    for i in 0..flat.values().len() {
        let mut plus = flat.clone();
        plus.values_mut()[i] += h;
        let mut minus = flat.clone();
        minus.values_mut()[i] -= h;
        let f_plus = eval(&Mlp::restore(&plus).unwrap());
        let f_minus = eval(&Mlp::restore(&minus).unwrap());
        let fd = (f_plus - f_minus) / (2.0 * h);
        // A second, half-step quotient: if the two disagree strongly the
        // perturbation straddles a rectifier kink and the difference
        // quotient is not a derivative estimate there.
        let mut plus2 = flat.clone();
        plus2.values_mut()[i] += h / 2.0;
        let mut minus2 = flat.clone();
        minus2.values_mut()[i] -= h / 2.0;
        let fd2 =
            (eval(&Mlp::restore(&plus2).unwrap()) - eval(&Mlp::restore(&minus2).unwrap())) / h;
        let scale = fd.abs().max(fd2.abs()).max(1e-6);
        if (fd - fd2).abs() / scale > 1e-3 {
            continue;
        }
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic[i] - fd).abs() / denom);
    }
    worst
}

#[test]
fn criterion_2_gradient_correctness() {
    let mut rng = stream_rng(2024, Stream::Init);
    let dims = [6, 10, 8, 5];
    let mut worst_td = 0.0f64;
    let mut worst_pg = 0.0f64;
    for trial in 0..100 {
        let net = Mlp::init(&dims, &mut rng);
        let input: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = trial % 5;
        let target: f64 = rng.random_range(-2.0..2.0);

        let (grad, _) = grad_td_loss(&net, &input, action, target).unwrap();
        let eval = |m: &Mlp| {
            let q = m.forward(&input).unwrap()[action];
            (target - q) * (target - q)
        };
        worst_td = worst_td.max(max_rel_error(&net, grad.values(), &eval));

        let (grad, _) = grad_log_policy(&net, &input, action).unwrap();
        let eval = |m: &Mlp| log_softmax(&m.forward(&input).unwrap())[action];
        worst_pg = worst_pg.max(max_rel_error(&net, grad.values(), &eval));
    }
    report(
        2,
        worst_td < 1e-4 && worst_pg < 1e-4,
        &format!("max rel err: td {worst_td:.2e}, log-policy {worst_pg:.2e} (bound 1e-4)"),
    );
}

// --- Criterion 3: FedAvg exactness and the Ag = infinity degeneracy.

fn desk_pair(mode: Mode, agg: usize, seed: u64, n_episodes: usize) -> (Vec<f64>, Vec<u64>) {
    let topo_cfg = TopologyConfig {
        grid_side: 2,
        users_per_cell: 1,
        ..Default::default()
    };
    let env_cfg = EnvConfig {
        horizon: 5,
        ..Default::default()
    };
    let mut env_rng = stream_rng(seed, Stream::TrainEnv);
    let mut env = NetworkEnv::new(&topo_cfg, &env_cfg, &mut env_rng).unwrap();
    let dims = [env.obs_dim(), 32, 16, env.n_actions()];
    let net0 = Mlp::init(&dims, &mut stream_rng(seed, Stream::Init));
    let mut agents: Vec<Agent> = (0..4)
        .map(|_| Agent::new(Algorithm::Dqn, net0.clone(), 1e-3, Default::default(), 1))
        .collect();
    let plan = AggregationPlan::new(mode, agg, &env.topology().users_per_cell).unwrap();
    let schedule = ExplorationSchedule::new(&Default::default(), n_episodes);
    let mut agent_rngs: Vec<ChaCha8Rng> =
        (0..4).map(|i| stream_rng(seed, Stream::Agent(i))).collect();
    let metrics = run(
        &mut env,
        &mut agents,
        &plan,
        &schedule,
        n_episodes,
        &mut env_rng,
        &mut agent_rngs,
        &RunOptions::default(),
    )
    .unwrap();
    let weight_bits: Vec<u64> = agents
        .iter()
        .flat_map(|a| {
            a.weights()
                .values()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        })
        .collect();
    (metrics.mean_rate_per_user, weight_bits)
}

#[test]
fn criterion_3_fedavg_exactness_and_degeneracy() {
    // Exact weighted-average arithmetic.
    let layout = Layout::new(&[1, 2]);
    let mk = |a: f64, b: f64| WeightVector::new(layout.clone(), vec![a, b, 0.0, 0.0]).unwrap();
    let avg = fedavg(&[mk(1.0, 3.0), mk(3.0, 5.0)], &[0.75, 0.25]).unwrap();
    let exact = (avg.values()[0] - 1.5).abs() <= 1e-12 && (avg.values()[1] - 3.5).abs() <= 1e-12;

    // Ag beyond the run length never aggregates and must equal the
    // distributed run bit for bit.
    let n_episodes = 40;
    let (fed_rates, fed_bits) = desk_pair(Mode::Federated, n_episodes + 1, 77, n_episodes);
    let (dist_rates, dist_bits) = desk_pair(Mode::Distributed, 1, 77, n_episodes);
    let rates_equal = fed_rates
        .iter()
        .zip(&dist_rates)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let weights_equal = fed_bits == dist_bits;

    report(
        3,
        exact && rates_equal && weights_equal,
        &format!(
            "weighted mean exact: {exact}; Ag=inf run bitwise equals distributed: \
             rates {rates_equal}, weights {weights_equal}"
        ),
    );
}

// --- Criterion 4: SINR/rate equivalence with a naive triple-loop oracle.

fn naive_sinr(g: &GainTensor, p: &[Vec<f64>], noise: f64, n: usize, k: usize) -> f64 {
    let mut intra = 0.0;
    for k2 in 0..p[n].len() {
        if k2 != k {
            intra += g[n][n][k] * p[n][k2];
        }
    }
    let mut inter = 0.0;
    for n2 in 0..g.len() {
        if n2 != n {
            let mut tx = 0.0;
            for j in 0..p[n2].len() {
                tx += p[n2][j];
            }
            inter += g[n2][n][k] * tx;
        }
    }
    p[n][k] * g[n][n][k] / (intra + inter + noise)
}

#[test]
fn criterion_4_sinr_rate_oracle_equivalence() {
    let mut rng = stream_rng(4004, Stream::TrainEnv);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..1000 {
        let n_cells = rng.random_range(1..=3usize);
        let users: Vec<usize> = (0..n_cells).map(|_| rng.random_range(1..=2usize)).collect();
        let g: GainTensor = (0..n_cells)
            .map(|_| {
                users
                    .iter()
                    .map(|&k| {
                        (0..k)
                            .map(|_| 10f64.powf(rng.random_range(-12.0..0.0)))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let p = PowerAllocation {
            p: users
                .iter()
                .map(|&k| (0..k).map(|_| rng.random_range(0.0..6.31)).collect())
                .collect(),
        };
        let noise = 10f64.powf(rng.random_range(-15.0..-2.0));
        let rate_matrix = rates(&g, &p, noise);
        for n in 0..n_cells {
            for k in 0..users[n] {
                let fast = fedpower_core::netsim::sinr(&g, &p, noise, n, k);
                let slow = naive_sinr(&g, &p.p, noise, n, k);
                let rate_slow = (1.0 + slow).log2();
                let sinr_err = (fast - slow).abs() / slow.abs().max(1e-300);
                let rate_err =
                    (rate_matrix.c[n][k] - rate_slow).abs() / rate_slow.abs().max(1e-300);
                worst = worst.max(sinr_err).max(rate_err);
                checked += 1;
            }
        }
    }
    report(
        4,
        worst < 1e-12,
        &format!("{checked} link evaluations over 1000 instances, worst rel err {worst:.2e}"),
    );
}

// --- Criterion 5: WMMSE trace monotonicity and near-optimality.

fn random_dense_instance(rng: &mut ChaCha8Rng, max_links: usize) -> (GainTensor, f64) {
    let l = rng.random_range(2..=max_links);
    let g: GainTensor = (0..l)
        .map(|tx| {
            (0..l)
                .map(|cell| {
                    let gain = if tx == cell {
                        rng.random_range(0.5..2.0)
                    } else {
                        rng.random_range(0.2..1.5)
                    };
                    vec![gain]
                })
                .collect()
        })
        .collect();
    let noise = rng.random_range(0.05..0.2);
    (g, noise)
}

#[test]
fn criterion_5_wmmse_properties() {
    let mut rng = stream_rng(5005, Stream::TrainEnv);

    // Monotone sum-rate trace on 100 random instances.
    let mut monotone = true;
    for _ in 0..100 {
        let (g, noise) = random_dense_instance(&mut rng, 4);
        let out = wmmse(&g, 1.0, noise, WMMSE_TOL, WMMSE_MAX_ITER).unwrap();
        monotone &= out.sum_rate_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    }

    // Near-optimality and Max Power dominance on 200 dense instances.
    let trials = 200;
    let mut near_oracle = 0;
    let mut beats_max_power = 0;
    for _ in 0..trials {
        let (g, noise) = random_dense_instance(&mut rng, 3);
        let l = g.len();
        let out = wmmse(&g, 1.0, noise, WMMSE_TOL, WMMSE_MAX_ITER).unwrap();
        let wmmse_rate = network_sum_rate(&rates(&g, &out.powers, noise));
        let grid = if l == 2 { 101 } else { 41 };
        let (_, oracle) = brute_force_power(&g, noise, 1.0, grid).unwrap();
        let mp_rate = network_sum_rate(&rates(&g, &max_power(&vec![1; l], 1.0), noise));
        if wmmse_rate >= oracle - 0.05 {
            near_oracle += 1;
        }
        if wmmse_rate >= mp_rate {
            beats_max_power += 1;
        }
    }
    report(
        5,
        monotone && near_oracle * 100 >= trials * 80 && beats_max_power * 100 >= trials * 90,
        &format!(
            "trace monotone: {monotone}; within 0.05 of grid optimum: {near_oracle}/{trials} \
             (need >= 160); >= max power: {beats_max_power}/{trials} (need >= 180)"
        ),
    );
}

// --- Criterion 6: communication overhead closed form.

#[test]
fn criterion_6_communication_overhead() {
    let fed = comm_overhead(Mode::Federated, 100);
    let dist = comm_overhead(Mode::Distributed, 1);
    let cent = comm_overhead(Mode::Centralized, 1);
    report(
        6,
        fed == 0.01 && dist == 0.0 && cent == 1.0,
        &format!("federated Ag=100 -> {fed}, distributed -> {dist}, centralized -> {cent}"),
    );
}

// --- Criterion 7: desk-scale learning orderings.

struct DeskRun {
    final500: f64,
    smoothed: Vec<f64>,
}

fn desk_train(algo: AlgorithmChoice, mode: Mode, agg: usize, seed: u64) -> DeskRun {
    let cfg = ExperimentConfig {
        algorithm: algo,
        mode,
        agg_period: agg,
        seed,
        n_episodes: 2000,
        ..Default::default()
    };
    let metrics = train(&cfg).unwrap().metrics;
    DeskRun {
        final500: metrics.final_window_mean(500),
        smoothed: smooth(&metrics.mean_rate_per_user, 100),
    }
}

fn max_power_mean(seed: u64) -> f64 {
    let cfg = ExperimentConfig {
        algorithm: AlgorithmChoice::MaxPower,
        seed,
        n_episodes: 1,
        eval_episodes: 500,
        ..Default::default()
    };
    run_experiment(&cfg).unwrap().summary.mean_rate_per_user
}

/// Episode index (1-based, block granularity) at which the smoothed
/// curve first reaches `level`; None when it never does.
fn episodes_to_level(smoothed: &[f64], level: f64) -> Option<usize> {
    smoothed
        .iter()
        .position(|&v| v >= level)
        .map(|i| (i + 1) * 100)
}

#[derive(Debug, Clone, Copy)]
struct SeedVerdict {
    gain_ok: [bool; 2],
    beats_max_power: [bool; 2],
    faster_convergence: [bool; 2],
}

impl SeedVerdict {
    fn all(&self) -> bool {
        self.gain_ok.iter().all(|&b| b)
            && self.beats_max_power.iter().all(|&b| b)
            && self.faster_convergence.iter().all(|&b| b)
    }
}

fn evaluate_seed(seed: u64) -> SeedVerdict {
    let mp = max_power_mean(seed);
    let mut verdict = SeedVerdict {
        gain_ok: [false; 2],
        beats_max_power: [false; 2],
        faster_convergence: [false; 2],
    };
    for (i, algo) in [AlgorithmChoice::Dqn, AlgorithmChoice::Pg]
        .into_iter()
        .enumerate()
    {
        let dist = desk_train(algo, Mode::Distributed, 1, seed);
        let fed10 = desk_train(algo, Mode::Federated, 10, seed);
        let fed1000 = desk_train(algo, Mode::Federated, 1000, seed);

        verdict.gain_ok[i] = fed10.final500 >= 1.10 * dist.final500;
        verdict.beats_max_power[i] = fed10.final500 >= 1.5 * mp;
        // The Ag=10 curves' own final value is the convergence target:
        // the Ag=10 run must get within 90% of it in fewer episodes than
        // the Ag=1000 run does.
        let level = 0.9 * fed10.final500;
        let t10 = episodes_to_level(&fed10.smoothed, level).unwrap_or(usize::MAX);
        let t1000 = episodes_to_level(&fed1000.smoothed, level).unwrap_or(usize::MAX);
        verdict.faster_convergence[i] = t10 < t1000;

        println!(
            "  seed {seed} {}: dist {:.3}, fed@10 {:.3} (gain x{:.3}), fed@1000 {:.3}, \
             max power {:.3}, to-90%-of-fed10-final {} vs {} episodes",
            algo.as_str(),
            dist.final500,
            fed10.final500,
            fed10.final500 / dist.final500,
            fed1000.final500,
            mp,
            t10,
            if t1000 == usize::MAX {
                "never".to_string()
            } else {
                t1000.to_string()
            },
        );
    }
    verdict
}

#[test]
fn criterion_7_desk_scale_learning() {
    let initial_seeds = [1u64, 2, 3];
    let verdicts: Vec<SeedVerdict> = std::thread::scope(|scope| {
        let handles: Vec<_> = initial_seeds
            .iter()
            .map(|&s| scope.spawn(move || evaluate_seed(s)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    if verdicts.iter().all(|v| v.all()) {
        report(7, true, "all conditions hold on seeds {1, 2, 3}");
        return;
    }

    // A failed seed triggers the 5-seed majority rule.
    println!("  single-seed failure; extending to seeds {{1..5}} with majority rule");
    let extra: Vec<SeedVerdict> = std::thread::scope(|scope| {
        let handles: Vec<_> = [4u64, 5]
            .iter()
            .map(|&s| scope.spawn(move || evaluate_seed(s)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let all: Vec<SeedVerdict> = verdicts.into_iter().chain(extra).collect();
    let majority =
        |pick: &dyn Fn(&SeedVerdict) -> bool| all.iter().filter(|v| pick(v)).count() >= 3;
    let pass = (0..2).all(|i| {
        majority(&|v: &SeedVerdict| v.gain_ok[i])
            && majority(&|v: &SeedVerdict| v.beats_max_power[i])
            && majority(&|v: &SeedVerdict| v.faster_convergence[i])
    });
    report(
        7,
        pass,
        "majority over seeds {1..5} per condition and algorithm",
    );
}

// --- Criterion 8: byte-identical reruns.

fn tiny_config(algorithm: AlgorithmChoice, mode: Mode, agg: usize) -> ExperimentConfig {
    ExperimentConfig {
        topology: TopologyConfig {
            grid_side: 2,
            users_per_cell: 1,
            ..Default::default()
        },
        env: EnvConfig {
            horizon: 4,
            ..Default::default()
        },
        algorithm,
        mode,
        agg_period: agg,
        n_episodes: 30,
        eval_episodes: 6,
        smoothing_window: 10,
        seed: 99,
        ..Default::default()
    }
}

#[test]
fn criterion_8_byte_identical_outputs() {
    let cases = [
        tiny_config(AlgorithmChoice::Dqn, Mode::Federated, 5),
        tiny_config(AlgorithmChoice::Pg, Mode::Distributed, 1),
        tiny_config(AlgorithmChoice::Pg, Mode::Centralized, 1),
        tiny_config(AlgorithmChoice::MaxPower, Mode::Distributed, 1),
        tiny_config(AlgorithmChoice::Wmmse, Mode::Distributed, 1),
    ];
    let mut all_equal = true;
    for cfg in &cases {
        let a = run_experiment(cfg).unwrap();
        let b = run_experiment(cfg).unwrap();
        let csv_equal = curve_csv(&a.curve_rows) == curve_csv(&b.curve_rows);
        let json_equal = serde_json::to_string_pretty(&a.summary).unwrap()
            == serde_json::to_string_pretty(&b.summary).unwrap();
        let alloc_equal = serde_json::to_string(&a.eval.allocations).unwrap()
            == serde_json::to_string(&b.eval.allocations).unwrap();
        if !(csv_equal && json_equal && alloc_equal) {
            all_equal = false;
            println!(
                "  mismatch for {}: csv {csv_equal}, summary {json_equal}, allocations {alloc_equal}",
                cfg.algorithm.as_str()
            );
        }
    }

    // The mode comparison is itself reproducible.
    let cmp_cfg = tiny_config(AlgorithmChoice::Pg, Mode::Federated, 10);
    let cmp_a = serde_json::to_string_pretty(&compare_modes(&cmp_cfg).unwrap()).unwrap();
    let cmp_b = serde_json::to_string_pretty(&compare_modes(&cmp_cfg).unwrap()).unwrap();
    all_equal &= cmp_a == cmp_b;

    report(
        8,
        all_equal,
        "rerun outputs byte-identical for dqn/pg/maxpower/wmmse experiments and the mode comparison",
    );
}
