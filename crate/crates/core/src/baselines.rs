//! Non-learning reference allocators: Max Power, iterative scalar WMMSE,
//! and an exhaustive grid-search oracle for small instances.

use crate::channel::GainTensor;
use crate::error::{Error, Result};
use crate::netsim::{network_sum_rate, rates, PowerAllocation};

/// Default amplitude-change tolerance for WMMSE convergence.
pub const WMMSE_TOL: f64 = 1e-5;
/// Default WMMSE iteration cap.
pub const WMMSE_MAX_ITER: usize = 500;

/// Every link at P_max.
pub fn max_power(users_per_cell: &[usize], p_max: f64) -> PowerAllocation {
    PowerAllocation::uniform(users_per_cell, p_max)
}

/// Result of a WMMSE solve.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOutcome {
    pub powers: PowerAllocation,
    /// Network sum rate after initialization and after each iteration of
    /// the winning start; nondecreasing.
    pub sum_rate_trace: Vec<f64>,
    pub iterations: usize,
    /// False when the iteration cap was hit before the amplitude change
    /// dropped below tolerance (the best iterate is still returned).
    pub converged: bool,
}

/// Link-flattened view of the gain tensor used by the scalar solvers.
struct LinkProblem {
    /// (cell, user) per flattened link.
    links: Vec<(usize, usize)>,
    /// amp2[l][m]: gain from link m's transmitter to link l's receiver,
    /// following the environment's SINR convention (intra-cell
    /// interference runs through the receiving user's own gain).
    amp2: Vec<Vec<f64>>,
    users_per_cell: Vec<usize>,
}

impl LinkProblem {
    fn new(g: &GainTensor) -> LinkProblem {
        let users_per_cell: Vec<usize> = g.iter().enumerate().map(|(n, _)| g[n][n].len()).collect();
        let links: Vec<(usize, usize)> = users_per_cell
            .iter()
            .enumerate()
            .flat_map(|(n, &k)| (0..k).map(move |u| (n, u)))
            .collect();
        let amp2 = links
            .iter()
            .map(|&(cell, user)| {
                links
                    .iter()
                    .map(|&(tx_cell, _)| g[tx_cell][cell][user])
                    .collect()
            })
            .collect();
        LinkProblem {
            links,
            amp2,
            users_per_cell,
        }
    }

    fn n_links(&self) -> usize {
        self.links.len()
    }

    fn to_allocation(&self, p: &[f64]) -> PowerAllocation {
        let mut alloc = PowerAllocation::zeros(&self.users_per_cell);
        for (&(n, k), &pw) in self.links.iter().zip(p) {
            alloc.p[n][k] = pw;
        }
        alloc
    }

    fn sum_rate(&self, g: &GainTensor, p: &[f64], noise: f64) -> f64 {
        network_sum_rate(&rates(g, &self.to_allocation(p), noise))
    }
}

/// One WMMSE run from a given amplitude initialization.
fn wmmse_from(
    g: &GainTensor,
    problem: &LinkProblem,
    p_max: f64,
    noise: f64,
    tol: f64,
    max_iter: usize,
    v_init: &[f64],
) -> WmmseOutcome {
    let l = problem.n_links();
    let v_cap = p_max.sqrt();
    let amp: Vec<Vec<f64>> = problem
        .amp2
        .iter()
        .map(|row| row.iter().map(|a| a.sqrt()).collect())
        .collect();

    let mut v = v_init.to_vec();
    let power_of = |v: &[f64]| -> Vec<f64> { v.iter().map(|x| x * x).collect() };
    let mut trace = vec![problem.sum_rate(g, &power_of(&v), noise)];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iter {
        iterations += 1;
        // Receiver update.
        let u: Vec<f64> = (0..l)
            .map(|i| {
                let rx_power: f64 = (0..l)
                    .map(|m| problem.amp2[i][m] * v[m] * v[m])
                    .sum::<f64>()
                    + noise;
                amp[i][i] * v[i] / rx_power
            })
            .collect();
        // MSE weight update, guarded against underflow of 1 - u*a*v.
        let w: Vec<f64> = (0..l)
            .map(|i| 1.0 / (1.0 - u[i] * amp[i][i] * v[i]).max(1e-12))
            .collect();
        // Transmit amplitude update, clamped to [0, sqrt(P_max)].
        let v_next: Vec<f64> = (0..l)
            .map(|i| {
                let denom: f64 = (0..l)
                    .map(|m| w[m] * u[m] * u[m] * problem.amp2[m][i])
                    .sum();
                (w[i] * u[i] * amp[i][i] / denom).clamp(0.0, v_cap)
            })
            .collect();
        let delta = v
            .iter()
            .zip(&v_next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        v = v_next;
        trace.push(problem.sum_rate(g, &power_of(&v), noise));
        if delta < tol {
            converged = true;
            break;
        }
    }

    WmmseOutcome {
        powers: problem.to_allocation(&power_of(&v)),
        sum_rate_trace: trace,
        iterations,
        converged,
    }
}

/// Scalar sum-rate WMMSE with deterministic multi-start.
///
/// The block-coordinate iteration only descends into the stationary point
/// reachable from its initialization; the all-max-power start is itself
/// stationary on symmetric instances. Runs are therefore repeated from
/// the full-power start and from one dominant-link start per link, and
/// the best final sum rate wins.
pub fn wmmse(
    g: &GainTensor,
    p_max: f64,
    noise: f64,
    tol: f64,
    max_iter: usize,
) -> Result<WmmseOutcome> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::domain("wmmse", "tolerance must be > 0"));
    }
    if !noise.is_finite() || noise <= 0.0 {
        return Err(Error::domain("wmmse", "noise must be > 0"));
    }
    let problem = LinkProblem::new(g);
    let l = problem.n_links();
    if l == 0 {
        return Err(Error::usage("wmmse", "no links"));
    }
    let v_cap = p_max.sqrt();

    let mut starts: Vec<Vec<f64>> = vec![vec![v_cap; l]];
    for j in 0..l {
        let mut v = vec![v_cap * 1e-3; l];
        v[j] = v_cap;
        starts.push(v);
    }

    let mut best: Option<WmmseOutcome> = None;
    for start in &starts {
        let outcome = wmmse_from(g, &problem, p_max, noise, tol, max_iter, start);
        let rate = *outcome.sum_rate_trace.last().unwrap();
        if best
            .as_ref()
            .map(|b| rate > *b.sum_rate_trace.last().unwrap())
            .unwrap_or(true)
        {
            best = Some(outcome);
        }
    }
    Ok(best.unwrap())
}

/// Exhaustively evaluates all `grid_points^L` allocations on the uniform
/// grid including 0 and P_max; returns the argmax sum rate. Ties keep the
/// lexicographically smallest allocation.
pub fn brute_force_power(
    g: &GainTensor,
    noise: f64,
    p_max: f64,
    grid_points: usize,
) -> Result<(PowerAllocation, f64)> {
    let problem = LinkProblem::new(g);
    let l = problem.n_links();
    if l > 4 {
        return Err(Error::usage(
            "brute_force_power",
            format!("{l} links exceed the limit of 4"),
        ));
    }
    if grid_points < 2 {
        return Err(Error::domain(
            "brute_force_power",
            "need at least 2 grid points",
        ));
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|i| i as f64 * p_max / (grid_points - 1) as f64)
        .collect();

    let mut indices = vec![0usize; l];
    let mut best_rate = f64::NEG_INFINITY;
    let mut best_powers = vec![0.0; l];
    loop {
        let p: Vec<f64> = indices.iter().map(|&i| grid[i]).collect();
        let rate = problem.sum_rate(g, &p, noise);
        // Strict improvement keeps the first (lexicographically smallest)
        // maximizer.
        if rate > best_rate {
            best_rate = rate;
            best_powers = p;
        }
        // Increment the mixed-radix counter, last link fastest.
        let mut pos = l;
        loop {
            if pos == 0 {
                return Ok((problem.to_allocation(&best_powers), best_rate));
            }
            pos -= 1;
            indices[pos] += 1;
            if indices[pos] < grid_points {
                break;
            }
            indices[pos] = 0;
        }
    }
}
