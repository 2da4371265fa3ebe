//! Per-BS learning agents: action selection, episode storage, and
//! per-episode gradient updates for the value-based and policy-gradient
//! learners.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netsim::Observation;
use crate::nn::{grad_log_policy, grad_td_loss, softmax, AdamState, Mlp, WeightVector};

/// Which learner drives the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    Dqn,
    Pg,
}

/// Agent hyperparameters, consumed from the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    /// Fraction of the training episodes over which epsilon decays.
    pub eps_decay_frac: f64,
    pub use_baseline: bool,
    pub use_target_net: bool,
    /// Cross-episode replay capacity in transitions; 0 keeps the
    /// per-episode buffer that is cleared after every update.
    pub replay_capacity: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gamma: 0.9,
            eps_start: 0.9,
            eps_end: 0.01,
            eps_decay_frac: 0.8,
            use_baseline: true,
            use_target_net: false,
            replay_capacity: 0,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", "must be in [0, 1)"));
        }
        for (name, v) in [("eps_start", self.eps_start), ("eps_end", self.eps_end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, "must be in [0, 1]"));
            }
        }
        if self.eps_end > self.eps_start {
            return Err(Error::config("eps_end", "must be <= eps_start"));
        }
        if !(0.0..=1.0).contains(&self.eps_decay_frac) {
            return Err(Error::config("eps_decay_frac", "must be in [0, 1]"));
        }
        Ok(())
    }
}

/// Linear exploration decay: eps_start down to eps_end over
/// `decay_horizon` episodes, constant afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationSchedule {
    pub eps_start: f64,
    pub eps_end: f64,
    pub decay_horizon: usize,
}

impl ExplorationSchedule {
    pub fn new(cfg: &AgentConfig, n_episodes: usize) -> ExplorationSchedule {
        ExplorationSchedule {
            eps_start: cfg.eps_start,
            eps_end: cfg.eps_end,
            decay_horizon: ((n_episodes as f64) * cfg.eps_decay_frac).round() as usize,
        }
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.decay_horizon == 0 || episode >= self.decay_horizon {
            return self.eps_end;
        }
        let frac = episode as f64 / self.decay_horizon as f64;
        self.eps_start + (self.eps_end - self.eps_start) * frac
    }
}

/// One stored experience for the value learner.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    /// Set when this transition ended its episode (no bootstrap).
    pub terminal: bool,
}

/// Episode storage; FIFO-bounded when cross-episode replay is enabled.
#[derive(Debug, Clone, Default)]
pub struct EpisodeBuffer {
    transitions: VecDeque<Transition>,
    /// None: per-episode buffer, cleared after each update.
    capacity: Option<usize>,
}

impl EpisodeBuffer {
    pub fn new(replay_capacity: usize) -> EpisodeBuffer {
        EpisodeBuffer {
            transitions: VecDeque::new(),
            capacity: (replay_capacity > 0).then_some(replay_capacity),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if let Some(cap) = self.capacity {
            while self.transitions.len() >= cap {
                self.transitions.pop_front();
            }
        }
        self.transitions.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    fn after_update(&mut self) {
        if self.capacity.is_none() {
            self.transitions.clear();
        }
    }
}

/// Greedy/exploratory action for the value learner: with probability
/// 1 - eps the argmax Q (lowest index wins ties), otherwise uniform.
pub fn select_action_dqn(
    net: &Mlp,
    state: &Observation,
    eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::domain(
            "select_action_dqn",
            "epsilon must be in [0, 1]",
        ));
    }
    if rng.random::<f64>() < eps {
        return Ok(rng.random_range(0..net.output_dim()));
    }
    let q = net.forward(state.as_slice())?;
    Ok(argmax(&q))
}

/// Samples an action from the softmax policy; returns the index and its
/// log-probability.
pub fn select_action_pg(
    net: &Mlp,
    state: &Observation,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, f64)> {
    let logits = net.forward(state.as_slice())?;
    let probs = softmax(&logits);
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut chosen = probs.len() - 1;
    for (a, &p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            chosen = a;
            break;
        }
    }
    Ok((chosen, probs[chosen].ln()))
}

/// Lowest-index argmax.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Discounted returns-to-go: R_t = r_t + gamma * R_{t+1}.
pub fn returns_to_go(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, &r) in rewards.iter().enumerate().rev() {
        acc = r + gamma * acc;
        out[i] = acc;
    }
    out
}

/// Mean TD loss over the buffer, one Adam step on the mean gradient,
/// then clears the per-episode buffer. Targets use `target_net` when
/// given (frozen target), else the online net, and are constants.
pub fn dqn_episode_update(
    net: &mut Mlp,
    adam: &mut AdamState,
    buffer: &mut EpisodeBuffer,
    gamma: f64,
    target_net: Option<&Mlp>,
) -> Result<f64> {
    if buffer.is_empty() {
        return Err(Error::usage("dqn_episode_update", "empty buffer"));
    }
    let count = buffer.len() as f64;
    let mut grad = WeightVector::zeros(net.layout());
    let mut total_loss = 0.0;
    for tr in &buffer.transitions {
        let bootstrap = if tr.terminal {
            0.0
        } else {
            let q_next = match target_net {
                Some(t) => t.forward(tr.next_state.as_slice())?,
                None => net.forward(tr.next_state.as_slice())?,
            };
            q_next[argmax(&q_next)]
        };
        let target = tr.reward + gamma * bootstrap;
        let (g, loss) = grad_td_loss(net, tr.state.as_slice(), tr.action, target)?;
        for (acc, v) in grad.values_mut().iter_mut().zip(g.values()) {
            *acc += v / count;
        }
        total_loss += loss / count;
    }
    let mut flat = net.flatten();
    adam.step(flat.values_mut(), grad.values())?;
    net.set_from(&flat)?;
    buffer.after_update();
    Ok(total_loss)
}

/// One recorded policy-gradient step.
#[derive(Debug, Clone, PartialEq)]
pub struct PgStep {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
}

/// REINFORCE episode update over one trajectory per user link: gradient
/// sum_t grad log pi(a_t|s_t) * (R_t - b) with the episode-mean return as
/// baseline, averaged over links, applied as one Adam ascent step.
/// Returns the mean start-of-episode return (the Monte-Carlo objective
/// estimate).
pub fn pg_episode_update(
    net: &mut Mlp,
    adam: &mut AdamState,
    trajectories: &[Vec<PgStep>],
    gamma: f64,
    use_baseline: bool,
) -> Result<f64> {
    if trajectories.is_empty() || trajectories.iter().all(|t| t.is_empty()) {
        return Err(Error::usage("pg_episode_update", "empty episode"));
    }
    let returns: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|traj| {
            let rewards: Vec<f64> = traj.iter().map(|s| s.reward).collect();
            returns_to_go(&rewards, gamma)
        })
        .collect();
    let all_returns: Vec<f64> = returns.iter().flatten().copied().collect();
    let baseline = if use_baseline {
        all_returns.iter().sum::<f64>() / all_returns.len() as f64
    } else {
        0.0
    };

    let n_trajs = trajectories.iter().filter(|t| !t.is_empty()).count() as f64;
    let mut grad = WeightVector::zeros(net.layout());
    for (traj, rets) in trajectories.iter().zip(&returns) {
        for (step, &ret) in traj.iter().zip(rets) {
            let (g, _) = grad_log_policy(net, step.state.as_slice(), step.action)?;
            let advantage = ret - baseline;
            for (acc, v) in grad.values_mut().iter_mut().zip(g.values()) {
                // Ascent: feed the negated gradient to the minimizer.
                *acc -= advantage * v / n_trajs;
            }
        }
    }
    let mut flat = net.flatten();
    adam.step(flat.values_mut(), grad.values())?;
    net.set_from(&flat)?;

    let objective = returns
        .iter()
        .filter(|r| !r.is_empty())
        .map(|r| r[0])
        .sum::<f64>()
        / n_trajs;
    Ok(objective)
}

/// How many episodes between target-network refreshes when the frozen
/// target is enabled.
const TARGET_SYNC_EPISODES: usize = 10;

/// A per-BS learner: one network applied independently to each of the
/// cell's user-link observations.
#[derive(Debug, Clone)]
pub struct Agent {
    pub algo: Algorithm,
    net: Mlp,
    target: Option<Mlp>,
    opt: AdamState,
    cfg: AgentConfig,
    buffer: EpisodeBuffer,
    trajectories: Vec<Vec<PgStep>>,
    episodes_done: usize,
}

impl Agent {
    pub fn new(algo: Algorithm, net: Mlp, lr: f64, cfg: AgentConfig, n_links: usize) -> Agent {
        let n_params = net.layout().param_count();
        let target = cfg.use_target_net.then(|| net.clone());
        Agent {
            algo,
            net,
            target,
            opt: AdamState::new(n_params, lr),
            buffer: EpisodeBuffer::new(cfg.replay_capacity),
            trajectories: vec![Vec::new(); n_links],
            cfg,
            episodes_done: 0,
        }
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    /// Chooses one action for a user link.
    pub fn act(&self, obs: &Observation, eps: f64, rng: &mut ChaCha8Rng) -> Result<usize> {
        match self.algo {
            Algorithm::Dqn => select_action_dqn(&self.net, obs, eps, rng),
            Algorithm::Pg => Ok(select_action_pg(&self.net, obs, rng)?.0),
        }
    }

    /// Greedy action: argmax Q, or the policy's most likely action.
    pub fn act_greedy(&self, obs: &Observation) -> Result<usize> {
        let logits = self.net.forward(obs.as_slice())?;
        Ok(argmax(&logits))
    }

    /// Records one link's experience for this slot.
    pub fn record(
        &mut self,
        link: usize,
        state: &Observation,
        action: usize,
        reward: f64,
        next_state: &Observation,
        terminal: bool,
    ) {
        match self.algo {
            Algorithm::Dqn => self.buffer.push(Transition {
                state: state.clone(),
                action,
                reward,
                next_state: next_state.clone(),
                terminal,
            }),
            Algorithm::Pg => self.trajectories[link].push(PgStep {
                state: state.clone(),
                action,
                reward,
            }),
        }
    }

    /// Applies the per-episode update; returns the loss (value learner)
    /// or the mean return objective (policy learner).
    pub fn finish_episode(&mut self) -> Result<f64> {
        let out = match self.algo {
            Algorithm::Dqn => dqn_episode_update(
                &mut self.net,
                &mut self.opt,
                &mut self.buffer,
                self.cfg.gamma,
                self.target.as_ref(),
            )?,
            Algorithm::Pg => {
                let trajs = std::mem::take(&mut self.trajectories);
                let out = pg_episode_update(
                    &mut self.net,
                    &mut self.opt,
                    &trajs,
                    self.cfg.gamma,
                    self.cfg.use_baseline,
                )?;
                self.trajectories = vec![Vec::new(); trajs.len()];
                out
            }
        };
        self.episodes_done += 1;
        if self.cfg.use_target_net && self.episodes_done.is_multiple_of(TARGET_SYNC_EPISODES) {
            self.target = Some(self.net.clone());
        }
        Ok(out)
    }

    pub fn weights(&self) -> WeightVector {
        self.net.flatten()
    }

    pub fn set_weights(&mut self, w: &WeightVector) -> Result<()> {
        self.net.set_from(w)
    }
}
