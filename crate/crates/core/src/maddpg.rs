//! Three cooperating actor-critic agents choosing the array pose, the
//! antenna layout and the power split, trained against the closed-form
//! inner solvers.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channel::{substream, Scenario};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::{layout_encode_normalized, AntennaLayout};
use crate::optimizer::{solve_at_pose, PowerPolicy, TwoStageSolution};

/// Output nonlinearity of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    Linear,
    Tanh,
}

/// Fully connected network with rectifier hidden layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub widths: Vec<usize>,
    /// Per layer, row-major `out × in`.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub head: Head,
}

/// Parameter-shaped accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.flat().iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Rescales to norm `max` when longer; `max <= 0` leaves it alone.
    pub fn clip(&mut self, max: f64) {
        let n = self.norm();
        if max > 0.0 && n > max {
            let s = max / n;
            self.weights
                .iter_mut()
                .chain(self.biases.iter_mut())
                .flatten()
                .for_each(|g| *g *= s);
        }
    }
}

/// Layer inputs from a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    inputs: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform hidden layers and a small uniform last layer.
    pub fn new(widths: &[usize], head: Head, rng: &mut impl Rng) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Contract(format!(
                "network widths {widths:?} need two or more positive entries"
            )));
        }
        let layers = widths.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = if l + 1 == layers {
                3e-3
            } else {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            };
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights,
            biases,
            head,
        })
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("widths")
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            weights: self.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_width() {
            return Err(Error::Dimension(format!(
                "network expects {} inputs, got {}",
                self.input_width(),
                x.len()
            )));
        }
        let layers = self.weights.len();
        let mut inputs = Vec::with_capacity(layers);
        let mut h = x.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo += row.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            }
            if l + 1 < layers {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            } else if self.head == Head::Tanh {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            debug_assert_eq!(z.len(), n_out);
            inputs.push(std::mem::replace(&mut h, z));
        }
        Ok(Trace { inputs, output: h })
    }

    /// Accumulates parameter gradients of a scalar loss with output
    /// sensitivity `dy` into `grads`; returns the input sensitivity.
    pub fn backward(&self, trace: &Trace, dy: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let layers = self.weights.len();
        let mut delta: Vec<f64> = match self.head {
            Head::Linear => dy.to_vec(),
            Head::Tanh => dy
                .iter()
                .zip(&trace.output)
                .map(|(d, y)| d * (1.0 - y * y))
                .collect(),
        };
        for l in (0..layers).rev() {
            let n_in = self.widths[l];
            let x = &trace.inputs[l];
            let w = &self.weights[l];
            let gw = &mut grads.weights[l];
            for (o, d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                if *d == 0.0 {
                    continue;
                }
                for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(x) {
                    *g += d * xi;
                }
            }
            let mut dx = vec![0.0; n_in];
            for (o, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                for (v, wi) in dx.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *v += d * wi;
                }
            }
            if l > 0 {
                // rectifier: the layer input is positive exactly where its pre-activation was
                dx.iter_mut().zip(x).for_each(|(v, xi)| {
                    if *xi <= 0.0 {
                        *v = 0.0
                    }
                });
            }
            delta = dx;
        }
        delta
    }

    pub fn params(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params().len() {
            return Err(Error::Dimension(format!(
                "{} parameters supplied, network has {}",
                p.len(),
                self.params().len()
            )));
        }
        let mut it = p.iter().copied();
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            w.iter_mut()
                .chain(b.iter_mut())
                .for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }

    /// `θ ← θ − rate·g`.
    pub fn descend(&mut self, g: &Gradients, rate: f64) {
        for (w, gw) in self.weights.iter_mut().zip(&g.weights) {
            w.iter_mut().zip(gw).for_each(|(a, b)| *a -= rate * b);
        }
        for (b, gb) in self.biases.iter_mut().zip(&g.biases) {
            b.iter_mut().zip(gb).for_each(|(a, d)| *a -= rate * d);
        }
    }
}

/// `θ′ ← τθ + (1−τ)θ′`.
pub fn soft_update(online: &Mlp, target: &mut Mlp, tau: f64) {
    for (t, o) in target.weights.iter_mut().zip(&online.weights) {
        t.iter_mut()
            .zip(o)
            .for_each(|(a, b)| *a = tau * b + (1.0 - tau) * *a);
    }
    for (t, o) in target.biases.iter_mut().zip(&online.biases) {
        t.iter_mut()
            .zip(o)
            .for_each(|(a, b)| *a = tau * b + (1.0 - tau) * *a);
    }
}

pub const AGENTS: usize = 3;
pub type PerAgent = [Vec<f64>; AGENTS];

/// What the agents can see of the last environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    pub r_b: f64,
    pub r_e: f64,
    pub r_s: f64,
    /// Flat pose index scaled to `[0, 1]`.
    pub pose: f64,
    pub p_f: f64,
    pub alpha: f64,
    pub rho0: f64,
}

/// Rates enter the observations in units of this many bits/s/Hz so every
/// entry is of order one.
pub const RATE_SCALE: f64 = 10.0;

/// Pose agent `(r_b, r_e, R_s, t, p_F)`, layout agent
/// `(r_b, r_e, R_s, t, α, ϱ₀)`, power agent `(r_b, r_e, R_s, p_F, α, ϱ₀)`.
pub fn build_observations(s: &EnvState) -> PerAgent {
    let (b, e, r) = (s.r_b / RATE_SCALE, s.r_e / RATE_SCALE, s.r_s / RATE_SCALE);
    [
        vec![b, e, r, s.pose, s.p_f],
        vec![b, e, r, s.pose, s.alpha, s.rho0],
        vec![b, e, r, s.p_f, s.alpha, s.rho0],
    ]
}

pub const OBSERVATION_WIDTHS: [usize; AGENTS] = [5, 6, 6];

/// Action widths: one pose scalar, one score per site, `(α, ϱ₀)`.
pub fn action_widths(q_hat: usize) -> [usize; AGENTS] {
    [1, q_hat, 2]
}

/// Policy output plus clipped Gaussian exploration noise.
pub fn act_with_noise(actor: &Mlp, obs: &[f64], std: f64, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut a = actor.forward(obs)?;
    if std > 0.0 {
        let n = Normal::new(0.0, std)
            .map_err(|e| Error::Contract(format!("noise scale {std}: {e}")))?;
        a.iter_mut().for_each(|v| *v += n.sample(rng));
    }
    a.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    Ok(a)
}

/// A decoded joint action.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub pose_index: usize,
    pub layout: AntennaLayout,
    pub alpha: f64,
    pub rho0: f64,
}

fn unit_interval(x: f64) -> f64 {
    if x.is_nan() {
        return 0.5;
    }
    ((x.clamp(-1.0, 1.0) + 1.0) / 2.0).clamp(0.0, 1.0)
}

/// Maps raw actions in `[−1, 1]` to a pose, a top-`a` layout and a split.
pub fn decode_actions(raw: &PerAgent, pose_count: usize, a: usize) -> Decision {
    let pose_index = (unit_interval(raw[0].first().copied().unwrap_or(0.0))
        * (pose_count.max(1) - 1) as f64)
        .round() as usize;
    let scores = &raw[1];
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    order.sort_by(|&i, &j| key(scores[j]).total_cmp(&key(scores[i])).then(i.cmp(&j)));
    let mut mask = vec![false; scores.len()];
    order
        .iter()
        .take(a.min(scores.len()))
        .for_each(|&i| mask[i] = true);
    let alpha = unit_interval(raw[2].first().copied().unwrap_or(0.0));
    let rho0 = unit_interval(raw[2].get(1).copied().unwrap_or(0.0));
    Decision {
        pose_index: pose_index.min(pose_count.saturating_sub(1)),
        layout: AntennaLayout { mask },
        alpha,
        rho0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: PerAgent,
    pub actions: PerAgent,
    pub reward: f64,
    pub next_obs: PerAgent,
}

/// FIFO store with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            items: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, e: Experience) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(e);
    }

    pub fn get(&self, i: usize) -> Option<&Experience> {
        self.items.get(i)
    }

    /// Up to `batch` distinct entries.
    pub fn sample(&self, batch: usize, rng: &mut impl Rng) -> Vec<&Experience> {
        let n = batch.min(self.items.len());
        sample(rng, self.items.len(), n)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}

/// Online and target networks of all agents. Critics see every agent's
/// observation and action.
#[derive(Debug, Clone)]
pub struct Agents {
    pub actors: Vec<Mlp>,
    pub critics: Vec<Mlp>,
    pub target_actors: Vec<Mlp>,
    pub target_critics: Vec<Mlp>,
    pub action_widths: [usize; AGENTS],
}

fn joint(obs: &PerAgent, act: &PerAgent) -> Vec<f64> {
    obs.iter()
        .chain(act.iter())
        .flat_map(|v| v.iter().copied())
        .collect()
}

impl Agents {
    pub fn new(action_widths: [usize; AGENTS], hidden: usize, rng: &mut impl Rng) -> Result<Self> {
        let critic_in =
            OBSERVATION_WIDTHS.iter().sum::<usize>() + action_widths.iter().sum::<usize>();
        let mut actors = Vec::new();
        let mut critics = Vec::new();
        for j in 0..AGENTS {
            actors.push(Mlp::new(
                &[OBSERVATION_WIDTHS[j], hidden, hidden, action_widths[j]],
                Head::Tanh,
                rng,
            )?);
            critics.push(Mlp::new(
                &[critic_in, hidden, hidden, 1],
                Head::Linear,
                rng,
            )?);
        }
        Ok(Self {
            target_actors: actors.clone(),
            target_critics: critics.clone(),
            actors,
            critics,
            action_widths,
        })
    }

    /// Offset of agent `j`'s action inside the critic input.
    fn action_offset(&self, j: usize) -> usize {
        OBSERVATION_WIDTHS.iter().sum::<usize>() + self.action_widths[..j].iter().sum::<usize>()
    }

    /// Bootstrapped targets `R + γQ′(S′, μ′(S′))` for critic `j`.
    fn td_targets(&self, j: usize, batch: &[&Experience], gamma: f64) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|e| {
                if gamma == 0.0 {
                    return Ok(e.reward);
                }
                let mut next = e.actions.clone();
                for (k, a) in next.iter_mut().enumerate() {
                    *a = self.target_actors[k].forward(&e.next_obs[k])?;
                }
                Ok(e.reward
                    + gamma * self.target_critics[j].forward(&joint(&e.next_obs, &next))?[0])
            })
            .collect()
    }

    /// Mean squared temporal-difference error of critic `j` and its gradient.
    pub fn critic_loss(
        &self,
        j: usize,
        batch: &[&Experience],
        gamma: f64,
    ) -> Result<(f64, Gradients)> {
        let y = self.td_targets(j, batch, gamma)?;
        let critic = &self.critics[j];
        let mut g = critic.zero_gradients();
        let mut loss = 0.0;
        let n = batch.len().max(1) as f64;
        for (e, yi) in batch.iter().zip(&y) {
            let t = critic.forward_trace(&joint(&e.obs, &e.actions))?;
            let r = t.output[0] - yi;
            loss += r * r / n;
            critic.backward(&t, &[2.0 * r / n], &mut g);
        }
        Ok((loss, g))
    }

    /// One descent step on every critic; returns the mean loss.
    pub fn critic_update(
        &mut self,
        batch: &[&Experience],
        gamma: f64,
        rate: f64,
        clip: f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..AGENTS {
            let (loss, mut g) = self.critic_loss(j, batch, gamma)?;
            g.clip(clip);
            self.critics[j].descend(&g, rate);
            total += loss / AGENTS as f64;
        }
        Ok(total)
    }

    /// Mean `Q_j` with agent `j`'s action from its online actor and the
    /// others from the batch, plus the actor gradient of its negation.
    pub fn actor_objective(&self, j: usize, batch: &[&Experience]) -> Result<(f64, Gradients)> {
        let actor = &self.actors[j];
        let critic = &self.critics[j];
        let mut g = actor.zero_gradients();
        let mut scratch = critic.zero_gradients();
        let off = self.action_offset(j);
        let w = self.action_widths[j];
        let n = batch.len().max(1) as f64;
        let mut q = 0.0;
        for e in batch {
            let ta = actor.forward_trace(&e.obs[j])?;
            let mut acts = e.actions.clone();
            acts[j] = ta.output.clone();
            let tc = critic.forward_trace(&joint(&e.obs, &acts))?;
            q += tc.output[0] / n;
            let dx = critic.backward(&tc, &[-1.0 / n], &mut scratch);
            actor.backward(&ta, &dx[off..off + w], &mut g);
        }
        Ok((q, g))
    }

    /// One ascent step on every actor's `Q`; returns the mean objective.
    pub fn actor_update(&mut self, batch: &[&Experience], rate: f64, clip: f64) -> Result<f64> {
        let mut total = 0.0;
        for j in 0..AGENTS {
            let (q, mut g) = self.actor_objective(j, batch)?;
            g.clip(clip);
            self.actors[j].descend(&g, rate);
            total += q / AGENTS as f64;
        }
        Ok(total)
    }

    pub fn soft_update(&mut self, tau: f64) {
        for j in 0..AGENTS {
            soft_update(&self.actors[j], &mut self.target_actors[j], tau);
            soft_update(&self.critics[j], &mut self.target_critics[j], tau);
        }
    }

    pub fn act(&self, obs: &PerAgent, std: f64, rng: &mut impl Rng) -> Result<PerAgent> {
        Ok([
            act_with_noise(&self.actors[0], &obs[0], std, rng)?,
            act_with_noise(&self.actors[1], &obs[1], std, rng)?,
            act_with_noise(&self.actors[2], &obs[2], std, rng)?,
        ])
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub episode: usize,
    pub step: usize,
    pub reward: f64,
    pub r_s: f64,
    pub alpha: f64,
    pub rho0: f64,
    pub pose_index: usize,
    pub p_f: f64,
    /// Absent before the buffer reaches the warm-up size.
    pub critic_loss: Option<f64>,
    pub infeasible: bool,
}

pub struct TrainOutcome {
    pub agents: Agents,
    pub log: Vec<StepLog>,
    /// Mean reward per episode.
    pub episode_rewards: Vec<f64>,
    pub buffer_len: usize,
    pub updates: usize,
    /// Deterministic rollout of the learned policies after training.
    pub evaluation: Option<TwoStageSolution>,
    pub evaluation_decision: Decision,
}

/// Environment step: inner solvers at the agents' pose, layout and split.
/// Infeasible configurations earn zero.
pub fn env_step(sc: &Scenario, d: &Decision) -> (f64, Option<TwoStageSolution>) {
    let policy = PowerPolicy::Requested {
        alpha: d.alpha,
        rho0: d.rho0,
    };
    match solve_at_pose(sc, d.pose_index, &d.layout, policy) {
        Ok(sol) if sol.metrics.r_s.is_finite() => (sol.metrics.r_s, Some(sol)),
        _ => (0.0, None),
    }
}

fn next_state(sc: &Scenario, d: &Decision, sol: Option<&TwoStageSolution>) -> EnvState {
    let m = sol.map(|s| s.metrics).unwrap_or_default();
    let (alpha, rho0) = sol.map_or((d.alpha, d.rho0), |s| (s.split.alpha, s.split.rho0));
    EnvState {
        r_b: m.r_b,
        r_e: m.r_e,
        r_s: m.r_s,
        pose: d.pose_index as f64 / (sc.pose_count().max(2) - 1) as f64,
        p_f: layout_encode_normalized(&d.layout),
        alpha,
        rho0,
    }
}

/// State every episode starts from: zero rates, the nominal pose, the
/// contiguous layout and the initialization split `α = 1, ϱ₀ = 0`.
pub fn initial_state(sc: &Scenario) -> Result<EnvState> {
    let layout = AntennaLayout::contiguous(&sc.grid, sc.config.a)?;
    Ok(EnvState {
        r_b: 0.0,
        r_e: 0.0,
        r_s: 0.0,
        pose: sc.nominal_pose() as f64 / (sc.pose_count().max(2) - 1) as f64,
        p_f: layout_encode_normalized(&layout),
        alpha: 1.0,
        rho0: 0.0,
    })
}

/// Runs the training loop on one scenario; `seed` fixes initialization,
/// exploration and minibatch draws.
pub fn train(sc: &Scenario, tc: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    let cfg = &sc.config;
    let widths = action_widths(cfg.q_hat);
    let mut rng: ChaCha8Rng = substream(seed, "maddpg");
    let mut agents = Agents::new(widths, tc.hidden, &mut rng)?;
    let mut buffer = ReplayBuffer::new(tc.buffer);
    let mut log = Vec::new();
    let mut episode_rewards = Vec::new();
    let mut updates = 0;
    let mut std = tc.noise_std;
    let start = initial_state(sc)?;
    let warmup = tc.warmup.max(1);

    for episode in 0..tc.episodes {
        let mut state = start;
        let mut total = 0.0;
        for step in 0..tc.steps_per_episode {
            let obs = build_observations(&state);
            let actions = agents.act(&obs, std, &mut rng)?;
            let d = decode_actions(&actions, sc.pose_count(), cfg.a);
            let (reward, sol) = env_step(sc, &d);
            let next = next_state(sc, &d, sol.as_ref());
            buffer.push(Experience {
                obs,
                actions,
                reward,
                next_obs: build_observations(&next),
            });
            let critic_loss = if buffer.len() >= warmup {
                let batch = buffer.sample(tc.batch, &mut rng);
                let loss = agents.critic_update(&batch, tc.discount, tc.critic_lr, tc.grad_clip)?;
                agents.actor_update(&batch, tc.actor_lr, tc.grad_clip)?;
                agents.soft_update(tc.tau);
                updates += 1;
                Some(loss)
            } else {
                None
            };
            log.push(StepLog {
                episode,
                step,
                reward,
                r_s: reward,
                alpha: next.alpha,
                rho0: next.rho0,
                pose_index: d.pose_index,
                p_f: next.p_f,
                critic_loss,
                infeasible: sol.is_none(),
            });
            total += reward;
            state = next;
        }
        episode_rewards.push(total / tc.steps_per_episode as f64);
        std *= tc.noise_decay;
        if stabilized(&episode_rewards, tc.stability_tol, tc.stability_window) {
            break;
        }
    }

    let (evaluation, evaluation_decision) = evaluate(sc, &agents, &start, tc.steps_per_episode)?;
    Ok(TrainOutcome {
        agents,
        log,
        episode_rewards,
        buffer_len: buffer.len(),
        updates,
        evaluation,
        evaluation_decision,
    })
}

/// Noise-free rollout from the start state; reports the last step.
pub fn evaluate(
    sc: &Scenario,
    agents: &Agents,
    start: &EnvState,
    steps: usize,
) -> Result<(Option<TwoStageSolution>, Decision)> {
    let mut rng: ChaCha8Rng = substream(0, "unused");
    let mut state = *start;
    let mut last = None;
    for _ in 0..steps.max(1) {
        let actions = agents.act(&build_observations(&state), 0.0, &mut rng)?;
        let d = decode_actions(&actions, sc.pose_count(), sc.config.a);
        let (_, sol) = env_step(sc, &d);
        state = next_state(sc, &d, sol.as_ref());
        last = Some((sol, d));
    }
    Ok(last.expect("at least one step"))
}

/// Two consecutive windows whose means differ by less than `tol`.
fn stabilized(rewards: &[f64], tol: f64, window: usize) -> bool {
    if tol <= 0.0 || window == 0 || rewards.len() < 2 * window {
        return false;
    }
    let n = rewards.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&rewards[n - window..]) - mean(&rewards[n - 2 * window..n - window])).abs() < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn linear_net_is_affine() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::new(&[3, 2], Head::Linear, &mut rng).unwrap();
        net.weights[0] = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        net.biases[0] = vec![0.5, -0.5];
        let x = [1.0, -1.0, 2.0];
        let t = net.forward_trace(&x).unwrap();
        assert_eq!(t.output, vec![5.5, 10.5]);
        let mut g = net.zero_gradients();
        net.backward(&t, &[1.0, 0.0], &mut g);
        assert_eq!(g.weights[0], vec![1.0, -1.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.biases[0], vec![1.0, 0.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn decode_endpoints() {
        let raw = [vec![-1.0], vec![0.3, 0.9, -0.2, 0.8], vec![-1.0, 1.0]];
        let d = decode_actions(&raw, 144, 2);
        assert_eq!(d.pose_index, 0);
        assert_eq!(d.layout.mask, vec![false, true, false, true]);
        assert_eq!((d.alpha, d.rho0), (0.0, 1.0));
        let raw = [vec![1.0], vec![f64::NAN; 4], vec![f64::NAN, 7.0]];
        let d = decode_actions(&raw, 144, 2);
        assert_eq!(d.pose_index, 143);
        assert_eq!(d.layout.count(), 2);
        assert_eq!((d.alpha, d.rho0), (0.5, 1.0));
    }

    #[test]
    fn buffer_is_fifo() {
        let e = |r: f64| Experience {
            obs: Default::default(),
            actions: Default::default(),
            reward: r,
            next_obs: Default::default(),
        };
        let mut b = ReplayBuffer::new(3);
        for r in 0..5 {
            b.push(e(r as f64));
        }
        assert_eq!(b.len(), 3);
        assert_eq!(b.get(0).unwrap().reward, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = b.sample(10, &mut rng);
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn observation_widths() {
        let s = EnvState {
            r_b: 0.0,
            r_e: 0.0,
            r_s: 0.0,
            pose: 0.25,
            p_f: 0.5,
            alpha: 0.3,
            rho0: 0.7,
        };
        let o = build_observations(&s);
        assert_eq!([o[0].len(), o[1].len(), o[2].len()], OBSERVATION_WIDTHS);
        let o2 = build_observations(&EnvState { alpha: 0.9, ..s });
        assert_eq!(o[0], o2[0]);
        assert_ne!(o[1], o2[1]);
        assert_ne!(o[2], o2[2]);
    }
}
