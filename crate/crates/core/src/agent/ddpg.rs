//! Deterministic off-policy actor-critic learner with replay memory, target
//! networks and inverted action gradients.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::noise::{OuConfig, OuNoise};
use super::replay::{Experience, ReplayMemory};
use crate::error::{Error, Result};
use crate::nn::{self, Adam, DenseNetwork, Matrix, Mode, NetworkSpec};

/// Hyper-parameters of the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    #[serde(default = "defaults::learning_rate")]
    pub actor_lr: f64,
    #[serde(default = "defaults::learning_rate")]
    pub critic_lr: f64,
    #[serde(default = "defaults::tau")]
    pub tau: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub capacity: usize,
    pub action_low: Vec<f64>,
    pub action_high: Vec<f64>,
    /// Saturate the action sent to the plant to `[action_low, action_high]`.
    /// The unclamped action is what gets stored for learning.
    #[serde(default)]
    pub clamp_applied_action: bool,
    #[serde(default)]
    pub noise: OuConfig,
    #[serde(default = "NetworkSpec::standard")]
    pub actor_network: NetworkSpec,
    #[serde(default = "NetworkSpec::standard")]
    pub critic_network: NetworkSpec,
    /// Networks see actions mapped affinely onto `[-1, 1]`.
    #[serde(default)]
    pub normalize_actions: bool,
    /// Networks see `(s - state_offset) / state_scale`; empty for raw states.
    #[serde(default)]
    pub state_offset: Vec<f64>,
    #[serde(default)]
    pub state_scale: Vec<f64>,
}

mod defaults {
    pub fn learning_rate() -> f64 {
        1e-4
    }

    pub fn tau() -> f64 {
        1e-3
    }
}

impl AgentConfig {
    /// Nominal learning rates, target rate and OU parameters with the given
    /// problem-specific settings.
    pub fn nominal(
        gamma: f64,
        batch_size: usize,
        capacity: usize,
        low: Vec<f64>,
        high: Vec<f64>,
    ) -> Self {
        AgentConfig {
            actor_lr: defaults::learning_rate(),
            critic_lr: defaults::learning_rate(),
            tau: defaults::tau(),
            gamma,
            batch_size,
            capacity,
            action_low: low,
            action_high: high,
            clamp_applied_action: false,
            noise: OuConfig::default(),
            actor_network: NetworkSpec::standard(),
            critic_network: NetworkSpec::standard(),
            normalize_actions: false,
            state_offset: Vec::new(),
            state_scale: Vec::new(),
        }
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{what} must be positive, got {v}"
                )))
            }
        };
        positive(self.actor_lr, "actor_lr")?;
        positive(self.critic_lr, "critic_lr")?;
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "tau must be in (0, 1], got {}",
                self.tau
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be in [0, 1], got {}",
                self.gamma
            )));
        }
        if self.batch_size == 0 || self.batch_size > self.capacity {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= batch_size <= capacity, got {} and {}",
                self.batch_size, self.capacity
            )));
        }
        if self.action_low.is_empty() || self.action_low.len() != self.action_high.len() {
            return Err(Error::InvalidParameter(
                "action bounds must be non-empty and equally long".into(),
            ));
        }
        if self
            .action_low
            .iter()
            .zip(&self.action_high)
            .any(|(lo, hi)| !(lo < hi && lo.is_finite() && hi.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "action bounds need action_low < action_high".into(),
            ));
        }
        if self.state_offset.len() != self.state_scale.len() {
            return Err(Error::InvalidParameter(
                "state_offset and state_scale must be equally long".into(),
            ));
        }
        if self
            .state_offset
            .iter()
            .zip(&self.state_scale)
            .any(|(o, s)| !(o.is_finite() && *s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidParameter(
                "state_scale must be positive and state_offset finite".into(),
            ));
        }
        self.noise.validate()?;
        self.actor_network.validate()?;
        self.critic_network.validate()
    }
}

/// Scales a gradient on one action coordinate so the actor is pushed back
/// into `[low, high]`.
///
/// A gradient that would increase the action is multiplied by
/// `(high - a) / (high - low)`, any other by `(a - low) / (high - low)`. Inside
/// the interval the factor lies in `[0, 1]`; outside it turns negative and the
/// gradient changes sign.
#[inline]
pub fn invert_gradient(grad: f64, action: f64, low: f64, high: f64) -> f64 {
    let width = high - low;
    if grad > 0.0 {
        grad * (high - action) / width
    } else {
        grad * (action - low) / width
    }
}

/// `target <- tau * online + (1 - tau) * target` over parameters and batch-norm
/// running statistics.
pub fn soft_update(online: &DenseNetwork, target: &mut DenseNetwork, tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidParameter(format!(
            "tau must be in [0, 1], got {tau}"
        )));
    }
    if !online.same_architecture(target) {
        return Err(Error::InvalidShape(
            "soft update between different architectures".into(),
        ));
    }
    let blend = |dst: Vec<&mut [f64]>, src: Vec<&[f64]>| {
        for (d, s) in dst.into_iter().zip(src) {
            for (t, o) in d.iter_mut().zip(s) {
                *t = tau * o + (1.0 - tau) * *t;
            }
        }
    };
    blend(target.params_mut(), online.params());
    blend(target.running_stats_mut(), online.running_stats());
    Ok(())
}

/// Output of [`DdpgAgent::select_action`].
#[derive(Debug, Clone, PartialEq)]
pub struct ActionChoice {
    /// Policy output plus exploration noise; stored in replay memory.
    pub action: Vec<f64>,
    /// What the plant receives (saturated when clamping is enabled).
    pub applied: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainDiagnostics {
    pub critic_loss: f64,
    pub mean_target: f64,
    pub critic_grad_norm: f64,
    pub actor_grad_norm: f64,
}

/// Actor, critic, their target copies, optimizers, replay memory and
/// exploration noise.
#[derive(Debug, Clone)]
pub struct DdpgAgent {
    pub config: AgentConfig,
    pub actor: DenseNetwork,
    pub critic: DenseNetwork,
    pub target_actor: DenseNetwork,
    pub target_critic: DenseNetwork,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub memory: ReplayMemory,
    pub noise: OuNoise,
    pub learning_enabled: bool,
    pub exploring: bool,
    /// Multiplier on each OU sample while exploring.
    pub exploration_scale: f64,
    state_dim: usize,
}

impl DdpgAgent {
    pub fn new(config: AgentConfig, state_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if state_dim == 0 {
            return Err(Error::InvalidShape("state dimension must be >= 1".into()));
        }
        if !config.state_scale.is_empty() && config.state_scale.len() != state_dim {
            return Err(Error::InvalidShape(format!(
                "state scaling has {} entries for {state_dim} state entries",
                config.state_scale.len()
            )));
        }
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        let mut init = ChaCha8Rng::seed_from_u64(seeds.next_u64());
        let n_a = config.action_dim();
        let actor = DenseNetwork::new(state_dim, n_a, &config.actor_network, &mut init)?;
        let critic = DenseNetwork::new(state_dim + n_a, 1, &config.critic_network, &mut init)?;
        Self::assemble(config, actor, critic, seeds)
    }

    /// Rebuilds an agent around previously trained online networks.
    pub fn from_networks(
        config: AgentConfig,
        actor: DenseNetwork,
        critic: DenseNetwork,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let n_a = config.action_dim();
        if actor.output_dim() != n_a
            || critic.output_dim() != 1
            || critic.input_dim() != actor.input_dim() + n_a
        {
            return Err(Error::InvalidShape(
                "actor and critic dimensions do not fit the action space".into(),
            ));
        }
        if !config.state_scale.is_empty() && config.state_scale.len() != actor.input_dim() {
            return Err(Error::InvalidShape(
                "state scaling does not fit the actor input".into(),
            ));
        }
        let mut seeds = ChaCha8Rng::seed_from_u64(seed);
        seeds.next_u64();
        Self::assemble(config, actor, critic, seeds)
    }

    fn assemble(
        config: AgentConfig,
        actor: DenseNetwork,
        critic: DenseNetwork,
        mut seeds: ChaCha8Rng,
    ) -> Result<Self> {
        let memory = ReplayMemory::new(config.capacity, seeds.next_u64())?;
        let noise = OuNoise::new(config.noise, config.action_dim(), seeds.next_u64())?;
        Ok(DdpgAgent {
            actor_opt: Adam::new(config.actor_lr)?,
            critic_opt: Adam::new(config.critic_lr)?,
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            state_dim: actor.input_dim(),
            actor,
            critic,
            memory,
            noise,
            learning_enabled: true,
            exploring: true,
            exploration_scale: 1.0,
            config,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.config.action_dim()
    }

    /// Deterministic policy output `mu(s)`.
    pub fn policy(&self, state: &[f64]) -> Result<Vec<f64>> {
        if state.len() != self.state_dim {
            return Err(Error::InvalidShape(format!(
                "state has {} entries, actor expects {}",
                state.len(),
                self.state_dim
            )));
        }
        let s = self.net_states(&Matrix::from_vec(1, state.len(), state.to_vec())?);
        let u = self.actor.predict(&s)?;
        Ok(self.plant_actions(&u).into_vec())
    }

    /// Center and half-width of the network action scaling per coordinate.
    fn action_affine(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = &self.config.action_low;
        let hi = &self.config.action_high;
        if self.config.normalize_actions {
            lo.iter()
                .zip(hi)
                .map(|(l, h)| ((l + h) / 2.0, (h - l) / 2.0))
                .unzip()
        } else {
            (vec![0.0; lo.len()], vec![1.0; lo.len()])
        }
    }

    /// Action bounds as the networks see them.
    pub fn network_action_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (c, h) = self.action_affine();
        let map = |b: &[f64]| {
            b.iter()
                .zip(&c)
                .zip(&h)
                .map(|((v, c), h)| (v - c) / h)
                .collect()
        };
        (map(&self.config.action_low), map(&self.config.action_high))
    }

    /// Plant states to network inputs.
    pub fn net_states(&self, states: &Matrix) -> Matrix {
        let mut out = states.clone();
        if self.config.state_scale.is_empty() {
            return out;
        }
        for i in 0..out.rows() {
            for ((x, o), s) in out
                .row_mut(i)
                .iter_mut()
                .zip(&self.config.state_offset)
                .zip(&self.config.state_scale)
            {
                *x = (*x - o) / s;
            }
        }
        out
    }

    /// Plant actions to network units.
    pub fn net_actions(&self, actions: &Matrix) -> Matrix {
        let (c, h) = self.action_affine();
        let mut out = actions.clone();
        for i in 0..out.rows() {
            for ((x, c), h) in out.row_mut(i).iter_mut().zip(&c).zip(&h) {
                *x = (*x - c) / h;
            }
        }
        out
    }

    /// Network units back to plant actions.
    pub fn plant_actions(&self, units: &Matrix) -> Matrix {
        let (c, h) = self.action_affine();
        let mut out = units.clone();
        for i in 0..out.rows() {
            for ((x, c), h) in out.row_mut(i).iter_mut().zip(&c).zip(&h) {
                *x = c + h * *x;
            }
        }
        out
    }

    /// `mu(s)` plus an OU sample while exploring.
    pub fn select_action(&mut self, state: &[f64]) -> Result<ActionChoice> {
        let mut action = self.policy(state)?;
        if self.exploring {
            let scale = self.exploration_scale;
            for (a, n) in action.iter_mut().zip(self.noise.sample()) {
                *a += scale * n;
            }
        }
        let applied = if self.config.clamp_applied_action {
            action
                .iter()
                .zip(self.config.action_low.iter().zip(&self.config.action_high))
                .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
                .collect()
        } else {
            action.clone()
        };
        Ok(ActionChoice { action, applied })
    }

    pub fn remember(&mut self, e: Experience) -> Result<()> {
        if e.state.len() != self.state_dim || e.action.len() != self.action_dim() {
            return Err(Error::InvalidShape(
                "experience does not match agent dimensions".into(),
            ));
        }
        self.memory.push(e);
        Ok(())
    }

    /// One replay-batch update of critic, actor and both targets.
    pub fn train_step(&mut self) -> Result<TrainDiagnostics> {
        let m = self.config.batch_size;
        let n_s = self.state_dim;
        let n_a = self.action_dim();
        let (states, actions, rewards, next_states) = {
            let batch = self.memory.sample(m)?;
            let mut s = Matrix::zeros(m, n_s);
            let mut a = Matrix::zeros(m, n_a);
            let mut s2 = Matrix::zeros(m, n_s);
            let mut r = Vec::with_capacity(m);
            for (i, e) in batch.iter().enumerate() {
                s.row_mut(i).copy_from_slice(&e.state);
                a.row_mut(i).copy_from_slice(&e.action);
                s2.row_mut(i).copy_from_slice(&e.next_state);
                r.push(e.reward);
            }
            (
                self.net_states(&s),
                self.net_actions(&a),
                r,
                self.net_states(&s2),
            )
        };

        // TD targets from the target networks, held constant below.
        let next_actions = self.target_actor.predict(&next_states)?;
        let next_q = self
            .target_critic
            .predict(&next_states.hcat(&next_actions)?)?;
        let gamma = self.config.gamma;
        let targets: Vec<f64> = rewards
            .iter()
            .zip(next_q.as_slice())
            .map(|(r, q)| r + gamma * q)
            .collect();

        // Critic: minimize the batch mean of squared TD errors.
        let (q, cache) = self.critic.forward(&states.hcat(&actions)?, Mode::Train)?;
        let mut dq = Matrix::zeros(m, 1);
        let mut loss = 0.0;
        for i in 0..m {
            let err = q.as_slice()[i] - targets[i];
            loss += err * err;
            dq.as_mut_slice()[i] = 2.0 * err / m as f64;
        }
        loss /= m as f64;
        if !loss.is_finite() {
            return Err(Error::NumericOverflow(format!("critic loss {loss}")));
        }
        let critic_grads = self.critic.backward(&cache, &dq)?;
        self.critic_opt
            .step(self.critic.params_mut(), &critic_grads.slices())?;

        // Actor: gradient of the critic at a = mu(s), batch norm on running
        // statistics so each sample sees its own action gradient.
        let (low, high) = self.network_action_bounds();
        let critic = &mut self.critic;
        let actor_grad_norm = actor_step(
            &mut self.actor,
            &mut self.actor_opt,
            &low,
            &high,
            &states,
            |mu| {
                let (_, qcache) = critic.forward(&states.hcat(mu)?, Mode::Infer)?;
                let ones = Matrix::from_vec(m, 1, vec![1.0 / m as f64; m])?;
                Ok(critic
                    .backward(&qcache, &ones)?
                    .input
                    .columns(n_s, n_s + n_a))
            },
        )?;

        soft_update(&self.actor, &mut self.target_actor, self.config.tau)?;
        soft_update(&self.critic, &mut self.target_critic, self.config.tau)?;

        Ok(TrainDiagnostics {
            critic_loss: loss,
            mean_target: targets.iter().sum::<f64>() / m as f64,
            critic_grad_norm: critic_grads.norm(),
            actor_grad_norm,
        })
    }

    /// One actor step ascending `Q` through a supplied action gradient.
    ///
    /// `states` are network inputs. `dq_da` receives the actor's
    /// training-mode output `mu(states)` in network units and returns the
    /// batch-scaled gradient of `Q` with respect to it. Each entry is passed
    /// through [`invert_gradient`] at `mu` before backpropagation. Returns the
    /// norm of the actor parameter gradient.
    pub fn actor_update_with<F>(&mut self, states: &Matrix, dq_da: F) -> Result<f64>
    where
        F: FnOnce(&Matrix) -> Result<Matrix>,
    {
        let (low, high) = self.network_action_bounds();
        actor_step(
            &mut self.actor,
            &mut self.actor_opt,
            &low,
            &high,
            states,
            dq_da,
        )
    }

    /// Online networks plus config as text; see [`nn::checkpoint`] for the
    /// network layout.
    pub fn checkpoint(&self) -> Result<String> {
        let config = toml::to_string(&self.config)
            .map_err(|e| Error::Checkpoint(format!("cannot serialize agent config: {e}")))?;
        let mut out = String::from("drlc-agent 1\n");
        out.push_str(&format!("config {}\n", config.lines().count()));
        out.push_str(&config);
        if !config.ends_with('\n') {
            out.push('\n');
        }
        out.push_str(&nn::checkpoint::write_network(&self.actor));
        out.push_str(&nn::checkpoint::write_network(&self.critic));
        Ok(out)
    }

    pub fn from_checkpoint(text: &str, seed: u64) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("drlc-agent 1") {
            return Err(Error::Checkpoint("missing `drlc-agent 1` header".into()));
        }
        let count: usize = lines
            .next()
            .and_then(|l| l.strip_prefix("config "))
            .and_then(|n| n.trim().parse().ok())
            .ok_or_else(|| Error::Checkpoint("missing config line count".into()))?;
        let config_text: Vec<&str> = lines.by_ref().take(count).collect();
        let config: AgentConfig = toml::from_str(&config_text.join("\n"))
            .map_err(|e| Error::Checkpoint(format!("bad agent config: {e}")))?;
        let actor = nn::checkpoint::read_network(&mut lines)?;
        let critic = nn::checkpoint::read_network(&mut lines)?;
        Self::from_networks(config, actor, critic, seed)
    }
}

fn actor_step<F>(
    actor: &mut DenseNetwork,
    opt: &mut Adam,
    low: &[f64],
    high: &[f64],
    states: &Matrix,
    dq_da: F,
) -> Result<f64>
where
    F: FnOnce(&Matrix) -> Result<Matrix>,
{
    let (mu, cache) = actor.forward(states, Mode::Train)?;
    let dqda = dq_da(&mu)?;
    if dqda.shape() != mu.shape() {
        return Err(Error::InvalidShape(format!(
            "action gradient {:?} does not match actions {:?}",
            dqda.shape(),
            mu.shape()
        )));
    }
    let mut upstream = Matrix::zeros(mu.rows(), mu.cols());
    for i in 0..mu.rows() {
        for j in 0..mu.cols() {
            // Adam descends; negate to ascend Q.
            upstream[(i, j)] = -invert_gradient(dqda[(i, j)], mu[(i, j)], low[j], high[j]);
        }
    }
    let grads = actor.backward(&cache, &upstream)?;
    opt.step(actor.params_mut(), &grads.slices())?;
    Ok(grads.norm())
}
