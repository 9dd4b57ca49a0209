use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::env::{EpisodeConfig, Initializer, RewardKind, SetpointScheduler};
use crate::error::{Error, Result};
use crate::nn::{Activation, NetworkSpec, OutputInit};
use crate::plants::{HvacConfig, PlantConfig, ProcessChange};

/// When learning and exploration pause, and when they resume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreezeConfig {
    #[serde(default = "FreezeConfig::default_enabled")]
    pub enabled: bool,
    /// Pause once the trailing mean of the l1 tracking error drops below this.
    #[serde(default = "FreezeConfig::default_threshold")]
    pub threshold: f64,
    #[serde(default = "FreezeConfig::default_window")]
    pub window: usize,
    /// Resume once the same mean exceeds `reenable_factor * threshold`.
    #[serde(default = "FreezeConfig::default_reenable_factor")]
    pub reenable_factor: f64,
    /// Empty the replay memory when an error rise resumes learning, and
    /// hold off updates until it holds one batch again.
    #[serde(default)]
    pub flush_replay_on_resume: bool,
}

impl FreezeConfig {
    fn default_enabled() -> bool {
        true
    }

    fn default_threshold() -> f64 {
        1e-4
    }

    fn default_window() -> usize {
        4
    }

    fn default_reenable_factor() -> f64 {
        10.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::config("freeze.threshold", "must be > 0"));
        }
        if self.window == 0 {
            return Err(Error::config("freeze.window", "must be >= 1"));
        }
        if !(self.reenable_factor >= 1.0 && self.reenable_factor.is_finite()) {
            return Err(Error::config("freeze.reenable_factor", "must be >= 1"));
        }
        Ok(())
    }
}

impl Default for FreezeConfig {
    fn default() -> Self {
        FreezeConfig {
            enabled: Self::default_enabled(),
            threshold: Self::default_threshold(),
            window: Self::default_window(),
            reenable_factor: Self::default_reenable_factor(),
            flush_replay_on_resume: false,
        }
    }
}

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub episodes: usize,
    /// Past outputs in the RL state beyond `y_t`.
    #[serde(default)]
    pub d_y: usize,
    /// Past actions in the RL state.
    #[serde(default)]
    pub d_a: usize,
    /// Gaussian noise added to every measured output.
    #[serde(default)]
    pub measurement_noise_variance: f64,
    /// Output box used by the regression initializer.
    pub output_low: Vec<f64>,
    pub output_high: Vec<f64>,
    /// Never reset the plant: episodes become consecutive logging windows of
    /// `episode.max_steps` steps and the tracked-early exit is off.
    #[serde(default)]
    pub continuous: bool,
    /// Scale exploration noise by `min(1, e / exploration_error_scale)`, with
    /// `e` the trailing mean l1 error over `freeze.window` steps.
    #[serde(default)]
    pub exploration_error_scale: Option<f64>,
    /// Networks see outputs scaled by `[output_low, output_high]` and actions
    /// by the action bounds.
    #[serde(default)]
    pub scale_network_inputs: bool,
    /// Episodes whose per-step trace is kept.
    #[serde(default)]
    pub trace_episodes: Vec<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub freeze: FreezeConfig,
    pub agent: AgentConfig,
    pub plant: PlantConfig,
    pub reward: RewardKind,
    pub setpoint: SetpointScheduler,
    pub episode: EpisodeConfig,
    #[serde(default)]
    pub initializer: Initializer,
    #[serde(default)]
    pub process_changes: Vec<ProcessChange>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn nested(key: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = message
                .split('`')
                .nth(1)
                .filter(|_| message.contains("field"))
                .unwrap_or("<document>")
                .to_string();
            Error::config(key, message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes", "must be >= 1"));
        }
        if !(self.measurement_noise_variance >= 0.0 && self.measurement_noise_variance.is_finite())
        {
            return Err(Error::config("measurement_noise_variance", "must be >= 0"));
        }
        self.agent.validate().map_err(|e| nested("agent", e))?;
        self.reward.validate().map_err(|e| nested("reward", e))?;
        self.setpoint
            .validate()
            .map_err(|e| nested("setpoint", e))?;
        self.episode.validate().map_err(|e| nested("episode", e))?;
        self.freeze.validate()?;
        if let Some(e) = self.exploration_error_scale {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::config("exploration_error_scale", "must be > 0"));
            }
        }
        for (i, c) in self.process_changes.iter().enumerate() {
            c.validate()
                .map_err(|e| nested(&format!("process_changes[{i}]"), e))?;
        }
        let plant = self.plant.build(0).map_err(|e| nested("plant", e))?;
        if plant.n_inputs() != self.agent.action_dim() {
            return Err(Error::config(
                "agent.action_low",
                format!(
                    "plant takes {} inputs, action bounds have {}",
                    plant.n_inputs(),
                    self.agent.action_dim()
                ),
            ));
        }
        if plant.n_outputs() != self.setpoint.channels() {
            return Err(Error::config(
                "setpoint",
                format!(
                    "plant has {} outputs, set-points have {} channels",
                    plant.n_outputs(),
                    self.setpoint.channels()
                ),
            ));
        }
        if self.output_low.len() != plant.n_outputs() || self.output_high.len() != plant.n_outputs()
        {
            return Err(Error::config(
                "output_low",
                "output bounds need one entry per plant output",
            ));
        }
        if self
            .output_low
            .iter()
            .zip(&self.output_high)
            .any(|(lo, hi)| !(lo < hi))
        {
            return Err(Error::config(
                "output_high",
                "need output_low < output_high",
            ));
        }
        if let Some(tol) = self.reward.tolerance() {
            if tol != self.episode.epsilon {
                return Err(Error::config(
                    "episode.epsilon",
                    format!("must equal the reward tolerance {tol}"),
                ));
            }
        }
        Ok(())
    }

    /// RL state length.
    /// Agent settings with network scaling filled in when enabled.
    pub fn agent_config(&self) -> AgentConfig {
        let mut agent = self.agent.clone();
        if !self.scale_network_inputs {
            return agent;
        }
        let mid = |lo: &[f64], hi: &[f64]| -> Vec<(f64, f64)> {
            lo.iter()
                .zip(hi)
                .map(|(l, h)| ((l + h) / 2.0, (h - l) / 2.0))
                .collect()
        };
        let outputs = mid(&self.output_low, &self.output_high);
        let actions = mid(&agent.action_low, &agent.action_high);
        let mut entries = Vec::with_capacity(self.state_dim());
        for _ in 0..=self.d_y {
            entries.extend_from_slice(&outputs);
        }
        for _ in 0..self.d_a {
            entries.extend_from_slice(&actions);
        }
        entries.extend(outputs.iter().map(|&(_, h)| (0.0, h)));
        (agent.state_offset, agent.state_scale) = entries.into_iter().unzip();
        agent.normalize_actions = true;
        agent
    }

    pub fn state_dim(&self) -> usize {
        crate::env::state_dim(
            self.setpoint.channels(),
            self.agent.action_dim(),
            self.d_y,
            self.d_a,
        )
    }

    /// Replaces the hidden widths of both networks, keeping activations,
    /// batch norm, decay and output initialization.
    pub fn with_network_widths(mut self, first: usize, second: usize) -> Self {
        for spec in [
            &mut self.agent.actor_network,
            &mut self.agent.critic_network,
        ] {
            if let [a, b] = spec.hidden.as_mut_slice() {
                a.width = first;
                b.width = second;
            }
        }
        self
    }
}

/// Reads and validates an experiment file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml(&text)
}

/// Built-in experiments.
pub mod presets {
    use super::*;

    /// Paper machine, SISO, set-points on a half-unit grid over the output
    /// range.
    pub fn example1() -> ExperimentConfig {
        ExperimentConfig {
            seed: 0,
            episodes: 500,
            d_y: 0,
            d_a: 0,
            measurement_noise_variance: 0.01,
            output_low: vec![0.0],
            output_high: vec![10.0],
            continuous: false,
            exploration_error_scale: None,
            scale_network_inputs: false,
            trace_episodes: vec![],
            output_dir: default_output_dir(),
            freeze: FreezeConfig::default(),
            agent: AgentConfig::nominal(0.99, 128, 50_000, vec![0.0], vec![100.0]),
            plant: PlantConfig::paper_machine(),
            reward: RewardKind::L1,
            setpoint: SetpointScheduler::Grid {
                values: SetpointScheduler::grid(0.0, 10.0, 0.5),
            },
            episode: EpisodeConfig::new(0.01),
            initializer: Initializer::Uniform,
            process_changes: vec![],
        }
    }

    /// Ill-conditioned two-by-two column with feasible set-point pairs, the
    /// regression initializer and scaled network inputs.
    pub fn example2() -> ExperimentConfig {
        ExperimentConfig {
            seed: 0,
            episodes: 5000,
            d_y: 0,
            d_a: 0,
            measurement_noise_variance: 0.01,
            output_low: vec![0.0, 0.0],
            output_high: vec![5.0, 5.0],
            continuous: false,
            exploration_error_scale: None,
            scale_network_inputs: true,
            trace_episodes: vec![],
            output_dir: default_output_dir(),
            freeze: FreezeConfig::default(),
            agent: AgentConfig::nominal(0.95, 128, 500_000, vec![0.0, 0.0], vec![50.0, 50.0]),
            plant: PlantConfig::distillation_column(),
            reward: RewardKind::L1,
            setpoint: SetpointScheduler::PairGrid {
                values: SetpointScheduler::grid(0.0, 5.0, 0.5),
                max_gap: 0.5,
            },
            episode: EpisodeConfig::new(0.01),
            initializer: Initializer::Regression {
                samples: 2000,
                noise_variance: 1.0,
            },
            process_changes: vec![],
        }
    }

    /// Heating coil with the polar reward, one lag of output and action in
    /// the state, a tanh second hidden layer, small output weights and scaled
    /// network inputs.
    pub fn example3() -> ExperimentConfig {
        let mut agent = AgentConfig::nominal(0.99, 64, 1_000_000, vec![150.0], vec![800.0]);
        for spec in [&mut agent.actor_network, &mut agent.critic_network] {
            *spec = example3_network();
        }
        ExperimentConfig {
            seed: 0,
            episodes: 100_000,
            d_y: 1,
            d_a: 1,
            measurement_noise_variance: 0.0,
            output_low: vec![30.0],
            output_high: vec![35.0],
            continuous: false,
            exploration_error_scale: None,
            scale_network_inputs: true,
            trace_episodes: vec![],
            output_dir: default_output_dir(),
            freeze: FreezeConfig::default(),
            agent,
            plant: PlantConfig::Hvac(HvacConfig::default()),
            reward: RewardKind::Polar,
            setpoint: SetpointScheduler::Grid {
                values: SetpointScheduler::grid(30.0, 35.0, 0.5),
            },
            episode: EpisodeConfig::new(0.01),
            initializer: Initializer::Uniform,
            process_changes: vec![],
        }
    }

    fn example3_network() -> NetworkSpec {
        let mut spec = NetworkSpec::standard();
        spec.hidden[1].activation = Activation::Tanh;
        spec.output_init = OutputInit::Uniform { bound: 0.003 };
        spec
    }

    /// Paper machine run without resets on `y_sp = 2`. Exploration fades
    /// with the tracking error so that the freeze can fire, learning resumes
    /// on a fresh replay memory, and the gain doubles at step 15000.
    pub fn example4() -> ExperimentConfig {
        let mut c = example1();
        c.continuous = true;
        c.episodes = 100;
        c.measurement_noise_variance = 0.0;
        c.exploration_error_scale = Some(1.0);
        c.freeze.flush_replay_on_resume = true;
        c.setpoint = SetpointScheduler::Grid { values: vec![2.0] };
        c.process_changes = vec![ProcessChange {
            trigger_time: 15_000,
            gain_scale: 2.0,
        }];
        c.trace_episodes = (0..c.episodes).collect();
        c
    }

    /// Desk-scale variant of a preset: 64 and 48 hidden units without batch
    /// norm in either network.
    pub fn desk(mut config: ExperimentConfig) -> ExperimentConfig {
        config = config.with_network_widths(64, 48);
        for h in config
            .agent
            .actor_network
            .hidden
            .iter_mut()
            .chain(config.agent.critic_network.hidden.iter_mut())
        {
            h.batch_norm = false;
        }
        config
    }

    pub fn by_name(name: &str) -> Option<ExperimentConfig> {
        match name {
            "example1" => Some(example1()),
            "example2" => Some(example2()),
            "example3" => Some(example3()),
            "example4" => Some(example4()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for name in ["example1", "example2", "example3", "example4"] {
            presets::by_name(name).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn example1_table_values() {
        let c = presets::example1();
        assert_eq!((c.agent.batch_size, c.agent.capacity), (128, 50_000));
        assert_eq!(c.agent.gamma, 0.99);
        assert_eq!(
            (c.agent.action_low[0], c.agent.action_high[0]),
            (0.0, 100.0)
        );
        assert_eq!((c.output_low[0], c.output_high[0]), (0.0, 10.0));
        assert_eq!(c.episodes, 500);
    }

    #[test]
    fn example3_table_values() {
        let c = presets::example3();
        assert_eq!((c.agent.batch_size, c.agent.capacity), (64, 1_000_000));
        assert_eq!(c.agent.gamma, 0.99);
        assert_eq!(
            (c.agent.action_low[0], c.agent.action_high[0]),
            (150.0, 800.0)
        );
        assert_eq!((c.output_low[0], c.output_high[0]), (30.0, 35.0));
        assert_eq!(c.agent.actor_network.hidden[1].activation, Activation::Tanh);
    }

    #[test]
    fn toml_round_trip() {
        for name in ["example1", "example2", "example3", "example4"] {
            let c = presets::by_name(name).unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn omitted_fields_take_defaults() {
        let text = r#"
seed = 3
episodes = 10
output_low = [0.0]
output_high = [10.0]

[agent]
gamma = 0.99
batch_size = 4
capacity = 100
action_low = [0.0]
action_high = [100.0]

[plant]
kind = "transfer_function"
numerator = [0.0, 0.05]
denominator = [1.0, -0.6]

[reward]
kind = "l1"

[setpoint]
kind = "grid"
values = [1.0, 2.0]

[episode]
epsilon = 0.01
"#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(
            (c.agent.actor_lr, c.agent.critic_lr, c.agent.tau),
            (1e-4, 1e-4, 1e-3)
        );
        assert_eq!((c.agent.noise.theta, c.agent.noise.sigma), (0.15, 0.3));
        assert_eq!(c.agent.actor_network.hidden[0].width, 400);
        assert_eq!(c.freeze.threshold, 1e-4);
        assert_eq!(c.episode.max_steps, 200);
    }

    #[test]
    fn empty_file_names_missing_key() {
        let err = ExperimentConfig::from_toml("").unwrap_err();
        match err {
            Error::Config { key, .. } => assert_eq!(key, "seed"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn validation_names_offending_key() {
        let mut c = presets::example1();
        c.agent.gamma = 1.5;
        match c.validate().unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "agent"),
            other => panic!("unexpected {other}"),
        }
        let mut c = presets::example1();
        c.reward = RewardKind::L1Epsilon {
            c: 1.0,
            epsilon: 0.5,
        };
        match c.validate().unwrap_err() {
            Error::Config { key, .. } => assert_eq!(key, "episode.epsilon"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn width_override_keeps_structure() {
        let c = presets::example3().with_network_widths(32, 24);
        let h = &c.agent.critic_network.hidden;
        assert_eq!((h[0].width, h[1].width), (32, 24));
        assert_eq!(h[1].activation, Activation::Tanh);
    }

    #[test]
    fn desk_drops_batch_norm_and_shrinks() {
        let c = presets::desk(presets::example3());
        for spec in [&c.agent.actor_network, &c.agent.critic_network] {
            assert_eq!((spec.hidden[0].width, spec.hidden[1].width), (64, 48));
            assert!(spec.hidden.iter().all(|h| !h.batch_norm));
            assert_eq!(spec.hidden[1].activation, Activation::Tanh);
        }
        assert!(c.validate().is_ok());
    }

    #[test]
    fn input_scaling_follows_state_layout() {
        let mut c = presets::example3();
        assert!(c.scale_network_inputs);
        let a = c.agent_config();
        // <y_t, y_{t-1}, a_{t-1}, y_t - y_sp> with Y = [30, 35], A = [150, 800].
        assert_eq!(a.state_offset, vec![32.5, 32.5, 475.0, 0.0]);
        assert_eq!(a.state_scale, vec![2.5, 2.5, 325.0, 2.5]);
        assert!(a.normalize_actions);
        c.scale_network_inputs = false;
        let raw = c.agent_config();
        assert!(raw.state_scale.is_empty() && !raw.normalize_actions);
    }
}
