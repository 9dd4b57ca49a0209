use std::collections::VecDeque;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::metrics::{emit_plot_data, export_csv, EpisodeRecord, MetricsLog, StepRecord};
use crate::agent::{DdpgAgent, Experience, TrainDiagnostics};
use crate::env::{
    compute_reward, episode_status, fit_action_regression, init_episode, DoneReason, EpisodeStatus,
    History, Initializer,
};
use crate::error::{Error, Result};
use crate::plants::{MeasurementNoise, Plant};

/// Independent streams derived from the experiment seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub agent: u64,
    pub plant: u64,
    pub noise: u64,
    pub env: u64,
}

impl SeedPlan {
    pub fn from_seed(seed: u64) -> Self {
        let mut root = ChaCha8Rng::seed_from_u64(seed);
        SeedPlan {
            agent: root.next_u64(),
            plant: root.next_u64(),
            noise: root.next_u64(),
            env: root.next_u64(),
        }
    }
}

/// Replaces an unfitted regression initializer by its fit on a fresh plant.
pub fn prepare_initializer<R: Rng>(config: &ExperimentConfig, rng: &mut R) -> Result<Initializer> {
    match &config.initializer {
        Initializer::Regression {
            samples,
            noise_variance,
        } => {
            let plant = config.plant.build(0)?;
            let fit = fit_action_regression(
                &plant,
                &config.agent.action_low,
                &config.agent.action_high,
                &config.output_low,
                &config.output_high,
                config.episode.settle_steps,
                *samples,
                *noise_variance,
                rng,
            )?;
            Ok(Initializer::Fitted(fit))
        }
        other => Ok(other.clone()),
    }
}

fn l1_error(y: &[f64], setpoint: &[f64]) -> f64 {
    y.iter().zip(setpoint).map(|(y, r)| (y - r).abs()).sum()
}

/// Result of one controller step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub setpoint: Vec<f64>,
    /// Noise-free plant output after the action.
    pub y_true: Vec<f64>,
    /// Measured output after the action.
    pub y: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub train: Option<TrainDiagnostics>,
    /// Set when this step ended the episode.
    pub done: Option<DoneReason>,
}

/// Learning pause or resume at a global step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreezeEvent {
    pub step: u64,
    pub frozen: bool,
}

/// Training loop wiring agent, plant and environment together.
#[derive(Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub agent: DdpgAgent,
    pub plant: Plant,
    noise: MeasurementNoise,
    rng: ChaCha8Rng,
    initializer: Initializer,
    history: History,
    setpoint: Vec<f64>,
    y: Vec<f64>,
    global_step: u64,
    episode: usize,
    episode_step: usize,
    episode_reward: f64,
    episode_errors: Vec<Vec<f64>>,
    episode_start: Option<Instant>,
    recent_errors: VecDeque<f64>,
    started: bool,
    frozen: bool,
    freeze_events: Vec<FreezeEvent>,
    log: MetricsLog,
}

impl Experiment {
    /// Builds every component from the config and fills the replay memory
    /// with one batch of random-action transitions.
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let seeds = SeedPlan::from_seed(config.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seeds.env);
        let initializer = prepare_initializer(&config, &mut rng)?;
        let agent = DdpgAgent::new(config.agent_config(), config.state_dim(), seeds.agent)?;
        let plant = config.plant.build(seeds.plant)?;
        let noise = MeasurementNoise::new(config.measurement_noise_variance, seeds.noise)?;
        let history = History::new(config.d_y, config.d_a);
        let mut exp = Experiment {
            agent,
            plant,
            noise,
            rng,
            initializer,
            history,
            setpoint: vec![],
            y: vec![],
            global_step: 0,
            episode: 0,
            episode_step: 0,
            episode_reward: 0.0,
            episode_errors: vec![],
            episode_start: None,
            recent_errors: VecDeque::new(),
            started: false,
            frozen: false,
            freeze_events: vec![],
            log: MetricsLog::new(),
            config,
        };
        exp.prefill().map_err(|e| Error::Episode {
            episode: 0,
            source: Box::new(e),
        })?;
        Ok(exp)
    }

    pub fn log(&self) -> &MetricsLog {
        &self.log
    }

    pub fn initializer(&self) -> &Initializer {
        &self.initializer
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    /// Index of the episode in progress, or of the next one.
    pub fn episode(&self) -> usize {
        self.episode
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze_events(&self) -> &[FreezeEvent] {
        &self.freeze_events
    }

    pub fn setpoint(&self) -> &[f64] {
        &self.setpoint
    }

    pub fn is_finished(&self) -> bool {
        self.log.episodes().len() >= self.config.episodes
    }

    fn uniform_action(&mut self) -> Vec<f64> {
        let c = &self.config.agent;
        c.action_low
            .iter()
            .zip(&c.action_high)
            .map(|(lo, hi)| self.rng.random_range(*lo..=*hi))
            .collect()
    }

    fn start_plant(&mut self) -> Result<()> {
        init_episode(
            &mut self.plant,
            &self.initializer,
            &self.config.agent.action_low,
            &self.config.agent.action_high,
            self.config.episode.settle_steps,
            &mut self.history,
            &mut self.rng,
        )?;
        self.y = self
            .history
            .current_output()
            .map(|y| self.noise.apply(y))
            .unwrap_or_default();
        Ok(())
    }

    fn sample_setpoint(&mut self, t: u64) -> Result<Vec<f64>> {
        self.config.setpoint.sample(&mut self.rng, t)
    }

    fn prefill(&mut self) -> Result<()> {
        let needed = self.config.agent.batch_size;
        let mut since_reset = usize::MAX;
        let mut setpoint = vec![];
        for _ in 0..needed {
            if since_reset >= self.config.episode.max_steps {
                self.start_plant()?;
                setpoint = self.sample_setpoint(0)?;
                since_reset = 0;
            }
            let state = self.history.state(&setpoint)?;
            let a = self.uniform_action();
            let y_next = self.plant.step(&a)?;
            let y_obs = self.noise.apply(&y_next);
            let reward = compute_reward(self.config.reward, &self.y, &y_obs, &setpoint)?;
            self.history.push_output(y_obs.clone());
            self.history.push_action(a.clone());
            let next_state = self.history.state(&setpoint)?;
            self.agent
                .remember(Experience::new(state, a, reward, next_state)?)?;
            self.y = y_obs;
            since_reset += 1;
        }
        Ok(())
    }

    fn set_frozen(&mut self, frozen: bool) {
        self.frozen = frozen;
        self.agent.learning_enabled = !frozen;
        self.agent.exploring = !frozen;
        self.freeze_events.push(FreezeEvent {
            step: self.global_step,
            frozen,
        });
    }

    fn update_freeze(&mut self, error: f64) {
        let f = self.config.freeze;
        self.recent_errors.push_back(error);
        if self.recent_errors.len() > f.window {
            self.recent_errors.pop_front();
        }
        if self.recent_errors.len() < f.window {
            return;
        }
        let mean = self.recent_errors.iter().sum::<f64>() / f.window as f64;
        if let Some(scale) = self.config.exploration_error_scale {
            self.agent.exploration_scale = (mean / scale).min(1.0);
        }
        if !f.enabled {
            return;
        }
        if !self.frozen && mean < f.threshold {
            self.set_frozen(true);
        } else if self.frozen && mean > f.reenable_factor * f.threshold {
            self.set_frozen(false);
            if f.flush_replay_on_resume {
                self.agent.memory.clear();
            }
        }
    }

    fn begin_episode(&mut self) -> Result<()> {
        let first = !self.started;
        if first || !self.config.continuous {
            self.start_plant()?;
            self.agent.noise.reset();
            self.agent.exploration_scale = 1.0;
            self.recent_errors.clear();
        }
        let t0 = if self.config.continuous {
            self.global_step
        } else {
            0
        };
        let previous = std::mem::take(&mut self.setpoint);
        self.setpoint =
            if self.config.continuous && !first && !self.config.setpoint.is_time_varying() {
                previous.clone()
            } else {
                self.sample_setpoint(t0)?
            };
        if self.frozen && self.setpoint != previous {
            self.set_frozen(false);
        }
        self.started = true;
        self.episode_step = 0;
        self.episode_reward = 0.0;
        self.episode_errors.clear();
        self.episode_start = Some(Instant::now());
        Ok(())
    }

    fn finish_episode(&mut self) -> Result<()> {
        let wall_seconds = self
            .episode_start
            .take()
            .map_or(0.0, |s| s.elapsed().as_secs_f64());
        self.log.push_episode(EpisodeRecord {
            episode: self.episode,
            total_reward: self.episode_reward,
            steps: self.episode_step,
            setpoint: self.setpoint.clone(),
            wall_seconds,
        })?;
        self.episode += 1;
        Ok(())
    }

    fn step_inner(&mut self) -> Result<StepOutcome> {
        if self.episode_start.is_none() {
            self.begin_episode()?;
        }
        if self.config.setpoint.is_time_varying() {
            let t = if self.config.continuous {
                self.global_step
            } else {
                self.episode_step as u64
            };
            self.setpoint = self.sample_setpoint(t)?;
        }
        for change in &self.config.process_changes {
            self.plant.apply_process_change(change, self.global_step);
        }

        let state = self.history.state(&self.setpoint)?;
        let choice = self.agent.select_action(&state)?;
        let y_true = self.plant.step(&choice.applied)?;
        let y_obs = self.noise.apply(&y_true);
        let reward = compute_reward(self.config.reward, &self.y, &y_obs, &self.setpoint)?;
        self.history.push_output(y_obs.clone());
        self.history.push_action(choice.applied.clone());
        let next_state = self.history.state(&self.setpoint)?;
        self.agent.remember(Experience::new(
            state,
            choice.action.clone(),
            reward,
            next_state,
        )?)?;
        let train = if self.agent.learning_enabled
            && self.agent.memory.len() >= self.config.agent.batch_size
        {
            Some(self.agent.train_step()?)
        } else {
            None
        };
        self.update_freeze(l1_error(&y_obs, &self.setpoint));

        if self.config.trace_episodes.contains(&self.episode) {
            self.log.push_step(
                self.episode,
                StepRecord {
                    t: self.episode_step,
                    setpoint: self.setpoint.clone(),
                    y: y_obs.clone(),
                    a: choice.applied.clone(),
                    reward,
                },
            );
        }
        self.y = y_obs.clone();
        self.global_step += 1;
        self.episode_step += 1;
        self.episode_reward += reward;
        self.episode_errors.push(
            y_obs
                .iter()
                .zip(&self.setpoint)
                .map(|(y, r)| y - r)
                .collect(),
        );

        let done = if self.config.continuous {
            (self.episode_step >= self.config.episode.max_steps).then_some(DoneReason::Timeout)
        } else {
            match episode_status(&self.episode_errors, &self.config.episode) {
                EpisodeStatus::Done(reason) => Some(reason),
                EpisodeStatus::Continue => None,
            }
        };
        if done.is_some() {
            self.finish_episode()?;
        }
        Ok(StepOutcome {
            setpoint: self.setpoint.clone(),
            y_true,
            y: y_obs,
            action: choice.applied,
            reward,
            train,
            done,
        })
    }

    /// Advances one controller step, starting a new episode if needed.
    pub fn step(&mut self) -> Result<StepOutcome> {
        let episode = self.episode;
        self.step_inner().map_err(|e| Error::Episode {
            episode,
            source: Box::new(e),
        })
    }

    /// Runs steps until the current episode ends.
    pub fn run_episode(&mut self) -> Result<&EpisodeRecord> {
        while self.step()?.done.is_none() {}
        Ok(self.log.episodes().last().expect("episode was just logged"))
    }

    /// Runs the remaining configured episodes.
    pub fn run(&mut self) -> Result<&MetricsLog> {
        while !self.is_finished() {
            self.run_episode()?;
        }
        Ok(&self.log)
    }

    /// Exploration-free rollout of the current policy on a noise-free copy
    /// of the plant.
    pub fn evaluate(&self, setpoint: &[f64], tolerance: f64, seed: u64) -> Result<EvalOutcome> {
        evaluate_policy(
            &self.agent,
            &self.config,
            &self.initializer,
            setpoint,
            tolerance,
            seed,
        )
    }

    /// Writes CSV, plot data, the resolved config and an agent checkpoint.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        export_csv(&self.log, dir)?;
        emit_plot_data(&self.log, dir)?;
        let config = dir.join("config.toml");
        std::fs::write(&config, self.config.to_toml()?).map_err(|e| Error::io(&config, e))?;
        let ckpt = dir.join("checkpoint.txt");
        std::fs::write(&ckpt, self.agent.checkpoint()?).map_err(|e| Error::io(&ckpt, e))
    }
}

/// Trains a fresh experiment to completion.
pub fn run_experiment(config: ExperimentConfig) -> Result<MetricsLog> {
    let mut exp = Experiment::new(config)?;
    exp.run()?;
    Ok(exp.log)
}

/// A greedy rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub setpoint: Vec<f64>,
    pub outputs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Step at which `consecutive_required` steps in a row had every channel
    /// within tolerance.
    pub tracked_at: Option<usize>,
}

impl EvalOutcome {
    pub fn tracked(&self) -> bool {
        self.tracked_at.is_some()
    }
}

/// Runs `agent`'s deterministic policy for `episode.max_steps` steps from a
/// seeded episode start. Actions are saturated to the action box.
pub fn evaluate_policy(
    agent: &DdpgAgent,
    config: &ExperimentConfig,
    initializer: &Initializer,
    setpoint: &[f64],
    tolerance: f64,
    seed: u64,
) -> Result<EvalOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut plant = config.plant.build(seed)?;
    let mut history = History::new(config.d_y, config.d_a);
    init_episode(
        &mut plant,
        initializer,
        &config.agent.action_low,
        &config.agent.action_high,
        config.episode.settle_steps,
        &mut history,
        &mut rng,
    )?;
    let mut outputs = vec![];
    let mut actions = vec![];
    let mut run = 0;
    let mut tracked_at = None;
    for t in 0..config.episode.max_steps {
        let state = history.state(setpoint)?;
        let a: Vec<f64> = agent
            .policy(&state)?
            .iter()
            .zip(
                config
                    .agent
                    .action_low
                    .iter()
                    .zip(&config.agent.action_high),
            )
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect();
        let y = plant.step(&a)?;
        let inside = y
            .iter()
            .zip(setpoint)
            .all(|(y, r)| (y - r).abs() <= tolerance);
        run = if inside { run + 1 } else { 0 };
        if tracked_at.is_none() && run >= config.episode.consecutive_required {
            tracked_at = Some(t);
        }
        history.push_output(y.clone());
        history.push_action(a.clone());
        outputs.push(y);
        actions.push(a);
    }
    Ok(EvalOutcome {
        setpoint: setpoint.to_vec(),
        outputs,
        actions,
        tracked_at,
    })
}
