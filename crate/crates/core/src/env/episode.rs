use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::state::History;
use crate::error::{Error, Result};
use crate::plants::Plant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeConfig {
    #[serde(default = "EpisodeConfig::default_max_steps")]
    pub max_steps: usize,
    pub epsilon: f64,
    #[serde(default = "EpisodeConfig::default_consecutive")]
    pub consecutive_required: usize,
    #[serde(default = "EpisodeConfig::default_settle_steps")]
    pub settle_steps: usize,
}

impl EpisodeConfig {
    fn default_max_steps() -> usize {
        200
    }

    fn default_consecutive() -> usize {
        5
    }

    fn default_settle_steps() -> usize {
        50
    }

    pub fn new(epsilon: f64) -> Self {
        EpisodeConfig {
            max_steps: Self::default_max_steps(),
            epsilon,
            consecutive_required: Self::default_consecutive(),
            settle_steps: Self::default_settle_steps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 || self.consecutive_required == 0 || self.settle_steps == 0 {
            return Err(Error::InvalidParameter(
                "max_steps, consecutive_required and settle_steps must be >= 1".into(),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoneReason {
    Tracked,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpisodeStatus {
    Continue,
    Done(DoneReason),
}

/// Decides whether an episode ends, given the tracking errors
/// `y_{k+1} - y_sp` of every step taken so far.
pub fn episode_status(errors: &[Vec<f64>], config: &EpisodeConfig) -> EpisodeStatus {
    let n = config.consecutive_required;
    let within = |e: &Vec<f64>| e.iter().all(|v| v.abs() <= config.epsilon);
    if errors.len() >= n && errors[errors.len() - n..].iter().all(within) {
        EpisodeStatus::Done(DoneReason::Tracked)
    } else if errors.len() >= config.max_steps {
        EpisodeStatus::Done(DoneReason::Timeout)
    } else {
        EpisodeStatus::Continue
    }
}

/// Linear map from the first action channel to the others,
/// `a_j = intercept_j + slope_j a_0 (+ noise)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRegression {
    pub intercept: Vec<f64>,
    pub slope: Vec<f64>,
    /// Range of the driving channel among the fitted samples.
    pub driver_low: f64,
    pub driver_high: f64,
    pub noise_variance: f64,
}

/// How an episode's opening action is drawn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initializer {
    /// Uniform over the action box.
    #[default]
    Uniform,
    /// Fit an [`ActionRegression`] at startup from settled random actions
    /// whose outputs land in `[output_low, output_high]`.
    Regression {
        #[serde(default = "default_probe_samples")]
        samples: usize,
        #[serde(default = "default_noise_variance")]
        noise_variance: f64,
    },
    Fitted(ActionRegression),
}


fn default_probe_samples() -> usize {
    2000
}

fn default_noise_variance() -> f64 {
    1.0
}

/// Samples constant actions uniformly from the box, holds each for
/// `settle_steps` on a fresh copy of `plant`, keeps those whose outputs fall
/// inside `[output_low, output_high]` on every channel, and regresses the
/// remaining action channels on the first by least squares.
#[allow(clippy::too_many_arguments)]
pub fn fit_action_regression<R: Rng>(
    plant: &Plant,
    action_low: &[f64],
    action_high: &[f64],
    output_low: &[f64],
    output_high: &[f64],
    settle_steps: usize,
    samples: usize,
    noise_variance: f64,
    rng: &mut R,
) -> Result<ActionRegression> {
    let n_a = action_low.len();
    if n_a < 2 {
        return Err(Error::InvalidParameter(
            "regression initializer needs at least two actions".into(),
        ));
    }
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for _ in 0..samples {
        let a = uniform_action(action_low, action_high, rng);
        let mut p = plant.clone();
        p.reset();
        let mut y = p.output();
        for _ in 0..settle_steps {
            y = p.step(&a)?;
        }
        let inside = y
            .iter()
            .zip(output_low.iter().zip(output_high))
            .all(|(v, (lo, hi))| (*lo..=*hi).contains(v));
        if inside {
            kept.push(a);
        }
    }
    if kept.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            available: kept.len(),
        });
    }
    let n = kept.len() as f64;
    let mean = |j: usize| kept.iter().map(|a| a[j]).sum::<f64>() / n;
    let m0 = mean(0);
    let sxx: f64 = kept.iter().map(|a| (a[0] - m0).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::NonConvergence("feasible actions do not vary".into()));
    }
    let mut intercept = Vec::with_capacity(n_a - 1);
    let mut slope = Vec::with_capacity(n_a - 1);
    for j in 1..n_a {
        let mj = mean(j);
        let sxy: f64 = kept.iter().map(|a| (a[0] - m0) * (a[j] - mj)).sum();
        let b = sxy / sxx;
        slope.push(b);
        intercept.push(mj - b * m0);
    }
    let driver_low = kept.iter().map(|a| a[0]).fold(f64::INFINITY, f64::min);
    let driver_high = kept.iter().map(|a| a[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok(ActionRegression {
        intercept,
        slope,
        driver_low,
        driver_high,
        noise_variance,
    })
}

fn uniform_action<R: Rng>(low: &[f64], high: &[f64], rng: &mut R) -> Vec<f64> {
    low.iter()
        .zip(high)
        .map(|(lo, hi)| rng.random_range(*lo..=*hi))
        .collect()
}

impl ActionRegression {
    /// Draws the driver uniformly over its fitted range and the rest from
    /// the regression line plus Gaussian noise, clamped to the action box.
    pub fn sample<R: Rng>(&self, low: &[f64], high: &[f64], rng: &mut R) -> Vec<f64> {
        let a0 = rng.random_range(self.driver_low..=self.driver_high);
        let sd = self.noise_variance.sqrt();
        let mut a = vec![a0];
        for (j, (c, b)) in self.intercept.iter().zip(&self.slope).enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            a.push((c + b * a0 + sd * z).clamp(low[j + 1], high[j + 1]));
        }
        a
    }
}

/// Resets `plant`, holds an opening action for `settle_steps` and returns
/// histories deep enough for the RL state.
pub fn init_episode<R: Rng>(
    plant: &mut Plant,
    initializer: &Initializer,
    action_low: &[f64],
    action_high: &[f64],
    settle_steps: usize,
    history: &mut History,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if settle_steps == 0 {
        return Err(Error::InvalidParameter("settle_steps must be >= 1".into()));
    }
    let a = match initializer {
        Initializer::Uniform => uniform_action(action_low, action_high, rng),
        Initializer::Fitted(reg) => reg.sample(action_low, action_high, rng),
        Initializer::Regression { .. } => {
            return Err(Error::InvalidParameter(
                "regression initializer must be fitted before the first episode".into(),
            ))
        }
    };
    plant.reset();
    *history = History::new(history.d_y, history.d_a);
    let keep = (history.d_y + 1).max(history.d_a);
    for k in 0..settle_steps {
        let y = plant.step(&a)?;
        if settle_steps - k <= keep {
            history.push_output(y);
            history.push_action(a.clone());
        }
    }
    Ok(a)
}
