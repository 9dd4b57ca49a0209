//! Simulated processes: discrete transfer functions, first-order MIMO
//! state-space plants, and a heating coil with valve and disturbances.

mod hvac;
mod state_space;
mod transfer;

pub use hvac::{
    valve_flow, Boundary, HvacConfig, HvacPlant, AIR_FLOW_BOUNDS, INLET_AIR_BOUNDS,
    INLET_WATER_BOUNDS, PLACEHOLDER_THETA,
};
pub use state_space::{zoh_first_order, StateSpaceModel};
pub use transfer::DiscreteTransferFunction;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Plant description as it appears in an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    /// SISO difference equation, coefficients in powers of `z^-1`.
    TransferFunction {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
    /// Matrix of first-order lags `gains[i][j] / (tau s + 1)` sampled with a
    /// zero-order hold.
    FirstOrderChannels {
        gains: Vec<Vec<f64>>,
        #[serde(default = "default_time_constant")]
        time_constant: f64,
        #[serde(default = "default_sample_time")]
        sample_time: f64,
    },
    Hvac(HvacConfig),
}

fn default_time_constant() -> f64 {
    75.0
}

fn default_sample_time() -> f64 {
    1.0
}

impl PlantConfig {
    /// `y[t+1] = 0.6 y[t] + 0.05 a[t]`.
    pub fn paper_machine() -> Self {
        PlantConfig::TransferFunction {
            numerator: vec![0.0, 0.05],
            denominator: vec![1.0, -0.6],
        }
    }

    /// Linearized two-by-two distillation column.
    pub fn distillation_column() -> Self {
        PlantConfig::FirstOrderChannels {
            gains: vec![vec![0.878, -0.864], vec![1.0819, -1.0958]],
            time_constant: default_time_constant(),
            sample_time: default_sample_time(),
        }
    }

    pub fn build(&self, seed: u64) -> Result<Plant> {
        match self {
            PlantConfig::TransferFunction {
                numerator,
                denominator,
            } => Ok(Plant::Transfer(DiscreteTransferFunction::new(
                numerator.clone(),
                denominator.clone(),
            )?)),
            PlantConfig::FirstOrderChannels {
                gains,
                time_constant,
                sample_time,
            } => {
                let ny = gains.len();
                let nu = gains.first().map_or(0, Vec::len);
                if ny == 0 || nu == 0 || gains.iter().any(|r| r.len() != nu) {
                    return Err(Error::InvalidShape(
                        "gain matrix must be rectangular and non-empty".into(),
                    ));
                }
                let g = Matrix::from_vec(ny, nu, gains.concat())?;
                let taus = Matrix::from_vec(ny, nu, vec![*time_constant; ny * nu])?;
                Ok(Plant::StateSpace(
                    StateSpaceModel::from_first_order_channels(&g, &taus, *sample_time)?,
                ))
            }
            PlantConfig::Hvac(c) => Ok(Plant::Hvac(HvacPlant::new(c.clone(), seed)?)),
        }
    }
}

/// A simulator advanced one sample at a time.
#[derive(Debug, Clone)]
pub enum Plant {
    Transfer(DiscreteTransferFunction),
    StateSpace(StateSpaceModel),
    Hvac(HvacPlant),
}

impl Plant {
    pub fn n_inputs(&self) -> usize {
        match self {
            Plant::Transfer(_) | Plant::Hvac(_) => 1,
            Plant::StateSpace(m) => m.n_inputs(),
        }
    }

    pub fn n_outputs(&self) -> usize {
        match self {
            Plant::Transfer(_) | Plant::Hvac(_) => 1,
            Plant::StateSpace(m) => m.n_outputs(),
        }
    }

    pub fn output(&self) -> Vec<f64> {
        match self {
            Plant::Transfer(g) => vec![g.output()],
            Plant::StateSpace(m) => m.output().to_vec(),
            Plant::Hvac(h) => vec![h.discharge_air],
        }
    }

    /// Holds `u` for one sample and returns the next output.
    pub fn step(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n_inputs() {
            return Err(Error::InvalidShape(format!(
                "plant takes {} inputs, got {}",
                self.n_inputs(),
                u.len()
            )));
        }
        match self {
            Plant::Transfer(g) => Ok(vec![g.step(u[0])]),
            Plant::StateSpace(m) => Ok(m.step(u)?.to_vec()),
            Plant::Hvac(h) => Ok(vec![h.step(u[0])?]),
        }
    }

    pub fn reset(&mut self) {
        match self {
            Plant::Transfer(g) => g.reset(),
            Plant::StateSpace(m) => m.reset(),
            Plant::Hvac(h) => h.reset(),
        }
    }

    pub fn scale_gain(&mut self, factor: f64) {
        match self {
            Plant::Transfer(g) => g.scale_gain(factor),
            Plant::StateSpace(m) => m.scale_gain(factor),
            Plant::Hvac(h) => h.scale_gain(factor),
        }
    }

    /// Scales the gain once `step_index` reaches the change's trigger time.
    /// Returns whether the change fired.
    pub fn apply_process_change(&mut self, change: &ProcessChange, step_index: u64) -> bool {
        if step_index == change.trigger_time {
            self.scale_gain(change.gain_scale);
            true
        } else {
            false
        }
    }
}

/// Gain scaling injected at a given global step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessChange {
    pub trigger_time: u64,
    pub gain_scale: f64,
}

impl ProcessChange {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_scale > 0.0 && self.gain_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gain_scale must be positive, got {}",
                self.gain_scale
            )));
        }
        Ok(())
    }
}

/// Independent zero-mean Gaussian noise on each output channel.
#[derive(Debug, Clone)]
pub struct MeasurementNoise {
    variance: f64,
    rng: ChaCha8Rng,
}

impl MeasurementNoise {
    pub fn new(variance: f64, seed: u64) -> Result<Self> {
        if !(variance >= 0.0 && variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be >= 0, got {variance}"
            )));
        }
        Ok(MeasurementNoise {
            variance,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn apply(&mut self, y: &[f64]) -> Vec<f64> {
        if self.variance == 0.0 {
            return y.to_vec();
        }
        let sd = self.variance.sqrt();
        y.iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                v + sd * z
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_gain_scale_is_identity() {
        let mut a = PlantConfig::paper_machine().build(0).unwrap();
        let mut b = a.clone();
        b.scale_gain(1.0);
        for _ in 0..30 {
            assert_eq!(a.step(&[3.0]).unwrap(), b.step(&[3.0]).unwrap());
        }
    }

    #[test]
    fn doubled_gain_steady_state() {
        let mut p = PlantConfig::paper_machine().build(0).unwrap();
        p.scale_gain(2.0);
        let mut y = vec![];
        for _ in 0..200 {
            y = p.step(&[1.0]).unwrap();
        }
        assert!((y[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn change_is_causal() {
        let change = ProcessChange {
            trigger_time: 10,
            gain_scale: 2.0,
        };
        let mut plain = PlantConfig::paper_machine().build(0).unwrap();
        let mut changed = plain.clone();
        for t in 0..20u64 {
            let fired = changed.apply_process_change(&change, t);
            assert_eq!(fired, t == 10);
            let a = plain.step(&[1.0]).unwrap();
            let b = changed.step(&[1.0]).unwrap();
            if t < 10 {
                assert_eq!(a, b);
            } else {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn post_change_impulse_response_is_scaled() {
        let mut plain = PlantConfig::paper_machine().build(0).unwrap();
        let mut changed = plain.clone();
        changed.scale_gain(3.0);
        let mut u = 1.0;
        for _ in 0..40 {
            let a = plain.step(&[u]).unwrap()[0];
            let b = changed.step(&[u]).unwrap()[0];
            u = 0.0;
            assert!((3.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_free_is_identity() {
        let mut n = MeasurementNoise::new(0.0, 1).unwrap();
        assert_eq!(n.apply(&[1.5, -2.0]), vec![1.5, -2.0]);
        assert!(MeasurementNoise::new(-0.1, 1).is_err());
    }

    #[test]
    fn noise_sample_variance() {
        let mut n = MeasurementNoise::new(0.01, 9).unwrap();
        let samples: Vec<f64> = (0..1_000_000).map(|_| n.apply(&[0.0])[0]).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var =
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        assert!((var - 0.01).abs() / 0.01 < 0.05, "variance {var}");
    }

    #[test]
    fn noise_is_seeded() {
        let mut a = MeasurementNoise::new(0.01, 4).unwrap();
        let mut b = MeasurementNoise::new(0.01, 4).unwrap();
        for _ in 0..100 {
            assert_eq!(a.apply(&[1.0, 2.0]), b.apply(&[1.0, 2.0]));
        }
    }

    #[test]
    fn column_config_builds_two_by_two() {
        let p = PlantConfig::distillation_column().build(0).unwrap();
        assert_eq!((p.n_inputs(), p.n_outputs()), (2, 2));
        let Plant::StateSpace(m) = p else {
            panic!("expected state-space plant")
        };
        let g = m.dc_gain().unwrap();
        let printed = [0.878, -0.864, 1.0819, -1.0958];
        for (x, y) in g.as_slice().iter().zip(printed) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        for c in [
            PlantConfig::paper_machine(),
            PlantConfig::distillation_column(),
            PlantConfig::Hvac(HvacConfig::default()),
        ] {
            let text = toml::to_string(&c).unwrap();
            let back: PlantConfig = toml::from_str(&text).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn rejects_wrong_input_width() {
        let mut p = PlantConfig::distillation_column().build(0).unwrap();
        assert!(p.step(&[1.0]).is_err());
    }
}
