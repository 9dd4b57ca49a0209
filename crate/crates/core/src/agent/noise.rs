use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the Ornstein-Uhlenbeck exploration process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuConfig {
    #[serde(default = "OuConfig::default_theta")]
    pub theta: f64,
    #[serde(default = "OuConfig::default_sigma")]
    pub sigma: f64,
    #[serde(default = "OuConfig::default_dt")]
    pub dt: f64,
}

impl OuConfig {
    fn default_theta() -> f64 {
        0.15
    }

    fn default_sigma() -> f64 {
        0.30
    }

    fn default_dt() -> f64 {
        1.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "OU theta must be > 0, got {}",
                self.theta
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "OU sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "OU dt must be > 0, got {}",
                self.dt
            )));
        }
        Ok(())
    }

    /// Stationary variance of the discretized recursion,
    /// `sigma^2 dt / (1 - (1 - theta dt)^2)`.
    pub fn stationary_variance(&self) -> f64 {
        let rho = 1.0 - self.theta * self.dt;
        self.sigma * self.sigma * self.dt / (1.0 - rho * rho)
    }
}

impl Default for OuConfig {
    fn default() -> Self {
        OuConfig {
            theta: Self::default_theta(),
            sigma: Self::default_sigma(),
            dt: Self::default_dt(),
        }
    }
}

/// Mean-reverting, temporally correlated Gaussian noise, one channel per
/// action dimension:
///
/// `x <- x + theta (mean - x) dt + sigma sqrt(dt) N(0, 1)`
#[derive(Debug, Clone)]
pub struct OuNoise {
    pub config: OuConfig,
    pub mean: Vec<f64>,
    current: Vec<f64>,
    rng: ChaCha8Rng,
}

impl OuNoise {
    pub fn new(config: OuConfig, dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(OuNoise {
            config,
            mean: vec![0.0; dim],
            current: vec![0.0; dim],
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn current(&self) -> &[f64] {
        &self.current
    }

    pub fn set_current(&mut self, value: &[f64]) {
        assert_eq!(value.len(), self.current.len(), "OU state dimension");
        self.current.copy_from_slice(value);
    }

    /// Puts the process back at its mean.
    pub fn reset(&mut self) {
        self.current.copy_from_slice(&self.mean);
    }

    pub fn sample(&mut self) -> &[f64] {
        let OuConfig { theta, sigma, dt } = self.config;
        let scale = sigma * dt.sqrt();
        for (x, m) in self.current.iter_mut().zip(&self.mean) {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *x += theta * (m - *x) * dt + scale * z;
        }
        &self.current
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(theta: f64, sigma: f64) -> OuNoise {
        OuNoise::new(
            OuConfig {
                theta,
                sigma,
                dt: 1.0,
            },
            1,
            7,
        )
        .unwrap()
    }

    #[test]
    fn deterministic_decay_without_diffusion() {
        let mut n = noise(0.15, 0.0);
        n.set_current(&[1.0]);
        assert!((n.sample()[0] - 0.85).abs() < 1e-15);
        assert!((n.sample()[0] - 0.85 * 0.85).abs() < 1e-15);
    }

    #[test]
    fn mean_is_a_fixed_point() {
        let mut n = noise(0.15, 0.0);
        for _ in 0..10 {
            assert_eq!(n.sample()[0], 0.0);
        }
    }

    #[test]
    fn reset_returns_to_mean() {
        let mut n = noise(0.15, 0.3);
        for _ in 0..5 {
            n.sample();
        }
        n.reset();
        assert_eq!(n.current(), &[0.0]);
    }

    #[test]
    fn seeded_sequences_repeat() {
        let mut a = noise(0.15, 0.3);
        let mut b = noise(0.15, 0.3);
        for _ in 0..100 {
            assert_eq!(a.sample()[0], b.sample()[0]);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(OuNoise::new(
            OuConfig {
                theta: 0.0,
                sigma: 0.3,
                dt: 1.0
            },
            1,
            0
        )
        .is_err());
        assert!(OuNoise::new(
            OuConfig {
                theta: 0.1,
                sigma: -1.0,
                dt: 1.0
            },
            1,
            0
        )
        .is_err());
        assert!(OuNoise::new(
            OuConfig {
                theta: 0.1,
                sigma: 0.3,
                dt: 0.0
            },
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn table_defaults_stationary_variance() {
        let v = OuConfig::default().stationary_variance();
        assert!((v - 0.09 / 0.2775).abs() < 1e-12);
    }
}
