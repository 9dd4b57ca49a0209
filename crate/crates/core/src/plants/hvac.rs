use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const AIR_FLOW_BOUNDS: (f64, f64) = (0.6, 0.9);
pub const INLET_WATER_BOUNDS: (f64, f64) = (73.0, 81.0);
pub const INLET_AIR_BOUNDS: (f64, f64) = (4.0, 10.0);

/// Placeholder parameters. The published nominal set lives in an external
/// reference; these keep the discharge air temperature inside roughly 30–35 °C
/// for valve signals between 150 and 800 at mid-range disturbances.
pub const PLACEHOLDER_THETA: [f64; 12] = [
    0.2, 0.0, 0.02, 0.0, // water side
    0.1, 0.0, 0.22, 0.0, 0.5, // air side
    0.1, 1e-7, 0.0, // valve
];

/// Water flow from a valve signal:
/// `theta10 + theta11 a + q a^2 + theta12 a^3`, where `q` is `theta11` unless
/// `quadratic` overrides it.
pub fn valve_flow(a: f64, theta10: f64, theta11: f64, theta12: f64, quadratic: Option<f64>) -> f64 {
    let q = quadratic.unwrap_or(theta11);
    theta10 + theta11 * a + q * a * a + theta12 * a * a * a
}

/// How a random-walk disturbance behaves at its bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Clip,
    Reflect,
}

impl Boundary {
    /// Maps `x` back into `[lo, hi]`.
    pub fn apply(self, x: f64, lo: f64, hi: f64) -> f64 {
        match self {
            Boundary::Clip => x.clamp(lo, hi),
            Boundary::Reflect => {
                let width = hi - lo;
                if width <= 0.0 {
                    return lo;
                }
                // Fold onto a period of 2 * width.
                let r = (x - lo).rem_euclid(2.0 * width);
                if r <= width {
                    lo + r
                } else {
                    hi - (r - width)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HvacConfig {
    #[serde(default = "HvacConfig::default_theta")]
    pub theta: Vec<f64>,
    /// Distinct quadratic valve coefficient; `None` repeats `theta11`.
    #[serde(default)]
    pub valve_quadratic: Option<f64>,
    /// Random-walk standard deviation per step as a fraction of each
    /// disturbance interval.
    #[serde(default = "HvacConfig::default_step_fraction")]
    pub step_fraction: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "HvacConfig::default_outlet_water")]
    pub initial_outlet_water: f64,
    #[serde(default = "HvacConfig::default_discharge_air")]
    pub initial_discharge_air: f64,
}

impl HvacConfig {
    fn default_theta() -> Vec<f64> {
        PLACEHOLDER_THETA.to_vec()
    }

    fn default_step_fraction() -> f64 {
        0.01
    }

    fn default_outlet_water() -> f64 {
        71.0
    }

    fn default_discharge_air() -> f64 {
        32.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != 12 {
            return Err(Error::InvalidParameter(format!(
                "HVAC model needs 12 parameters, got {}",
                self.theta.len()
            )));
        }
        if self.theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("non-finite HVAC parameter".into()));
        }
        if !(self.step_fraction >= 0.0 && self.step_fraction.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step_fraction must be >= 0, got {}",
                self.step_fraction
            )));
        }
        Ok(())
    }
}

impl Default for HvacConfig {
    fn default() -> Self {
        HvacConfig {
            theta: Self::default_theta(),
            valve_quadratic: None,
            step_fraction: Self::default_step_fraction(),
            boundary: Boundary::Clip,
            initial_outlet_water: Self::default_outlet_water(),
            initial_discharge_air: Self::default_discharge_air(),
        }
    }
}

/// Heating coil with a nonlinear valve and random-walk disturbances.
/// The controlled output is the discharge air temperature.
#[derive(Debug, Clone)]
pub struct HvacPlant {
    pub config: HvacConfig,
    pub outlet_water: f64,
    pub discharge_air: f64,
    pub mean_water: f64,
    pub inlet_water: f64,
    pub inlet_air: f64,
    pub air_flow: f64,
    /// Random-walk standard deviations for `(f_a, T_wi, T_ai)`.
    pub step_sizes: [f64; 3],
    rng: ChaCha8Rng,
}

fn midpoint((lo, hi): (f64, f64)) -> f64 {
    0.5 * (lo + hi)
}

fn width((lo, hi): (f64, f64)) -> f64 {
    hi - lo
}

impl HvacPlant {
    pub fn new(config: HvacConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let f = config.step_fraction;
        let step_sizes = [
            f * width(AIR_FLOW_BOUNDS),
            f * width(INLET_WATER_BOUNDS),
            f * width(INLET_AIR_BOUNDS),
        ];
        let mut plant = HvacPlant {
            outlet_water: 0.0,
            discharge_air: 0.0,
            mean_water: 0.0,
            inlet_water: 0.0,
            inlet_air: 0.0,
            air_flow: 0.0,
            step_sizes,
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        };
        plant.reset();
        Ok(plant)
    }

    /// Initial temperatures with disturbances at mid-range. The disturbance
    /// random stream continues.
    pub fn reset(&mut self) {
        self.outlet_water = self.config.initial_outlet_water;
        self.discharge_air = self.config.initial_discharge_air;
        self.air_flow = midpoint(AIR_FLOW_BOUNDS);
        self.inlet_water = midpoint(INLET_WATER_BOUNDS);
        self.inlet_air = midpoint(INLET_AIR_BOUNDS);
        self.mean_water = 0.5 * (self.inlet_water + self.outlet_water);
    }

    pub fn water_flow(&self, a: f64) -> f64 {
        let t = &self.config.theta;
        valve_flow(a, t[9], t[10], t[11], self.config.valve_quadratic)
    }

    /// One bounded random-walk step of `f_a`, `T_wi` and `T_ai`. A zero step
    /// size holds that disturbance where it is.
    pub fn disturbance_step(&mut self) {
        let b = self.config.boundary;
        let mut walk = |x: f64, sd: f64, (lo, hi): (f64, f64)| {
            if sd == 0.0 {
                return x;
            }
            let z: f64 = StandardNormal.sample(&mut self.rng);
            b.apply(x + sd * z, lo, hi)
        };
        let [s_fa, s_wi, s_ai] = self.step_sizes;
        self.air_flow = walk(self.air_flow, s_fa, AIR_FLOW_BOUNDS);
        self.inlet_water = walk(self.inlet_water, s_wi, INLET_WATER_BOUNDS);
        self.inlet_air = walk(self.inlet_air, s_ai, INLET_AIR_BOUNDS);
    }

    /// Holds valve signal `a` over one sample and returns the new discharge
    /// air temperature. Disturbances move first so that the inlet-air
    /// increment and the mean water temperature use the new values.
    pub fn step(&mut self, a: f64) -> Result<f64> {
        let t = &self.config.theta;
        let fw = self.water_flow(a);
        let (two, tao, tw) = (self.outlet_water, self.discharge_air, self.mean_water);
        let (twi, tai, fa) = (self.inlet_water, self.inlet_air, self.air_flow);
        let (t1, t2, t3, t4, t5, t6, t7, t8, t9) =
            (t[0], t[1], t[2], t[3], t[4], t[5], t[6], t[7], t[8]);

        self.disturbance_step();

        let outlet_water = two + t1 * fw * (twi - two) + (t2 + t3 * fw + t4 * fa) * (tai - tw);
        let discharge_air = tao
            + t5 * fa * (tai - tao)
            + (t6 + t7 * fw + t8 * fa) * (tw - tai)
            + t9 * (self.inlet_air - tai);
        if !(outlet_water.is_finite() && discharge_air.is_finite()) {
            return Err(Error::NumericOverflow(format!(
                "HVAC state diverged at valve signal {a}: T_wo = {outlet_water}, T_ao = {discharge_air}"
            )));
        }
        self.outlet_water = outlet_water;
        self.discharge_air = discharge_air;
        self.mean_water = 0.5 * (self.inlet_water + self.outlet_water);
        Ok(discharge_air)
    }

    pub fn scale_gain(&mut self, factor: f64) {
        // The valve is the actuator; scale its flow characteristic.
        let t = &mut self.config.theta;
        t[9] *= factor;
        t[10] *= factor;
        t[11] *= factor;
        if let Some(q) = self.config.valve_quadratic.as_mut() {
            *q *= factor;
        }
    }
}
