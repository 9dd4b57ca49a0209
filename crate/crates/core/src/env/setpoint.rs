use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where set-points come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetpointScheduler {
    /// One value per episode, uniform over `values`.
    Grid { values: Vec<f64> },
    /// Two-channel set-points drawn from `values x values`, keeping only
    /// pairs no more than `max_gap` apart.
    PairGrid { values: Vec<f64>, max_gap: f64 },
    /// `offset + amplitude sin(2 pi t / period)`.
    Sinusoid {
        amplitude: f64,
        period: f64,
        offset: f64,
    },
    /// `values[i]` from step `times[i]` on; `values[0]` before `times[0]`.
    PiecewiseConstant {
        times: Vec<u64>,
        values: Vec<Vec<f64>>,
    },
}

impl SetpointScheduler {
    /// `{start, start + step, ..., stop}`.
    pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step).round() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    }

    pub fn channels(&self) -> usize {
        match self {
            SetpointScheduler::Grid { .. } | SetpointScheduler::Sinusoid { .. } => 1,
            SetpointScheduler::PairGrid { .. } => 2,
            SetpointScheduler::PiecewiseConstant { values, .. } => {
                values.first().map_or(0, Vec::len)
            }
        }
    }

    /// Set-point varies within an episode.
    pub fn is_time_varying(&self) -> bool {
        matches!(
            self,
            SetpointScheduler::Sinusoid { .. } | SetpointScheduler::PiecewiseConstant { .. }
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            SetpointScheduler::Grid { values } if values.is_empty() => {
                bad("set-point grid is empty")
            }
            SetpointScheduler::PairGrid { values, max_gap } => {
                if values.is_empty() {
                    bad("set-point grid is empty")
                } else if !(*max_gap >= 0.0) {
                    bad("max_gap must be >= 0")
                } else {
                    Ok(())
                }
            }
            SetpointScheduler::Sinusoid { period, .. } if !(*period > 0.0) => {
                bad("period must be > 0")
            }
            SetpointScheduler::PiecewiseConstant { times, values } => {
                if values.is_empty() || times.len() != values.len() {
                    bad("piecewise set-point needs one time per value")
                } else if times.windows(2).any(|w| w[0] >= w[1]) {
                    bad("piecewise set-point times must increase")
                } else if values
                    .iter()
                    .any(|v| v.len() != values[0].len() || v.is_empty())
                {
                    bad("piecewise set-point values must share one width")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Set-point for step `t` of an episode. Grid kinds ignore `t`.
    pub fn sample<R: Rng>(&self, rng: &mut R, t: u64) -> Result<Vec<f64>> {
        self.validate()?;
        Ok(match self {
            SetpointScheduler::Grid { values } => vec![values[rng.random_range(0..values.len())]],
            SetpointScheduler::PairGrid { values, max_gap } => loop {
                let a = values[rng.random_range(0..values.len())];
                let b = values[rng.random_range(0..values.len())];
                if (a - b).abs() <= max_gap + 1e-12 {
                    break vec![a, b];
                }
            },
            SetpointScheduler::Sinusoid {
                amplitude,
                period,
                offset,
            } => {
                vec![offset + amplitude * (2.0 * PI * t as f64 / period).sin()]
            }
            SetpointScheduler::PiecewiseConstant { times, values } => {
                let i = times.iter().rposition(|&s| s <= t).unwrap_or(0);
                values[i].clone()
            }
        })
    }

    /// Every set-point a grid kind can produce, in order.
    pub fn support(&self) -> Vec<Vec<f64>> {
        match self {
            SetpointScheduler::Grid { values } => values.iter().map(|v| vec![*v]).collect(),
            SetpointScheduler::PairGrid { values, max_gap } => values
                .iter()
                .flat_map(|a| values.iter().map(move |b| (*a, *b)))
                .filter(|(a, b)| (a - b).abs() <= max_gap + 1e-12)
                .map(|(a, b)| vec![a, b])
                .collect(),
            SetpointScheduler::Sinusoid { .. } => vec![],
            SetpointScheduler::PiecewiseConstant { values, .. } => values.clone(),
        }
    }
}
