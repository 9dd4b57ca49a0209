use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reward hypotheses for set-point tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardKind {
    /// Negative l1 tracking error of the post-action output.
    L1,
    /// 0 when every channel's error strictly shrank over the step, else -1.
    Polar,
    /// `c` inside the `epsilon` band on every channel, l1 reward outside.
    L1Epsilon { c: f64, epsilon: f64 },
}

impl RewardKind {
    pub fn validate(&self) -> Result<()> {
        if let RewardKind::L1Epsilon { c, epsilon } = *self {
            if !(c > 0.0 && c.is_finite() && epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "l1_epsilon needs c > 0 and epsilon > 0, got c = {c}, epsilon = {epsilon}"
                )));
            }
        }
        Ok(())
    }

    /// In-band tolerance, if this reward has one.
    pub fn tolerance(&self) -> Option<f64> {
        match *self {
            RewardKind::L1Epsilon { epsilon, .. } => Some(epsilon),
            _ => None,
        }
    }
}

fn l1(y: &[f64], setpoint: &[f64]) -> f64 {
    -y.iter()
        .zip(setpoint)
        .map(|(y, r)| (y - r).abs())
        .sum::<f64>()
}

/// Reward for the transition `y_t -> y_next` under `setpoint`.
pub fn compute_reward(
    kind: RewardKind,
    y_t: &[f64],
    y_next: &[f64],
    setpoint: &[f64],
) -> Result<f64> {
    if y_t.len() != setpoint.len() || y_next.len() != setpoint.len() {
        return Err(Error::InvalidShape(format!(
            "reward on {} / {} outputs with {} set-points",
            y_t.len(),
            y_next.len(),
            setpoint.len()
        )));
    }
    Ok(match kind {
        RewardKind::L1 => l1(y_next, setpoint),
        RewardKind::Polar => {
            let improved = y_t
                .iter()
                .zip(y_next)
                .zip(setpoint)
                .all(|((a, b), r)| (a - r).abs() > (b - r).abs());
            if improved {
                0.0
            } else {
                -1.0
            }
        }
        RewardKind::L1Epsilon { c, epsilon } => {
            if y_next
                .iter()
                .zip(setpoint)
                .all(|(y, r)| (y - r).abs() <= epsilon)
            {
                c
            } else {
                l1(y_next, setpoint)
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn l1_values() {
        assert_eq!(
            compute_reward(RewardKind::L1, &[0.0, 0.0], &[1.0, 2.0], &[0.0, 0.0]).unwrap(),
            -3.0
        );
        assert_eq!(
            compute_reward(RewardKind::L1, &[9.0], &[4.0], &[4.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn polar_needs_every_channel() {
        let r = compute_reward(RewardKind::Polar, &[2.0, 3.0], &[1.0, 3.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r, -1.0);
        let r = compute_reward(RewardKind::Polar, &[2.0, 3.0], &[1.0, 2.5], &[0.0, 0.0]).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn epsilon_band() {
        let k = RewardKind::L1Epsilon {
            c: 5.0,
            epsilon: 0.1,
        };
        assert_eq!(compute_reward(k, &[0.0], &[1.05], &[1.0]).unwrap(), 5.0);
        assert_eq!(compute_reward(k, &[0.0], &[1.5], &[1.0]).unwrap(), -0.5);
        assert!(RewardKind::L1Epsilon {
            c: 0.0,
            epsilon: 0.1
        }
        .validate()
        .is_err());
    }

    #[test]
    fn shape_checked() {
        assert!(compute_reward(RewardKind::L1, &[0.0], &[0.0, 1.0], &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn polar_range(a in prop::collection::vec(-10.0f64..10.0, 3), b in prop::collection::vec(-10.0f64..10.0, 3)) {
            let r = compute_reward(RewardKind::Polar, &a, &b, &[0.5, -0.5, 1.0]).unwrap();
            prop_assert!(r == 0.0 || r == -1.0);
        }

        #[test]
        fn l1_increases_when_an_error_shrinks(y in -10.0f64..10.0, r in -10.0f64..10.0, frac in 0.0f64..0.99) {
            prop_assume!((y - r).abs() > 1e-6);
            let closer = r + frac * (y - r);
            let before = compute_reward(RewardKind::L1, &[0.0], &[y], &[r]).unwrap();
            let after = compute_reward(RewardKind::L1, &[0.0], &[closer], &[r]).unwrap();
            prop_assert!(after > before);
        }

        #[test]
        fn epsilon_partition(y in -2.0f64..2.0) {
            let k = RewardKind::L1Epsilon { c: 3.0, epsilon: 0.5 };
            let r = compute_reward(k, &[0.0], &[y], &[0.0]).unwrap();
            if y.abs() <= 0.5 {
                prop_assert_eq!(r, 3.0);
            } else {
                prop_assert_eq!(r, -y.abs());
            }
        }
    }
}
