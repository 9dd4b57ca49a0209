use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Length of the RL state for `n_y` outputs, `n_a` actions and the given lags.
pub fn state_dim(n_y: usize, n_a: usize, d_y: usize, d_a: usize) -> usize {
    n_y * (d_y + 1) + n_a * d_a + n_y
}

/// Flattens `<y_t, ..., y_{t-d_y}, a_{t-1}, ..., a_{t-d_a}, y_t - y_sp>`.
///
/// `outputs` and `actions` are oldest first; the last output is `y_t` and the
/// last action is `a_{t-1}`. Each time slice keeps its channels together.
pub fn build_rl_state(
    outputs: &[Vec<f64>],
    actions: &[Vec<f64>],
    setpoint: &[f64],
    d_y: usize,
    d_a: usize,
) -> Result<Vec<f64>> {
    if outputs.len() < d_y + 1 {
        return Err(Error::InsufficientHistory {
            needed: d_y + 1,
            available: outputs.len(),
        });
    }
    if actions.len() < d_a {
        return Err(Error::InsufficientHistory {
            needed: d_a,
            available: actions.len(),
        });
    }
    let current = &outputs[outputs.len() - 1];
    if current.len() != setpoint.len() {
        return Err(Error::InvalidShape(format!(
            "{} outputs but {} set-points",
            current.len(),
            setpoint.len()
        )));
    }
    let mut s = Vec::new();
    for y in outputs.iter().rev().take(d_y + 1) {
        s.extend_from_slice(y);
    }
    for a in actions.iter().rev().take(d_a) {
        s.extend_from_slice(a);
    }
    s.extend(current.iter().zip(setpoint).map(|(y, r)| y - r));
    Ok(s)
}

/// Rolling output and action histories, trimmed to what the state needs.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub d_y: usize,
    pub d_a: usize,
    outputs: VecDeque<Vec<f64>>,
    actions: VecDeque<Vec<f64>>,
}

impl History {
    pub fn new(d_y: usize, d_a: usize) -> Self {
        History {
            d_y,
            d_a,
            outputs: VecDeque::with_capacity(d_y + 2),
            actions: VecDeque::with_capacity(d_a + 1),
        }
    }

    pub fn push_output(&mut self, y: Vec<f64>) {
        if self.outputs.len() == self.d_y + 1 {
            self.outputs.pop_front();
        }
        self.outputs.push_back(y);
    }

    pub fn push_action(&mut self, a: Vec<f64>) {
        if self.d_a == 0 {
            return;
        }
        if self.actions.len() == self.d_a {
            self.actions.pop_front();
        }
        self.actions.push_back(a);
    }

    pub fn current_output(&self) -> Option<&[f64]> {
        self.outputs.back().map(Vec::as_slice)
    }

    pub fn state(&self, setpoint: &[f64]) -> Result<Vec<f64>> {
        let ys: Vec<Vec<f64>> = self.outputs.iter().cloned().collect();
        let acts: Vec<Vec<f64>> = self.actions.iter().cloned().collect();
        build_rl_state(&ys, &acts, setpoint, self.d_y, self.d_a)
    }
}
