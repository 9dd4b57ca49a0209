use std::collections::VecDeque;

use crate::error::{Error, Result};

/// SISO discrete transfer function in powers of `z^-1`,
///
/// `G(z) = (b0 + b1 z^-1 + ... ) / (1 + a1 z^-1 + ...)`,
///
/// simulated as the difference equation
/// `y[t+1] = sum_k b_k u[t+1-k] - sum_{k>=1} a_k y[t+1-k]`.
///
/// [`step`](Self::step) takes the action applied at time `t` and returns
/// `y[t+1]`, so the model must be strictly proper (`b0 = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTransferFunction {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    /// Most recent first: u[t], u[t-1], ...
    inputs: VecDeque<f64>,
    /// Most recent first: y[t], y[t-1], ...
    outputs: VecDeque<f64>,
}

impl DiscreteTransferFunction {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        if denominator.first() != Some(&1.0) {
            return Err(Error::InvalidParameter(
                "denominator must start with a leading coefficient of 1".into(),
            ));
        }
        if numerator.len() < 2 || numerator[0] != 0.0 {
            return Err(Error::InvalidParameter(
                "numerator must be strictly proper: [0, b1, ...]".into(),
            ));
        }
        if numerator.iter().chain(&denominator).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        let nu = numerator.len() - 1;
        let ny = denominator.len().saturating_sub(1).max(1);
        Ok(DiscreteTransferFunction {
            numerator,
            denominator,
            inputs: VecDeque::from(vec![0.0; nu]),
            outputs: VecDeque::from(vec![0.0; ny]),
        })
    }

    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    /// Current output `y[t]`.
    pub fn output(&self) -> f64 {
        self.outputs[0]
    }

    /// `sum(b) / sum(a)`.
    pub fn dc_gain(&self) -> f64 {
        self.numerator.iter().sum::<f64>() / self.denominator.iter().sum::<f64>()
    }

    pub fn step(&mut self, u: f64) -> f64 {
        self.inputs.pop_back();
        self.inputs.push_front(u);
        let forced: f64 = self.numerator[1..]
            .iter()
            .zip(&self.inputs)
            .map(|(b, u)| b * u)
            .sum();
        let free: f64 = self.denominator[1..]
            .iter()
            .zip(&self.outputs)
            .map(|(a, y)| a * y)
            .sum();
        let y = forced - free;
        self.outputs.pop_back();
        self.outputs.push_front(y);
        y
    }

    pub fn scale_gain(&mut self, factor: f64) {
        self.numerator.iter_mut().for_each(|b| *b *= factor);
    }

    /// Back to rest: zero input and output histories.
    pub fn reset(&mut self) {
        self.inputs.iter_mut().for_each(|v| *v = 0.0);
        self.outputs.iter_mut().for_each(|v| *v = 0.0);
    }
}
