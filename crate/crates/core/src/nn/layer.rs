use rand::Rng;
use rand_distr::{Distribution, Uniform};

use super::{Activation, Matrix};
use crate::error::{Error, Result};

/// Draws an `out_dim x in_dim` matrix from the Glorot-uniform distribution,
/// `U[-b, b]` with `b = sqrt(6 / (in_dim + out_dim))`.
pub fn xavier_uniform<R: Rng + ?Sized>(
    in_dim: usize,
    out_dim: usize,
    rng: &mut R,
) -> Result<Matrix> {
    if in_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidShape(format!(
            "xavier init needs positive dims, got in={in_dim} out={out_dim}"
        )));
    }
    let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
    uniform_matrix(out_dim, in_dim, bound, rng)
}

/// `rows x cols` matrix with entries drawn from `U[-bound, bound]`.
pub fn uniform_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    bound: f64,
    rng: &mut R,
) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidShape(format!(
            "cannot draw a {rows}x{cols} matrix"
        )));
    }
    if !(bound.is_finite() && bound > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "uniform bound must be positive, got {bound}"
        )));
    }
    let dist = Uniform::new_inclusive(-bound, bound)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Per-feature batch normalization of a layer's pre-activation.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub epsilon: f64,
    /// Weight kept on the old running statistic at each training batch.
    pub momentum: f64,
}

impl BatchNorm {
    pub const DEFAULT_EPSILON: f64 = 1e-5;
    pub const DEFAULT_MOMENTUM: f64 = 0.99;

    pub fn new(features: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; features],
            beta: vec![0.0; features],
            running_mean: vec![0.0; features],
            running_var: vec![1.0; features],
            epsilon: Self::DEFAULT_EPSILON,
            momentum: Self::DEFAULT_MOMENTUM,
        }
    }

    pub fn features(&self) -> usize {
        self.gamma.len()
    }
}

/// A dense layer `y = f(BN(W u + b))`, the batch norm being optional.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`.
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
    pub batch_norm: Option<BatchNorm>,
    /// Added to the weight and bias gradients as `l2_decay * param`.
    pub l2_decay: f64,
}

impl DenseLayer {
    pub fn new(weights: Matrix, biases: Vec<f64>, activation: Activation) -> Result<Self> {
        if biases.len() != weights.rows() {
            return Err(Error::InvalidShape(format!(
                "{} biases for {} output units",
                biases.len(),
                weights.rows()
            )));
        }
        Ok(DenseLayer {
            weights,
            biases,
            activation,
            batch_norm: None,
            l2_decay: 0.0,
        })
    }

    pub fn with_batch_norm(mut self) -> Self {
        self.batch_norm = Some(BatchNorm::new(self.out_dim()));
        self
    }

    pub fn with_l2_decay(mut self, l2: f64) -> Result<Self> {
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "l2 decay must be >= 0, got {l2}"
            )));
        }
        self.l2_decay = l2;
        Ok(self)
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn param_count(&self) -> usize {
        let bn = self.batch_norm.as_ref().map_or(0, |b| 2 * b.features());
        self.weights.as_slice().len() + self.biases.len() + bn
    }
}
