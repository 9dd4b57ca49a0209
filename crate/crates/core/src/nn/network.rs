//! Multilayer dense network with cached forward passes and hand-derived
//! backpropagation.
//!
//! Batches are matrices with one sample per row. A training-mode forward pass
//! normalizes with batch statistics and folds them into the running averages;
//! inference uses the running averages and leaves the network untouched.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{uniform_matrix, xavier_uniform};
use super::{Activation, DenseLayer, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// One hidden layer of a [`NetworkSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HiddenSpec {
    pub width: usize,
    #[serde(default = "default_hidden_activation")]
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub batch_norm: bool,
    #[serde(default)]
    pub l2_decay: f64,
}

fn default_hidden_activation() -> Activation {
    Activation::Relu
}

fn default_true() -> bool {
    true
}

/// How the output layer's weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputInit {
    Xavier,
    Uniform { bound: f64 },
}

/// Architecture description used to build a [`DenseNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub hidden: Vec<HiddenSpec>,
    #[serde(default = "default_output_activation")]
    pub output_activation: Activation,
    #[serde(default = "default_output_init")]
    pub output_init: OutputInit,
}

fn default_output_activation() -> Activation {
    Activation::Linear
}

fn default_output_init() -> OutputInit {
    OutputInit::Xavier
}

impl NetworkSpec {
    pub const DEFAULT_L2_DECAY: f64 = 1e-4;

    /// Two batch-normalized ReLU hidden layers of 400 and 300 units, the
    /// second one carrying the L2 weight decay, and a linear output.
    pub fn standard() -> Self {
        Self::with_widths(400, 300)
    }

    pub fn with_widths(first: usize, second: usize) -> Self {
        NetworkSpec {
            hidden: vec![
                HiddenSpec {
                    width: first,
                    activation: Activation::Relu,
                    batch_norm: true,
                    l2_decay: 0.0,
                },
                HiddenSpec {
                    width: second,
                    activation: Activation::Relu,
                    batch_norm: true,
                    l2_decay: Self::DEFAULT_L2_DECAY,
                },
            ],
            output_activation: Activation::Linear,
            output_init: OutputInit::Xavier,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, h) in self.hidden.iter().enumerate() {
            if h.width == 0 {
                return Err(Error::InvalidShape(format!(
                    "hidden layer {i} has zero width"
                )));
            }
            if !(h.l2_decay >= 0.0 && h.l2_decay.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "hidden layer {i} l2 decay must be >= 0"
                )));
            }
        }
        if let OutputInit::Uniform { bound } = self.output_init {
            if !(bound > 0.0 && bound.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "output init bound must be positive, got {bound}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    /// Argument of the activation function (after batch norm if present).
    pre_activation: Matrix,
    /// Normalized pre-activation and per-feature `1/sqrt(var + eps)`.
    batch_norm: Option<(Matrix, Vec<f64>)>,
}

/// Intermediates of one forward pass, consumed by [`DenseNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    mode: Mode,
    version: u64,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
}

/// Gradients of a scalar objective with respect to every parameter and to
/// the input batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub input: Matrix,
}

impl Gradients {
    /// Parameter gradients in the same order as [`DenseNetwork::params`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 4);
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(&l.biases[..]);
            if let (Some(g), Some(b)) = (&l.gamma, &l.beta) {
                out.push(&g[..]);
                out.push(&b[..]);
            }
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|s| s.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Feed-forward network: an ordered chain of [`DenseLayer`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    layers: Vec<DenseLayer>,
    /// Bumped on every mutable parameter access; guards against stale caches.
    version: u64,
}

impl DenseNetwork {
    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidShape(
                "network needs at least one layer".into(),
            ));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::InvalidShape(format!(
                    "layer {i} emits {} features but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(DenseNetwork { layers, version: 0 })
    }

    pub fn new<R: Rng + ?Sized>(
        input_dim: usize,
        output_dim: usize,
        spec: &NetworkSpec,
        rng: &mut R,
    ) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.hidden.len() + 1);
        let mut fan_in = input_dim;
        for h in &spec.hidden {
            let w = xavier_uniform(fan_in, h.width, rng)?;
            let mut layer =
                DenseLayer::new(w, vec![0.0; h.width], h.activation)?.with_l2_decay(h.l2_decay)?;
            if h.batch_norm {
                layer = layer.with_batch_norm();
            }
            layers.push(layer);
            fan_in = h.width;
        }
        let w = match spec.output_init {
            OutputInit::Xavier => xavier_uniform(fan_in, output_dim, rng)?,
            OutputInit::Uniform { bound } => uniform_matrix(output_dim, fan_in, bound, rng)?,
        };
        layers.push(DenseLayer::new(
            w,
            vec![0.0; output_dim],
            spec.output_activation,
        )?);
        Self::from_layers(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Mutable layer access; counts as a parameter change.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Trainable parameters: per layer weights, biases, then gamma and beta
    /// when batch-normalized.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.layers.len() * 4);
        for l in &self.layers {
            out.push(l.weights.as_slice());
            out.push(&l.biases[..]);
            if let Some(bn) = &l.batch_norm {
                out.push(&bn.gamma[..]);
                out.push(&bn.beta[..]);
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        let mut out = Vec::with_capacity(self.layers.len() * 4);
        for l in &mut self.layers {
            out.push(l.weights.as_mut_slice());
            out.push(&mut l.biases[..]);
            if let Some(bn) = &mut l.batch_norm {
                out.push(&mut bn.gamma[..]);
                out.push(&mut bn.beta[..]);
            }
        }
        out
    }

    /// Running means and variances of every batch-norm layer.
    pub fn running_stats(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for bn in self.layers.iter().filter_map(|l| l.batch_norm.as_ref()) {
            out.push(&bn.running_mean[..]);
            out.push(&bn.running_var[..]);
        }
        out
    }

    pub fn running_stats_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for bn in self.layers.iter_mut().filter_map(|l| l.batch_norm.as_mut()) {
            out.push(&mut bn.running_mean[..]);
            out.push(&mut bn.running_var[..]);
        }
        out
    }

    /// True when both networks have the same layer shapes, activations and
    /// batch-norm placement.
    pub fn same_architecture(&self, other: &DenseNetwork) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.shape() == b.weights.shape()
                    && a.activation == b.activation
                    && a.batch_norm.is_some() == b.batch_norm.is_some()
            })
    }

    /// Inference-mode evaluation; a pure function of parameters and input.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        self.check_input(input)?;
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &x)?;
            if let Some(bn) = &layer.batch_norm {
                for r in 0..z.rows() {
                    for (j, v) in z.row_mut(r).iter_mut().enumerate() {
                        let inv = 1.0 / (bn.running_var[j] + bn.epsilon).sqrt();
                        *v = bn.gamma[j] * (*v - bn.running_mean[j]) * inv + bn.beta[j];
                    }
                }
            }
            let act = layer.activation;
            z.as_mut_slice().iter_mut().for_each(|v| *v = act.apply(*v));
            check_finite(&z, i)?;
            x = z;
        }
        Ok(x)
    }

    /// Evaluates the network and records what [`backward`](Self::backward)
    /// needs. In [`Mode::Train`] batch norm uses batch statistics and updates
    /// the running averages.
    pub fn forward(&mut self, input: &Matrix, mode: Mode) -> Result<(Matrix, ForwardCache)> {
        self.check_input(input)?;
        if mode == Mode::Train && input.rows() == 0 {
            return Err(Error::InvalidShape("empty training batch".into()));
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let z = affine(layer, &x)?;
            let (pre, bn_cache) = match (&mut layer.batch_norm, mode) {
                (None, _) => (z, None),
                (Some(bn), Mode::Train) => {
                    let (out, xhat, inv_std) = batch_norm_train(bn, &z);
                    (out, Some((xhat, inv_std)))
                }
                (Some(bn), Mode::Infer) => {
                    let inv_std: Vec<f64> = bn
                        .running_var
                        .iter()
                        .map(|v| 1.0 / (v + bn.epsilon).sqrt())
                        .collect();
                    let mut xhat = z;
                    for r in 0..xhat.rows() {
                        for (j, v) in xhat.row_mut(r).iter_mut().enumerate() {
                            *v = (*v - bn.running_mean[j]) * inv_std[j];
                        }
                    }
                    let mut out = xhat.clone();
                    for r in 0..out.rows() {
                        for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                            *v = bn.gamma[j] * *v + bn.beta[j];
                        }
                    }
                    (out, Some((xhat, inv_std)))
                }
            };
            let act = layer.activation;
            let y = pre.map(|v| act.apply(v));
            check_finite(&y, i)?;
            caches.push(LayerCache {
                input: x,
                pre_activation: pre,
                batch_norm: bn_cache,
            });
            x = y;
        }
        Ok((
            x,
            ForwardCache {
                layers: caches,
                mode,
                version: self.version,
            },
        ))
    }

    /// Backpropagates `upstream = d objective / d output` through the cached
    /// pass. Weight and bias gradients include each layer's L2 decay term.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<Gradients> {
        if cache.version != self.version || cache.layers.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        let batch = cache.layers[0].input.rows();
        if upstream.shape() != (batch, self.output_dim()) {
            return Err(Error::InvalidShape(format!(
                "upstream gradient is {}x{}, expected {}x{}",
                upstream.rows(),
                upstream.cols(),
                batch,
                self.output_dim()
            )));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = upstream.clone();
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            // Through the activation.
            let act = layer.activation;
            if act != super::Activation::Linear {
                for (d, &p) in delta
                    .as_mut_slice()
                    .iter_mut()
                    .zip(lc.pre_activation.as_slice())
                {
                    *d *= act.derivative(p);
                }
            }
            // Through batch norm.
            let (dgamma, dbeta) = match (&layer.batch_norm, &lc.batch_norm) {
                (Some(bn), Some((xhat, inv_std))) => {
                    let (dz, dg, db) = batch_norm_backward(bn, xhat, inv_std, &delta, cache.mode);
                    delta = dz;
                    (Some(dg), Some(db))
                }
                (None, None) => (None, None),
                _ => return Err(Error::StaleCache),
            };
            // Through the affine map.
            let mut dw = delta.transpose_a_matmul(&lc.input)?;
            let mut db = column_sums(&delta);
            if layer.l2_decay > 0.0 {
                for (g, w) in dw.as_mut_slice().iter_mut().zip(layer.weights.as_slice()) {
                    *g += layer.l2_decay * w;
                }
                for (g, b) in db.iter_mut().zip(&layer.biases) {
                    *g += layer.l2_decay * b;
                }
            }
            let dx = delta.matmul(&layer.weights)?;
            grads.push(LayerGradients {
                weights: dw,
                biases: db,
                gamma: dgamma,
                beta: dbeta,
            });
            delta = dx;
        }
        grads.reverse();
        Ok(Gradients {
            layers: grads,
            input: delta,
        })
    }

    fn check_input(&self, input: &Matrix) -> Result<()> {
        if input.cols() != self.input_dim() {
            return Err(Error::InvalidShape(format!(
                "network expects {} input features, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        Ok(())
    }
}

fn affine(layer: &DenseLayer, x: &Matrix) -> Result<Matrix> {
    let mut z = x.matmul_transpose_b(&layer.weights)?;
    for r in 0..z.rows() {
        for (v, b) in z.row_mut(r).iter_mut().zip(&layer.biases) {
            *v += b;
        }
    }
    Ok(z)
}

fn check_finite(m: &Matrix, layer: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericOverflow(format!(
            "non-finite activation in layer {layer}"
        )))
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for r in 0..m.rows() {
        for (o, v) in out.iter_mut().zip(m.row(r)) {
            *o += v;
        }
    }
    out
}

/// Returns (gamma * xhat + beta, xhat, inv_std) and updates running stats.
fn batch_norm_train(bn: &mut super::BatchNorm, z: &Matrix) -> (Matrix, Matrix, Vec<f64>) {
    let n = z.rows() as f64;
    let mean: Vec<f64> = column_sums(z).into_iter().map(|s| s / n).collect();
    let mut var = vec![0.0; z.cols()];
    for r in 0..z.rows() {
        for ((v, x), m) in var.iter_mut().zip(z.row(r)).zip(&mean) {
            let d = x - m;
            *v += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + bn.epsilon).sqrt()).collect();

    let mut xhat = z.clone();
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        let xr = xhat.row_mut(r);
        for j in 0..xr.len() {
            xr[j] = (xr[j] - mean[j]) * inv_std[j];
        }
        let orow = out.row_mut(r);
        for j in 0..orow.len() {
            orow[j] = bn.gamma[j] * xhat[(r, j)] + bn.beta[j];
        }
    }

    let m = bn.momentum;
    for j in 0..mean.len() {
        bn.running_mean[j] = m * bn.running_mean[j] + (1.0 - m) * mean[j];
        bn.running_var[j] = m * bn.running_var[j] + (1.0 - m) * var[j];
    }
    (out, xhat, inv_std)
}

/// Returns (d/dz, d/dgamma, d/dbeta) given `dout = d/d(gamma * xhat + beta)`.
fn batch_norm_backward(
    bn: &super::BatchNorm,
    xhat: &Matrix,
    inv_std: &[f64],
    dout: &Matrix,
    mode: Mode,
) -> (Matrix, Vec<f64>, Vec<f64>) {
    let cols = dout.cols();
    let mut dgamma = vec![0.0; cols];
    let mut dbeta = vec![0.0; cols];
    for r in 0..dout.rows() {
        for j in 0..cols {
            dgamma[j] += dout[(r, j)] * xhat[(r, j)];
            dbeta[j] += dout[(r, j)];
        }
    }
    let mut dz = Matrix::zeros(dout.rows(), cols);
    match mode {
        // Running statistics are constants, so batch norm is a fixed affine map.
        Mode::Infer => {
            for r in 0..dout.rows() {
                for j in 0..cols {
                    dz[(r, j)] = dout[(r, j)] * bn.gamma[j] * inv_std[j];
                }
            }
        }
        Mode::Train => {
            let n = dout.rows() as f64;
            for r in 0..dout.rows() {
                for j in 0..cols {
                    // dxhat = dout * gamma; sums of dxhat and dxhat * xhat are
                    // gamma * dbeta and gamma * dgamma.
                    let dxhat = dout[(r, j)] * bn.gamma[j];
                    dz[(r, j)] = inv_std[j] / n
                        * (n * dxhat
                            - bn.gamma[j] * dbeta[j]
                            - xhat[(r, j)] * bn.gamma[j] * dgamma[j]);
                }
            }
        }
    }
    (dz, dgamma, dbeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(w: f64, act: Activation) -> DenseNetwork {
        let layer =
            DenseLayer::new(Matrix::from_vec(1, 1, vec![w]).unwrap(), vec![0.0], act).unwrap();
        DenseNetwork::from_layers(vec![layer]).unwrap()
    }

    #[test]
    fn relu_layer_worked_examples() {
        let net = single(2.0, Activation::Relu);
        let out = net
            .predict(&Matrix::from_vec(1, 1, vec![3.0]).unwrap())
            .unwrap();
        assert_eq!(out.as_slice(), &[6.0]);
        let net = single(1.0, Activation::Relu);
        let out = net
            .predict(&Matrix::from_vec(1, 1, vec![-5.0]).unwrap())
            .unwrap();
        assert_eq!(out.as_slice(), &[0.0]);
    }

    #[test]
    fn identity_linear_layer_is_identity() {
        let layer = DenseLayer::new(Matrix::identity(3), vec![0.0; 3], Activation::Linear).unwrap();
        let mut net = DenseNetwork::from_layers(vec![layer]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]]).unwrap();
        assert_eq!(net.predict(&x).unwrap(), x);
        let (y, _) = net.forward(&x, Mode::Train).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn linear_layer_weight_gradient_is_outer_product() {
        let w = Matrix::from_rows(&[[0.5, -1.0], [2.0, 0.25]]).unwrap();
        let layer = DenseLayer::new(w, vec![0.1, -0.1], Activation::Linear).unwrap();
        let mut net = DenseNetwork::from_layers(vec![layer]).unwrap();
        let u = Matrix::from_rows(&[[3.0, -2.0]]).unwrap();
        let delta = Matrix::from_rows(&[[1.5, -0.5]]).unwrap();
        let (_, cache) = net.forward(&u, Mode::Train).unwrap();
        let g = net.backward(&cache, &delta).unwrap();
        // dW[i][j] = delta[i] * u[j]
        assert_eq!(g.layers[0].weights.as_slice(), &[4.5, -3.0, -1.5, 1.0]);
        assert_eq!(g.layers[0].biases, vec![1.5, -0.5]);
        // dU = delta * W
        assert_eq!(
            g.input.as_slice(),
            &[1.5 * 0.5 + -0.5 * 2.0, 1.5 * -1.0 + -0.5 * 0.25]
        );
    }

    #[test]
    fn zero_upstream_leaves_only_decay() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = DenseNetwork::new(3, 2, &NetworkSpec::with_widths(5, 4), &mut rng).unwrap();
        let x = uniform_matrix(8, 3, 1.0, &mut rng).unwrap();
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        let g = net.backward(&cache, &Matrix::zeros(8, 2)).unwrap();
        for (i, (lg, layer)) in g.layers.iter().zip(net.layers()).enumerate() {
            for (gw, w) in lg.weights.as_slice().iter().zip(layer.weights.as_slice()) {
                assert_eq!(*gw, layer.l2_decay * w, "layer {i}");
            }
            assert!(lg.gamma.iter().flatten().all(|v| *v == 0.0));
            assert!(lg.beta.iter().flatten().all(|v| *v == 0.0));
        }
        assert!(g.input.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn stale_cache_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = DenseNetwork::new(2, 1, &NetworkSpec::with_widths(4, 4), &mut rng).unwrap();
        let x = uniform_matrix(4, 2, 1.0, &mut rng).unwrap();
        let (_, cache) = net.forward(&x, Mode::Train).unwrap();
        net.params_mut()[0][0] += 1.0;
        assert!(matches!(
            net.backward(&cache, &Matrix::zeros(4, 1)),
            Err(Error::StaleCache)
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut net = DenseNetwork::new(2, 1, &NetworkSpec::with_widths(4, 4), &mut rng).unwrap();
        assert!(matches!(
            net.predict(&Matrix::zeros(1, 3)),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            net.forward(&Matrix::zeros(1, 3), Mode::Train),
            Err(Error::InvalidShape(_))
        ));
        let (_, cache) = net.forward(&Matrix::zeros(3, 2), Mode::Train).unwrap();
        assert!(matches!(
            net.backward(&cache, &Matrix::zeros(2, 1)),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn overflow_reported() {
        let mut net = single(1e308, Activation::Linear);
        let x = Matrix::from_vec(1, 1, vec![1e10]).unwrap();
        assert!(matches!(net.predict(&x), Err(Error::NumericOverflow(_))));
        assert!(matches!(
            net.forward(&x, Mode::Infer),
            Err(Error::NumericOverflow(_))
        ));
    }

    #[test]
    fn infer_forward_matches_predict_and_keeps_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = DenseNetwork::new(3, 2, &NetworkSpec::with_widths(6, 5), &mut rng).unwrap();
        let x = uniform_matrix(10, 3, 2.0, &mut rng).unwrap();
        net.forward(&x, Mode::Train).unwrap();
        let before = net.clone();
        let (y, _) = net.forward(&x, Mode::Infer).unwrap();
        assert_eq!(net, before);
        assert_eq!(y, net.predict(&x).unwrap());
    }

    #[test]
    fn train_forward_updates_running_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = DenseNetwork::new(2, 1, &NetworkSpec::with_widths(3, 3), &mut rng).unwrap();
        let x = uniform_matrix(16, 2, 5.0, &mut rng).unwrap();
        let before: Vec<Vec<f64>> = net.running_stats().iter().map(|s| s.to_vec()).collect();
        net.forward(&x, Mode::Train).unwrap();
        let after: Vec<Vec<f64>> = net.running_stats().iter().map(|s| s.to_vec()).collect();
        assert_ne!(before, after);
        assert!(after.iter().skip(1).step_by(2).flatten().all(|v| *v >= 0.0));
    }
}
