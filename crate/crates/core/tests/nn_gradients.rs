//! Analytic backpropagation against central finite differences.

use drlc_core::nn::{
    uniform_matrix, Activation, DenseNetwork, HiddenSpec, Matrix, Mode, NetworkSpec, OutputInit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// J = sum(G * net(x)) + sum over layers of l2/2 * (|W|^2 + |b|^2).
fn objective(net: &mut DenseNetwork, x: &Matrix, g: &Matrix) -> f64 {
    let (y, _) = net.forward(x, Mode::Train).unwrap();
    let fit: f64 = y
        .as_slice()
        .iter()
        .zip(g.as_slice())
        .map(|(a, b)| a * b)
        .sum();
    let decay: f64 = net
        .layers()
        .iter()
        .map(|l| {
            let sq: f64 = l
                .weights
                .as_slice()
                .iter()
                .chain(&l.biases)
                .map(|v| v * v)
                .sum();
            0.5 * l.l2_decay * sq
        })
        .sum();
    fit + decay
}

/// Relative error with a magnitude floor of 1e-3. Gradients below the floor
/// (biases feeding batch norm are structurally zero) are dominated by the
/// ~1e-9 round-off of the differenced objective and get an absolute 1e-8 test.
fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// Max relative error over every parameter and input entry.
fn max_gradient_error(net: &mut DenseNetwork, x: &Matrix, g: &Matrix) -> f64 {
    let h = 1e-5;
    let (_, cache) = net.forward(x, Mode::Train).unwrap();
    let grads = net.backward(&cache, g).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let mut worst = 0.0f64;
    for (block, expected) in analytic.iter().enumerate() {
        for j in 0..expected.len() {
            let orig = net.params()[block][j];
            net.params_mut()[block][j] = orig + h;
            let up = objective(net, x, g);
            net.params_mut()[block][j] = orig - h;
            let down = objective(net, x, g);
            net.params_mut()[block][j] = orig;
            let fd = (up - down) / (2.0 * h);
            worst = worst.max(relative_error(expected[j], fd));
        }
    }
    let mut xp = x.clone();
    for j in 0..x.as_slice().len() {
        let orig = x.as_slice()[j];
        xp.as_mut_slice()[j] = orig + h;
        let up = objective(net, &xp, g);
        xp.as_mut_slice()[j] = orig - h;
        let down = objective(net, &xp, g);
        xp.as_mut_slice()[j] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max(relative_error(grads.input.as_slice()[j], fd));
    }
    worst
}

fn random_network(rng: &mut ChaCha8Rng, batch_norm: bool) -> (DenseNetwork, Matrix, Matrix) {
    let input = rng.random_range(1..=6);
    let output = rng.random_range(1..=3);
    let depth = rng.random_range(1..=3);
    let hidden = (0..depth)
        .map(|i| HiddenSpec {
            width: rng.random_range(2..=16),
            activation: Activation::ALL[rng.random_range(0..4)],
            batch_norm,
            l2_decay: if i == 1 { 1e-4 } else { 0.0 },
        })
        .collect();
    let spec = NetworkSpec {
        hidden,
        output_activation: Activation::ALL[rng.random_range(0..4)],
        output_init: OutputInit::Xavier,
    };
    let mut net = DenseNetwork::new(input, output, &spec, rng).unwrap();
    // Zero biases put samples exactly on ReLU kinks (e.g. a row whose hidden
    // units are all clamped), where the derivative is undefined.
    for layer in net.layers_mut() {
        layer
            .biases
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-0.5..0.5));
    }
    let batch = rng.random_range(4..=12);
    let x = uniform_matrix(batch, input, 2.0, rng).unwrap();
    let g = uniform_matrix(batch, output, 1.0, rng).unwrap();
    (net, x, g)
}

#[test]
fn every_activation_with_and_without_batch_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..20 {
        for bn in [false, true] {
            let (mut net, x, g) = random_network(&mut rng, bn);
            let err = max_gradient_error(&mut net, &x, &g);
            assert!(
                err <= 1e-5,
                "trial {trial} bn={bn}: relative error {err:.3e}"
            );
        }
    }
}

#[test]
fn standard_two_layer_net() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut net = DenseNetwork::new(4, 2, &NetworkSpec::with_widths(8, 8), &mut rng).unwrap();
    let x = uniform_matrix(10, 4, 1.5, &mut rng).unwrap();
    let g = uniform_matrix(10, 2, 1.0, &mut rng).unwrap();
    let err = max_gradient_error(&mut net, &x, &g);
    assert!(err <= 1e-5, "relative error {err:.3e}");
}

#[test]
fn batch_norm_train_output_is_standardized() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let spec = NetworkSpec {
        hidden: vec![HiddenSpec {
            width: 6,
            activation: Activation::Linear,
            batch_norm: true,
            l2_decay: 0.0,
        }],
        output_activation: Activation::Linear,
        output_init: OutputInit::Xavier,
    };
    let mut net = DenseNetwork::new(3, 1, &spec, &mut rng).unwrap();
    let x = uniform_matrix(32, 3, 4.0, &mut rng).unwrap();
    // Linear activation with gamma = 1, beta = 0: the hidden output is the
    // normalized pre-activation. Read it back by replacing the output layer
    // with a 6x6 identity.
    let mut layers = net.layers().to_vec();
    layers[1] =
        drlc_core::nn::DenseLayer::new(Matrix::identity(6), vec![0.0; 6], Activation::Linear)
            .unwrap();
    net = DenseNetwork::from_layers(layers).unwrap();
    let (y, _) = net.forward(&x, Mode::Train).unwrap();
    for j in 0..6 {
        let col: Vec<f64> = (0..32).map(|r| y[(r, j)]).collect();
        let mean = col.iter().sum::<f64>() / 32.0;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0;
        assert!(mean.abs() < 1e-6, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-3, "var {var}");
    }
}
