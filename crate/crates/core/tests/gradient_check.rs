//! Analytic gradients against central finite differences on toy networks.

use chansr::mll::{Activation, ElbSpec, Network};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;

fn toy(activation: Activation, residual: bool, seed: u64) -> (Network, Array2<f64>, Array2<f64>, Array2<f64>) {
    let spec = ElbSpec {
        hidden: [8, 8, 6, 4, 4],
        activation,
    };
    let mut net = Network::new(6, 5, spec, seed).unwrap();
    net.residual = residual;
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    // nonzero biases so no unit sits exactly on a ReLU kink
    for p in net.params.iter_mut().filter(|p| **p == 0.0) {
        *p = rng.random_range(-0.3..0.3);
    }
    let x = Array2::from_shape_fn((3, 6), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0));
    let w2 = Array2::from_shape_fn((3, 5), |_| [1.0, 1e-4, 0.0][rng.random_range(0..3)]);
    (net, x, y, w2)
}

/// Largest relative error over every parameter; also returns how many
/// parameters were probed.
fn worst_relative_error(net: &Network, x: &Array2<f64>, y: &Array2<f64>, w2: &Array2<f64>) -> (f64, usize) {
    let (_, grad) = net.loss_and_gradient(x.view(), y.view(), w2.view()).unwrap();
    let mut probe = net.clone();
    let mut worst = 0.0_f64;
    for i in 0..net.params.len() {
        let p0 = net.params[i];
        probe.params[i] = p0 + STEP;
        let up = probe.loss(x.view(), y.view(), w2.view()).unwrap();
        probe.params[i] = p0 - STEP;
        let down = probe.loss(x.view(), y.view(), w2.view()).unwrap();
        probe.params[i] = p0;
        let numeric = (up - down) / (2.0 * STEP);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    (worst, net.params.len())
}

#[test]
fn tanh_residual_gradients_match_differences() {
    let (net, x, y, w2) = toy(Activation::Tanh, true, 1);
    let (worst, probed) = worst_relative_error(&net, &x, &y, &w2);
    assert!(probed >= 100);
    assert!(worst < REL_TOL, "worst relative error {worst:e}");
}

#[test]
fn relu_residual_gradients_match_differences() {
    let (net, x, y, w2) = toy(Activation::Relu, true, 2);
    let (worst, _) = worst_relative_error(&net, &x, &y, &w2);
    assert!(worst < REL_TOL, "worst relative error {worst:e}");
}

#[test]
fn last_block_only_gradients_match_differences() {
    let (net, x, y, w2) = toy(Activation::Tanh, false, 3);
    let (worst, _) = worst_relative_error(&net, &x, &y, &w2);
    assert!(worst < REL_TOL, "worst relative error {worst:e}");
}
