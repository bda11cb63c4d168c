//! Compares analytic gradients of a small random network against central
//! finite differences, parameter by parameter.
//!
//! ```text
//! cargo run --example gradient_check -- [seed]
//! ```

use boot_np::nn::{smooth_l1, smooth_l1_grad, DenseNet};
use boot_np::StreamRng;
use ndarray::Array2;
use rand::Rng;

fn loss(net: &DenseNet, x: &Array2<f64>, y: &[f64]) -> f64 {
    let out = net.forward(x.view()).unwrap();
    out.iter().zip(y).map(|(o, t)| smooth_l1(*o, *t).unwrap()).sum()
}

fn main() {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0);
    let mut rng = StreamRng::from_seed(seed);
    let net = DenseNet::init(&[3, 4, 2], &mut rng).unwrap();
    let x = Array2::from_shape_fn((1, 3), |_| rng.random_range(-1.0..1.0));
    let y: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();

    let out = net.forward(x.view()).unwrap();
    let seed_grad = Array2::from_shape_fn((1, 2), |(_, j)| smooth_l1_grad(out[[0, j]], y[j]));
    let grads = net.backward(x.view(), seed_grad.view()).unwrap();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    println!("{:>6} {:>6} {:>14} {:>14}", "layer", "index", "analytic", "numeric");
    for (li, g) in grads.layers.iter().enumerate() {
        for (j, analytic) in g.weights.iter().chain(g.bias.iter()).enumerate() {
            let nudge = |delta: f64| {
                let mut n = net.clone();
                let layer = &mut n.layers_mut()[li];
                let w = layer.weights.len();
                if j < w {
                    layer.weights.as_slice_mut().unwrap()[j] += delta;
                } else {
                    layer.bias[j - w] += delta;
                }
                loss(&n, &x, &y)
            };
            let numeric = (nudge(h) - nudge(-h)) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs());
            if denom > 1e-9 {
                worst = worst.max((analytic - numeric).abs() / denom);
            }
            println!("{li:>6} {j:>6} {analytic:>14.8} {numeric:>14.8}");
        }
    }
    println!("{} parameters, worst relative error {worst:.2e}", net.param_count());
}
