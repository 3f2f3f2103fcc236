//! Random networks shared by the integration tests.
#![allow(dead_code)]

use globrob::net::{argmax, Layer, Network, Shape};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Dense ReLU net with weights in `[-1, 1]` and biases in `[-0.5, 0.5]`.
pub fn random_net(rng: &mut ChaCha8Rng, shape: Shape, hidden: &[usize], classes: usize) -> Network {
    let mut layers = Vec::new();
    let mut prev = shape.len();
    let widths: Vec<usize> = hidden.iter().copied().chain([classes]).collect();
    for (m, &w) in widths.iter().enumerate() {
        let weights = (0..w).map(|_| (0..prev).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let biases = (0..w).map(|_| rng.gen_range(-0.5..0.5)).collect();
        layers.push(Layer::fully_connected(weights, biases, m + 1 < widths.len()));
        prev = w;
    }
    Network::new(shape, layers).expect("random net is well formed")
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Per-class win counts over uniform samples of the input box.
pub fn class_counts(net: &Network, rng: &mut ChaCha8Rng, samples: usize) -> Vec<usize> {
    let mut counts = vec![0; net.num_classes()];
    for _ in 0..samples {
        let x = uniform(rng, net.input_len());
        counts[argmax(&net.scores(&x).unwrap())] += 1;
    }
    counts
}

/// A net on which at least two classes win somewhere, with the most
/// frequent winner as source class.
pub fn interesting_net(rng: &mut ChaCha8Rng, shape: Shape, hidden: &[usize], classes: usize) -> (Network, usize) {
    loop {
        let net = random_net(rng, shape, hidden, classes);
        let counts = class_counts(&net, rng, 400);
        if counts.iter().filter(|&&c| c > 0).count() >= 2 {
            let c = (0..classes).max_by_key(|&c| counts[c]).unwrap();
            return (net, c);
        }
    }
}
