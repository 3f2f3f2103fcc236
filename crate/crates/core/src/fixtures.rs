//! Small reference networks used by tests, examples and the CLI smoke test.
//!
//! The weights are chosen by hand; expected values derived from them are
//! computed, never transcribed.

use crate::net::{Layer, Network, Shape};

/// 1×4×4 input, a 2×2 stride-2 convolution (4 neurons), a dense ReLU layer
/// of 2 neurons and a 2-class output layer.
///
/// The kernel weight on the top-left pixel of each window is `+1`, and the
/// second dense layer connects the first convolution neuron with weight `+1`
/// to its first neuron and `−1` to its second.
pub fn conv_fc_4x4() -> Network {
    Network::new(
        Shape::new(1, 4, 4),
        vec![
            Layer::convolutional(vec![1.0, 0.5, -0.5, 1.0], 2, -0.5, 2, true),
            Layer::fully_connected(
                vec![vec![1.0, -0.5, 0.5, -1.0], vec![-1.0, 1.0, -0.5, 0.5]],
                vec![0.0, 0.2],
                true,
            ),
            Layer::fully_connected(vec![vec![1.0, -1.0], vec![-1.0, 1.0]], vec![0.1, -0.1], false),
        ],
    )
    .expect("fixture network is well formed")
}

/// Two-input, two-class net with one hidden ReLU layer of three neurons.
pub fn tiny_2x3x2() -> Network {
    Network::new(
        Shape::new(1, 1, 2),
        vec![
            Layer::fully_connected(
                vec![vec![1.0, -1.0], vec![-0.5, 1.5], vec![1.0, 1.0]],
                vec![0.0, -0.2, -0.8],
                true,
            ),
            Layer::fully_connected(vec![vec![1.0, -1.0, 0.5], vec![-1.0, 1.0, -0.5]], vec![0.1, 0.0], false),
        ],
    )
    .expect("fixture network is well formed")
}
