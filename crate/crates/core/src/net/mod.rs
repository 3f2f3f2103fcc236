//! Layered ReLU classifiers: structure, exact evaluation and class confidence.
//!
//! Neurons are addressed by `(m, k)` with `m = 0` the input layer and
//! `k` a zero-based flat index. Spatial tensors are flattened channel-major,
//! then row-major: `k = c·h·w + i·w + j`. For a single channel this is the
//! usual `k = (i-1)·d2 + j` with one-based pixel coordinates.

mod format;

pub use format::{
    dataset_to_string, load_dataset, load_network, network_to_string, parse_dataset, parse_network, save_network,
    DatasetFile, NetworkFile,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor shape `(channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of zero-based `(channel, row, col)`.
    pub const fn index(&self, c: usize, i: usize, j: usize) -> usize {
        c * self.height * self.width + i * self.width + j
    }

    /// Inverse of [`Shape::index`].
    pub const fn coords(&self, k: usize) -> (usize, usize, usize) {
        let plane = self.height * self.width;
        (k / plane, (k % plane) / self.width, k % self.width)
    }
}

/// One affine row `b + Σ w·z_prev` in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineRow {
    pub bias: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineRow {
    pub fn eval(&self, prev: &[f64]) -> f64 {
        self.bias + self.terms.iter().map(|&(i, w)| w * prev[i]).sum::<f64>()
    }

    pub fn weight_sum(&self) -> f64 {
        self.terms.iter().map(|&(_, w)| w).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    /// `weights[k][k']` maps input `k'` to output `k`.
    FullyConnected {
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
    /// A single kernel of shape `channels × size × size`, no padding.
    Convolutional {
        kernel: Vec<f64>,
        size: usize,
        bias: f64,
        stride: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    pub relu: bool,
    input: Shape,
    output: Shape,
    rows: Vec<AffineRow>,
}

impl Layer {
    pub fn fully_connected(weights: Vec<Vec<f64>>, biases: Vec<f64>, relu: bool) -> Self {
        Layer {
            kind: LayerKind::FullyConnected { weights, biases },
            relu,
            input: Shape::new(0, 0, 0),
            output: Shape::new(0, 0, 0),
            rows: Vec::new(),
        }
    }

    pub fn convolutional(kernel: Vec<f64>, size: usize, bias: f64, stride: usize, relu: bool) -> Self {
        Layer {
            kind: LayerKind::Convolutional {
                kernel,
                size,
                bias,
                stride,
            },
            relu,
            input: Shape::new(0, 0, 0),
            output: Shape::new(0, 0, 0),
            rows: Vec::new(),
        }
    }

    pub fn input_shape(&self) -> Shape {
        self.input
    }

    pub fn output_shape(&self) -> Shape {
        self.output
    }

    pub fn width(&self) -> usize {
        self.output.len()
    }

    /// Sparse affine rows of this layer, one per output neuron.
    pub fn rows(&self) -> &[AffineRow] {
        &self.rows
    }

    fn bind(&mut self, input: Shape, position: usize) -> Result<()> {
        self.input = input;
        match &self.kind {
            LayerKind::FullyConnected { weights, biases } => {
                if weights.len() != biases.len() {
                    return Err(Error::Validation(format!(
                        "layer {position}: {} weight rows but {} biases",
                        weights.len(),
                        biases.len()
                    )));
                }
                if weights.is_empty() {
                    return Err(Error::Validation(format!("layer {position}: no neurons")));
                }
                for (k, row) in weights.iter().enumerate() {
                    if row.len() != input.len() {
                        return Err(Error::Validation(format!(
                            "layer {position}: weight row {k} has {} entries, expected {}",
                            row.len(),
                            input.len()
                        )));
                    }
                }
                self.output = Shape::new(1, 1, weights.len());
                self.rows = weights
                    .iter()
                    .zip(biases)
                    .map(|(row, &bias)| AffineRow {
                        bias,
                        terms: row.iter().copied().enumerate().collect(),
                    })
                    .collect();
            }
            LayerKind::Convolutional {
                kernel,
                size,
                bias,
                stride,
            } => {
                let (size, stride, bias) = (*size, *stride, *bias);
                if size == 0 || stride == 0 {
                    return Err(Error::Validation(format!(
                        "layer {position}: kernel size and stride must be positive"
                    )));
                }
                if kernel.len() != input.channels * size * size {
                    return Err(Error::Validation(format!(
                        "layer {position}: kernel has {} entries, expected {}",
                        kernel.len(),
                        input.channels * size * size
                    )));
                }
                if input.height < size || input.width < size {
                    return Err(Error::Validation(format!(
                        "layer {position}: kernel {size}x{size} larger than input {}x{}",
                        input.height, input.width
                    )));
                }
                let oh = (input.height - size) / stride + 1;
                let ow = (input.width - size) / stride + 1;
                self.output = Shape::new(1, oh, ow);
                let mut rows = Vec::with_capacity(oh * ow);
                for i in 0..oh {
                    for j in 0..ow {
                        let mut terms = Vec::with_capacity(kernel.len());
                        for v in 0..input.channels {
                            for p in 0..size {
                                for q in 0..size {
                                    let w = kernel[(v * size + p) * size + q];
                                    terms.push((input.index(v, i * stride + p, j * stride + q), w));
                                }
                            }
                        }
                        rows.push(AffineRow { bias, terms });
                    }
                }
                self.rows = rows;
            }
        }
        Ok(())
    }

    fn apply(&self, prev: &[f64], pre: &mut Vec<f64>) {
        pre.clear();
        match &self.kind {
            LayerKind::FullyConnected { weights, biases } => {
                for (row, b) in weights.iter().zip(biases) {
                    let mut acc = *b;
                    for (w, z) in row.iter().zip(prev) {
                        acc += w * z;
                    }
                    pre.push(acc);
                }
            }
            LayerKind::Convolutional {
                kernel,
                size,
                bias,
                stride,
            } => {
                let inp = self.input;
                for i in 0..self.output.height {
                    for j in 0..self.output.width {
                        let mut acc = *bias;
                        for v in 0..inp.channels {
                            for p in 0..*size {
                                for q in 0..*size {
                                    acc += kernel[(v * size + p) * size + q]
                                        * prev[inp.index(v, i * stride + p, j * stride + q)];
                                }
                            }
                        }
                        pre.push(acc);
                    }
                }
            }
        }
    }
}

/// A validated feed-forward classifier. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_shape: Shape,
    layers: Vec<Layer>,
}

/// Pre- and post-activation values of every neuron for one input.
///
/// Index 0 holds the input itself in both vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Trace {
    pub fn scores(&self) -> &[f64] {
        self.post.last().expect("trace always holds the input layer")
    }
}

impl Network {
    pub fn new(input_shape: Shape, mut layers: Vec<Layer>) -> Result<Self> {
        if input_shape.is_empty() {
            return Err(Error::Validation("input shape has no entries".into()));
        }
        if layers.is_empty() {
            return Err(Error::Validation("network has no layers".into()));
        }
        let mut shape = input_shape;
        for (m, layer) in layers.iter_mut().enumerate() {
            layer.bind(shape, m + 1)?;
            shape = layer.output;
        }
        let last = layers.last().expect("non-empty");
        if last.relu {
            return Err(Error::Validation("output layer must not apply ReLU".into()));
        }
        if last.width() < 2 {
            return Err(Error::Validation(format!(
                "a classifier needs more than one class, got {}",
                last.width()
            )));
        }
        Ok(Network {
            input_shape,
            layers,
        })
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.len()
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map(Layer::width).unwrap_or(0)
    }

    /// Number of non-input layers, `L`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Layer `m` for `1 ≤ m ≤ L`.
    pub fn layer(&self, m: usize) -> &Layer {
        &self.layers[m - 1]
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of neurons in layer `m`, including `m = 0`.
    pub fn layer_width(&self, m: usize) -> usize {
        if m == 0 {
            self.input_len()
        } else {
            self.layer(m).width()
        }
    }

    pub fn layer_shape(&self, m: usize) -> Shape {
        if m == 0 {
            self.input_shape
        } else {
            self.layer(m).output
        }
    }

    pub fn max_width(&self) -> usize {
        self.layers.iter().map(Layer::width).max().unwrap_or(0)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len() {
            return Err(Error::InputShape {
                expected: self.input_len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Exact forward pass with the full per-neuron trace.
    pub fn forward(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut pre = Vec::with_capacity(self.layers.len() + 1);
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        pre.push(x.to_vec());
        post.push(x.to_vec());
        for layer in &self.layers {
            let mut hat = Vec::with_capacity(layer.width());
            layer.apply(post.last().expect("non-empty"), &mut hat);
            let z = if layer.relu {
                hat.iter().map(|&v| v.max(0.0)).collect()
            } else {
                hat.clone()
            };
            pre.push(hat);
            post.push(z);
        }
        Ok(Trace { pre, post })
    }

    /// Output scores only.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.apply(&cur, &mut next);
            if layer.relu {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Class confidence of `class` at input `x`.
    pub fn confidence(&self, x: &[f64], class: usize) -> Result<f64> {
        class_confidence(&self.scores(x)?, class)
    }
}

/// `scores[class] − max_{other ≠ class} scores[other]`.
///
/// Positive iff `class` is the unique argmax.
pub fn class_confidence(scores: &[f64], class: usize) -> Result<f64> {
    if class >= scores.len() || scores.len() < 2 {
        return Err(Error::ClassIndex {
            index: class,
            classes: scores.len(),
        });
    }
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != class)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(scores[class] - runner_up)
}

/// Index of the strongest competitor of `class` (lowest index on ties).
pub fn runner_up(scores: &[f64], class: usize) -> usize {
    let mut best = usize::MAX;
    for (c, &s) in scores.iter().enumerate() {
        if c != class && (best == usize::MAX || s > scores[best]) {
            best = c;
        }
    }
    best
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

/// A point of the image domain `[0,1]^{l×d1×d2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPoint {
    shape: Shape,
    values: Vec<f64>,
}

impl InputPoint {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::InputShape {
                expected: shape.len(),
                got: values.len(),
            });
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Argument(format!(
                "input entry {k} = {v} lies outside [0,1]"
            )));
        }
        Ok(InputPoint { shape, values })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}
