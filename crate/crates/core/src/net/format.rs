//! Canonical network file.
//!
//! A JSON document:
//!
//! ```json
//! {
//!   "input_shape": [1, 4, 4],
//!   "num_classes": 2,
//!   "layers": [
//!     { "kind": "conv", "kernel_size": 2, "stride": 2,
//!       "weights": [1.0, 0.5, -0.5, 1.0], "biases": [0.0], "relu": true },
//!     { "kind": "dense", "weights": [ ... row-major outputs × inputs ... ],
//!       "biases": [0.0, 0.0], "relu": false }
//!   ]
//! }
//! ```
//!
//! Unknown fields are rejected. Numbers are written with shortest
//! round-trip formatting, so `load(save(n)) == n` bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InputPoint, Layer, LayerKind, Network, Shape};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub input_shape: [usize; 3],
    pub num_classes: usize,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerRecord {
    Dense {
        weights: Vec<f64>,
        biases: Vec<f64>,
        relu: bool,
    },
    Conv {
        kernel_size: usize,
        stride: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        relu: bool,
    },
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        let s = net.input_shape();
        NetworkFile {
            input_shape: [s.channels, s.height, s.width],
            num_classes: net.num_classes(),
            layers: net
                .layers()
                .iter()
                .map(|layer| match &layer.kind {
                    LayerKind::FullyConnected { weights, biases } => LayerRecord::Dense {
                        weights: weights.iter().flatten().copied().collect(),
                        biases: biases.clone(),
                        relu: layer.relu,
                    },
                    LayerKind::Convolutional {
                        kernel,
                        size,
                        bias,
                        stride,
                    } => LayerRecord::Conv {
                        kernel_size: *size,
                        stride: *stride,
                        weights: kernel.clone(),
                        biases: vec![*bias],
                        relu: layer.relu,
                    },
                })
                .collect(),
        }
    }
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        let [l, d1, d2] = self.input_shape;
        let input_shape = Shape::new(l, d1, d2);
        if input_shape.is_empty() {
            return Err(Error::Validation("input_shape has a zero dimension".into()));
        }
        let mut fan_in = input_shape;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (idx, rec) in self.layers.into_iter().enumerate() {
            let layer = match rec {
                LayerRecord::Dense {
                    weights,
                    biases,
                    relu,
                } => {
                    let inputs = fan_in.len();
                    if weights.len() != biases.len() * inputs {
                        return Err(Error::Validation(format!(
                            "layers[{idx}].weights: {} entries, expected {} outputs × {} inputs = {}",
                            weights.len(),
                            biases.len(),
                            inputs,
                            biases.len() * inputs
                        )));
                    }
                    let rows = weights.chunks(inputs.max(1)).map(<[f64]>::to_vec).collect();
                    fan_in = Shape::new(1, 1, biases.len());
                    Layer::fully_connected(rows, biases, relu)
                }
                LayerRecord::Conv {
                    kernel_size,
                    stride,
                    weights,
                    biases,
                    relu,
                } => {
                    if biases.len() != 1 {
                        return Err(Error::Validation(format!(
                            "layers[{idx}].biases: a convolution has one kernel, got {} biases",
                            biases.len()
                        )));
                    }
                    if kernel_size == 0 || stride == 0 || fan_in.height < kernel_size || fan_in.width < kernel_size {
                        return Err(Error::Validation(format!(
                            "layers[{idx}]: kernel_size {kernel_size} / stride {stride} do not fit input {}x{}",
                            fan_in.height, fan_in.width
                        )));
                    }
                    fan_in = Shape::new(
                        1,
                        (fan_in.height - kernel_size) / stride + 1,
                        (fan_in.width - kernel_size) / stride + 1,
                    );
                    Layer::convolutional(weights, kernel_size, biases[0], stride, relu)
                }
            };
            layers.push(layer);
        }
        let net = Network::new(input_shape, layers)?;
        if net.num_classes() != self.num_classes {
            return Err(Error::Validation(format!(
                "num_classes is {} but the output layer has {} neurons",
                self.num_classes,
                net.num_classes()
            )));
        }
        Ok(net)
    }
}

pub fn parse_network(text: &str) -> Result<Network> {
    let file: NetworkFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    file.into_network()
}

pub fn network_to_string(net: &Network) -> String {
    serde_json::to_string_pretty(&NetworkFile::from(net)).expect("network serializes")
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_network(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        Error::Validation(msg) => Error::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, network_to_string(net)).map_err(|e| Error::io(path, e))
}

/// Dataset file: `{"input_shape": [c, h, w], "points": [[...], ...]}`,
/// each point flattened like the network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub input_shape: [usize; 3],
    pub points: Vec<Vec<f64>>,
}

pub fn parse_dataset(text: &str) -> Result<Vec<InputPoint>> {
    let file: DatasetFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let [c, h, w] = file.input_shape;
    let shape = Shape::new(c, h, w);
    file.points.into_iter().map(|p| InputPoint::new(shape, p)).collect()
}

pub fn dataset_to_string(points: &[InputPoint]) -> Result<String> {
    let shape = points
        .first()
        .map(|p| p.shape())
        .ok_or_else(|| Error::Argument("empty dataset".into()))?;
    if points.iter().any(|p| p.shape() != shape) {
        return Err(Error::Argument("dataset points differ in shape".into()));
    }
    let file = DatasetFile {
        input_shape: [shape.channels, shape.height, shape.width],
        points: points.iter().map(|p| p.values().to_vec()).collect(),
    };
    Ok(serde_json::to_string(&file).expect("dataset serializes"))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<InputPoint>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_fixture() {
        let net = crate::fixtures::conv_fc_4x4();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_network(&net, &path).unwrap();
        assert_eq!(load_network(&path).unwrap(), net);
    }

    #[test]
    fn mismatched_weights_rejected() {
        let text = r#"{"input_shape":[1,1,3],"num_classes":2,
            "layers":[{"kind":"dense","weights":[1,2,3,4,5],"biases":[0,0],"relu":false}]}"#;
        let err = parse_network(text).unwrap_err();
        assert!(matches!(err, Error::Validation(ref m) if m.contains("layers[0].weights")), "{err}");
    }

    #[test]
    fn single_class_rejected() {
        let text = r#"{"input_shape":[1,1,2],"num_classes":1,
            "layers":[{"kind":"dense","weights":[1,2],"biases":[0],"relu":false}]}"#;
        assert!(matches!(parse_network(text), Err(Error::Validation(_))));
    }

    #[test]
    fn unknown_field_rejected_with_position() {
        let text = "{\"input_shape\":[1,1,2],\n\"num_classes\":2,\n\"colour\":1,\"layers\":[]}";
        let err = parse_network(text).unwrap_err();
        assert!(matches!(err, Error::Parse(ref m) if m.contains("line 3")), "{err}");
    }

    #[test]
    fn dataset_roundtrip_and_range_check() {
        let shape = Shape::new(1, 1, 2);
        let pts = vec![InputPoint::new(shape, vec![0.0, 1.0]).unwrap()];
        let text = dataset_to_string(&pts).unwrap();
        assert_eq!(parse_dataset(&text).unwrap(), pts);
        assert!(parse_dataset(r#"{"input_shape":[1,1,2],"points":[[0.5,1.5]]}"#).is_err());
        assert!(parse_dataset(r#"{"input_shape":[1,1,2],"points":[[0.5]]}"#).is_err());
    }
}
