//! JSON weight format.
//!
//! ```json
//! {
//!   "format": "radguard-network",
//!   "version": 1,
//!   "input_shape": [1, 28, 28],
//!   "label_count": 10,
//!   "layers": [
//!     {"kind": "conv2d", "in_channels": 1, "out_channels": 6, "kernel": [3, 3],
//!      "stride": 1, "padding": 0, "weights": [...], "bias": [...]},
//!     {"kind": "activation", "function": "relu"},
//!     {"kind": "maxpool2d", "window": [2, 2]},
//!     {"kind": "dense", "inputs": 1014, "outputs": 10, "weights": [...], "bias": [...]}
//!   ]
//! }
//! ```
//!
//! Weight arrays are row-major: dense is `outputs × inputs`, conv2d is
//! `out_channels × in_channels × kh × kw`. `stride` and `padding` default to
//! 1 and 0.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::network::{Activation, Conv2d, Dense, Layer, Network};

pub const FORMAT_NAME: &str = "radguard-network";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    input_shape: Vec<usize>,
    label_count: usize,
    layers: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum LayerRecord {
    Dense {
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: [usize; 2],
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Maxpool2d {
        window: [usize; 2],
    },
    Activation {
        function: Activation,
    },
}

fn one() -> usize {
    1
}

impl From<&Layer> for LayerRecord {
    fn from(layer: &Layer) -> Self {
        match layer {
            Layer::Dense(d) => LayerRecord::Dense {
                inputs: d.inputs,
                outputs: d.outputs,
                weights: d.weights.clone(),
                bias: d.bias.clone(),
            },
            Layer::Conv2d(c) => LayerRecord::Conv2d {
                in_channels: c.in_channels,
                out_channels: c.out_channels,
                kernel: c.kernel,
                stride: c.stride,
                padding: c.padding,
                weights: c.weights.clone(),
                bias: c.bias.clone(),
            },
            Layer::MaxPool2d { window } => LayerRecord::Maxpool2d { window: *window },
            Layer::Activation(a) => LayerRecord::Activation { function: *a },
        }
    }
}

impl From<LayerRecord> for Layer {
    fn from(r: LayerRecord) -> Self {
        match r {
            LayerRecord::Dense { inputs, outputs, weights, bias } => Layer::Dense(Dense { inputs, outputs, weights, bias }),
            LayerRecord::Conv2d { in_channels, out_channels, kernel, stride, padding, weights, bias } => {
                Layer::Conv2d(Conv2d { in_channels, out_channels, kernel, stride, padding, weights, bias })
            }
            LayerRecord::Maxpool2d { window } => Layer::MaxPool2d { window },
            LayerRecord::Activation { function } => Layer::Activation(function),
        }
    }
}

pub fn to_json(net: &Network) -> String {
    let doc = Document {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        input_shape: net.input_shape().to_vec(),
        label_count: net.label_count(),
        layers: net
            .layers()
            .iter()
            .map(|l| serde_json::to_value(LayerRecord::from(l)).expect("layer records serialize"))
            .collect(),
    };
    serde_json::to_string(&doc).expect("network document serializes")
}

pub fn from_json(text: &str) -> Result<Network> {
    let doc: Document = serde_json::from_str(text).map_err(|e| Error::parse(None, e.to_string()))?;
    if doc.format != FORMAT_NAME {
        return Err(Error::parse(None, format!("unknown format `{}`", doc.format)));
    }
    if doc.version != FORMAT_VERSION {
        return Err(Error::parse(None, format!("unsupported format version {}", doc.version)));
    }
    let layers = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let record: LayerRecord = serde_json::from_value(v).map_err(|e| Error::parse(Some(i), e.to_string()))?;
            let layer = Layer::from(record);
            let finite = match &layer {
                Layer::Dense(d) => d.weights.iter().chain(&d.bias).all(|v| v.is_finite()),
                Layer::Conv2d(c) => c.weights.iter().chain(&c.bias).all(|v| v.is_finite()),
                _ => true,
            };
            if !finite {
                return Err(Error::parse(Some(i), "non-finite parameter"));
            }
            Ok(layer)
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(doc.input_shape, layers, doc.label_count)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    from_json(&fs::read_to_string(path)?)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_json(net))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Architecture;

    #[test]
    fn round_trip_preserves_scores_exactly() {
        let net = "4c2,mp2,5,3".parse::<Architecture>().unwrap().build(&[1, 5, 5], Activation::Sigmoid, 11).unwrap();
        let back = from_json(&to_json(&net)).unwrap();
        assert_eq!(back, net);
        let x: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
        assert_eq!(net.scores(&x).unwrap(), back.scores(&x).unwrap());
    }

    #[test]
    fn rejects_unknown_version() {
        let net = "3,2".parse::<Architecture>().unwrap().build(&[2], Activation::Relu, 0).unwrap();
        let text = to_json(&net).replace("\"version\":1", "\"version\":9");
        let err = from_json(&text).unwrap_err();
        assert!(err.to_string().contains("version 9"), "{err}");
    }

    #[test]
    fn malformed_layer_names_its_index() {
        let text = r#"{"format":"radguard-network","version":1,"input_shape":[2],"label_count":2,
            "layers":[{"kind":"activation","function":"relu"},{"kind":"dense","inputs":2}]}"#;
        assert!(matches!(from_json(text), Err(Error::Parse { layer: Some(1), .. })));
    }

    #[test]
    fn inconsistent_shapes_name_the_layer() {
        let text = r#"{"format":"radguard-network","version":1,"input_shape":[2],"label_count":2,
            "layers":[{"kind":"dense","inputs":2,"outputs":2,"weights":[1,0,0,1],"bias":[0,0]},
                      {"kind":"dense","inputs":3,"outputs":2,"weights":[1,0,0,1,0,0],"bias":[0,0]}]}"#;
        assert!(matches!(from_json(text), Err(Error::Parse { layer: Some(1), .. })));
    }

    #[test]
    fn stride_and_padding_default() {
        let text = r#"{"format":"radguard-network","version":1,"input_shape":[1,3,3],"label_count":4,
            "layers":[{"kind":"conv2d","in_channels":1,"out_channels":1,"kernel":[2,2],"weights":[1,1,1,1],"bias":[0]}]}"#;
        let net = from_json(text).unwrap();
        match &net.layers()[0] {
            Layer::Conv2d(c) => assert_eq!((c.stride, c.padding), (1, 0)),
            _ => unreachable!(),
        }
    }
}
