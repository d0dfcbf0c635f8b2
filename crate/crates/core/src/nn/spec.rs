use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One layer of a model description.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSpec {
    /// 3x3 convolution, stride 1, zero "same" padding.
    Conv3x3 { out_channels: usize },
    MaxPool2x2,
    BatchNorm,
    Relu,
    Flatten,
    Dense { units: usize },
    /// Softmax over the final two logits.
    Softmax,
}

impl LayerSpec {
    pub fn name(&self) -> String {
        match self {
            LayerSpec::Conv3x3 { out_channels } => format!("conv3x3({out_channels})"),
            LayerSpec::MaxPool2x2 => "maxpool2x2".into(),
            LayerSpec::BatchNorm => "batchnorm".into(),
            LayerSpec::Relu => "relu".into(),
            LayerSpec::Flatten => "flatten".into(),
            LayerSpec::Dense { units } => format!("dense({units})"),
            LayerSpec::Softmax => "softmax".into(),
        }
    }
}

/// Activation shape per batch item `(height, width, channels)`; flattened
/// activations are `(1, 1, features)`.
pub type Shape = (usize, usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn2,
    Cnn5,
    Cnn10,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Cnn2 => "cnn2",
            ModelKind::Cnn5 => "cnn5",
            ModelKind::Cnn10 => "cnn10",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnn2" => Ok(ModelKind::Cnn2),
            "cnn5" => Ok(ModelKind::Cnn5),
            "cnn10" => Ok(ModelKind::Cnn10),
            _ => Err(invalid(format!("unknown model {s:?}"))),
        }
    }
}

pub const HIDDEN_UNITS: usize = 256;
pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input: Shape,
    pub layers: Vec<LayerSpec>,
}

fn block(out_channels: usize) -> [LayerSpec; 4] {
    [
        LayerSpec::Conv3x3 { out_channels },
        LayerSpec::Relu,
        LayerSpec::MaxPool2x2,
        LayerSpec::BatchNorm,
    ]
}

fn head() -> [LayerSpec; 5] {
    [
        LayerSpec::Flatten,
        LayerSpec::Dense { units: HIDDEN_UNITS },
        LayerSpec::Relu,
        LayerSpec::Dense { units: N_CLASSES },
        LayerSpec::Softmax,
    ]
}

impl ModelSpec {
    /// conv(32) block, then the dense head.
    pub fn cnn2(input: Shape) -> Self {
        let mut layers = block(32).to_vec();
        layers.extend(head());
        Self { input, layers }
    }

    /// conv(32) block, conv(64)-relu-conv(128)-relu-pool-bn, dense head.
    pub fn cnn5(input: Shape) -> Self {
        let mut layers = block(32).to_vec();
        layers.extend([
            LayerSpec::Conv3x3 { out_channels: 64 },
            LayerSpec::Relu,
            LayerSpec::Conv3x3 { out_channels: 128 },
            LayerSpec::Relu,
            LayerSpec::MaxPool2x2,
            LayerSpec::BatchNorm,
        ]);
        layers.extend(head());
        Self { input, layers }
    }

    /// Five conv blocks with 32, 64, 128, 256, 512 filters, dense head.
    pub fn cnn10(input: Shape) -> Self {
        let mut layers = Vec::new();
        for i in 0..5 {
            layers.extend(block(32 << i));
        }
        layers.extend(head());
        Self { input, layers }
    }

    pub fn of_kind(kind: ModelKind, input: Shape) -> Self {
        match kind {
            ModelKind::Cnn2 => Self::cnn2(input),
            ModelKind::Cnn5 => Self::cnn5(input),
            ModelKind::Cnn10 => Self::cnn10(input),
        }
    }

    /// Output shape after every layer; fails with the index of the first layer
    /// that cannot accept its input.
    pub fn trace(&self) -> Result<Vec<Shape>> {
        let (h, w, c) = self.input;
        if h == 0 || w == 0 || c == 0 {
            return Err(invalid(format!("empty input shape {:?}", self.input)));
        }
        let mut shape = self.input;
        let mut flat = false;
        let mut out = Vec::with_capacity(self.layers.len());
        let err = |layer: usize, reason: String| Error::Shape { layer, reason };
        for (i, l) in self.layers.iter().enumerate() {
            shape = match *l {
                LayerSpec::Conv3x3 { out_channels } => {
                    if flat {
                        return Err(err(i, "convolution after flatten".into()));
                    }
                    if out_channels == 0 {
                        return Err(err(i, "zero output channels".into()));
                    }
                    (shape.0, shape.1, out_channels)
                }
                LayerSpec::MaxPool2x2 => {
                    if flat || shape.0 % 2 != 0 || shape.1 % 2 != 0 {
                        return Err(err(i, format!("cannot pool {}x{}", shape.0, shape.1)));
                    }
                    (shape.0 / 2, shape.1 / 2, shape.2)
                }
                LayerSpec::BatchNorm | LayerSpec::Relu => shape,
                LayerSpec::Flatten => {
                    flat = true;
                    (1, 1, shape.0 * shape.1 * shape.2)
                }
                LayerSpec::Dense { units } => {
                    if !flat {
                        return Err(err(i, "dense layer before flatten".into()));
                    }
                    if units == 0 {
                        return Err(err(i, "zero units".into()));
                    }
                    (1, 1, units)
                }
                LayerSpec::Softmax => {
                    if i + 1 != self.layers.len() || shape != (1, 1, N_CLASSES) {
                        return Err(err(i, format!("softmax must close the model on {N_CLASSES} logits")));
                    }
                    shape
                }
            };
            out.push(shape);
        }
        if self.layers.last() != Some(&LayerSpec::Softmax) {
            return Err(err(self.layers.len(), "model must end with softmax".into()));
        }
        Ok(out)
    }
}
