//! Declarative network descriptions and their shape checking.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// One layer of a feed-forward network. There is deliberately no softmax
/// layer: networks emit raw logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Relu,
    /// Valid (unpadded) stride-1 convolution with a square kernel.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    /// Non-overlapping square pooling, stride equal to the kernel.
    MaxPool {
        kernel: usize,
    },
    Flatten,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Relu => "relu",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool { .. } => "maxpool",
            LayerSpec::Flatten => "flatten",
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => out_channels * in_channels * kernel * kernel + out_channels,
            _ => 0,
        }
    }

    /// Output shape for the given input shape, or a description of why the
    /// input does not fit.
    fn output_shape(&self, input: &[usize]) -> std::result::Result<Vec<usize>, String> {
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if input != [inputs] {
                    return Err(format!("expects input [{inputs}], got {input:?}"));
                }
                if outputs == 0 {
                    return Err("zero outputs".into());
                }
                Ok(vec![outputs])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => match *input {
                [c, h, w] if c == in_channels && kernel >= 1 && h >= kernel && w >= kernel => {
                    if out_channels == 0 {
                        return Err("zero output channels".into());
                    }
                    Ok(vec![out_channels, h - kernel + 1, w - kernel + 1])
                }
                _ => Err(format!(
                    "expects [{in_channels}, h>={kernel}, w>={kernel}], got {input:?}"
                )),
            },
            LayerSpec::MaxPool { kernel } => match *input {
                [c, h, w] if kernel >= 1 && h >= kernel && w >= kernel => Ok(vec![c, h / kernel, w / kernel]),
                _ => Err(format!("expects [c, h>={kernel}, w>={kernel}], got {input:?}")),
            },
        }
    }
}

/// A full network description: input shape, layers, class count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_shape: Vec<usize>,
    pub class_count: usize,
    pub layers: Vec<LayerSpec>,
}

/// A layer together with its resolved shapes and parameter slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPlan {
    pub layer: LayerSpec,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub param_offset: usize,
}

impl LayerPlan {
    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn output_len(&self) -> usize {
        self.output_shape.iter().product()
    }

    pub fn param_range(&self) -> std::ops::Range<usize> {
        self.param_offset..self.param_offset + self.layer.param_count()
    }
}

impl NetworkSpec {
    /// Dense-ReLU stack ending in a dense layer of width `class_count`.
    pub fn mlp(input_dim: usize, hidden: &[usize], class_count: usize) -> Self {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for &h in hidden {
            layers.push(LayerSpec::Dense {
                inputs: width,
                outputs: h,
            });
            layers.push(LayerSpec::Relu);
            width = h;
        }
        layers.push(LayerSpec::Dense {
            inputs: width,
            outputs: class_count,
        });
        Self {
            input_shape: vec![input_dim],
            class_count,
            layers,
        }
    }

    /// Two conv blocks (32 and 64 filters, ReLU, 2x2 max-pool), a 512-unit
    /// hidden layer and a linear classifier.
    pub fn t_cnn(channels: usize, height: usize, width: usize, class_count: usize) -> Self {
        const KERNEL: usize = 5;
        // A valid convolution followed by a 2x2 pool that drops odd edges.
        let block = |n: usize| (n - (KERNEL - 1)) / 2;
        let (h2, w2) = (block(block(height)), block(block(width)));
        Self {
            input_shape: vec![channels, height, width],
            class_count,
            layers: vec![
                LayerSpec::Conv2d {
                    in_channels: channels,
                    out_channels: 32,
                    kernel: KERNEL,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool { kernel: 2 },
                LayerSpec::Conv2d {
                    in_channels: 32,
                    out_channels: 64,
                    kernel: KERNEL,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 64 * h2 * w2,
                    outputs: 512,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    inputs: 512,
                    outputs: class_count,
                },
            ],
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Resolves per-layer shapes and parameter offsets, checking that
    /// consecutive layers fit and the network ends in `class_count` logits.
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        if self.class_count < 2 {
            return Err(Error::InvalidSpec(format!(
                "class_count must be at least 2, got {}",
                self.class_count
            )));
        }
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(Error::InvalidSpec(format!(
                "input_shape {:?} has an empty dimension",
                self.input_shape
            )));
        }
        if self.layers.is_empty() {
            return Err(Error::InvalidSpec("no layers".into()));
        }
        let mut plans = Vec::with_capacity(self.layers.len());
        let mut shape = self.input_shape.clone();
        let mut offset = 0;
        for (idx, layer) in self.layers.iter().enumerate() {
            let out = layer.output_shape(&shape).map_err(|detail| Error::Shape {
                layer: idx,
                kind: layer.kind(),
                detail,
            })?;
            plans.push(LayerPlan {
                layer: *layer,
                input_shape: shape,
                output_shape: out.clone(),
                param_offset: offset,
            });
            offset += layer.param_count();
            shape = out;
        }
        if shape != [self.class_count] {
            return Err(Error::InvalidSpec(format!(
                "network output shape {shape:?} does not equal [{}]",
                self.class_count
            )));
        }
        Ok(plans)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Checksum binding model states to this exact description.
    pub fn hash(&self) -> u64 {
        let canonical = serde_json::to_vec(self).expect("spec serializes");
        let digest = Sha256::digest(&canonical);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.plan()?;
        Ok(spec)
    }
}
