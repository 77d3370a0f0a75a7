use std::io::{Read, Write};

use rand::Rng;

use super::spec::{LayerSpec, NetworkSpec};
use crate::error::{Error, Result};

/// Parameters and optimizer momentum for one network instance.
///
/// Parameters are laid out layer by layer; within a dense layer the weight
/// matrix comes first in row-major `(outputs, inputs)` order followed by the
/// biases, and a conv layer stores `(out_ch, in_ch, k, k)` weights followed by
/// one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub params: Vec<f64>,
    pub momentum: Vec<f64>,
    pub spec_hash: u64,
}

impl ModelState {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let n = spec.param_count();
        Self {
            params: vec![0.0; n],
            momentum: vec![0.0; n],
            spec_hash: spec.hash(),
        }
    }

    pub fn from_params(spec: &NetworkSpec, params: Vec<f64>) -> Result<Self> {
        if params.len() != spec.param_count() {
            return Err(Error::InvalidArgument(format!(
                "{} parameters supplied, spec needs {}",
                params.len(),
                spec.param_count()
            )));
        }
        let n = params.len();
        Ok(Self {
            params,
            momentum: vec![0.0; n],
            spec_hash: spec.hash(),
        })
    }

    /// Glorot-uniform weights, zero biases, zero momentum.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let mut state = Self::zeros(spec);
        let mut offset = 0;
        for layer in &spec.layers {
            let (fan_in, fan_out, weights) = match *layer {
                LayerSpec::Dense { inputs, outputs } => (inputs, outputs, inputs * outputs),
                LayerSpec::Conv2d {
                    in_channels,
                    out_channels,
                    kernel,
                } => {
                    let area = kernel * kernel;
                    (
                        in_channels * area,
                        out_channels * area,
                        out_channels * in_channels * area,
                    )
                }
                _ => continue,
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut state.params[offset..offset + weights] {
                *w = rng.random_range(-limit..limit);
            }
            offset += layer.param_count();
        }
        state
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn check_spec(&self, spec: &NetworkSpec) -> Result<()> {
        let expected = spec.hash();
        if self.spec_hash != expected {
            return Err(Error::SpecMismatch {
                expected,
                found: self.spec_hash,
            });
        }
        if self.params.len() != spec.param_count() || self.momentum.len() != self.params.len() {
            return Err(Error::InvalidArgument(format!(
                "state holds {} params / {} momentum entries, spec needs {}",
                self.params.len(),
                self.momentum.len(),
                spec.param_count()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().chain(&self.momentum).all(|v| v.is_finite())
    }

    /// Copy of the parameters with a fresh (zeroed) momentum buffer.
    pub fn fresh_copy(&self) -> Self {
        Self {
            params: self.params.clone(),
            momentum: vec![0.0; self.params.len()],
            spec_hash: self.spec_hash,
        }
    }

    /// Writes `spec_hash: u64 | length: u64 | params: [f64; length] |
    /// momentum: [f64; length]`, all little-endian.
    pub fn write_blob<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.spec_hash.to_le_bytes())?;
        out.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for v in self.params.iter().chain(&self.momentum) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_blob(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(16 + 16 * self.params.len());
        self.write_blob(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_blob<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |what: &str| -> Result<[u8; 8]> {
            input
                .read_exact(&mut word)
                .map_err(|e| Error::Checkpoint(format!("reading {what}: {e}")))?;
            Ok(word)
        };
        let spec_hash = u64::from_le_bytes(next("spec hash")?);
        let len = u64::from_le_bytes(next("length")?) as usize;
        let mut values = Vec::with_capacity(2 * len);
        for i in 0..2 * len {
            values.push(f64::from_le_bytes(next(&format!("value {i} of {}", 2 * len))?));
        }
        let momentum = values.split_off(len);
        Ok(Self {
            params: values,
            momentum,
            spec_hash,
        })
    }
}
