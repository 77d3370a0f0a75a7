use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Batch;

/// An in-memory labeled dataset with fixed-shape samples stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub class_count: usize,
    pub sample_shape: Vec<usize>,
    inputs: Vec<f64>,
    labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        name: impl Into<String>,
        class_count: usize,
        sample_shape: Vec<usize>,
        inputs: Vec<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let width: usize = sample_shape.iter().product();
        if labels.is_empty() {
            return Err(Error::Dataset("dataset is empty".into()));
        }
        if width == 0 || inputs.len() != width * labels.len() {
            return Err(Error::Dataset(format!(
                "{} input values for {} samples of shape {sample_shape:?}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= class_count) {
            return Err(Error::Dataset(format!(
                "sample {i} has label {l}, class count is {class_count}"
            )));
        }
        if let Some(pos) = inputs.iter().position(|v| !v.is_finite()) {
            return Err(Error::Dataset(format!(
                "non-finite input value in sample {}",
                pos / width
            )));
        }
        Ok(Self {
            name: name.into(),
            class_count,
            sample_shape,
            inputs,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn input(&self, idx: usize) -> &[f64] {
        let w = self.sample_len();
        &self.inputs[idx * w..(idx + 1) * w]
    }

    pub fn label(&self, idx: usize) -> usize {
        self.labels[idx]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn class_counts(&self) -> Vec<usize> {
        count_labels(self.labels.iter().copied(), self.class_count)
    }

    /// Gathers the given samples into a batch, in the given order.
    pub fn batch(&self, indices: &[usize]) -> Batch {
        let mut inputs = Vec::with_capacity(indices.len() * self.sample_len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
            labels.push(self.labels[i]);
        }
        Batch::new(inputs, labels)
    }

    /// Content hash over shape, labels and input bits.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.class_count as u64).to_le_bytes());
        for d in &self.sample_shape {
            h.update((*d as u64).to_le_bytes());
        }
        for l in &self.labels {
            h.update((*l as u64).to_le_bytes());
        }
        for v in &self.inputs {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn count_labels(labels: impl IntoIterator<Item = usize>, class_count: usize) -> Vec<usize> {
    let mut counts = vec![0; class_count];
    for l in labels {
        counts[l] += 1;
    }
    counts
}
