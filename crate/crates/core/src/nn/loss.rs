use super::network::{Matrix, Network};
use super::state::ModelState;
use crate::error::{Error, Result};

/// A flat batch of samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Vec<f64>, labels: Vec<usize>) -> Self {
        Self { inputs, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn validate(&self, net: &Network) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if self.inputs.len() != self.labels.len() * net.input_len() {
            return Err(Error::Shape {
                layer: 0,
                kind: net.plans()[0].layer.kind(),
                detail: format!(
                    "{} input values for {} labels of width {}",
                    self.inputs.len(),
                    self.labels.len(),
                    net.input_len()
                ),
            });
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= net.class_count()) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside [0, {})",
                net.class_count()
            )));
        }
        Ok(())
    }
}

/// Row-wise softmax.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Per-sample cross-entropy `-log softmax(logits)[label]`.
pub fn per_sample_ce(logits: &Matrix, labels: &[usize]) -> Vec<f64> {
    (0..logits.rows)
        .map(|r| {
            let row = logits.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            lse - row[labels[r]]
        })
        .collect()
}

/// Mean cross-entropy and its gradient with respect to the logits.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> (f64, Matrix) {
    let n = logits.rows as f64;
    let loss = per_sample_ce(logits, labels).iter().sum::<f64>() / n;
    let mut grad = softmax(logits);
    for (r, &label) in labels.iter().enumerate() {
        let row = grad.row_mut(r);
        row[label] -= 1.0;
        row.iter_mut().for_each(|v| *v /= n);
    }
    (loss, grad)
}

/// Mean softmax cross-entropy over the batch and its exact gradient with
/// respect to every parameter.
pub fn ce_loss_and_grad(net: &Network, state: &ModelState, batch: &Batch) -> Result<(f64, Vec<f64>)> {
    batch.validate(net)?;
    let tape = net.forward(state, &batch.inputs)?;
    let (loss, dlogits) = softmax_cross_entropy(&tape.logits, &batch.labels);
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            context: "in cross-entropy loss".into(),
        });
    }
    let grad = net.backward(state, &tape, &dlogits)?;
    Ok((loss, grad))
}
