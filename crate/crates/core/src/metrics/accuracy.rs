use crate::data::LabeledDataset;
use crate::error::Result;
use crate::nn::{Matrix, ModelState, Network};

/// Index of the largest entry of each row; ties go to the lowest class id.
pub fn argmax_rows(logits: &Matrix) -> Vec<usize> {
    (0..logits.rows)
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Per-class and overall accuracy of a set of predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Accuracy {
    /// `None` for classes absent from the test set.
    pub per_class: Vec<Option<f64>>,
    pub overall: f64,
}

pub fn accuracy_from_predictions(predictions: &[usize], labels: &[usize], class_count: usize) -> Accuracy {
    let mut hits = vec![0usize; class_count];
    let mut totals = vec![0usize; class_count];
    for (&p, &l) in predictions.iter().zip(labels) {
        totals[l] += 1;
        if p == l {
            hits[l] += 1;
        }
    }
    let per_class = hits
        .iter()
        .zip(&totals)
        .map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64))
        .collect();
    let overall = hits.iter().sum::<usize>() as f64 / labels.len().max(1) as f64;
    Accuracy { per_class, overall }
}

/// Evaluates `state` on the whole test set in chunks.
pub fn evaluate(net: &Network, state: &ModelState, test: &LabeledDataset) -> Result<Accuracy> {
    const CHUNK: usize = 512;
    let mut predictions = Vec::with_capacity(test.len());
    let width = test.sample_len();
    for start in (0..test.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(test.len());
        let logits = net.forward_logits(state, &test.inputs()[start * width..end * width])?;
        predictions.extend(argmax_rows(&logits));
    }
    Ok(accuracy_from_predictions(
        &predictions,
        test.labels(),
        net.class_count(),
    ))
}

/// Fraction of each class's test samples predicted correctly.
pub fn classwise_accuracy(net: &Network, state: &ModelState, test: &LabeledDataset) -> Result<Vec<Option<f64>>> {
    Ok(evaluate(net, state, test)?.per_class)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::NetworkSpec;

    #[test]
    fn constant_predictor() {
        let spec = NetworkSpec::mlp(1, &[], 4);
        let net = Network::new(spec.clone()).unwrap();
        // Zero weights, bias favouring class 0.
        let state = ModelState::from_params(&spec, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
        let test = LabeledDataset::new("t", 4, vec![1], vec![0.5; 40], labels).unwrap();
        let acc = evaluate(&net, &state, &test).unwrap();
        assert_eq!(acc.per_class, vec![Some(1.0), Some(0.0), Some(0.0), Some(0.0)]);
        assert_eq!(acc.overall, 0.25);
    }

    #[test]
    fn ties_go_to_lowest_class_and_absent_classes_are_undefined() {
        let logits = Matrix::new(2, 3, vec![1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
        assert_eq!(argmax_rows(&logits), vec![0, 1]);
        let acc = accuracy_from_predictions(&[0, 1], &[0, 0], 3);
        assert_eq!(acc.per_class, vec![Some(0.5), None, None]);
    }
}
