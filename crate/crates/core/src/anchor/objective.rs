//! The anchor regularizer: squared distance between teacher and student
//! logits on the anchor, restricted to non-dominant class columns.

use crate::error::{Error, Result};
use crate::nn::{Matrix, ModelState, Network};

/// Removes the columns of `dominant` classes, keeping the remaining columns in
/// ascending class order.
pub fn discard_logits(logits: &Matrix, dominant: &[usize]) -> Result<Matrix> {
    let kept = kept_classes(logits.cols, dominant)?;
    let mut data = Vec::with_capacity(logits.rows * kept.len());
    for r in 0..logits.rows {
        let row = logits.row(r);
        data.extend(kept.iter().map(|&k| row[k]));
    }
    Ok(Matrix::new(logits.rows, kept.len(), data))
}

fn kept_classes(class_count: usize, dominant: &[usize]) -> Result<Vec<usize>> {
    if let Some(&bad) = dominant.iter().find(|&&k| k >= class_count) {
        return Err(Error::InvalidArgument(format!(
            "dominant class {bad} outside [0, {class_count})"
        )));
    }
    let kept: Vec<usize> = (0..class_count).filter(|k| !dominant.contains(k)).collect();
    if kept.is_empty() {
        return Err(Error::InvalidArgument(
            "every class is dominant; no logits remain after discarding".into(),
        ));
    }
    Ok(kept)
}

/// Anchor loss `(1/m) * sum ||phi(teacher) - phi(student)||^2` over the `m`
/// anchor rows, with its gradient with respect to the student parameters.
///
/// `teacher_logits` are the frozen global model's logits on the same anchor
/// inputs; no gradient flows into the teacher. An empty anchor contributes
/// zero loss and a zero gradient.
pub fn ka_loss_and_grad_with_teacher(
    net: &Network,
    anchor_inputs: &[f64],
    teacher_logits: &Matrix,
    local: &ModelState,
    dominant: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if anchor_inputs.is_empty() {
        return Ok((0.0, vec![0.0; local.params.len()]));
    }
    let kept = kept_classes(net.class_count(), dominant)?;
    let tape = net.forward(local, anchor_inputs)?;
    let student = &tape.logits;
    if teacher_logits.rows != student.rows || teacher_logits.cols != student.cols {
        return Err(Error::InvalidArgument(format!(
            "teacher logits are {}x{}, student logits {}x{}",
            teacher_logits.rows, teacher_logits.cols, student.rows, student.cols
        )));
    }
    let m = student.rows as f64;
    let mut loss = 0.0;
    let mut dlogits = Matrix::zeros(student.rows, student.cols);
    for r in 0..student.rows {
        let (t, s) = (teacher_logits.row(r), student.row(r));
        let d = dlogits.row_mut(r);
        for &k in &kept {
            let diff = t[k] - s[k];
            loss += diff * diff;
            d[k] = -2.0 * diff / m;
        }
    }
    loss /= m;
    let grad = net.backward(local, &tape, &dlogits)?;
    Ok((loss, grad))
}

/// Anchor loss with the teacher logits computed from `global`.
pub fn ka_loss_and_grad(
    net: &Network,
    anchor_inputs: &[f64],
    global: &ModelState,
    local: &ModelState,
    dominant: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if global.spec_hash != local.spec_hash {
        return Err(Error::SpecMismatch {
            expected: global.spec_hash,
            found: local.spec_hash,
        });
    }
    if anchor_inputs.is_empty() {
        return Ok((0.0, vec![0.0; local.params.len()]));
    }
    let teacher = net.forward_logits(global, anchor_inputs)?;
    ka_loss_and_grad_with_teacher(net, anchor_inputs, &teacher, local, dominant)
}
