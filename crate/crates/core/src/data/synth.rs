use rand::Rng;
use rand_distr::StandardNormal;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::rng;

/// Cluster centers whose pairwise distances are all at least `separation`.
///
/// With `dims >= class_count` the centers are `separation / sqrt(2)` times
/// the first `class_count` basis vectors, so every pair is exactly
/// `separation` apart. With fewer dimensions they sit on a circle in the
/// first two coordinates with neighbouring chord length `separation`.
pub fn blob_centers(class_count: usize, dims: usize, separation: f64) -> Vec<Vec<f64>> {
    let mut centers = vec![vec![0.0; dims]; class_count];
    if dims >= class_count {
        for (k, c) in centers.iter_mut().enumerate() {
            c[k] = separation / std::f64::consts::SQRT_2;
        }
    } else if dims >= 2 {
        let step = std::f64::consts::TAU / class_count as f64;
        let radius = separation / (2.0 * (step / 2.0).sin());
        for (k, c) in centers.iter_mut().enumerate() {
            c[0] = radius * (step * k as f64).cos();
            c[1] = radius * (step * k as f64).sin();
        }
    } else {
        for (k, c) in centers.iter_mut().enumerate() {
            c[0] = separation * k as f64;
        }
    }
    centers
}

/// Unit-variance Gaussian clusters, one per class, `per_class` samples each.
/// Samples are ordered class by class.
pub fn synth_blobs(
    class_count: usize,
    per_class: usize,
    dims: usize,
    separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if class_count < 2 || per_class == 0 || dims == 0 {
        return Err(Error::InvalidArgument(format!(
            "blobs need class_count >= 2, per_class >= 1, dims >= 1 (got {class_count}, {per_class}, {dims})"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "separation {separation} must be finite and non-negative"
        )));
    }
    let centers = blob_centers(class_count, dims, separation);
    let mut r = rng::stream(seed, "blobs", &[]);
    let mut inputs = Vec::with_capacity(class_count * per_class * dims);
    let mut labels = Vec::with_capacity(class_count * per_class);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            for &c in center {
                let noise: f64 = r.sample(StandardNormal);
                inputs.push(c + noise);
            }
            labels.push(k);
        }
    }
    LabeledDataset::new(
        format!("blobs-k{class_count}-d{dims}-s{separation}"),
        class_count,
        vec![dims],
        inputs,
        labels,
    )
}
