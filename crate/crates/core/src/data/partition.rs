//! Label-skew partitioning of a dataset across clients.
//!
//! For every class a proportion vector over clients is drawn from a symmetric
//! Dirichlet, and each sample of that class is sent to a client drawn from
//! those proportions.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::roles::ClientShard;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub client_count: usize,
    pub alpha: f64,
    pub seed: u64,
    pub min_samples_per_client: usize,
    pub max_retries: usize,
}

impl PartitionSpec {
    pub fn new(client_count: usize, alpha: f64, seed: u64) -> Self {
        Self {
            client_count,
            alpha,
            seed,
            min_samples_per_client: 1,
            max_retries: 100,
        }
    }
}

/// Draws from a symmetric Dirichlet with concentration `alpha` over `n`
/// categories.
///
/// Gamma variates are combined in log space using
/// `Gamma(a) = Gamma(a + 1) * U^(1/a)`, which stays finite for the very small
/// concentrations used to produce severe label skew.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: f64, n: usize, rng: &mut R) -> Vec<f64> {
    assert!(alpha > 0.0 && n > 0, "dirichlet needs alpha > 0 and n > 0");
    if n == 1 {
        return vec![1.0];
    }
    let boosted = Gamma::new(alpha + 1.0, 1.0).expect("shape > 1 is valid");
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = boosted.sample(rng);
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            g.ln() + u.ln() / alpha
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Splits `dataset` across `spec.client_count` clients with per-class
/// Dirichlet proportions. Partitions leaving any client with fewer than
/// `min_samples_per_client` samples are redrawn, up to `max_retries` times.
pub fn dirichlet_partition(dataset: &LabeledDataset, spec: &PartitionSpec, gamma: f64) -> Result<Vec<ClientShard>> {
    if spec.client_count == 0 {
        return Err(Error::InvalidArgument("client_count must be at least 1".into()));
    }
    if !(spec.alpha.is_finite() && spec.alpha > 0.0) {
        return Err(Error::InvalidArgument(format!("alpha {} must be positive", spec.alpha)));
    }
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot partition an empty dataset".into()));
    }
    let n = spec.client_count;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.class_count];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut r = rng::stream(spec.seed, "partition", &[]);
    let attempts = spec.max_retries + 1;
    let mut smallest = 0;
    for _ in 0..attempts {
        let mut assigned: Vec<Vec<usize>> = vec![Vec::new(); n];
        for members in &by_class {
            if members.is_empty() {
                continue;
            }
            let props = sample_dirichlet(spec.alpha, n, &mut r);
            let pick = WeightedIndex::new(&props).expect("normalized proportions");
            for &i in members {
                assigned[pick.sample(&mut r)].push(i);
            }
        }
        smallest = assigned.iter().map(Vec::len).min().unwrap_or(0);
        if smallest >= spec.min_samples_per_client {
            return assigned
                .into_iter()
                .enumerate()
                .map(|(c, idx)| ClientShard::new(c, idx, dataset, gamma))
                .collect();
        }
    }
    Err(Error::PartitionRetries {
        attempts,
        detail: format!(
            "smallest client held {smallest} samples, {} required",
            spec.min_samples_per_client
        ),
    })
}

/// Client x class sample-count matrix.
pub fn count_matrix(shards: &[ClientShard]) -> Vec<Vec<usize>> {
    shards.iter().map(|s| s.counts.clone()).collect()
}
