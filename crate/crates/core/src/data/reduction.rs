//! Scheduled shrinking of one class within a client's data.

use serde::{Deserialize, Serialize};

use super::dataset::LabeledDataset;
use super::roles::ClientShard;
use crate::error::{Error, Result};

/// At the start of `round`, keep only `keep` samples of `class` on `client`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionStep {
    pub round: usize,
    pub client: usize,
    pub class: usize,
    pub keep: usize,
}

/// Checks that rounds are strictly increasing for each `(client, class)`.
pub fn validate_schedule(steps: &[ReductionStep]) -> Result<()> {
    for (i, a) in steps.iter().enumerate() {
        for b in &steps[i + 1..] {
            if a.client == b.client && a.class == b.class && b.round <= a.round {
                return Err(Error::Reduction(format!(
                    "client {} class {}: round {} listed after round {}",
                    a.client, a.class, b.round, a.round
                )));
            }
        }
    }
    Ok(())
}

/// Truncates `class` on the shard to its `keep` lowest-index samples and
/// recomputes counts and roles.
pub fn reduce_class(shard: &mut ClientShard, dataset: &LabeledDataset, class: usize, keep: usize) -> Result<()> {
    let current = shard
        .counts
        .get(class)
        .copied()
        .ok_or_else(|| Error::Reduction(format!("class {class} outside [0, {})", shard.counts.len())))?;
    if keep > current {
        return Err(Error::Reduction(format!(
            "client {} class {class}: cannot keep {keep} of {current} samples",
            shard.client_id
        )));
    }
    let mut seen = 0;
    shard.indices.retain(|&i| {
        if dataset.label(i) != class {
            return true;
        }
        seen += 1;
        seen <= keep
    });
    shard.refresh(dataset)
}

/// Applies every step for this shard's client scheduled at exactly `round`.
/// Returns whether anything changed.
pub fn apply_due(
    shard: &mut ClientShard,
    dataset: &LabeledDataset,
    steps: &[ReductionStep],
    round: usize,
) -> Result<bool> {
    let client = shard.client_id;
    let mut changed = false;
    for step in steps.iter().filter(|s| s.client == client && s.round == round) {
        reduce_class(shard, dataset, step.class, step.keep)?;
        changed = true;
    }
    Ok(changed)
}

/// Applies, in round order, every step for this shard's client scheduled at
/// or before `through_round`.
pub fn apply_reduction_schedule(
    shard: &ClientShard,
    dataset: &LabeledDataset,
    steps: &[ReductionStep],
    through_round: usize,
) -> Result<ClientShard> {
    validate_schedule(steps)?;
    let mut due: Vec<&ReductionStep> = steps
        .iter()
        .filter(|s| s.client == shard.client_id && s.round <= through_round)
        .collect();
    due.sort_by_key(|s| s.round);
    let mut out = shard.clone();
    for step in due {
        reduce_class(&mut out, dataset, step.class, step.keep)?;
    }
    Ok(out)
}
