//! Per-round knowledge-anchor construction.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::shared::SharedDataset;
use crate::data::{ClientShard, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{per_sample_ce, ModelState, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSource {
    Shared,
    Local,
}

impl AnchorSource {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorSource::Shared => "shared",
            AnchorSource::Local => "local",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorEntry {
    pub sample_id: usize,
    pub label: usize,
    pub source: AnchorSource,
}

/// The sample set one client regularizes against during one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeAnchor {
    pub client: usize,
    pub round: usize,
    /// Dominant classes of the client when the anchor was built; their logits
    /// are discarded by the anchor loss.
    pub dominant: Vec<usize>,
    pub entries: Vec<AnchorEntry>,
}

impl KnowledgeAnchor {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Flat input buffer of the anchor samples, in entry order.
    pub fn inputs(&self, dataset: &LabeledDataset) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() * dataset.sample_len());
        for e in &self.entries {
            out.extend_from_slice(dataset.input(e.sample_id));
        }
        out
    }
}

/// Which vulnerable classes the anchor covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorVariant {
    /// Missing and non-dominant classes.
    #[default]
    Full,
    /// Non-dominant classes only.
    KaN,
    /// Missing classes only.
    KaM,
    /// No anchor at all.
    None,
}

/// Classes that receive an anchor entry under `variant`, ascending.
pub fn anchor_variant(shard: &ClientShard, variant: AnchorVariant) -> Vec<usize> {
    let roles = &shard.roles;
    let mut classes: Vec<usize> = match variant {
        AnchorVariant::Full => roles.missing.iter().chain(&roles.non_dominant).copied().collect(),
        AnchorVariant::KaN => roles.non_dominant.clone(),
        AnchorVariant::KaM => roles.missing.clone(),
        AnchorVariant::None => Vec::new(),
    };
    classes.sort_unstable();
    classes
}

/// How the local sample for a non-dominant class is picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorSampler {
    /// Uniformly at random.
    #[default]
    Random,
    /// The sample with the largest cross-entropy under the reference model.
    Hard,
    /// The sample with the smallest cross-entropy under the reference model.
    Proficient,
}

impl AnchorSampler {
    pub fn as_str(self) -> &'static str {
        match self {
            AnchorSampler::Random => "random",
            AnchorSampler::Hard => "hard",
            AnchorSampler::Proficient => "proficient",
        }
    }
}

/// Chooses one local sample per requested non-dominant class.
///
/// `reference` is required for the loss-based samplers; losses are computed
/// once against it. Loss ties go to the lowest sample index. Random draws are
/// made in ascending class order.
pub fn select_anchor_samples<R: Rng + ?Sized>(
    shard: &ClientShard,
    dataset: &LabeledDataset,
    classes: &[usize],
    sampler: AnchorSampler,
    reference: Option<(&Network, &ModelState)>,
    rng: &mut R,
) -> Result<BTreeMap<usize, usize>> {
    let mut picks = BTreeMap::new();
    for &class in classes {
        let members = shard.class_indices(dataset, class);
        if members.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "client {} holds no samples of class {class}",
                shard.client_id
            )));
        }
        let chosen = match sampler {
            AnchorSampler::Random => members[rng.random_range(0..members.len())],
            AnchorSampler::Hard | AnchorSampler::Proficient => {
                let (net, state) = reference.ok_or_else(|| {
                    Error::InvalidArgument(format!("{} anchor sampling needs a reference model", sampler.as_str()))
                })?;
                let batch = dataset.batch(&members);
                let logits = net.forward_logits(state, &batch.inputs)?;
                let losses = per_sample_ce(&logits, &batch.labels);
                let mut best = 0;
                for (i, &l) in losses.iter().enumerate().skip(1) {
                    let better = match sampler {
                        AnchorSampler::Hard => l > losses[best],
                        _ => l < losses[best],
                    };
                    if better {
                        best = i;
                    }
                }
                members[best]
            }
        };
        picks.insert(class, chosen);
    }
    Ok(picks)
}

/// Builds the anchor for one client and round: the shared sample for each
/// covered missing class and one local sample for each covered non-dominant
/// class, ordered by class id.
#[allow(clippy::too_many_arguments)]
pub fn build_anchor<R: Rng + ?Sized>(
    shard: &ClientShard,
    dataset: &LabeledDataset,
    shared: &SharedDataset,
    round: usize,
    variant: AnchorVariant,
    sampler: AnchorSampler,
    reference: Option<(&Network, &ModelState)>,
    rng: &mut R,
) -> Result<KnowledgeAnchor> {
    let classes = anchor_variant(shard, variant);
    let non_dominant: Vec<usize> = classes.iter().copied().filter(|&k| shard.counts[k] > 0).collect();
    let local = select_anchor_samples(shard, dataset, &non_dominant, sampler, reference, rng)?;
    let entries = classes
        .iter()
        .map(|&k| match local.get(&k) {
            Some(&sample_id) => AnchorEntry {
                sample_id,
                label: k,
                source: AnchorSource::Local,
            },
            None => AnchorEntry {
                sample_id: shared.get(k).sample_id,
                label: k,
                source: AnchorSource::Shared,
            },
        })
        .collect();
    Ok(KnowledgeAnchor {
        client: shard.client_id,
        round,
        dominant: shard.roles.dominant.clone(),
        entries,
    })
}

/// Keeps a uniformly random subset of `mu` entries when the anchor is larger
/// than `mu`, preserving entry order.
pub fn downsample_anchor<R: Rng + ?Sized>(anchor: &KnowledgeAnchor, mu: usize, rng: &mut R) -> Result<KnowledgeAnchor> {
    if mu == 0 {
        return Err(Error::InvalidArgument("anchor cap must be at least 1".into()));
    }
    if anchor.len() <= mu {
        return Ok(anchor.clone());
    }
    let mut keep = index::sample(rng, anchor.len(), mu).into_vec();
    keep.sort_unstable();
    Ok(KnowledgeAnchor {
        entries: keep.into_iter().map(|i| anchor.entries[i]).collect(),
        ..anchor.clone()
    })
}

/// One line of the anchor audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub round: usize,
    pub client: usize,
    pub class: usize,
    pub source: AnchorSource,
    pub sample_id: usize,
    pub strategy: AnchorSampler,
}

pub fn audit_rows(anchor: &KnowledgeAnchor, strategy: AnchorSampler) -> impl Iterator<Item = AuditRow> + '_ {
    anchor.entries.iter().map(move |e| AuditRow {
        round: anchor.round,
        client: anchor.client,
        class: e.label,
        source: e.source,
        sample_id: e.sample_id,
        strategy,
    })
}

pub fn write_audit_log<W: Write>(out: W, rows: &[AuditRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
