use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{ClientShard, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng;

/// One shared sample: a dataset index and the client that contributed it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedEntry {
    pub class: usize,
    pub sample_id: usize,
    pub contributor: Option<usize>,
}

/// Exactly one sample per class, visible to every client.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedDataset {
    entries: Vec<SharedEntry>,
}

impl SharedDataset {
    /// Entry for class `k`.
    pub fn get(&self, class: usize) -> &SharedEntry {
        &self.entries[class]
    }

    pub fn entries(&self) -> &[SharedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Picks one sample per class.
///
/// Without shards, the pick for class `k` is the first class-`k` sample in a
/// seeded shuffle of the whole dataset. With shards, clients are visited in a
/// seeded order and each class is taken from the first client that holds it
/// and has not contributed yet, falling back to any holder once every holder
/// has contributed; within a client the first sample in the seeded shuffle is
/// used.
pub fn build_shared_dataset(
    dataset: &LabeledDataset,
    shards: Option<&[ClientShard]>,
    seed: u64,
) -> Result<SharedDataset> {
    let k = dataset.class_count;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng::stream(seed, "shared", &[0]));
    let mut rank = vec![0usize; dataset.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos;
    }
    let missing = |class: usize| Error::Dataset(format!("class {class} has no samples to share"));

    let entries = match shards {
        None => {
            let mut pick: Vec<Option<usize>> = vec![None; k];
            for &i in &order {
                let l = dataset.label(i);
                pick[l].get_or_insert(i);
            }
            pick.into_iter()
                .enumerate()
                .map(|(class, p)| {
                    p.map(|sample_id| SharedEntry {
                        class,
                        sample_id,
                        contributor: None,
                    })
                    .ok_or_else(|| missing(class))
                })
                .collect::<Result<Vec<_>>>()?
        }
        Some(shards) => {
            let mut clients: Vec<&ClientShard> = shards.iter().collect();
            clients.shuffle(&mut rng::stream(seed, "shared", &[1]));
            let mut used = vec![false; clients.len()];
            let mut entries = Vec::with_capacity(k);
            for class in 0..k {
                let holders: Vec<usize> = (0..clients.len()).filter(|&c| clients[c].counts[class] > 0).collect();
                let chosen = holders
                    .iter()
                    .copied()
                    .find(|&c| !used[c])
                    .or_else(|| holders.first().copied())
                    .ok_or_else(|| missing(class))?;
                used[chosen] = true;
                let sample_id = clients[chosen]
                    .class_indices(dataset, class)
                    .into_iter()
                    .min_by_key(|&i| rank[i])
                    .expect("holder has the class");
                entries.push(SharedEntry {
                    class,
                    sample_id,
                    contributor: Some(clients[chosen].client_id),
                });
            }
            entries
        }
    };
    Ok(SharedDataset { entries })
}
