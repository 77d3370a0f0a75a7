use serde::{Deserialize, Serialize};

use super::dataset::{count_labels, LabeledDataset};
use crate::error::{Error, Result};

/// Role of a class within one client's data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassRole {
    /// Proportion at or above the threshold.
    Dominant,
    /// Present, but below the threshold.
    NonDominant,
    /// Absent.
    Missing,
}

impl ClassRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassRole::Dominant => "dominant",
            ClassRole::NonDominant => "non_dominant",
            ClassRole::Missing => "missing",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dominant" => Some(ClassRole::Dominant),
            "non_dominant" => Some(ClassRole::NonDominant),
            "missing" => Some(ClassRole::Missing),
            _ => None,
        }
    }
}

impl std::fmt::Display for ClassRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Partition of the class ids into dominant, non-dominant and missing sets,
/// each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRoles {
    pub dominant: Vec<usize>,
    pub non_dominant: Vec<usize>,
    pub missing: Vec<usize>,
}

impl ClassRoles {
    pub fn role_of(&self, class: usize) -> ClassRole {
        if self.dominant.binary_search(&class).is_ok() {
            ClassRole::Dominant
        } else if self.non_dominant.binary_search(&class).is_ok() {
            ClassRole::NonDominant
        } else {
            ClassRole::Missing
        }
    }

    fn all_missing(class_count: usize) -> Self {
        Self {
            dominant: Vec::new(),
            non_dominant: Vec::new(),
            missing: (0..class_count).collect(),
        }
    }
}

/// Splits classes by their share of the client's samples: missing when the
/// count is zero, non-dominant when `0 < share < gamma`, dominant when
/// `share >= gamma`.
pub fn classify_roles(counts: &[usize], gamma: f64) -> Result<ClassRoles> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} must lie in (0, 1)")));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "cannot classify roles of a client with no samples".into(),
        ));
    }
    let mut roles = ClassRoles {
        dominant: Vec::new(),
        non_dominant: Vec::new(),
        missing: Vec::new(),
    };
    for (k, &c) in counts.iter().enumerate() {
        if c == 0 {
            roles.missing.push(k);
        } else if (c as f64) / (total as f64) >= gamma {
            roles.dominant.push(k);
        } else {
            roles.non_dominant.push(k);
        }
    }
    Ok(roles)
}

/// One client's slice of a dataset together with its class statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    /// Ascending indices into the parent dataset.
    pub indices: Vec<usize>,
    pub counts: Vec<usize>,
    pub roles: ClassRoles,
    pub gamma: f64,
}

impl ClientShard {
    /// Builds a shard from dataset indices. An empty shard has every class
    /// missing.
    pub fn new(client_id: usize, mut indices: Vec<usize>, dataset: &LabeledDataset, gamma: f64) -> Result<Self> {
        indices.sort_unstable();
        if let Some(&bad) = indices.iter().find(|&&i| i >= dataset.len()) {
            return Err(Error::Dataset(format!(
                "client {client_id} references sample {bad}, dataset has {}",
                dataset.len()
            )));
        }
        let counts = count_labels(indices.iter().map(|&i| dataset.label(i)), dataset.class_count);
        let roles = if indices.is_empty() {
            if !(gamma > 0.0 && gamma < 1.0) {
                return Err(Error::InvalidArgument(format!("gamma {gamma} must lie in (0, 1)")));
            }
            ClassRoles::all_missing(dataset.class_count)
        } else {
            classify_roles(&counts, gamma)?
        };
        Ok(Self {
            client_id,
            indices,
            counts,
            roles,
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Indices of this client's samples of `class`, ascending.
    pub fn class_indices(&self, dataset: &LabeledDataset, class: usize) -> Vec<usize> {
        self.indices
            .iter()
            .copied()
            .filter(|&i| dataset.label(i) == class)
            .collect()
    }

    /// Re-derives counts and roles from the current indices.
    pub fn refresh(&mut self, dataset: &LabeledDataset) -> Result<()> {
        *self = Self::new(self.client_id, std::mem::take(&mut self.indices), dataset, self.gamma)?;
        Ok(())
    }
}
