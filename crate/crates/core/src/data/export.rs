//! CSV views of datasets and partitions.

use std::io::{Read, Write};

use super::dataset::LabeledDataset;
use super::roles::ClientShard;
use crate::error::{Error, Result};

/// Writes one `sample_id,client_id,label` row per assigned sample, ordered by
/// sample id.
pub fn write_assignments<W: Write>(out: W, dataset: &LabeledDataset, shards: &[ClientShard]) -> Result<()> {
    let mut owner = vec![None; dataset.len()];
    for s in shards {
        for &i in &s.indices {
            owner[i] = Some(s.client_id);
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sample_id", "client_id", "label"])?;
    for (i, o) in owner.iter().enumerate() {
        if let Some(c) = o {
            w.write_record([i.to_string(), c.to_string(), dataset.label(i).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Rebuilds shards from an assignment CSV, checking each label against the
/// dataset. Clients are numbered `0..client_count`.
pub fn read_assignments<R: Read>(
    input: R,
    dataset: &LabeledDataset,
    client_count: usize,
    gamma: f64,
) -> Result<Vec<ClientShard>> {
    let mut r = csv::Reader::from_reader(input);
    let mut per_client: Vec<Vec<usize>> = vec![Vec::new(); client_count];
    let mut seen = vec![false; dataset.len()];
    for (line, rec) in r.deserialize::<(usize, usize, usize)>().enumerate() {
        let (sample, client, label) = rec?;
        let row = line + 2;
        if sample >= dataset.len() || client >= client_count {
            return Err(Error::Dataset(format!(
                "assignment row {row}: sample {sample} / client {client} out of range"
            )));
        }
        if dataset.label(sample) != label {
            return Err(Error::Dataset(format!(
                "assignment row {row}: sample {sample} has label {}, file says {label}",
                dataset.label(sample)
            )));
        }
        if std::mem::replace(&mut seen[sample], true) {
            return Err(Error::Dataset(format!(
                "assignment row {row}: sample {sample} assigned twice"
            )));
        }
        per_client[client].push(sample);
    }
    per_client
        .into_iter()
        .enumerate()
        .map(|(c, idx)| ClientShard::new(c, idx, dataset, gamma))
        .collect()
}

/// `client,class_0,...,class_{K-1}` count matrix.
pub fn write_count_matrix<W: Write>(out: W, shards: &[ClientShard], class_count: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["client".to_string()];
    header.extend((0..class_count).map(|k| format!("class_{k}")));
    w.write_record(&header)?;
    for s in shards {
        let mut row = vec![s.client_id.to_string()];
        row.extend(s.counts.iter().map(usize::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `client,class,count,proportion,role` for every client and class.
pub fn write_role_report<W: Write>(out: W, shards: &[ClientShard]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["client", "class", "count", "proportion", "role"])?;
    for s in shards {
        let total = s.len().max(1) as f64;
        for (k, &c) in s.counts.iter().enumerate() {
            w.write_record([
                s.client_id.to_string(),
                k.to_string(),
                c.to_string(),
                format!("{:.6}", c as f64 / total),
                s.roles.role_of(k).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
