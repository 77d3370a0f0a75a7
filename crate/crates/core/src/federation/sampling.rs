use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

/// Number of participants for `ratio` of `clients`: `ceil(ratio * clients)`,
/// tolerant of the representation error in decimal ratios such as 0.7.
pub fn participant_count(clients: usize, ratio: f64) -> usize {
    let exact = ratio * clients as f64;
    ((exact - 1e-9).ceil() as usize).clamp(1, clients)
}

/// Uniformly samples `ceil(ratio * N)` distinct clients for `round`,
/// returned in ascending id order.
pub fn sample_participants(client_ids: &[usize], ratio: f64, master_seed: u64, round: usize) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "participation ratio {ratio} must lie in (0, 1]"
        )));
    }
    if client_ids.is_empty() {
        return Err(Error::InvalidArgument("no clients to sample from".into()));
    }
    let count = participant_count(client_ids.len(), ratio);
    if count == client_ids.len() {
        let mut all = client_ids.to_vec();
        all.sort_unstable();
        return Ok(all);
    }
    let mut r = rng::stream(master_seed, "participants", &[round as u64]);
    let mut chosen: Vec<usize> = index::sample(&mut r, client_ids.len(), count)
        .into_iter()
        .map(|i| client_ids[i])
        .collect();
    chosen.sort_unstable();
    Ok(chosen)
}
