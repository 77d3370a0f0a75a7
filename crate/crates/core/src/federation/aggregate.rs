use crate::error::{Error, Result};
use crate::nn::ModelState;

/// A participant's upload at the end of its local stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub state: ModelState,
    pub sample_count: usize,
    /// Mean training objective per local epoch.
    pub loss_trace: Vec<f64>,
}

/// Sample-count weights renormalized over the participants.
pub fn aggregation_weights(updates: &[ClientUpdate]) -> Result<Vec<f64>> {
    let total: usize = updates.iter().map(|u| u.sample_count).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("participants hold zero samples in total".into()));
    }
    let weights: Vec<f64> = updates.iter().map(|u| u.sample_count as f64 / total as f64).collect();
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("aggregation weights sum to {sum}")));
    }
    Ok(weights)
}

/// Sample-weighted average of the participants' parameters. The result has a
/// zeroed momentum buffer.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<ModelState> {
    let first = updates
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    for u in updates {
        if u.state.spec_hash != first.state.spec_hash {
            return Err(Error::SpecMismatch {
                expected: first.state.spec_hash,
                found: u.state.spec_hash,
            });
        }
        if u.state.params.len() != first.state.params.len() {
            return Err(Error::InvalidArgument(format!(
                "client {} uploaded {} parameters, expected {}",
                u.client_id,
                u.state.params.len(),
                first.state.params.len()
            )));
        }
    }
    let weights = aggregation_weights(updates)?;
    let n = first.state.params.len();
    let mut params = vec![0.0; n];
    for (u, &w) in updates.iter().zip(&weights) {
        for (p, &v) in params.iter_mut().zip(&u.state.params) {
            *p += w * v;
        }
    }
    // Rounding can leave a convex combination a few ulps outside the hull of
    // its inputs; project back coordinate-wise.
    for (j, p) in params.iter_mut().enumerate() {
        let (lo, hi) = updates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| {
            (lo.min(u.state.params[j]), hi.max(u.state.params[j]))
        });
        *p = p.clamp(lo, hi);
    }
    Ok(ModelState {
        params,
        momentum: vec![0.0; n],
        spec_hash: first.state.spec_hash,
    })
}
