//! Central finite-difference verification of analytic gradients.

use rand::seq::index;
use rand::Rng;

use super::loss::{ce_loss_and_grad, Batch};
use super::network::Network;
use super::state::ModelState;
use crate::error::{Error, Result};

/// Outcome of a finite-difference check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index with the largest relative error.
    pub worst_coord: usize,
    pub coords_checked: usize,
}

/// Compares the analytic gradient of `objective` at `params` against central
/// differences on `coord_sample` coordinates drawn without replacement.
///
/// The relative error for a coordinate is
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)`.
pub fn finite_diff_check_with<F, R>(
    params: &[f64],
    mut objective: F,
    coord_sample: usize,
    step: f64,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    R: Rng + ?Sized,
{
    if coord_sample == 0 {
        return Err(Error::InvalidArgument("coord_sample must be at least 1".into()));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidArgument(format!("step {step} must be positive")));
    }
    let (_, analytic) = objective(params)?;
    if analytic.len() != params.len() {
        return Err(Error::InvalidArgument(format!(
            "objective returned {} gradient entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let count = coord_sample.min(params.len());
    let mut coords = index::sample(rng, params.len(), count).into_vec();
    coords.sort_unstable();
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_coord: coords[0],
        coords_checked: count,
    };
    for &c in &coords {
        let orig = probe[c];
        probe[c] = orig + step;
        let (plus, _) = objective(&probe)?;
        probe[c] = orig - step;
        let (minus, _) = objective(&probe)?;
        probe[c] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[c];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coord = c;
        }
    }
    Ok(report)
}

/// Finite-difference check of the mean cross-entropy gradient.
pub fn finite_diff_check<R: Rng + ?Sized>(
    net: &Network,
    state: &ModelState,
    batch: &Batch,
    coord_sample: usize,
    step: f64,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let mut scratch = state.clone();
    finite_diff_check_with(
        &state.params,
        |p| {
            scratch.params.copy_from_slice(p);
            ce_loss_and_grad(net, &scratch, batch)
        },
        coord_sample,
        step,
        rng,
    )
}
