use super::state::ModelState;
use crate::error::{Error, Result};

/// SGD hyperparameters. Defaults are lr 0.01, momentum 0.9, weight decay 1e-5.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            momentum: 0.9,
            weight_decay: 1e-5,
        }
    }
}

/// One SGD step with heavy-ball momentum and L2 weight decay:
/// `v <- m*v + (g + wd*p)`, `p <- p - lr*v`.
pub fn sgd_step(state: &mut ModelState, grad: &[f64], cfg: SgdConfig) -> Result<()> {
    if grad.len() != state.params.len() {
        return Err(Error::InvalidArgument(format!(
            "gradient has {} entries, state has {}",
            grad.len(),
            state.params.len()
        )));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "learning rate {} must be positive",
            cfg.lr
        )));
    }
    if let Some(pos) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("in gradient entry {pos}"),
        });
    }
    for ((p, v), &g) in state.params.iter_mut().zip(&mut state.momentum).zip(grad) {
        *v = cfg.momentum * *v + (g + cfg.weight_decay * *p);
        *p -= cfg.lr * *v;
    }
    if !state.is_finite() {
        return Err(Error::NonFinite {
            context: "in parameters after SGD step".into(),
        });
    }
    Ok(())
}
