//! Minimal double-precision neural-network engine.

mod gradcheck;
mod loss;
mod network;
mod optim;
mod spec;
mod state;

pub use gradcheck::{finite_diff_check, finite_diff_check_with, GradCheckReport};
pub use loss::{ce_loss_and_grad, per_sample_ce, softmax, softmax_cross_entropy, Batch};
pub use network::{Matrix, Network, Tape};
pub use optim::{sgd_step, SgdConfig};
pub use spec::{LayerPlan, LayerSpec, NetworkSpec};
pub use state::ModelState;
