//! Accuracy, class-wise forgetting and convergence metrics.

mod accuracy;
mod convergence;
mod forgetting;
mod records;

pub use accuracy::{accuracy_from_predictions, argmax_rows, classwise_accuracy, evaluate, Accuracy};
pub use convergence::{rounds_to_target, speedup};
pub use forgetting::{forgetting_degree, forgetting_records, measure_local_forgetting, ForgettingRecord};
pub use records::{
    fmt_sig10, read_accuracy_curve, read_forgetting_csv, write_client_losses_csv, write_forgetting_csv,
    write_rounds_csv, RoundRecord,
};
