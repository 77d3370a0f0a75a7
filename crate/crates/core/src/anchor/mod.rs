//! Knowledge anchors: the shared one-sample-per-class set, per-round anchor
//! construction and down-sampling, and the anchor regularizer.

mod build;
mod objective;
mod shared;

pub use build::{
    anchor_variant, audit_rows, build_anchor, downsample_anchor, select_anchor_samples, write_audit_log, AnchorEntry,
    AnchorSampler, AnchorSource, AnchorVariant, AuditRow, KnowledgeAnchor,
};
pub use objective::{discard_logits, ka_loss_and_grad, ka_loss_and_grad_with_teacher};
pub use shared::{build_shared_dataset, SharedDataset, SharedEntry};
