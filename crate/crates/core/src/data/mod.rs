//! Datasets, synthetic data, IDX ingestion and label-skew partitioning.

mod dataset;
mod export;
mod idx;
mod partition;
mod reduction;
mod roles;
mod synth;

pub use dataset::{count_labels, LabeledDataset};
pub use export::{read_assignments, write_assignments, write_count_matrix, write_role_report};
pub use idx::{load_idx, parse_images, parse_labels, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{count_matrix, dirichlet_partition, sample_dirichlet, PartitionSpec};
pub use reduction::{apply_due, apply_reduction_schedule, reduce_class, validate_schedule, ReductionStep};
pub use roles::{classify_roles, ClassRole, ClassRoles, ClientShard};
pub use synth::{blob_centers, synth_blobs};
