//! Communication rounds: participant sampling, local training under a
//! pluggable strategy, and sample-weighted aggregation.

mod aggregate;
mod local;
mod runner;
mod sampling;

pub use aggregate::{aggregate, aggregation_weights, ClientUpdate};
pub use local::{add_proximal, local_train, round_anchor, LocalOutcome, RoundContext, Strategy};
pub use runner::{
    load_datasets, network_spec, partition_clients, run_experiment, run_experiment_with, Experiment, Manifest,
    ManifestHashes, ManifestRun, RoundEvent, RunOutcome, RunSummary, TargetRound, MANIFEST_FILE,
};
pub use sampling::{participant_count, sample_participants};
