use std::fs;
use std::path::Path;

use fedka_core::config::{load_config_file, load_config_str, ExperimentConfig};
use fedka_core::data::ReductionStep;
use fedka_core::federation::{run_experiment, Experiment, Manifest};
use fedka_core::nn::ModelState;
use fedka_core::Error;

const BASE: &str = r#"
master_seed = 5
[dataset]
kind = "blobs"
classes = 3
per_class = 40
test_per_class = 30
dims = 4
separation = 3.0
[partition]
clients = 4
alpha = 0.5
[strategy]
kind = "fedka"
[training]
rounds = 4
local_epochs = 2
batch_size = 16
"#;

fn config(dir: &Path, overrides: &[(&str, &str)]) -> ExperimentConfig {
    let mut o: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    o.push(("output_dir".into(), format!("{:?}", dir.display().to_string())));
    load_config_str(BASE, &o, Path::new("."), dir).unwrap()
}

fn metrics(dir: &Path) -> Vec<Vec<u8>> {
    ["rounds.csv", "forgetting.csv", "client_losses.csv", "anchors.csv"]
        .iter()
        .map(|f| fs::read(dir.join("metrics").join(f)).unwrap_or_default())
        .collect()
}

#[test]
fn run_directory_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[("metrics.checkpoint_interval", "2")]);
    let out = run_experiment(&cfg).unwrap();
    for f in [
        "config.toml",
        "manifest.toml",
        "partition.csv",
        "roles.csv",
        "assignments.csv",
        "summary.json",
        "checkpoints/round_0000.bin",
        "checkpoints/round_0002.bin",
        "checkpoints/round_0004.bin",
        "checkpoints/final.bin",
    ] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let rounds = fs::read_to_string(tmp.path().join("metrics/rounds.csv")).unwrap();
    assert!(rounds.starts_with("round,global_acc,acc_class_0,acc_class_1,acc_class_2\n"));
    assert_eq!(rounds.lines().count(), 5);
    let manifest = Manifest::read(tmp.path()).unwrap();
    assert_eq!(manifest.config, cfg);
    assert_eq!(manifest.run.status, "complete");
    let blob = fs::read(tmp.path().join("checkpoints/final.bin")).unwrap();
    assert_eq!(ModelState::read_blob(blob.as_slice()).unwrap(), out.final_state);
    // Every class-wise accuracy is consistent with the global one on the
    // balanced test set.
    for r in &out.rounds {
        let mean = r.class_acc.iter().map(|a| a.unwrap()).sum::<f64>() / 3.0;
        assert!((mean - r.global_acc).abs() < 1e-12);
    }
}

#[test]
fn zero_rounds_keep_the_initial_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(tmp.path(), &[("training.rounds", "0")])).unwrap();
    assert!(out.rounds.is_empty() && out.summary.final_acc.is_none());
    let rounds = fs::read_to_string(tmp.path().join("metrics/rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 1);
    assert_eq!(
        fs::read(tmp.path().join("checkpoints/round_0000.bin")).unwrap(),
        fs::read(tmp.path().join("checkpoints/final.bin")).unwrap()
    );
}

#[test]
fn snapshot_config_reruns_to_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    run_experiment(&config(&first, &[])).unwrap();
    let second = tmp.path().join("second");
    let out_dir = format!("{:?}", second.display().to_string());
    let cfg = load_config_file(
        &first.join("config.toml"),
        &[("output_dir".into(), out_dir)],
        tmp.path(),
    )
    .unwrap();
    run_experiment(&cfg).unwrap();
    assert_eq!(metrics(&first), metrics(&second));
}

#[test]
fn assignment_file_reruns_to_identical_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    run_experiment(&config(&first, &[])).unwrap();
    let assignments = format!("{:?}", first.join("assignments.csv").display().to_string());
    let second = tmp.path().join("second");
    run_experiment(&config(&second, &[("partition.assignment_file", &assignments)])).unwrap();
    assert_eq!(metrics(&first), metrics(&second));
    assert_eq!(
        fs::read(first.join("partition.csv")).unwrap(),
        fs::read(second.join("partition.csv")).unwrap()
    );
}

#[test]
fn partial_participation_samples_the_expected_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(
        tmp.path(),
        &[
            ("partition.clients", "10"),
            ("partition.alpha", "5.0"),
            ("training.participation", "0.2"),
        ],
    );
    let mut sets = Vec::new();
    Experiment::prepare(&cfg)
        .unwrap()
        .run(None, &mut |e| {
            let total: usize = e.updates.iter().map(|u| u.sample_count).sum();
            assert!(total > 0);
            sets.push(e.participants.to_vec());
        })
        .unwrap();
    assert!(sets.iter().all(|s| s.len() == 2));
    assert!(sets.windows(2).any(|w| w[0] != w[1]));
}

#[test]
fn anchor_variant_none_matches_fedavg() {
    let tmp = tempfile::tempdir().unwrap();
    let avg = tmp.path().join("avg");
    run_experiment(&config(&avg, &[("strategy.kind", "\"fedavg\"")])).unwrap();
    let none = tmp.path().join("none");
    run_experiment(&config(&none, &[("strategy.variant", "\"none\"")])).unwrap();
    assert_eq!(metrics(&avg)[..3], metrics(&none)[..3]);
}

#[test]
fn failing_client_is_named_and_partial_metrics_flushed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &[("strategy.kind", "\"fedavg\"")]);
    let mut exp = Experiment::prepare(&cfg).unwrap();
    // Empty client 1 before round 3.
    exp.config.schedule = (0..3)
        .map(|class| ReductionStep {
            round: 3,
            client: 1,
            class,
            keep: 0,
        })
        .collect();
    let err = exp.run(Some(tmp.path()), &mut |_| {}).unwrap_err();
    match err {
        Error::Client { round, client, .. } => assert_eq!((round, client), (3, 1)),
        other => panic!("unexpected error {other}"),
    }
    let rounds = fs::read_to_string(tmp.path().join("metrics/rounds.csv")).unwrap();
    assert_eq!(rounds.lines().count(), 3, "header plus two finished rounds");
    let manifest = Manifest::read(tmp.path()).unwrap();
    assert_eq!(manifest.run.rounds_completed, 2);
    assert!(manifest.run.status.starts_with("failed"));
}

#[test]
fn forgetting_records_recompute_from_their_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(tmp.path(), &[])).unwrap();
    assert!(!out.forgetting.is_empty());
    for r in &out.forgetting {
        assert_eq!(r.tau, (r.acc_global - r.acc_local) / (r.acc_global + 1e-8));
        assert!(r.tau <= 1.0);
    }
    let back =
        fedka_core::metrics::read_forgetting_csv(fs::File::open(tmp.path().join("metrics/forgetting.csv")).unwrap())
            .unwrap();
    assert_eq!(back.len(), out.forgetting.len());
    for (a, b) in back.iter().zip(&out.forgetting) {
        assert_eq!(
            (a.round, a.client, a.class, a.role),
            (b.round, b.client, b.class, b.role)
        );
        assert!((a.tau - b.tau).abs() <= 1e-9 * b.tau.abs().max(1.0));
    }
}
