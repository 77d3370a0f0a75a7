use std::collections::BTreeSet;
use std::io::Write;

use fedka_core::data::{
    count_matrix, dirichlet_partition, load_idx, read_assignments, synth_blobs, write_assignments, ClassRole,
    PartitionSpec,
};
use fedka_core::metrics::evaluate;
use fedka_core::nn::{ce_loss_and_grad, sgd_step, ModelState, Network, NetworkSpec, SgdConfig};
use fedka_core::rng;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_sample_lands_on_exactly_one_client(
        seed in 0u64..1000,
        clients in 1usize..12,
        alpha in prop::sample::select(vec![0.05, 0.1, 0.5, 1.0, 100.0]),
    ) {
        let data = synth_blobs(5, 40, 2, 3.0, seed).unwrap();
        let spec = PartitionSpec { min_samples_per_client: 0, ..PartitionSpec::new(clients, alpha, seed) };
        let shards = dirichlet_partition(&data, &spec, 0.05).unwrap();
        prop_assert_eq!(shards.len(), clients);
        let mut seen = BTreeSet::new();
        for s in &shards {
            for &i in &s.indices {
                prop_assert!(seen.insert(i), "sample {} assigned twice", i);
            }
        }
        prop_assert_eq!(seen, (0..data.len()).collect::<BTreeSet<_>>());
    }
}

#[test]
fn large_alpha_matches_global_proportions() {
    let data = synth_blobs(10, 5000, 1, 1.0, 0).unwrap();
    for seed in 0..10 {
        let shards = dirichlet_partition(&data, &PartitionSpec::new(10, 1000.0, seed), 0.05).unwrap();
        for row in count_matrix(&shards) {
            let total: usize = row.iter().sum();
            for &c in &row {
                let share = c as f64 / total as f64;
                assert!((share - 0.1).abs() / 0.1 < 0.2, "seed {seed}: share {share}");
            }
        }
    }
}

#[test]
fn small_alpha_is_skewed() {
    let data = synth_blobs(10, 200, 1, 1.0, 0).unwrap();
    let shards = dirichlet_partition(&data, &PartitionSpec::new(10, 0.1, 4), 0.05).unwrap();
    let missing: usize = shards.iter().map(|s| s.roles.missing.len()).sum();
    let max_share = shards
        .iter()
        .flat_map(|s| s.counts.iter().map(move |&c| c as f64 / s.len() as f64))
        .fold(0.0, f64::max);
    assert!(missing >= 10, "only {missing} missing (client, class) pairs");
    assert!(max_share > 0.5);
}

#[test]
fn assignment_file_reproduces_the_partition() {
    let data = synth_blobs(4, 50, 3, 2.0, 9).unwrap();
    let shards = dirichlet_partition(&data, &PartitionSpec::new(5, 0.3, 9), 0.05).unwrap();
    let mut buf = Vec::new();
    write_assignments(&mut buf, &data, &shards).unwrap();
    let back = read_assignments(buf.as_slice(), &data, 5, 0.05).unwrap();
    assert_eq!(back, shards);
}

#[test]
fn separated_blobs_are_learnable_by_a_linear_model() {
    let train = synth_blobs(4, 200, 2, 8.0, 1).unwrap();
    let test = synth_blobs(4, 200, 2, 8.0, 2).unwrap();
    let spec = NetworkSpec::mlp(2, &[], 4);
    let net = Network::new(spec.clone()).unwrap();
    let mut state = ModelState::init(&spec, &mut rng::stream(0, "init", &[]));
    let all: Vec<usize> = (0..train.len()).collect();
    for _ in 0..30 {
        for chunk in all.chunks(32) {
            let (_, g) = ce_loss_and_grad(&net, &state, &train.batch(chunk)).unwrap();
            sgd_step(&mut state, &g, SgdConfig::default()).unwrap();
        }
    }
    let acc = evaluate(&net, &state, &test).unwrap().overall;
    assert!(acc > 0.95, "accuracy {acc}");
}

#[test]
fn zero_separation_is_chance_level() {
    let train = synth_blobs(4, 500, 2, 0.0, 1).unwrap();
    let spec = NetworkSpec::mlp(2, &[], 4);
    let net = Network::new(spec.clone()).unwrap();
    let state = ModelState::init(&spec, &mut rng::stream(3, "init", &[]));
    let acc = evaluate(&net, &state, &train).unwrap().overall;
    assert!((acc - 0.25).abs() < 0.1, "accuracy {acc}");
}

/// Big-endian IDX files assembled byte by byte.
fn idx_files(dir: &std::path::Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut images = vec![0x00, 0x00, 0x08, 0x03];
    for dim in [2u32, 2, 3] {
        images.extend_from_slice(&dim.to_be_bytes());
    }
    images.extend_from_slice(&[0, 51, 102, 153, 204, 255, 255, 0, 1, 2, 3, 4]);
    let mut labels = vec![0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02];
    labels.extend_from_slice(&[7, 2]);
    let (ip, lp) = (dir.join("img.idx"), dir.join("lbl.idx"));
    std::fs::File::create(&ip).unwrap().write_all(&images).unwrap();
    std::fs::File::create(&lp).unwrap().write_all(&labels).unwrap();
    (ip, lp)
}

#[test]
fn idx_fixture_loads_exact_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = idx_files(dir.path());
    let d = load_idx(&ip, &lp, 10).unwrap();
    assert_eq!(d.len(), 2);
    assert_eq!(d.sample_shape, vec![1, 2, 3]);
    assert_eq!(d.labels(), &[7, 2]);
    let expected: Vec<f64> = [0, 51, 102, 153, 204, 255].iter().map(|&b| b as f64 / 255.0).collect();
    assert_eq!(d.input(0), expected.as_slice());
    assert_eq!(d.input(1)[1], 0.0);
    assert!(load_idx(&ip, &lp, 5).is_err(), "label 7 with K=5 must be rejected");
}

#[test]
fn truncated_idx_names_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = idx_files(dir.path());
    let bytes = std::fs::read(&ip).unwrap();
    std::fs::write(&ip, &bytes[..bytes.len() - 3]).unwrap();
    let msg = load_idx(&ip, &lp, 10).unwrap_err().to_string();
    assert!(msg.contains("expected 28") && msg.contains("has 25"), "{msg}");
}

#[test]
fn reduced_class_becomes_missing() {
    use fedka_core::data::{apply_reduction_schedule, ClientShard, ReductionStep};
    let data = synth_blobs(3, 100, 2, 4.0, 0).unwrap();
    let shard = ClientShard::new(0, (0..300).collect(), &data, 0.05).unwrap();
    let steps: Vec<ReductionStep> = [(50, 10), (60, 5), (70, 0)]
        .iter()
        .map(|&(round, keep)| ReductionStep {
            round,
            client: 0,
            class: 1,
            keep,
        })
        .collect();
    let mid = apply_reduction_schedule(&shard, &data, &steps, 65).unwrap();
    assert_eq!(mid.counts[1], 5);
    assert_eq!(mid.roles.role_of(1), ClassRole::NonDominant);
    let end = apply_reduction_schedule(&shard, &data, &steps, 70).unwrap();
    assert_eq!(end.roles.role_of(1), ClassRole::Missing);
    assert_eq!(apply_reduction_schedule(&shard, &data, &[], 70).unwrap(), shard);
}
