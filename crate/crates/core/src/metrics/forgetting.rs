use serde::{Deserialize, Serialize};

use super::accuracy::classwise_accuracy;
use crate::data::{ClassRole, ClientShard, LabeledDataset};
use crate::error::Result;
use crate::nn::{ModelState, Network};

/// Relative class-accuracy drop from the round's global model to a client's
/// locally trained model: `(acc_global - acc_local) / (acc_global + xi)`.
/// Positive values mean forgetting, negative values improvement.
pub fn forgetting_degree(acc_global: f64, acc_local: f64, xi: f64) -> f64 {
    (acc_global - acc_local) / (acc_global + xi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingRecord {
    pub round: usize,
    pub client: usize,
    pub class: usize,
    pub role: ClassRole,
    pub acc_global: f64,
    pub acc_local: f64,
    pub tau: f64,
}

/// Forgetting records for every class the test set defines, given the
/// global model's class accuracies for this round.
pub fn forgetting_records(
    round: usize,
    shard: &ClientShard,
    global_acc: &[Option<f64>],
    local_acc: &[Option<f64>],
    xi: f64,
) -> Vec<ForgettingRecord> {
    global_acc
        .iter()
        .zip(local_acc)
        .enumerate()
        .filter_map(|(class, (g, l))| {
            let (g, l) = ((*g)?, (*l)?);
            Some(ForgettingRecord {
                round,
                client: shard.client_id,
                class,
                role: shard.roles.role_of(class),
                acc_global: g,
                acc_local: l,
                tau: forgetting_degree(g, l, xi),
            })
        })
        .collect()
}

/// Class-wise forgetting of `local` relative to `global` on `test`.
pub fn measure_local_forgetting(
    round: usize,
    shard: &ClientShard,
    net: &Network,
    global: &ModelState,
    local: &ModelState,
    test: &LabeledDataset,
    xi: f64,
) -> Result<Vec<ForgettingRecord>> {
    let g = classwise_accuracy(net, global, test)?;
    let l = classwise_accuracy(net, local, test)?;
    Ok(forgetting_records(round, shard, &g, &l, xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_blobs;
    use crate::nn::NetworkSpec;
    use crate::rng;
    use proptest::prelude::*;

    #[test]
    fn worked_values() {
        assert!((forgetting_degree(0.8, 0.2, 1e-8) - 0.75).abs() < 1e-8);
        assert_eq!(forgetting_degree(0.37, 0.37, 1e-8), 0.0);
        let t = forgetting_degree(0.0, 0.4, 1e-8);
        assert!((t - -4e7).abs() < 1e-6 * 4e7);
    }

    #[test]
    fn identical_models_do_not_forget() {
        let d = synth_blobs(3, 20, 2, 4.0, 0).unwrap();
        let spec = NetworkSpec::mlp(2, &[5], 3);
        let net = Network::new(spec.clone()).unwrap();
        let s = ModelState::init(&spec, &mut rng::stream(0, "init", &[]));
        let shard = ClientShard::new(0, (0..25).collect(), &d, 0.05).unwrap();
        let recs = measure_local_forgetting(1, &shard, &net, &s, &s, &d, 1e-8).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.tau == 0.0));
        assert_eq!(recs[2].role, ClassRole::Missing);
    }

    #[test]
    fn records_round_trip_through_json() {
        let r = ForgettingRecord {
            round: 3,
            client: 1,
            class: 2,
            role: ClassRole::NonDominant,
            acc_global: 1.0 / 3.0,
            acc_local: 0.1,
            tau: forgetting_degree(1.0 / 3.0, 0.1, 1e-8),
        };
        let back: ForgettingRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn bounded_above_with_sign_semantics(g in 0.0f64..=1.0, l in 0.0f64..=1.0) {
            let t = forgetting_degree(g, l, 1e-8);
            prop_assert!(t <= 1.0);
            prop_assert_eq!(t < 0.0, l > g);
            prop_assert_eq!(t == 0.0, l == g);
        }
    }
}
