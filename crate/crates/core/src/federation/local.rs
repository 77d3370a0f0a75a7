//! One client's local stage.

use rand::seq::SliceRandom;

use super::aggregate::ClientUpdate;
use crate::anchor::{
    build_anchor, downsample_anchor, ka_loss_and_grad_with_teacher, AnchorSampler, AnchorVariant, KnowledgeAnchor,
    SharedDataset,
};
use crate::data::{ClientShard, LabeledDataset};
use crate::error::{Error, Result};
use crate::nn::{ce_loss_and_grad, sgd_step, Matrix, ModelState, Network, SgdConfig};
use crate::rng;

/// Local objective used by a client.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Cross-entropy only.
    FedAvg,
    /// Cross-entropy plus `(mu / 2) * ||theta - theta_global||^2`.
    FedProx { mu: f64 },
    /// Cross-entropy plus `beta` times the knowledge-anchor loss.
    FedKa {
        beta: f64,
        anchor_cap: usize,
        sampler: AnchorSampler,
        variant: AnchorVariant,
        cache_teacher: bool,
    },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::FedAvg => "fedavg",
            Strategy::FedProx { .. } => "fedprox",
            Strategy::FedKa { .. } => "fedka",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            Strategy::FedAvg => Ok(()),
            Strategy::FedProx { mu } if !(mu >= 0.0 && mu.is_finite()) => {
                bad(format!("fedprox mu {mu} must be non-negative"))
            }
            Strategy::FedKa { beta, .. } if !(beta >= 0.0 && beta.is_finite()) => {
                bad(format!("fedka beta {beta} must be non-negative"))
            }
            Strategy::FedKa { anchor_cap: 0, .. } => bad("fedka anchor cap must be at least 1".into()),
            _ => Ok(()),
        }
    }
}

/// Round-constant inputs shared by every participant.
#[derive(Debug, Clone, Copy)]
pub struct RoundContext<'a> {
    pub net: &'a Network,
    pub dataset: &'a LabeledDataset,
    pub shared: Option<&'a SharedDataset>,
    pub global: &'a ModelState,
    pub round: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
    pub master_seed: u64,
}

/// Result of a local stage: the upload plus the anchor it trained against.
#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub update: ClientUpdate,
    pub anchor: Option<KnowledgeAnchor>,
}

/// Adds the gradient of `(mu / 2) * ||params - anchor||^2` to `grad` and
/// returns the term's value.
pub fn add_proximal(grad: &mut [f64], params: &[f64], anchor: &[f64], mu: f64) -> f64 {
    let mut sq = 0.0;
    for ((g, &p), &p0) in grad.iter_mut().zip(params).zip(anchor) {
        let d = p - p0;
        sq += d * d;
        *g += mu * d;
    }
    0.5 * mu * sq
}

/// Builds this round's (down-sampled) anchor for a client.
pub fn round_anchor(
    ctx: &RoundContext<'_>,
    shard: &ClientShard,
    strategy: &Strategy,
) -> Result<Option<KnowledgeAnchor>> {
    let Strategy::FedKa {
        anchor_cap,
        sampler,
        variant,
        ..
    } = *strategy
    else {
        return Ok(None);
    };
    let shared = ctx
        .shared
        .ok_or_else(|| Error::InvalidArgument("fedka needs a shared dataset".into()))?;
    let key = [ctx.round as u64, shard.client_id as u64];
    let full = build_anchor(
        shard,
        ctx.dataset,
        shared,
        ctx.round,
        variant,
        sampler,
        Some((ctx.net, ctx.global)),
        &mut rng::stream(ctx.master_seed, "anchor", &key),
    )?;
    let capped = downsample_anchor(&full, anchor_cap, &mut rng::stream(ctx.master_seed, "downsample", &key))?;
    Ok(Some(capped))
}

/// Trains a fresh copy of the global model on the shard for
/// `ctx.local_epochs` epochs of shuffled mini-batches.
pub fn local_train(ctx: &RoundContext<'_>, shard: &ClientShard, strategy: &Strategy) -> Result<LocalOutcome> {
    strategy.validate()?;
    if shard.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "client {} has no samples",
            shard.client_id
        )));
    }
    if ctx.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be at least 1".into()));
    }
    let anchor = round_anchor(ctx, shard, strategy)?;
    let anchor_inputs = anchor.as_ref().map(|a| a.inputs(ctx.dataset)).unwrap_or_default();
    let cached_teacher = match (strategy, &anchor) {
        (
            Strategy::FedKa {
                cache_teacher: true, ..
            },
            Some(a),
        ) if !a.is_empty() => Some(ctx.net.forward_logits(ctx.global, &anchor_inputs)?),
        _ => None,
    };

    let mut local = ctx.global.fresh_copy();
    let mut order = shard.indices.clone();
    let mut batch_rng = rng::stream(ctx.master_seed, "batch", &[ctx.round as u64, shard.client_id as u64]);
    let mut loss_trace = Vec::with_capacity(ctx.local_epochs);
    for _ in 0..ctx.local_epochs {
        order.shuffle(&mut batch_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(ctx.batch_size) {
            let batch = ctx.dataset.batch(chunk);
            let (mut loss, mut grad) = ce_loss_and_grad(ctx.net, &local, &batch)?;
            match *strategy {
                Strategy::FedAvg => {}
                Strategy::FedProx { mu } => {
                    if mu != 0.0 {
                        loss += add_proximal(&mut grad, &local.params, &ctx.global.params, mu);
                    }
                }
                Strategy::FedKa { beta, .. } => {
                    let a = anchor.as_ref().expect("fedka builds an anchor");
                    if beta != 0.0 && !a.is_empty() {
                        let teacher: Matrix = match &cached_teacher {
                            Some(t) => t.clone(),
                            None => ctx.net.forward_logits(ctx.global, &anchor_inputs)?,
                        };
                        let (ka, ka_grad) =
                            ka_loss_and_grad_with_teacher(ctx.net, &anchor_inputs, &teacher, &local, &a.dominant)?;
                        loss += beta * ka;
                        for (g, k) in grad.iter_mut().zip(&ka_grad) {
                            *g += beta * k;
                        }
                    }
                }
            }
            sgd_step(&mut local, &grad, ctx.sgd)?;
            epoch_loss += loss;
            batches += 1;
        }
        loss_trace.push(epoch_loss / batches as f64);
    }
    Ok(LocalOutcome {
        update: ClientUpdate {
            client_id: shard.client_id,
            state: local,
            sample_count: shard.len(),
            loss_trace,
        },
        anchor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchor::build_shared_dataset;
    use crate::data::{dirichlet_partition, synth_blobs, PartitionSpec};
    use crate::nn::NetworkSpec;

    struct Fixture {
        net: Network,
        data: LabeledDataset,
        shards: Vec<ClientShard>,
        shared: SharedDataset,
        global: ModelState,
    }

    fn fixture() -> Fixture {
        let data = synth_blobs(4, 30, 4, 4.0, 1).unwrap();
        let shards = dirichlet_partition(&data, &PartitionSpec::new(3, 0.3, 2), 0.05).unwrap();
        let shared = build_shared_dataset(&data, Some(&shards), 3).unwrap();
        let spec = NetworkSpec::mlp(4, &[8], 4);
        let global = ModelState::init(&spec, &mut rng::stream(4, "init", &[]));
        Fixture {
            net: Network::new(spec).unwrap(),
            data,
            shards,
            shared,
            global,
        }
    }

    fn ctx<'a>(f: &'a Fixture, epochs: usize) -> RoundContext<'a> {
        RoundContext {
            net: &f.net,
            dataset: &f.data,
            shared: Some(&f.shared),
            global: &f.global,
            round: 1,
            local_epochs: epochs,
            batch_size: 16,
            sgd: SgdConfig::default(),
            master_seed: 11,
        }
    }

    fn ka(beta: f64, cache: bool) -> Strategy {
        Strategy::FedKa {
            beta,
            anchor_cap: 10,
            sampler: AnchorSampler::Random,
            variant: AnchorVariant::Full,
            cache_teacher: cache,
        }
    }

    #[test]
    fn zero_epochs_return_global() {
        let f = fixture();
        let out = local_train(&ctx(&f, 0), &f.shards[0], &Strategy::FedAvg).unwrap();
        assert_eq!(out.update.state, f.global);
        assert!(out.update.loss_trace.is_empty());
    }

    #[test]
    fn degenerate_strategies_match_fedavg_bitwise() {
        let f = fixture();
        let c = ctx(&f, 3);
        for shard in &f.shards {
            let avg = local_train(&c, shard, &Strategy::FedAvg).unwrap().update;
            let prox = local_train(&c, shard, &Strategy::FedProx { mu: 0.0 }).unwrap().update;
            let ka0 = local_train(&c, shard, &ka(0.0, false)).unwrap();
            assert_eq!(avg, prox);
            assert_eq!(avg, ka0.update);
            assert!(ka0.anchor.is_some());
        }
    }

    #[test]
    fn teacher_cache_is_numerically_identical() {
        let f = fixture();
        let c = ctx(&f, 2);
        for shard in &f.shards {
            let a = local_train(&c, shard, &ka(0.5, false)).unwrap().update;
            let b = local_train(&c, shard, &ka(0.5, true)).unwrap().update;
            assert_eq!(a, b);
        }
    }

    #[test]
    fn regularizers_change_the_trajectory() {
        let f = fixture();
        let c = ctx(&f, 2);
        let shard = f
            .shards
            .iter()
            .find(|s| !s.roles.missing.is_empty() || !s.roles.non_dominant.is_empty())
            .unwrap();
        let avg = local_train(&c, shard, &Strategy::FedAvg).unwrap().update;
        assert_ne!(
            avg,
            local_train(&c, shard, &Strategy::FedProx { mu: 1.0 }).unwrap().update
        );
        assert_ne!(avg, local_train(&c, shard, &ka(0.5, false)).unwrap().update);
    }

    #[test]
    fn fedka_without_shared_set_is_an_error() {
        let f = fixture();
        let mut c = ctx(&f, 1);
        c.shared = None;
        assert!(local_train(&c, &f.shards[0], &ka(0.1, false)).is_err());
        assert!(local_train(&c, &f.shards[0], &Strategy::FedProx { mu: -1.0 }).is_err());
    }
}
