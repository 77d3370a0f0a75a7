//! Finite-difference checks of every analytic gradient used in training.

use rand::Rng;

use crate::anchor::ka_loss_and_grad_with_teacher;
use crate::error::Result;
use crate::federation::add_proximal;
use crate::nn::{
    ce_loss_and_grad, finite_diff_check_with, Batch, GradCheckReport, LayerSpec, ModelState, Network, NetworkSpec,
};
use crate::rng;

/// One objective checked on one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCase {
    pub name: String,
    pub seed: u64,
    pub report: GradCheckReport,
}

/// Settings for [`gradient_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seeds: u64,
    pub coords: usize,
    pub step: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seeds: 5,
            coords: 30,
            step: 1e-5,
        }
    }
}

fn random_batch<R: Rng>(net: &Network, n: usize, r: &mut R) -> Batch {
    let inputs = (0..n * net.input_len()).map(|_| r.random_range(-1.0..1.0)).collect();
    let labels = (0..n).map(|_| r.random_range(0..net.class_count())).collect();
    Batch::new(inputs, labels)
}

fn perturbed(state: &ModelState, scale: f64, r: &mut impl Rng) -> ModelState {
    let mut s = state.clone();
    for p in s.params.iter_mut() {
        *p += r.random_range(-scale..scale);
    }
    s
}

/// Checks cross-entropy for an MLP and a small conv net, the proximal
/// objective and cross-entropy plus a weighted anchor loss, on each seed.
pub fn gradient_suite(cfg: SuiteConfig) -> Result<Vec<GradCase>> {
    let mlp = NetworkSpec::mlp(6, &[10, 7], 4);
    let conv = NetworkSpec {
        input_shape: vec![1, 8, 8],
        class_count: 3,
        layers: vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 3,
                kernel: 3,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { kernel: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { inputs: 27, outputs: 3 },
        ],
    };
    let mut cases = Vec::new();
    for seed in 0..cfg.seeds {
        let mut r = rng::stream(seed, "gradcheck", &[]);
        for (label, spec) in [("mlp", &mlp), ("conv", &conv)] {
            let net = Network::new(spec.clone())?;
            let state = ModelState::init(spec, &mut r);
            let batch = random_batch(&net, 5, &mut r);
            let mut scratch = state.clone();
            let report = finite_diff_check_with(
                &state.params,
                |p| {
                    scratch.params.copy_from_slice(p);
                    ce_loss_and_grad(&net, &scratch, &batch)
                },
                cfg.coords,
                cfg.step,
                &mut r,
            )?;
            cases.push(GradCase {
                name: format!("{label} cross-entropy"),
                seed,
                report,
            });
        }

        let net = Network::new(mlp.clone())?;
        let global = ModelState::init(&mlp, &mut r);
        let local = perturbed(&global, 0.1, &mut r);
        let batch = random_batch(&net, 5, &mut r);
        let mu = 0.5;
        let mut scratch = local.clone();
        let report = finite_diff_check_with(
            &local.params,
            |p| {
                scratch.params.copy_from_slice(p);
                let (loss, mut grad) = ce_loss_and_grad(&net, &scratch, &batch)?;
                Ok((loss + add_proximal(&mut grad, p, &global.params, mu), grad))
            },
            cfg.coords,
            cfg.step,
            &mut r,
        )?;
        cases.push(GradCase {
            name: "proximal objective".into(),
            seed,
            report,
        });

        let anchor = random_batch(&net, 3, &mut r);
        let teacher = net.forward_logits(&global, &anchor.inputs)?;
        let dominant = [r.random_range(0..net.class_count())];
        let beta = 0.1;
        let report = finite_diff_check_with(
            &local.params,
            |p| {
                scratch.params.copy_from_slice(p);
                let (ce, mut grad) = ce_loss_and_grad(&net, &scratch, &batch)?;
                let (ka, ka_grad) = ka_loss_and_grad_with_teacher(&net, &anchor.inputs, &teacher, &scratch, &dominant)?;
                for (g, k) in grad.iter_mut().zip(&ka_grad) {
                    *g += beta * k;
                }
                Ok((ce + beta * ka, grad))
            },
            cfg.coords,
            cfg.step,
            &mut r,
        )?;
        cases.push(GradCase {
            name: "anchored objective".into(),
            seed,
            report,
        });
    }
    Ok(cases)
}
