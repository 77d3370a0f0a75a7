//! The outer round loop and its on-disk artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, ClientUpdate};
use super::local::{local_train, LocalOutcome, RoundContext, Strategy};
use super::sampling::sample_participants;
use crate::anchor::{audit_rows, build_shared_dataset, write_audit_log, AuditRow, SharedDataset};
use crate::config::{DatasetConfig, ExperimentConfig, ModelConfig, StrategyConfig};
use crate::data::{
    apply_due, dirichlet_partition, load_idx, read_assignments, synth_blobs, write_assignments, write_count_matrix,
    write_role_report, ClientShard, LabeledDataset, PartitionSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{
    classwise_accuracy, evaluate, forgetting_records, rounds_to_target, write_client_losses_csv, write_forgetting_csv,
    write_rounds_csv, ForgettingRecord, RoundRecord,
};
use crate::nn::{ModelState, Network, NetworkSpec};
use crate::rng;

impl From<&StrategyConfig> for Strategy {
    fn from(cfg: &StrategyConfig) -> Self {
        match *cfg {
            StrategyConfig::Fedavg => Strategy::FedAvg,
            StrategyConfig::Fedprox { mu } => Strategy::FedProx { mu },
            StrategyConfig::Fedka {
                beta,
                anchor_cap,
                sampler,
                variant,
                cache_teacher,
            } => Strategy::FedKa {
                beta,
                anchor_cap,
                sampler,
                variant,
                cache_teacher,
            },
        }
    }
}

/// Loads the train and test splits a config describes.
pub fn load_datasets(config: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    match &config.dataset {
        DatasetConfig::Blobs {
            classes,
            per_class,
            test_per_class,
            dims,
            separation,
            seed,
        } => {
            let train = synth_blobs(*classes, *per_class, *dims, *separation, *seed)?;
            let test_seed = rng::derive_u64(*seed, "blobs-test", &[]);
            let test = synth_blobs(*classes, *test_per_class, *dims, *separation, test_seed)?;
            Ok((train, test))
        }
        DatasetConfig::Idx {
            classes,
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let train = load_idx(train_images, train_labels, *classes)?;
            let test = load_idx(test_images, test_labels, *classes)?;
            if train.sample_shape != test.sample_shape {
                return Err(Error::Dataset(format!(
                    "train samples have shape {:?}, test samples {:?}",
                    train.sample_shape, test.sample_shape
                )));
            }
            Ok((train, test))
        }
    }
}

/// The network architecture a config selects for samples of `sample_shape`.
pub fn network_spec(config: &ExperimentConfig, sample_shape: &[usize]) -> Result<NetworkSpec> {
    let k = config.dataset.class_count();
    match &config.model {
        ModelConfig::Mlp { hidden } => Ok(NetworkSpec::mlp(sample_shape.iter().product(), hidden, k)),
        ModelConfig::TCnn => match *sample_shape {
            [c, h, w] if h >= 14 && w >= 14 => Ok(NetworkSpec::t_cnn(c, h, w, k)),
            _ => Err(Error::InvalidSpec(format!(
                "t_cnn needs [channels, height, width] samples of at least 14x14, got {sample_shape:?}"
            ))),
        },
    }
}

/// Partitions the training set, or reads the configured assignment file.
pub fn partition_clients(config: &ExperimentConfig, train: &LabeledDataset) -> Result<Vec<ClientShard>> {
    let p = &config.partition;
    match &p.assignment_file {
        Some(path) => {
            let file = File::open(path).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?;
            read_assignments(file, train, p.clients, p.gamma)
        }
        None => {
            let spec = PartitionSpec {
                client_count: p.clients,
                alpha: p.alpha,
                seed: p.seed,
                min_samples_per_client: p.min_samples,
                max_retries: p.max_retries,
            };
            dirichlet_partition(train, &spec, p.gamma)
        }
    }
}

/// Everything a run needs before its first round.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub net: Network,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub shards: Vec<ClientShard>,
    pub shared: SharedDataset,
    pub initial: ModelState,
}

/// What the observer sees at the end of each round.
#[derive(Debug)]
pub struct RoundEvent<'a> {
    pub round: usize,
    pub rounds: usize,
    pub participants: &'a [usize],
    pub updates: &'a [ClientUpdate],
    /// The aggregated model that starts the next round.
    pub global: &'a ModelState,
    /// Present on evaluation rounds.
    pub record: Option<&'a RoundRecord>,
    pub forgetting: &'a [ForgettingRecord],
}

/// Headline numbers of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub strategy: String,
    pub rounds: usize,
    pub final_acc: Option<f64>,
    pub final_class_acc: Vec<Option<f64>>,
    pub best_acc: Option<f64>,
    pub best_round: Option<usize>,
    /// First round reaching each accuracy level, `None` when never reached.
    pub rounds_to_target: Vec<TargetRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRound {
    pub target: f64,
    pub round: Option<usize>,
}

/// In-memory results of a run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output_dir: Option<PathBuf>,
    pub rounds: Vec<RoundRecord>,
    pub forgetting: Vec<ForgettingRecord>,
    /// `(round, client, mean objective over the last local epoch)`.
    pub losses: Vec<(usize, usize, f64)>,
    pub anchors: Vec<AuditRow>,
    pub final_state: ModelState,
    pub summary: RunSummary,
}

#[derive(Default)]
struct Progress {
    rounds: Vec<RoundRecord>,
    forgetting: Vec<ForgettingRecord>,
    losses: Vec<(usize, usize, f64)>,
    anchors: Vec<AuditRow>,
    completed: usize,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        let (train, test) = load_datasets(config)?;
        let net = Network::new(network_spec(config, &train.sample_shape)?)?;
        let shards = partition_clients(config, &train)?;
        let shared = build_shared_dataset(
            &train,
            Some(&shards),
            rng::derive_u64(config.master_seed, "shared", &[]),
        )?;
        let initial = ModelState::init(net.spec(), &mut rng::stream(config.master_seed, "init", &[]));
        Ok(Self {
            config: config.clone(),
            net,
            train,
            test,
            shards,
            shared,
            initial,
        })
    }

    /// Runs every round. With `out`, artifacts are written there; metric
    /// tables are flushed even when a round fails.
    pub fn run(&self, out: Option<&Path>, observer: &mut dyn FnMut(&RoundEvent<'_>)) -> Result<RunOutcome> {
        let started = Instant::now();
        if let Some(dir) = out {
            self.write_setup(dir)?;
        }
        let mut progress = Progress::default();
        let result = self.rounds(out, &mut progress, observer);
        let final_state = match &result {
            Ok(state) => state.clone(),
            Err(_) => self.initial.clone(),
        };
        let summary = self.summary(&progress.rounds);
        if let Some(dir) = out {
            let status = match &result {
                Ok(_) => "complete".to_string(),
                Err(e) => format!("failed: {e}"),
            };
            self.write_metrics(dir, &progress, &summary)?;
            self.write_manifest(dir, &status, progress.completed, started.elapsed().as_secs_f64())?;
            if result.is_ok() {
                write_checkpoint(dir, "final.bin", &final_state)?;
            }
        }
        result?;
        Ok(RunOutcome {
            output_dir: out.map(Path::to_path_buf),
            rounds: progress.rounds,
            forgetting: progress.forgetting,
            losses: progress.losses,
            anchors: progress.anchors,
            final_state,
            summary,
        })
    }

    fn rounds(
        &self,
        out: Option<&Path>,
        progress: &mut Progress,
        observer: &mut dyn FnMut(&RoundEvent<'_>),
    ) -> Result<ModelState> {
        let cfg = &self.config;
        let t = &cfg.training;
        let strategy = Strategy::from(&cfg.strategy);
        strategy.validate()?;
        let anchor_sampler = match cfg.strategy {
            StrategyConfig::Fedka { sampler, .. } => Some(sampler),
            _ => None,
        };
        let mut shards = self.shards.clone();
        let client_ids: Vec<usize> = shards.iter().map(|s| s.client_id).collect();
        let mut global = self.initial.clone();
        if let Some(dir) = out {
            write_checkpoint(dir, "round_0000.bin", &global)?;
        }
        for round in 1..=t.rounds {
            for shard in shards.iter_mut() {
                apply_due(shard, &self.train, &cfg.schedule, round)?;
            }
            let participants = sample_participants(&client_ids, t.participation, cfg.master_seed, round)?;
            let ctx = RoundContext {
                net: &self.net,
                dataset: &self.train,
                shared: Some(&self.shared),
                global: &global,
                round,
                local_epochs: t.local_epochs,
                batch_size: t.batch_size,
                sgd: t.sgd(),
                master_seed: cfg.master_seed,
            };
            let global_class_acc = if cfg.metrics.forgetting {
                Some(classwise_accuracy(&self.net, &global, &self.test)?)
            } else {
                None
            };
            let train_one = |&client: &usize| -> Result<(LocalOutcome, Option<Vec<Option<f64>>>)> {
                let shard = &shards[client];
                let outcome = local_train(&ctx, shard, &strategy)?;
                if !outcome.update.state.is_finite() {
                    return Err(Error::NonFinite {
                        context: "local model parameters".into(),
                    });
                }
                let local_acc = match global_class_acc {
                    Some(_) => Some(classwise_accuracy(&self.net, &outcome.update.state, &self.test)?),
                    None => None,
                };
                Ok((outcome, local_acc))
            };
            let results: Vec<_> = if t.parallel {
                participants.par_iter().map(train_one).collect()
            } else {
                participants.iter().map(train_one).collect()
            };

            let mut updates = Vec::with_capacity(participants.len());
            let mut round_forgetting = Vec::new();
            for (&client, result) in participants.iter().zip(results) {
                let (outcome, local_acc) = result.map_err(|e| Error::Client {
                    round,
                    client,
                    source: Box::new(e),
                })?;
                if let (Some(g), Some(l)) = (&global_class_acc, &local_acc) {
                    round_forgetting.extend(forgetting_records(round, &shards[client], g, l, cfg.metrics.xi));
                }
                if let (Some(anchor), Some(sampler)) = (&outcome.anchor, anchor_sampler) {
                    progress.anchors.extend(audit_rows(anchor, sampler));
                }
                let last = outcome.update.loss_trace.last().copied().unwrap_or(f64::NAN);
                progress.losses.push((round, client, last));
                log::debug!("round {round} client {client}: loss {last:.6}");
                updates.push(outcome.update);
            }
            global = aggregate(&updates)?;

            let is_eval = round % cfg.metrics.eval_interval == 0 || round == t.rounds;
            if is_eval {
                let acc = evaluate(&self.net, &global, &self.test)?;
                progress.rounds.push(RoundRecord {
                    round,
                    global_acc: acc.overall,
                    class_acc: acc.per_class,
                    participants: participants.clone(),
                    client_losses: updates
                        .iter()
                        .map(|u| (u.client_id, u.loss_trace.last().copied().unwrap_or(f64::NAN)))
                        .collect(),
                });
                log::info!("round {round}/{}: global accuracy {:.4}", t.rounds, acc.overall);
            }
            if let Some(dir) = out {
                let interval = cfg.metrics.checkpoint_interval;
                if interval > 0 && round % interval == 0 {
                    write_checkpoint(dir, &format!("round_{round:04}.bin"), &global)?;
                }
            }
            let start = progress.forgetting.len();
            progress.forgetting.extend(round_forgetting);
            progress.completed = round;
            observer(&RoundEvent {
                round,
                rounds: t.rounds,
                participants: &participants,
                updates: &updates,
                global: &global,
                record: if is_eval { progress.rounds.last() } else { None },
                forgetting: &progress.forgetting[start..],
            });
        }
        Ok(global)
    }

    fn summary(&self, rounds: &[RoundRecord]) -> RunSummary {
        let last = rounds.last();
        let best = rounds.iter().fold(None::<&RoundRecord>, |b, r| match b {
            Some(b) if b.global_acc >= r.global_acc => Some(b),
            _ => Some(r),
        });
        let curve: Vec<(usize, f64)> = rounds.iter().map(|r| (r.round, r.global_acc)).collect();
        let rounds_to_target = (1..=9)
            .map(|i| {
                let target = i as f64 / 10.0;
                TargetRound {
                    target,
                    round: rounds_to_target(&curve, target),
                }
            })
            .collect();
        RunSummary {
            name: self.config.name.clone(),
            strategy: self.config.strategy.name().to_string(),
            rounds: self.config.training.rounds,
            final_acc: last.map(|r| r.global_acc),
            final_class_acc: last.map(|r| r.class_acc.clone()).unwrap_or_default(),
            best_acc: best.map(|r| r.global_acc),
            best_round: best.map(|r| r.round),
            rounds_to_target,
        }
    }

    fn write_setup(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("metrics"))?;
        fs::create_dir_all(dir.join("checkpoints"))?;
        fs::write(dir.join("config.toml"), self.config.to_toml())?;
        let k = self.train.class_count;
        write_count_matrix(create(&dir.join("partition.csv"))?, &self.shards, k)?;
        write_role_report(create(&dir.join("roles.csv"))?, &self.shards)?;
        write_assignments(create(&dir.join("assignments.csv"))?, &self.train, &self.shards)?;
        Ok(())
    }

    fn write_metrics(&self, dir: &Path, p: &Progress, summary: &RunSummary) -> Result<()> {
        let m = dir.join("metrics");
        write_rounds_csv(create(&m.join("rounds.csv"))?, &p.rounds, self.train.class_count)?;
        write_forgetting_csv(create(&m.join("forgetting.csv"))?, &p.forgetting)?;
        write_client_losses_csv(create(&m.join("client_losses.csv"))?, &p.losses)?;
        if matches!(self.config.strategy, StrategyConfig::Fedka { .. }) {
            write_audit_log(create(&m.join("anchors.csv"))?, &p.anchors)?;
        }
        let json = serde_json::to_string_pretty(summary)?;
        fs::write(dir.join("summary.json"), json + "\n")?;
        Ok(())
    }

    fn write_manifest(&self, dir: &Path, status: &str, completed: usize, wall_secs: f64) -> Result<()> {
        let manifest = Manifest {
            run: ManifestRun {
                name: self.config.name.clone(),
                master_seed: self.config.master_seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs().saturating_sub(wall_secs as u64))
                    .unwrap_or(0),
                wall_time_secs: wall_secs,
                rounds_completed: completed,
                status: status.to_string(),
            },
            hashes: ManifestHashes {
                train_dataset: self.train.content_hash(),
                test_dataset: self.test.content_hash(),
                network: format!("{:016x}", self.net.hash()),
            },
            config: self.config.clone(),
        };
        let text = toml::to_string(&manifest).map_err(|e| Error::Checkpoint(format!("manifest: {e}")))?;
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

pub const MANIFEST_FILE: &str = "manifest.toml";

/// The run manifest: provenance, content hashes and the resolved config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run: ManifestRun,
    pub hashes: ManifestHashes,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub name: String,
    pub master_seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub wall_time_secs: f64,
    pub rounds_completed: usize,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHashes {
    pub train_dataset: String,
    pub test_dataset: String,
    pub network: String,
}

impl Manifest {
    pub fn read(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)?;
        toml::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_checkpoint(dir: &Path, name: &str, state: &ModelState) -> Result<()> {
    let mut out = create(&dir.join("checkpoints").join(name))?;
    state.write_blob(&mut out)?;
    out.flush()?;
    Ok(())
}

/// Prepares and runs `config`, writing artifacts to `config.output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome> {
    run_experiment_with(config, &mut |_| {})
}

/// [`run_experiment`] with a per-round callback.
pub fn run_experiment_with(config: &ExperimentConfig, observer: &mut dyn FnMut(&RoundEvent<'_>)) -> Result<RunOutcome> {
    Experiment::prepare(config)?.run(Some(&config.output_dir), observer)
}
