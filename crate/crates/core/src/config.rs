//! Declarative experiment configuration.
//!
//! A config file is TOML. Loading happens in three steps: the text is parsed
//! into a generic TOML tree (where `--set key=value` overrides are applied),
//! deserialized into a permissive raw form while recording unknown keys, and
//! finally resolved into an [`ExperimentConfig`] with every default filled
//! in. Resolution reports every violation it finds rather than stopping at the
//! first one. The resolved config serializes back to TOML and reloads to
//! itself.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anchor::{AnchorSampler, AnchorVariant};
use crate::data::ReductionStep;
use crate::error::{ConfigIssue, Error, Result};
use crate::nn::SgdConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// Gaussian blobs; the test split uses the same centers with a different
    /// noise seed.
    Blobs {
        classes: usize,
        per_class: usize,
        test_per_class: usize,
        dims: usize,
        separation: f64,
        seed: u64,
    },
    Idx {
        classes: usize,
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
}

impl DatasetConfig {
    pub fn class_count(&self) -> usize {
        match self {
            DatasetConfig::Blobs { classes, .. } | DatasetConfig::Idx { classes, .. } => *classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub clients: usize,
    pub alpha: f64,
    pub seed: u64,
    pub min_samples: usize,
    pub max_retries: usize,
    /// Threshold separating dominant from non-dominant classes.
    pub gamma: f64,
    /// Pre-computed `sample_id,client_id,label` assignment to use instead of
    /// drawing a partition.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case")]
pub enum ModelConfig {
    Mlp { hidden: Vec<usize> },
    TCnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyConfig {
    Fedavg,
    Fedprox {
        mu: f64,
    },
    Fedka {
        beta: f64,
        anchor_cap: usize,
        sampler: AnchorSampler,
        variant: AnchorVariant,
        cache_teacher: bool,
    },
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Fedavg => "fedavg",
            StrategyConfig::Fedprox { .. } => "fedprox",
            StrategyConfig::Fedka { .. } => "fedka",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub local_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub participation: f64,
    /// Train the round's clients on a thread pool. Results are identical to
    /// serial execution.
    pub parallel: bool,
}

impl TrainingConfig {
    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub xi: f64,
    /// Evaluate the global model every this many rounds (the last round is
    /// always evaluated).
    pub eval_interval: usize,
    /// Record class-wise forgetting for every participant every round.
    pub forgetting: bool,
    /// Write a global checkpoint every this many rounds; 0 keeps only the
    /// initial and final models.
    pub checkpoint_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub model: ModelConfig,
    pub strategy: StrategyConfig,
    pub training: TrainingConfig,
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<ReductionStep>,
}

#[derive(Debug, Default, Deserialize)]
struct RawConfig {
    name: Option<String>,
    master_seed: Option<u64>,
    output_dir: Option<PathBuf>,
    dataset: Option<RawDataset>,
    partition: Option<RawPartition>,
    model: Option<RawModel>,
    strategy: Option<RawStrategy>,
    training: Option<RawTraining>,
    metrics: Option<RawMetrics>,
    schedule: Option<Vec<ReductionStep>>,
}

#[derive(Debug, Default, Deserialize)]
struct RawDataset {
    kind: Option<String>,
    classes: Option<usize>,
    per_class: Option<usize>,
    test_per_class: Option<usize>,
    dims: Option<usize>,
    separation: Option<f64>,
    seed: Option<u64>,
    train_images: Option<PathBuf>,
    train_labels: Option<PathBuf>,
    test_images: Option<PathBuf>,
    test_labels: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
struct RawPartition {
    clients: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    min_samples: Option<usize>,
    max_retries: Option<usize>,
    gamma: Option<f64>,
    assignment_file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
struct RawModel {
    preset: Option<String>,
    hidden: Option<Vec<usize>>,
}

#[derive(Debug, Default, Deserialize)]
struct RawStrategy {
    kind: Option<String>,
    mu: Option<f64>,
    beta: Option<f64>,
    anchor_cap: Option<usize>,
    sampler: Option<AnchorSampler>,
    variant: Option<AnchorVariant>,
    cache_teacher: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct RawTraining {
    rounds: Option<usize>,
    local_epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    momentum: Option<f64>,
    weight_decay: Option<f64>,
    participation: Option<f64>,
    parallel: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
struct RawMetrics {
    xi: Option<f64>,
    eval_interval: Option<usize>,
    forgetting: Option<bool>,
    checkpoint_interval: Option<usize>,
}

pub const DEFAULT_ROUNDS: usize = 100;
pub const DEFAULT_LOCAL_EPOCHS: usize = 10;
pub const DEFAULT_BATCH_SIZE: usize = 128;
pub const DEFAULT_ANCHOR_CAP: usize = 10;
pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_GAMMA: f64 = 0.05;
pub const DEFAULT_XI: f64 = 1e-8;
pub const DEFAULT_MLP_HIDDEN: usize = 32;

/// Sets `dotted.key` in a TOML tree, creating intermediate tables. The value
/// is parsed as a TOML literal, falling back to a plain string.
pub fn apply_override(root: &mut toml::Value, key: &str, raw_value: &str) -> Result<()> {
    let value = toml::from_str::<toml::Table>(&format!("v = {raw_value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw_value.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(vec![ConfigIssue::new(key, "malformed override key")]));
    }
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(vec![ConfigIssue::new(key, format!("{part} is not a table"))]))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| Error::Config(vec![ConfigIssue::new(key, "parent is not a table")]))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Parses and resolves a config document. Relative paths are taken relative
/// to `base_dir`; a missing `output_dir` becomes `<default_output_root>/<name>`.
pub fn load_config_str(
    text: &str,
    overrides: &[(String, String)],
    base_dir: &Path,
    default_output_root: &Path,
) -> Result<ExperimentConfig> {
    let mut tree: toml::Value = toml::from_str::<toml::Table>(text)
        .map(toml::Value::Table)
        .map_err(|e| Error::Config(vec![ConfigIssue::new("<document>", e.to_string().trim().to_string())]))?;
    for (k, v) in overrides {
        apply_override(&mut tree, k, v)?;
    }
    let mut unknown = Vec::new();
    let raw: RawConfig = serde_ignored::deserialize(tree, |path| {
        let dotted: Vec<String> = path
            .to_string()
            .split('.')
            .filter(|seg| *seg != "?")
            .map(str::to_string)
            .collect();
        unknown.push(dotted.join("."))
    })
    .map_err(|e| Error::Config(vec![ConfigIssue::new("<document>", e.to_string().trim().to_string())]))?;
    let mut issues: Vec<ConfigIssue> = unknown
        .into_iter()
        .map(|p| ConfigIssue::new(p, "unknown key"))
        .collect();
    let resolved = resolve(raw, base_dir, default_output_root, &mut issues);
    match resolved {
        Some(cfg) if issues.is_empty() => Ok(cfg),
        _ => Err(Error::Config(issues)),
    }
}

pub fn load_config_file(
    path: &Path,
    overrides: &[(String, String)],
    default_output_root: &Path,
) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(vec![ConfigIssue::new(path.display().to_string(), e.to_string())]))?;
    let base = path.parent().unwrap_or(Path::new("."));
    load_config_str(&text, overrides, base, default_output_root)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved config serializes")
    }
}

struct Issues<'a>(&'a mut Vec<ConfigIssue>);

impl Issues<'_> {
    fn push(&mut self, path: &str, msg: impl Into<String>) {
        self.0.push(ConfigIssue::new(path, msg));
    }

    fn required<T>(&mut self, v: Option<T>, path: &str) -> Option<T> {
        if v.is_none() {
            self.push(path, "missing required field");
        }
        v
    }

    fn check(&mut self, ok: bool, path: &str, msg: &str) {
        if !ok {
            self.push(path, msg);
        }
    }

    fn forbid<T>(&mut self, v: &Option<T>, path: &str, why: &str) {
        if v.is_some() {
            self.push(path, why);
        }
    }
}

/// Seeds derived from the master seed are kept below 2^63 so the resolved
/// config stays representable as TOML integers.
fn derived_seed(master: u64, name: &str) -> u64 {
    crate::rng::derive_u64(master, name, &[]) & (i64::MAX as u64)
}

fn rebase(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn resolve(raw: RawConfig, base: &Path, out_root: &Path, issues: &mut Vec<ConfigIssue>) -> Option<ExperimentConfig> {
    let mut is = Issues(issues);
    let master_seed = is.required(raw.master_seed, "master_seed");
    let seed = master_seed.unwrap_or(0);
    let name = raw.name.unwrap_or_else(|| "experiment".to_string());
    is.check(
        !name.is_empty() && !name.contains(['/', '\\']),
        "name",
        "must be a non-empty single path component",
    );
    let output_dir = raw
        .output_dir
        .map(|p| rebase(base, p))
        .unwrap_or_else(|| out_root.join(&name));

    let dataset = resolve_dataset(raw.dataset, base, seed, &mut is);
    let classes = dataset.as_ref().map(DatasetConfig::class_count);
    let partition = resolve_partition(raw.partition, base, seed, &mut is);
    let model = resolve_model(raw.model, &mut is);
    let strategy = resolve_strategy(raw.strategy, &mut is);
    let training = resolve_training(raw.training.unwrap_or_default(), &mut is);
    let metrics = resolve_metrics(raw.metrics.unwrap_or_default(), &mut is);
    let schedule = raw.schedule.unwrap_or_default();
    if let Err(e) = crate::data::validate_schedule(&schedule) {
        is.push("schedule", e.to_string());
    }
    for (i, step) in schedule.iter().enumerate() {
        if let Some(p) = &partition {
            is.check(
                step.client < p.clients,
                &format!("schedule[{i}].client"),
                "outside the client range",
            );
        }
        if let Some(k) = classes {
            is.check(
                step.class < k,
                &format!("schedule[{i}].class"),
                "outside the class range",
            );
        }
        is.check(
            step.round >= 1,
            &format!("schedule[{i}].round"),
            "rounds are numbered from 1",
        );
    }
    if let (Some(ModelConfig::TCnn), Some(DatasetConfig::Blobs { .. })) = (&model, &dataset) {
        is.push("model.preset", "t_cnn needs image-shaped input (use an idx dataset)");
    }

    Some(ExperimentConfig {
        name,
        master_seed: master_seed?,
        output_dir,
        dataset: dataset?,
        partition: partition?,
        model: model?,
        strategy: strategy?,
        training: training?,
        metrics: metrics?,
        schedule,
    })
}

fn resolve_dataset(raw: Option<RawDataset>, base: &Path, seed: u64, is: &mut Issues) -> Option<DatasetConfig> {
    let raw = is.required(raw, "dataset")?;
    let kind = is.required(raw.kind.clone(), "dataset.kind")?;
    let classes = is.required(raw.classes, "dataset.classes");
    if let Some(k) = classes {
        is.check(k >= 2, "dataset.classes", "must be at least 2");
    }
    match kind.as_str() {
        "blobs" => {
            for (v, p) in [
                (raw.train_images.is_some(), "dataset.train_images"),
                (raw.train_labels.is_some(), "dataset.train_labels"),
                (raw.test_images.is_some(), "dataset.test_images"),
                (raw.test_labels.is_some(), "dataset.test_labels"),
            ] {
                is.check(!v, p, "only valid for idx datasets");
            }
            let per_class = is.required(raw.per_class, "dataset.per_class");
            let dims = is.required(raw.dims, "dataset.dims");
            let separation = is.required(raw.separation, "dataset.separation");
            let test_per_class = raw.test_per_class.or(per_class);
            is.check(per_class != Some(0), "dataset.per_class", "must be positive");
            is.check(test_per_class != Some(0), "dataset.test_per_class", "must be positive");
            is.check(dims != Some(0), "dataset.dims", "must be positive");
            if let Some(s) = separation {
                is.check(
                    s.is_finite() && s >= 0.0,
                    "dataset.separation",
                    "must be finite and non-negative",
                );
            }
            Some(DatasetConfig::Blobs {
                classes: classes?,
                per_class: per_class?,
                test_per_class: test_per_class?,
                dims: dims?,
                separation: separation?,
                seed: raw.seed.unwrap_or_else(|| derived_seed(seed, "dataset")),
            })
        }
        "idx" => {
            for (v, p) in [
                (raw.per_class.is_some(), "dataset.per_class"),
                (raw.test_per_class.is_some(), "dataset.test_per_class"),
                (raw.dims.is_some(), "dataset.dims"),
                (raw.separation.is_some(), "dataset.separation"),
                (raw.seed.is_some(), "dataset.seed"),
            ] {
                is.check(!v, p, "only valid for blobs datasets");
            }
            let train_images = is.required(raw.train_images, "dataset.train_images");
            let train_labels = is.required(raw.train_labels, "dataset.train_labels");
            let test_images = is.required(raw.test_images, "dataset.test_images");
            let test_labels = is.required(raw.test_labels, "dataset.test_labels");
            Some(DatasetConfig::Idx {
                classes: classes?,
                train_images: rebase(base, train_images?),
                train_labels: rebase(base, train_labels?),
                test_images: rebase(base, test_images?),
                test_labels: rebase(base, test_labels?),
            })
        }
        other => {
            is.push(
                "dataset.kind",
                format!("unknown dataset kind {other:?} (expected blobs or idx)"),
            );
            None
        }
    }
}

fn resolve_partition(raw: Option<RawPartition>, base: &Path, seed: u64, is: &mut Issues) -> Option<PartitionConfig> {
    let raw = is.required(raw, "partition")?;
    let clients = is.required(raw.clients, "partition.clients");
    let alpha = is.required(raw.alpha, "partition.alpha");
    is.check(clients != Some(0), "partition.clients", "must be at least 1");
    if let Some(a) = alpha {
        is.check(a.is_finite() && a > 0.0, "partition.alpha", "must be positive");
    }
    let gamma = raw.gamma.unwrap_or(DEFAULT_GAMMA);
    is.check(gamma > 0.0 && gamma < 1.0, "partition.gamma", "must lie in (0, 1)");
    Some(PartitionConfig {
        clients: clients?,
        alpha: alpha?,
        seed: raw.seed.unwrap_or_else(|| derived_seed(seed, "partition")),
        min_samples: raw.min_samples.unwrap_or(1),
        max_retries: raw.max_retries.unwrap_or(100),
        gamma,
        assignment_file: raw.assignment_file.map(|p| rebase(base, p)),
    })
}

fn resolve_model(raw: Option<RawModel>, is: &mut Issues) -> Option<ModelConfig> {
    let raw = raw.unwrap_or_default();
    match raw.preset.as_deref().unwrap_or("mlp") {
        "mlp" => {
            let hidden = raw.hidden.unwrap_or_else(|| vec![DEFAULT_MLP_HIDDEN]);
            is.check(!hidden.contains(&0), "model.hidden", "layer widths must be positive");
            Some(ModelConfig::Mlp { hidden })
        }
        "t_cnn" => {
            is.forbid(&raw.hidden, "model.hidden", "only valid for the mlp preset");
            Some(ModelConfig::TCnn)
        }
        other => {
            is.push(
                "model.preset",
                format!("unknown preset {other:?} (expected mlp or t_cnn)"),
            );
            None
        }
    }
}

fn resolve_strategy(raw: Option<RawStrategy>, is: &mut Issues) -> Option<StrategyConfig> {
    let raw = is.required(raw, "strategy")?;
    let kind = is.required(raw.kind.clone(), "strategy.kind")?;
    let not_ka = "only valid for the fedka strategy";
    match kind.as_str() {
        "fedavg" | "fedprox" => {
            is.forbid(&raw.beta, "strategy.beta", not_ka);
            is.forbid(&raw.anchor_cap, "strategy.anchor_cap", not_ka);
            is.forbid(&raw.sampler, "strategy.sampler", not_ka);
            is.forbid(&raw.variant, "strategy.variant", not_ka);
            is.forbid(&raw.cache_teacher, "strategy.cache_teacher", not_ka);
            if kind == "fedavg" {
                is.forbid(&raw.mu, "strategy.mu", "only valid for the fedprox strategy");
                Some(StrategyConfig::Fedavg)
            } else {
                let mu = is.required(raw.mu, "strategy.mu")?;
                is.check(mu.is_finite() && mu >= 0.0, "strategy.mu", "must be non-negative");
                Some(StrategyConfig::Fedprox { mu })
            }
        }
        "fedka" => {
            is.forbid(&raw.mu, "strategy.mu", "only valid for the fedprox strategy");
            let beta = raw.beta.unwrap_or(DEFAULT_BETA);
            is.check(beta.is_finite() && beta >= 0.0, "strategy.beta", "must be non-negative");
            let anchor_cap = raw.anchor_cap.unwrap_or(DEFAULT_ANCHOR_CAP);
            is.check(anchor_cap >= 1, "strategy.anchor_cap", "must be at least 1");
            Some(StrategyConfig::Fedka {
                beta,
                anchor_cap,
                sampler: raw.sampler.unwrap_or_default(),
                variant: raw.variant.unwrap_or_default(),
                cache_teacher: raw.cache_teacher.unwrap_or(false),
            })
        }
        other => {
            is.push(
                "strategy.kind",
                format!("unknown strategy {other:?} (expected fedavg, fedprox or fedka)"),
            );
            None
        }
    }
}

fn resolve_training(raw: RawTraining, is: &mut Issues) -> Option<TrainingConfig> {
    let sgd = SgdConfig::default();
    let t = TrainingConfig {
        rounds: raw.rounds.unwrap_or(DEFAULT_ROUNDS),
        local_epochs: raw.local_epochs.unwrap_or(DEFAULT_LOCAL_EPOCHS),
        batch_size: raw.batch_size.unwrap_or(DEFAULT_BATCH_SIZE),
        lr: raw.lr.unwrap_or(sgd.lr),
        momentum: raw.momentum.unwrap_or(sgd.momentum),
        weight_decay: raw.weight_decay.unwrap_or(sgd.weight_decay),
        participation: raw.participation.unwrap_or(1.0),
        parallel: raw.parallel.unwrap_or(false),
    };
    is.check(t.batch_size >= 1, "training.batch_size", "must be at least 1");
    is.check(t.lr.is_finite() && t.lr > 0.0, "training.lr", "must be positive");
    is.check(
        t.momentum.is_finite() && (0.0..1.0).contains(&t.momentum),
        "training.momentum",
        "must lie in [0, 1)",
    );
    is.check(
        t.weight_decay.is_finite() && t.weight_decay >= 0.0,
        "training.weight_decay",
        "must be non-negative",
    );
    is.check(
        t.participation > 0.0 && t.participation <= 1.0,
        "training.participation",
        "must lie in (0, 1]",
    );
    Some(t)
}

fn resolve_metrics(raw: RawMetrics, is: &mut Issues) -> Option<MetricsConfig> {
    let m = MetricsConfig {
        xi: raw.xi.unwrap_or(DEFAULT_XI),
        eval_interval: raw.eval_interval.unwrap_or(1),
        forgetting: raw.forgetting.unwrap_or(true),
        checkpoint_interval: raw.checkpoint_interval.unwrap_or(0),
    };
    is.check(m.xi.is_finite() && m.xi > 0.0, "metrics.xi", "must be positive");
    is.check(m.eval_interval >= 1, "metrics.eval_interval", "must be at least 1");
    Some(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
master_seed = 7
[dataset]
kind = "blobs"
classes = 4
per_class = 50
dims = 8
separation = 6.0
[partition]
clients = 4
alpha = 0.1
[strategy]
kind = "fedavg"
"#;

    fn load(text: &str, overrides: &[(&str, &str)]) -> Result<ExperimentConfig> {
        let ov: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        load_config_str(text, &ov, Path::new("/cfg"), Path::new("/out"))
    }

    fn issue_paths(err: Error) -> Vec<String> {
        match err {
            Error::Config(issues) => issues.into_iter().map(|i| i.path).collect(),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn defaults_follow_protocol() {
        let c = load(MINIMAL, &[]).unwrap();
        assert_eq!(c.training.rounds, 100);
        assert_eq!(c.training.local_epochs, 10);
        assert_eq!(c.training.batch_size, 128);
        assert_eq!(
            (c.training.lr, c.training.momentum, c.training.weight_decay),
            (0.01, 0.9, 1e-5)
        );
        assert_eq!(c.training.participation, 1.0);
        assert_eq!(c.partition.gamma, 0.05);
        assert_eq!(c.metrics.xi, 1e-8);
        assert_eq!(c.output_dir, PathBuf::from("/out/experiment"));
        let ka = load(MINIMAL, &[("strategy.kind", "fedka")]).unwrap();
        assert_eq!(
            ka.strategy,
            StrategyConfig::Fedka {
                beta: 0.1,
                anchor_cap: 10,
                sampler: AnchorSampler::Random,
                variant: AnchorVariant::Full,
                cache_teacher: false
            }
        );
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = load(MINIMAL, &[("strategy.kind", "\"fedka\""), ("training.rounds", "3")]).unwrap();
        assert_eq!(c.training.rounds, 3);
        let again = load(&c.to_toml(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn every_violation_is_listed() {
        let text =
            MINIMAL.replace("alpha = 0.1", "alpha = -1.0\nbogus = 3") + "\n[training]\nlr = 0\nparticipation = 2.0\n";
        let paths = issue_paths(load(&text, &[]).unwrap_err());
        for p in [
            "partition.alpha",
            "partition.bogus",
            "training.lr",
            "training.participation",
        ] {
            assert!(paths.iter().any(|x| x == p), "{p} missing from {paths:?}");
        }
    }

    #[test]
    fn missing_required_field_names_path() {
        let text = MINIMAL.replace("clients = 4\n", "");
        let paths = issue_paths(load(&text, &[]).unwrap_err());
        assert_eq!(paths, vec!["partition.clients"]);
        let paths = issue_paths(load("", &[]).unwrap_err());
        assert!(paths.contains(&"master_seed".to_string()));
        assert!(paths.contains(&"dataset".to_string()));
    }

    #[test]
    fn strategy_fields_must_match_kind() {
        let paths = issue_paths(load(MINIMAL, &[("strategy.beta", "0.5")]).unwrap_err());
        assert_eq!(paths, vec!["strategy.beta"]);
        let paths = issue_paths(load(MINIMAL, &[("strategy.kind", "fedprox")]).unwrap_err());
        assert_eq!(paths, vec!["strategy.mu"]);
    }

    #[test]
    fn relative_paths_are_rebased() {
        let c = load(
            MINIMAL,
            &[("partition.assignment_file", "parts.csv"), ("output_dir", "runs/a")],
        )
        .unwrap();
        assert_eq!(c.partition.assignment_file, Some(PathBuf::from("/cfg/parts.csv")));
        assert_eq!(c.output_dir, PathBuf::from("/cfg/runs/a"));
    }
}
