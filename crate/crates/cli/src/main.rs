//! `fedka`: run, partition, compare and gradient-check federated experiments.

mod compare;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fedka_core::config::{load_config_file, ExperimentConfig};
use fedka_core::data::{count_matrix, write_assignments, write_count_matrix, write_role_report};
use fedka_core::diagnostics::{gradient_suite, SuiteConfig};
use fedka_core::federation::{load_datasets, partition_clients, run_experiment_with, RoundEvent};
use fedka_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "fedka", version, about = "Deterministic federated learning experiments")]
struct Cli {
    /// Default parent directory for run outputs when a config sets no output_dir.
    #[arg(long, global = true, env = "FEDKA_OUTPUT_ROOT", default_value = "runs")]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an experiment and write its run directory.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Validate and print the resolved config without training.
        #[arg(long)]
        dry_run: bool,
        /// Suppress the per-round progress lines.
        #[arg(short, long)]
        quiet: bool,
    },
    /// Partition the training set and write the count matrix, role report
    /// and sample assignment.
    Partition {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory; defaults to the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare finished runs against a baseline run.
    Compare {
        /// Run directories to tabulate.
        runs: Vec<PathBuf>,
        /// Run whose final accuracy is the target and whose round count is the
        /// speedup reference.
        #[arg(long)]
        baseline: PathBuf,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Also write the markdown table to a file.
        #[arg(long)]
        markdown: Option<PathBuf>,
    },
    /// Finite-difference checks of every training gradient.
    Gradcheck {
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 30)]
        coords: usize,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    config: PathBuf,
    /// Override a config value, e.g. `--set training.rounds=5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn parsed_overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        self.overrides
            .iter()
            .map(|kv| match kv.split_once('=') {
                Some((k, v)) => Ok((k.trim().to_string(), v.trim().to_string())),
                None => Err(anyhow::Error::new(Error::Config(vec![fedka_core::ConfigIssue::new(
                    kv.clone(),
                    "override must look like key=value",
                )]))),
            })
            .collect()
    }

    fn load(&self, output_root: &Path) -> anyhow::Result<ExperimentConfig> {
        Ok(load_config_file(&self.config, &self.parsed_overrides()?, output_root)?)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(err) => match err.downcast_ref::<Error>() {
            Some(Error::Config(issues)) => {
                eprintln!("error: invalid configuration");
                for issue in issues {
                    eprintln!("  {issue}");
                }
                ExitCode::from(EXIT_CONFIG)
            }
            _ => {
                eprintln!("error: {err:#}");
                ExitCode::from(EXIT_RUNTIME)
            }
        },
    }
}

fn dispatch(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Run { config, dry_run, quiet } => cmd_run(config, &cli.output_root, *dry_run, *quiet),
        Command::Partition { config, out } => cmd_partition(config, &cli.output_root, out.as_deref()),
        Command::Compare {
            runs,
            baseline,
            csv,
            markdown,
        } => {
            let report = compare::compare(baseline, runs)?;
            print!("{}", report.markdown());
            if let Some(path) = markdown {
                fs::write(path, report.markdown()).with_context(|| format!("writing {}", path.display()))?;
            }
            if let Some(path) = csv {
                report.write_csv(File::create(path).with_context(|| format!("creating {}", path.display()))?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck {
            seeds,
            coords,
            step,
            tolerance,
        } => cmd_gradcheck(*seeds, *coords, *step, *tolerance),
    }
}

fn cmd_run(args: &ConfigArgs, output_root: &Path, dry_run: bool, quiet: bool) -> anyhow::Result<ExitCode> {
    let config = args.load(output_root)?;
    if dry_run {
        print!("{}", config.to_toml());
        return Ok(ExitCode::SUCCESS);
    }
    let mut progress = |e: &RoundEvent<'_>| {
        if quiet {
            return;
        }
        let acc = e
            .record
            .map(|r| format!("{:.4}", r.global_acc))
            .unwrap_or_else(|| "-".into());
        let losses: Vec<f64> = e.updates.iter().filter_map(|u| u.loss_trace.last().copied()).collect();
        let loss = if losses.is_empty() {
            "-".to_string()
        } else {
            format!("{:.4}", losses.iter().sum::<f64>() / losses.len() as f64)
        };
        println!(
            "round {}/{}  acc {acc}  clients {}  mean loss {loss}",
            e.round,
            e.rounds,
            e.participants.len()
        );
    };
    let outcome = run_experiment_with(&config, &mut progress)?;
    let final_acc = outcome
        .summary
        .final_acc
        .map(|a| format!("{a:.4}"))
        .unwrap_or_else(|| "-".into());
    println!(
        "final accuracy {final_acc}; artifacts in {}",
        config.output_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Partitioning needs only the dataset and partition sections, so a missing
/// strategy is filled with a placeholder.
fn load_for_partition(args: &ConfigArgs, output_root: &Path) -> anyhow::Result<ExperimentConfig> {
    let overrides = args.parsed_overrides()?;
    match load_config_file(&args.config, &overrides, output_root) {
        Err(Error::Config(issues)) if !issues.is_empty() && issues.iter().all(|i| i.path.starts_with("strategy")) => {
            let mut with_strategy = overrides.clone();
            with_strategy.push(("strategy.kind".into(), "\"fedavg\"".into()));
            Ok(load_config_file(&args.config, &with_strategy, output_root)?)
        }
        other => Ok(other?),
    }
}

fn cmd_partition(args: &ConfigArgs, output_root: &Path, out: Option<&Path>) -> anyhow::Result<ExitCode> {
    let config = load_for_partition(args, output_root)?;
    let (train, _) = load_datasets(&config)?;
    let shards = partition_clients(&config, &train)?;
    let dir = out.unwrap_or(&config.output_dir);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> anyhow::Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    };
    write_count_matrix(create("partition.csv")?, &shards, train.class_count)?;
    write_role_report(create("roles.csv")?, &shards)?;
    write_assignments(create("assignments.csv")?, &train, &shards)?;
    for (shard, row) in shards.iter().zip(count_matrix(&shards)) {
        let counts: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        println!(
            "client {:>3}: {}  (dominant {:?}, non-dominant {:?}, missing {:?})",
            shard.client_id,
            counts.join(" "),
            shard.roles.dominant,
            shard.roles.non_dominant,
            shard.roles.missing
        );
    }
    println!(
        "wrote partition.csv, roles.csv and assignments.csv to {}",
        dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(seeds: u64, coords: usize, step: f64, tolerance: f64) -> anyhow::Result<ExitCode> {
    if !(tolerance.is_finite() && tolerance > 0.0) {
        bail!("tolerance must be positive");
    }
    let cases = gradient_suite(SuiteConfig { seeds, coords, step })?;
    let mut failed = 0;
    for c in &cases {
        let ok = c.report.max_rel_error < tolerance;
        failed += usize::from(!ok);
        println!(
            "{} {:<20} seed {:<3} max rel error {:.3e} ({} coords)",
            if ok { "ok  " } else { "FAIL" },
            c.name,
            c.seed,
            c.report.max_rel_error,
            c.report.coords_checked
        );
    }
    if failed > 0 {
        eprintln!("{failed} of {} gradient checks exceeded {tolerance:e}", cases.len());
        return Ok(ExitCode::from(EXIT_RUNTIME));
    }
    println!("all {} gradient checks passed", cases.len());
    Ok(ExitCode::SUCCESS)
}
