//! Side-by-side comparison of finished runs.

use std::fmt::Write as _;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

use fedka_core::federation::Manifest;
use fedka_core::metrics::{read_accuracy_curve, rounds_to_target, speedup};

/// Marks a run that never reaches the target.
const UNREACHED: &str = "\\";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run: String,
    pub strategy: String,
    pub final_acc: Option<f64>,
    pub rounds_to_target: Option<usize>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub baseline: String,
    /// The baseline's final accuracy.
    pub target: f64,
    pub rows: Vec<Row>,
}

struct LoadedRun {
    label: String,
    manifest: Manifest,
    curve: Vec<(usize, f64)>,
}

fn load(dir: &Path) -> anyhow::Result<LoadedRun> {
    let manifest = Manifest::read(dir).with_context(|| format!("reading the manifest of {}", dir.display()))?;
    let rounds = dir.join("metrics").join("rounds.csv");
    let file = File::open(&rounds).with_context(|| format!("opening {}", rounds.display()))?;
    let curve = read_accuracy_curve(file).with_context(|| format!("reading {}", rounds.display()))?;
    let label = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string());
    Ok(LoadedRun { label, manifest, curve })
}

/// Tabulates `runs` (the baseline first) against the baseline's final
/// accuracy. Refuses runs whose datasets differ from the baseline's.
pub fn compare(baseline: &Path, runs: &[PathBuf]) -> anyhow::Result<Report> {
    let base = load(baseline)?;
    let Some(&(_, target)) = base.curve.last() else {
        bail!("baseline {} has no evaluated rounds", baseline.display());
    };
    let base_rounds = rounds_to_target(&base.curve, target).expect("a curve reaches its own last value");

    let mut loaded = vec![base];
    let canonical = |p: &Path| p.canonicalize().unwrap_or_else(|_| p.to_path_buf());
    let base_path = canonical(baseline);
    for dir in runs {
        if canonical(dir) != base_path {
            loaded.push(load(dir)?);
        }
    }

    let mut mismatches = Vec::new();
    let reference = &loaded[0].manifest.hashes;
    for run in &loaded[1..] {
        let h = &run.manifest.hashes;
        for (what, theirs, ours) in [
            ("train set", &h.train_dataset, &reference.train_dataset),
            ("test set", &h.test_dataset, &reference.test_dataset),
        ] {
            if theirs != ours {
                mismatches.push(format!("{}: {what} hash {theirs} != baseline {ours}", run.label));
            }
        }
    }
    if !mismatches.is_empty() {
        bail!("runs are not comparable:\n  {}", mismatches.join("\n  "));
    }

    let rows = loaded
        .iter()
        .map(|run| {
            let rounds = rounds_to_target(&run.curve, target);
            Row {
                run: run.label.clone(),
                strategy: run.manifest.config.strategy.name().to_string(),
                final_acc: run.curve.last().map(|&(_, a)| a),
                rounds_to_target: rounds,
                speedup: speedup(base_rounds, rounds),
            }
        })
        .collect();
    Ok(Report {
        baseline: loaded[0].label.clone(),
        target,
        rows,
    })
}

impl Report {
    pub fn markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "Target: final accuracy {:.4} of baseline `{}`\n",
            self.target, self.baseline
        );
        s.push_str("| run | strategy | final acc | rounds to target | speedup |\n");
        s.push_str("|---|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} |",
                r.run,
                r.strategy,
                r.final_acc
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_else(|| UNREACHED.into()),
                r.rounds_to_target
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| UNREACHED.into()),
                r.speedup
                    .map(|x| format!("{x:.2}x"))
                    .unwrap_or_else(|| UNREACHED.into()),
            );
        }
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> anyhow::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run", "strategy", "final_acc", "target", "rounds_to_target", "speedup"])?;
        for r in &self.rows {
            w.write_record([
                r.run.clone(),
                r.strategy.clone(),
                r.final_acc.map(|a| a.to_string()).unwrap_or_else(|| UNREACHED.into()),
                self.target.to_string(),
                r.rounds_to_target
                    .map(|n| n.to_string())
                    .unwrap_or_else(|| UNREACHED.into()),
                r.speedup.map(|x| x.to_string()).unwrap_or_else(|| UNREACHED.into()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
