use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
name = "smoke"
master_seed = 3
[dataset]
kind = "blobs"
classes = 3
per_class = 30
test_per_class = 20
dims = 4
separation = 3.0
[partition]
clients = 3
alpha = 0.5
[strategy]
kind = "fedavg"
[training]
rounds = 3
local_epochs = 1
batch_size = 16
"#;

fn fedka(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedka"))
        .args(args)
        .env("FEDKA_OUTPUT_ROOT", root)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_writes_artifacts_under_the_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = fedka(tmp.path(), &["run", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("round ")).count(), 3);
    let run = tmp.path().join("smoke");
    for f in [
        "manifest.toml",
        "config.toml",
        "metrics/rounds.csv",
        "metrics/forgetting.csv",
        "summary.json",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
}

#[test]
fn config_errors_exit_2_and_list_every_path() {
    let tmp = tempfile::tempdir().unwrap();
    let broken = CONFIG
        .replace("alpha = 0.5", "")
        .replace("kind = \"fedavg\"", "kind = \"fedavg\"\nbogus = 1");
    let cfg = write_config(tmp.path(), &broken);
    let out = fedka(tmp.path(), &["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("partition.alpha"), "{err}");
    assert!(err.contains("strategy.bogus"), "{err}");
    assert!(!tmp.path().join("smoke").exists());
}

#[test]
fn dry_run_prints_resolved_config_and_trains_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = fedka(tmp.path(), &["run", &cfg, "--dry-run", "--set", "training.lr=0.05"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("lr = 0.05"), "{text}");
    assert!(text.contains("momentum = 0.9"), "{text}");
    assert!(!tmp.path().join("smoke").exists());
}

#[test]
fn runtime_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let out = fedka(
        tmp.path(),
        &[
            "run",
            &cfg,
            "--set",
            "partition.min_samples=1000",
            "--set",
            "partition.max_retries=2",
        ],
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn partition_with_one_client_holds_global_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &CONFIG.replace("[strategy]\nkind = \"fedavg\"\n", ""));
    let dir = tmp.path().join("part");
    let out = fedka(
        tmp.path(),
        &[
            "partition",
            &cfg,
            "--set",
            "partition.clients=1",
            "--out",
            &dir.display().to_string(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let matrix = fs::read_to_string(dir.join("partition.csv")).unwrap();
    assert_eq!(matrix, "client,class_0,class_1,class_2\n0,30,30,30\n");
    assert!(dir.join("roles.csv").exists() && dir.join("assignments.csv").exists());
}

#[test]
fn partition_output_feeds_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    let dir = tmp.path().join("part");
    assert!(
        fedka(tmp.path(), &["partition", &cfg, "--out", &dir.display().to_string()])
            .status
            .success()
    );
    let assignment = format!(
        "partition.assignment_file={:?}",
        dir.join("assignments.csv").display().to_string()
    );
    let a = fedka(tmp.path(), &["run", &cfg, "-q", "--set", "name=\"drawn\""]);
    let b = fedka(
        tmp.path(),
        &["run", &cfg, "-q", "--set", "name=\"file\"", "--set", &assignment],
    );
    assert!(a.status.success() && b.status.success(), "{}", stderr(&b));
    let rounds = |n: &str| fs::read(tmp.path().join(n).join("metrics/rounds.csv")).unwrap();
    assert_eq!(rounds("drawn"), rounds("file"));
}

#[test]
fn compare_against_itself_and_refuses_other_test_sets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    assert!(fedka(tmp.path(), &["run", &cfg, "-q", "--set", "name=\"base\""])
        .status
        .success());
    assert!(fedka(
        tmp.path(),
        &[
            "run",
            &cfg,
            "-q",
            "--set",
            "name=\"prox\"",
            "--set",
            "strategy.kind=\"fedprox\"",
            "--set",
            "strategy.mu=0.01"
        ]
    )
    .status
    .success());
    let base = tmp.path().join("base").display().to_string();
    let prox = tmp.path().join("prox").display().to_string();
    let csv = tmp.path().join("cmp.csv");
    let out = fedka(
        tmp.path(),
        &[
            "compare",
            &base,
            &prox,
            "--baseline",
            &base,
            "--csv",
            &csv.display().to_string(),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let md = stdout(&out);
    let base_row = md.lines().find(|l| l.starts_with("| base ")).unwrap();
    assert!(base_row.ends_with("| 1.00x |"), "{md}");
    let table = fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 3);

    assert!(fedka(
        tmp.path(),
        &[
            "run",
            &cfg,
            "-q",
            "--set",
            "name=\"other\"",
            "--set",
            "dataset.test_per_class=25"
        ]
    )
    .status
    .success());
    let other = tmp.path().join("other").display().to_string();
    let out = fedka(tmp.path(), &["compare", &other, "--baseline", &base]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("test set hash"), "{}", stderr(&out));
}

#[test]
fn compare_marks_unreached_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), CONFIG);
    assert!(fedka(
        tmp.path(),
        &[
            "run",
            &cfg,
            "-q",
            "--set",
            "name=\"good\"",
            "--set",
            "training.local_epochs=5"
        ]
    )
    .status
    .success());
    assert!(fedka(
        tmp.path(),
        &[
            "run",
            &cfg,
            "-q",
            "--set",
            "name=\"frozen\"",
            "--set",
            "training.lr=1e-9"
        ]
    )
    .status
    .success());
    let good = tmp.path().join("good").display().to_string();
    let frozen = tmp.path().join("frozen").display().to_string();
    let out = fedka(tmp.path(), &["compare", &frozen, "--baseline", &good]);
    assert!(out.status.success(), "{}", stderr(&out));
    let md = stdout(&out);
    let row = md.lines().find(|l| l.starts_with("| frozen ")).unwrap();
    assert!(row.ends_with("| \\ | \\ |"), "{md}");
}

#[test]
fn gradcheck_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fedka(tmp.path(), &["gradcheck", "--seeds", "2"]);
    assert!(out.status.success(), "{}", stdout(&out));
    assert!(stdout(&out).contains("all 8 gradient checks passed"));
}
