//! End-to-end checks of the `sensnet` binary: every subcommand runs against a
//! small synthetic problem in a temp directory, and outputs are re-read either
//! as text or through the library API.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sensnet::harness::PER_POINT_HEADER;
use sensnet::nn::load_checkpoint;

const BIN: &str = env!("CARGO_BIN_EXE_sensnet");

/// A single-cell config that trains in well under a second.
const SMALL_CONFIG: &str = r#"
kind = "sweep"
seeds = [0]

[dataset]
source = "synthetic"

[dataset.synthetic]
classes = 3
dim = 9
train_per_class = 20
test_per_class = 10
separation = 8.0
seed = 7

[network]
widths = [12]
depths = [2]
activations = ["relu"]

[optimizer]
kinds = ["adam"]
learning_rates = [5e-3]
batch_sizes = [16]
total_steps = 250

[trajectory]
k = 60
window = 10

[measure]
jacobian_points = 20
translation_images = 2
"#;

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn train_writes_a_loadable_checkpoint_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let ck = dir.path().join("net.snet");
    let out = run(&[
        "train",
        "--config",
        &config,
        "--seed",
        "3",
        "--out",
        ck.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let net = load_checkpoint::<f64>(&ck).unwrap();
    assert_eq!(net.input_dim(), 9);
    assert_eq!(net.n_classes(), 3);

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("net.snet.json")).unwrap())
            .unwrap();
    assert_eq!(summary["width"], 12);
    assert_eq!(summary["depth"], 2);
    assert_eq!(summary["seed"], 3);
    assert!(summary["train_accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn measure_jacobian_emits_per_point_norms() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let ck = dir.path().join("net.snet");
    assert_ok(&run(&["train", "--config", &config, "--out", ck.to_str().unwrap()]));

    let csv = dir.path().join("jac.csv");
    let out = run(&[
        "measure",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--config",
        &config,
        "--metric",
        "jacobian",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("point_id,jacobian_norm"));
    // 3 classes x 10 per class in the synthetic test split.
    assert_eq!(lines.count(), 30);
}

#[test]
fn measure_transitions_reports_an_even_total() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let ck = dir.path().join("net.snet");
    assert_ok(&run(&["train", "--config", &config, "--out", ck.to_str().unwrap()]));

    let out = run(&[
        "measure",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--config",
        &config,
        "--metric",
        "transitions",
        "--trajectory",
        "random-ellipse",
        "--k",
        "64",
    ]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let total: u64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("transitions over 64 samples: "))
        .expect("summary line")
        .parse()
        .unwrap();
    assert_eq!(total % 2, 0);
}

#[test]
fn trajectory_random_ellipse_needs_no_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ellipse.csv");
    let out = run(&[
        "trajectory",
        "--trajectory",
        "random-ellipse",
        "--k",
        "16",
        "--dim",
        "6",
        "--seed",
        "11",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_index,x0,x1,x2,x3,x4,x5"));
    assert_eq!(lines.count(), 16);
}

#[test]
fn bounds_emits_the_per_point_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let ck = dir.path().join("net.snet");
    assert_ok(&run(&["train", "--config", &config, "--out", ck.to_str().unwrap()]));

    let csv = dir.path().join("bounds.csv");
    let out = run(&[
        "bounds",
        "--checkpoint",
        ck.to_str().unwrap(),
        "--config",
        &config,
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_ok(&out);

    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# M = "));
    assert_eq!(lines.next(), Some(PER_POINT_HEADER.join(",").as_str()));
    assert_eq!(lines.count(), 30);
}

#[test]
fn study_sweep_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let csv = dir.path().join("sweep.csv");
    let args = [
        "study",
        "sweep",
        "--config",
        config.as_str(),
        "--out",
        csv.to_str().unwrap(),
    ];

    assert_ok(&run(&args));
    let first = fs::read(&csv).unwrap();
    assert!(!first.is_empty());

    assert_ok(&run(&args));
    let second = fs::read(&csv).unwrap();
    assert_eq!(first, second);
}

#[test]
fn unknown_metric_is_rejected() {
    let out = run(&["measure", "--checkpoint", "x.snet", "--metric", "entropy"]);
    assert!(!out.status.success());
}

#[test]
fn study_subcommand_must_match_the_config_kind() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_CONFIG);
    let out = run(&["study", "boundary", "--config", &config]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("kind = sweep"), "stderr: {stderr}");
}

#[test]
fn config_typos_are_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &SMALL_CONFIG.replace("widths = [12]", "widhts = [12]"),
    );
    let out = run(&["study", "sweep", "--config", &config]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("widht"), "stderr: {stderr}");
}
