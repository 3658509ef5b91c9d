//! CLI contract tests: exit codes, file layout, config rejection, and the
//! stability of the CSV schema.

use std::fs;
use std::path::Path;
use std::process::Command;

fn zimopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_zimopt"))
}

fn quadratic_config(seeds: &str) -> String {
    format!(
        r#"
[objective.quadratic]
dim = 4

[init.fgap]
gap = 10.0

[method]
kind = "both"

[zim]
n = 3
r = 0.05
c = 0.1
delta = 1.0

[sgd]
lr = 0.25

[train]
steps = 200
seeds = {seeds}
log_every = 40
"#
    )
}

fn run_train(config: &str, out: &Path) -> std::process::Output {
    let dir = out.parent().unwrap();
    let config_path = dir.join("config.toml");
    fs::write(&config_path, config).unwrap();
    zimopt()
        .args(["train", "--config"])
        .arg(&config_path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn train_writes_one_csv_per_method_and_seed_plus_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let result = run_train(&quadratic_config("[1, 2, 3]"), &out);
    assert!(result.status.success());

    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        vec![
            "sgd_seed1.csv",
            "sgd_seed2.csv",
            "sgd_seed3.csv",
            "summary.json",
            "zim_seed1.csv",
            "zim_seed2.csv",
            "zim_seed3.csv",
        ]
    );
}

#[test]
fn csv_schema_is_stable_and_embeds_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run_train(&quadratic_config("[7]"), &out).status.success());

    let csv = fs::read_to_string(out.join("zim_seed7.csv")).unwrap();
    let mut lines = csv.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# config = {"), "{first}");
    assert!(csv.contains("# seed = 7"));
    let header = lines
        .find(|l| !l.starts_with('#'))
        .expect("header after preamble");
    assert_eq!(
        header,
        "k,objective,grad_sq_norm,running_mean_grad_sq,update_l1,accuracy"
    );
    // records at k = 1, every 40th step, and the final step
    let ks: Vec<u64> = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('k'))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(ks, vec![1, 40, 80, 120, 160, 200]);
}

#[test]
fn paired_methods_share_seed_and_data_order() {
    // With method = both, the two per-seed CSVs exist for the same seed set
    // and start from the same initial objective value.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert!(run_train(&quadratic_config("[5]"), &out).status.success());
    let first_objective = |name: &str| -> String {
        let text = fs::read_to_string(out.join(name)).unwrap();
        let row = text
            .lines()
            .find(|l| l.starts_with("1,"))
            .expect("first record")
            .to_string();
        row.split(',').nth(1).unwrap().to_string()
    };
    assert_eq!(first_objective("zim_seed5.csv"), first_objective("sgd_seed5.csv"));
}

#[test]
fn unknown_config_keys_are_rejected_with_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let mut config = quadratic_config("[1]");
    config.push_str("\n[train.extra]\nnot_a_key = 1\n");
    let result = run_train(&config, &out);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("error"), "{stderr}");
}

#[test]
fn missing_method_section_is_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = r#"
[objective.quadratic]
dim = 4

[method]
kind = "both"

[sgd]
lr = 0.25

[train]
steps = 10
seeds = [1]
log_every = 5
"#;
    let result = run_train(config, &out);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("[zim]"), "{stderr}");
}

#[test]
fn inadmissible_zim_rate_is_exit_1() {
    // identity quadratic: mu/(L M_G) = (3 / (2 + 0.4)) / 6 ~ 0.2083; r = 0.5
    // exceeds it on a unit lattice with full-batch gradients
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = quadratic_config("[1]").replace("r = 0.05", "r = 0.5");
    let result = run_train(&config, &out);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("inadmissible"), "{stderr}");
}

#[test]
fn missing_data_is_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = r#"
[objective.mlp]
layer_sizes = [784, 8, 10]
activation = "relu"

[objective.mlp.dataset.mnist]
dir = "/nonexistent/mnist"

[method]
kind = "sgd"

[sgd]
lr = 0.1

[train]
steps = 10
batch_size = 8
seeds = [1]
log_every = 5
"#;
    let result = run_train(config, &out);
    assert_eq!(result.status.code(), Some(1));
}

#[test]
fn numeric_blowup_is_exit_3() {
    // An absurd SGD rate doubles the iterate magnitude past f64 range within
    // a few steps; the run must abort with the numeric-failure exit code.
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let config = r#"
[objective.quadratic]
dim = 2

[init.explicit]
values = [1.0, 1.0]

[method]
kind = "sgd"

[sgd]
lr = 1e200

[train]
steps = 10
seeds = [1]
log_every = 1
"#;
    let result = run_train(config, &out);
    assert_eq!(result.status.code(), Some(3));
    let stderr = String::from_utf8(result.stderr).unwrap();
    assert!(stderr.contains("step"), "{stderr}");
}

#[test]
fn verify_quick_exits_zero_and_writes_report() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.json");
    let output = zimopt()
        .args(["verify", "--level", "quick", "--out"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = fs::read_to_string(&report).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed["level"], "quick");
    assert!(parsed["checks"].as_array().unwrap().len() > 10);
}

#[test]
fn bounds_requires_consistent_flags() {
    let output = zimopt()
        .args(["bounds", "--l", "1", "--d", "10", "--c", "0.5", "--gap", "5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));

    let output = zimopt()
        .args(["bounds", "--l", "0", "--d", "10", "--c", "0.5"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("floor = 0"), "{stdout}");
}
