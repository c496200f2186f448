use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_patchlens"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn patchlens")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn synth_simulate_predict_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_ok(&run(
        dir,
        &["synth", "--n-per-class", "5", "--dim", "12", "--spread", "0.1", "--seed", "9", "--out", "d.csv"],
    ));
    assert_ok(&run(
        dir,
        &["pca", "--dataset", "d.csv", "--population", "avg_patch_rows", "--out", "basis.json"],
    ));
    assert_ok(&run(
        dir,
        &[
            "simulate", "--dataset", "d.csv", "--eta", "0.01", "--steps", "40", "--width", "4",
            "--sigma", "0.05", "--loss-scale", "one_over_n", "--snap-every", "20",
            "--out", "traj.csv", "--filters-out", "snap",
        ],
    ));
    assert_ok(&run(
        dir,
        &[
            "profile", "--filters", "snap_iter40.csv", "--pca", "basis.json",
            "--variant", "mean_square", "--out", "prof.csv", "--svg", "prof.svg",
        ],
    ));
    assert_ok(&run(
        dir,
        &["predict", "--dataset", "d.csv", "--eta", "0.001", "--t", "40", "--out", "pred.json"],
    ));
    assert_ok(&run(
        dir,
        &[
            "sensitivity", "--dataset", "d.csv", "--eta", "0.001", "--t", "40",
            "--out", "sens.csv", "--svg", "sens.svg",
        ],
    ));

    // Trajectory CSV: header plus (snapshots × d) rows.
    let traj = fs::read_to_string(dir.join("traj.csv")).unwrap();
    let mut lines = traj.lines();
    assert_eq!(lines.next(), Some("iter,coord,avg_filter_value,dispersion"));
    assert_eq!(lines.count(), 3 * 12);

    // Profile CSV has one row per component.
    let prof = fs::read_to_string(dir.join("prof.csv")).unwrap();
    assert_eq!(prof.lines().count(), 1 + 12);

    // Prediction JSON parses and has the documented shape.
    let pred: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("pred.json")).unwrap()).unwrap();
    assert_eq!(pred["method"], "exact_eigen");
    assert_eq!(pred["w_tilde"].as_array().unwrap().len(), 12);
    assert_eq!(pred["profile"].as_array().unwrap().len(), 12);
    assert!(pred["diagnostics"]["commutation_gap"].is_number());

    // Equal class means: the sensitivity curve starts at 1.
    let sens = fs::read_to_string(dir.join("sens.csv")).unwrap();
    let first = sens.lines().nth(1).unwrap();
    let corr: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
    assert!((corr - 1.0).abs() < 1e-9, "{first}");

    // Every output carries a manifest with hashed inputs.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("prof.csv.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "profile");
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 2);
    assert!(!dir.join("prof.csv.tmp").exists());
}

#[test]
fn same_argv_same_inputs_byte_identical_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert_ok(&run(
        dir,
        &["synth", "--n-per-class", "6", "--dim", "9", "--spread", "0.2", "--seed", "4", "--out", "d.csv"],
    ));
    let argv = [
        "sensitivity", "--dataset", "d.csv", "--eta", "0.001", "--t", "30",
        "--out", "sens.csv", "--svg", "sens.svg",
    ];
    assert_ok(&run(dir, &argv));
    let csv1 = fs::read(dir.join("sens.csv")).unwrap();
    let svg1 = fs::read(dir.join("sens.svg")).unwrap();
    let man1 = fs::read(dir.join("sens.csv.manifest.json")).unwrap();
    assert_ok(&run(dir, &argv));
    assert_eq!(csv1, fs::read(dir.join("sens.csv")).unwrap());
    assert_eq!(svg1, fs::read(dir.join("sens.svg")).unwrap());
    assert_eq!(man1, fs::read(dir.join("sens.csv.manifest.json")).unwrap());
}

#[test]
fn unknown_flag_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["synth", "--bogus-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn cross_variant_compare_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("a.csv"),
        "component_index,eigenvalue,energy\n0,1.0,0.5\n1,0.5,0.25\n",
    )
    .unwrap();
    let out = run(
        dir,
        &["compare", "--a", "a.csv", "--b", "a.csv", "--variant-a", "rms", "--variant-b", "mean_square"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("refusing"));
}

#[test]
fn compare_same_profile_reports_correlation_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("a.csv"),
        "component_index,eigenvalue,energy\n0,1.0,0.5\n1,0.5,0.25\n2,0.1,0.1\n",
    )
    .unwrap();
    let out = run(dir, &["compare", "--a", "a.csv", "--b", "a.csv", "--out", "cmp.json"]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("correlation = 1"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("cmp.json")).unwrap()).unwrap();
    let corr = report["correlation"].as_f64().unwrap();
    assert!((corr - 1.0).abs() < 1e-12, "{corr}");
}

#[test]
fn malformed_dataset_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.csv"), "not a dataset\n").unwrap();
    let out = run(dir, &["predict", "--dataset", "bad.csv", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!dir.join("p.json").exists());
}

#[test]
fn verify_quick_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["verify", "--quick"]);
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("VERIFY OK"), "{stdout}");
    assert_eq!(stdout.matches(" PASS — ").count(), 10, "{stdout}");
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn missing_data_dir_mentions_env_var() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(tmp.path())
        .env_remove("PATCHLENS_DATA")
        .args(["avg-patch", "--out", "k.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PATCHLENS_DATA"));
}
