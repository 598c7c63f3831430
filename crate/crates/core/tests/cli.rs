//! End-to-end runs of the `specboot` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn specboot(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specboot"))
        .args(args)
        .current_dir(dir)
        .env_remove("SPECBOOT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_owned).collect())
        .collect()
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn simulate_mirror_and_crossover() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&specboot(
        &["simulate", "mirror", "--seed", "1", "-o", "mirror.csv"],
        d,
    ));
    let text = fs::read_to_string(d.join("mirror.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 1001);
    assert_eq!(lines[0].split(',').count(), 150);
    let labels = csv_rows(&d.join("mirror.labels.csv"));
    assert_eq!(labels.len(), 1001);
    assert_eq!(labels.iter().filter(|r| r[2] == "1").count(), 1);

    ok(&specboot(
        &["simulate", "mirror", "--seed", "1", "-o", "again.csv"],
        d,
    ));
    assert_eq!(fs::read(d.join("again.csv")).unwrap(), text.as_bytes());
    assert_eq!(
        fs::read(d.join("again.labels.csv")).unwrap(),
        fs::read(d.join("mirror.labels.csv")).unwrap()
    );

    ok(&specboot(
        &[
            "simulate",
            "crossover",
            "--seed",
            "1",
            "-o",
            "x.csv",
            "--labels",
            "xl.csv",
        ],
        d,
    ));
    let rows = csv_rows(&d.join("x.csv"));
    assert_eq!((rows.len(), rows[0].len()), (303, 41));
    let labels = csv_rows(&d.join("xl.csv"));
    assert_eq!(labels.iter().filter(|r| r[2] == "1").count(), 3);
}

#[test]
fn simulated_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    ok(&specboot(
        &[
            "simulate", "gmm", "--n", "50", "--dim", "4", "--seed", "3", "-o", "g.csv",
        ],
        dir.path(),
    ));
    let table = specboot::io::read_data_csv(dir.path().join("g.csv")).unwrap();
    let ds = specboot::datagen::generate_separated(50, 4, 3, 10.0, 3).unwrap();
    assert_eq!(table.data, ds.data);
}

#[test]
fn fit_spectral_boot_em_on_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&specboot(
        &["simulate", "mirror", "--seed", "1", "-o", "mirror.csv"],
        d,
    ));
    ok(&specboot(
        &[
            "fit",
            "mirror.csv",
            "-a",
            "spectral-boot-em",
            "-G",
            "2",
            "--seed",
            "1",
            "--truth",
            "mirror.labels.csv",
            "-o",
            "out",
        ],
        d,
    ));
    let out = d.join("out");
    let s = summary(&out);
    assert_eq!(s["algorithm"], "spectral-boot-em");
    assert!(s["bootstrap_iterations"].as_u64().unwrap() >= 300);
    assert_eq!(s["estimation_space"], "spectral(rank=2)");
    assert!(s["std_errors"].is_object());
    let centre = s["probes"][0]["membership"].as_array().unwrap();
    for z in centre {
        let z = z.as_f64().unwrap();
        assert!((0.45..=0.55).contains(&z), "centre membership {z}");
    }
    let memberships = csv_rows(&out.join("memberships.csv"));
    assert_eq!(memberships.len(), 1001);
    assert_eq!(csv_rows(&out.join("oob_memberships.csv")).len(), 1001);
    let trace = csv_rows(&out.join("trace.csv"));
    let metrics: std::collections::BTreeSet<&str> = trace.iter().map(|r| r[1].as_str()).collect();
    assert!(metrics.contains("r_theta") && metrics.contains("log_likelihood"));
}

#[test]
fn single_group_em_has_no_bootstrap_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("small.csv"), "a,b\n1,2\n2,1\n3,3.5\n0.5,1\n").unwrap();
    ok(&specboot(
        &["fit", "small.csv", "-a", "em", "-G", "1", "-o", "out"],
        d,
    ));
    let s = summary(&d.join("out"));
    assert!(s["bootstrap_iterations"].is_null());
    assert!(s.get("oob_unobserved").is_none());
    assert!(!d.join("out/oob_memberships.csv").exists());
    let trace = csv_rows(&d.join("out/trace.csv"));
    assert!(trace.iter().all(|r| r[1] == "log_likelihood"));
    let z = csv_rows(&d.join("out/memberships.csv"));
    assert!(z.iter().all(|r| r == &["1"]));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("data.csv"),
        "1,2\n2,1\n3,3.5\n0.5,1\n9,9\n10,9.5\n9.5,10\n",
    )
    .unwrap();
    fs::write(
        d.join("run.toml"),
        "algorithm = \"spectral-em\"\nG = 3\nseed = 4\n",
    )
    .unwrap();
    ok(&specboot(
        &[
            "fit", "data.csv", "--config", "run.toml", "-G", "2", "-o", "out",
        ],
        d,
    ));
    let s = summary(&d.join("out"));
    assert_eq!(s["algorithm"], "spectral-em");
    assert_eq!(s["G"], 2);

    fs::write(d.join("bad.toml"), "groups = 2\nunknown = 1\n").unwrap();
    let out = specboot(&["fit", "data.csv", "--config", "bad.toml"], d);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn input_errors_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("ragged.csv"), "a,b\n1,2\n3\n").unwrap();
    let out = specboot(&["fit", "ragged.csv", "-o", "out"], d);
    assert_eq!(out.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("row 3"), "{msg}");

    let out = specboot(&["fit", "missing.csv"], d);
    assert_eq!(out.status.code(), Some(2));

    fs::write(d.join("ok.csv"), "1,2\n2,1\n3,3\n").unwrap();
    let out = specboot(&["fit", "ok.csv", "-G", "0"], d);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn benchmark_rows_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&specboot(
        &[
            "benchmark",
            "--algorithms",
            "em",
            "--repeats",
            "1",
            "-G",
            "2",
            "-o",
            "one.csv",
        ],
        d,
    ));
    let rows = csv_rows(&d.join("one.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][3], "ok");

    // three observations cannot support three groups: every run fails, the
    // table is still written and the exit code reports it
    fs::write(d.join("tiny.csv"), "1,2\n2,1\n3,3\n").unwrap();
    let out = specboot(
        &[
            "benchmark",
            "--data",
            "tiny.csv",
            "--algorithms",
            "em,spectral-em",
            "--repeats",
            "2",
            "-G",
            "3",
            "-o",
            "fail.csv",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(specboot::cli::EXIT_PARTIAL_FAILURE));
    let rows = csv_rows(&d.join("fail.csv"));
    assert_eq!(rows.len(), 4);
    assert!(rows
        .iter()
        .all(|r| r[3] == "failed" && !r.last().unwrap().is_empty()));
}

#[test]
fn benchmark_is_reproducible_apart_from_timing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |o: &'static str| {
        vec![
            "benchmark",
            "--kind",
            "crossover",
            "--algorithms",
            "spectral-em,spectral-boot-em",
            "--repeats",
            "2",
            "-G",
            "2",
            "--threads",
            "2",
            "-o",
            o,
        ]
    };
    ok(&specboot(&args("a.csv"), d));
    ok(&specboot(&args("b.csv"), d));
    let strip = |rows: Vec<Vec<String>>| -> Vec<Vec<String>> {
        rows.into_iter()
            .map(|mut r| {
                r.remove(4); // elapsed_seconds
                r
            })
            .collect()
    };
    let a = strip(csv_rows(&d.join("a.csv")));
    assert_eq!(a.len(), 4);
    assert_eq!(a, strip(csv_rows(&d.join("b.csv"))));
    // ordered by algorithm then repeat regardless of completion order
    let order: Vec<(&str, &str)> = a.iter().map(|r| (r[0].as_str(), r[1].as_str())).collect();
    assert_eq!(
        order,
        [
            ("spectral-em", "0"),
            ("spectral-em", "1"),
            ("spectral-boot-em", "0"),
            ("spectral-boot-em", "1")
        ]
    );
}
