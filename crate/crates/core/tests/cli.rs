use ntgof::cli::output::{Decision, TestReport};
use ntgof::rng::{substream, Purpose};
use rand::Rng;
use std::path::Path;
use std::process::{Command, Output};

fn ntgof(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ntgof"))
        .args(args)
        .env("NTGOF_THREADS", "1")
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, content: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, content).unwrap();
    p.to_str().unwrap().to_owned()
}

fn uniform_csv(n: usize, seed: u64) -> String {
    let mut rng = substream(seed, Purpose::Data, 0);
    let mut s = String::from("x\n");
    for _ in 0..n {
        s.push_str(&format!("{}\n", rng.random::<f64>()));
    }
    s
}

fn report(out: &Output) -> TestReport {
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn uniform_samples_are_mostly_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mut accepted = 0;
    for seed in 0..100u64 {
        let input = write(dir.path(), "u.csv", &uniform_csv(200, 1000 + seed));
        let seed_arg = seed.to_string();
        let r = report(&ntgof(&[
            "test",
            "--input",
            &input,
            "--mc-reps",
            "1000",
            "--seed",
            &seed_arg,
        ]));
        assert_eq!(r.n, 200);
        assert_eq!(r.dimension, 3);
        accepted += usize::from(r.decision == Decision::Accept);
    }
    assert!(accepted >= 93, "accepted {accepted} of 100");
}

#[test]
fn identical_pairs_are_dependent() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = substream(3, Purpose::Data, 0);
    let mut csv = String::from("x,y\n");
    for _ in 0..200 {
        let x: f64 = rng.random();
        csv.push_str(&format!("{x},{x}\n"));
    }
    let input = write(dir.path(), "xy.csv", &csv);
    let r = report(&ntgof(&[
        "test",
        "--kind",
        "independence",
        "--input",
        &input,
    ]));
    assert_eq!(r.decision, Decision::Reject);
    assert!(r.p_value <= 0.05);
}

#[test]
fn report_is_consistent_with_its_decision() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "u.csv", &uniform_csv(150, 77));
    let out = ntgof(&["test", "--input", &input, "--alpha", "0.1", "--seed", "5"]);
    let r = report(&out);
    let expect = if r.p_value <= r.alpha {
        Decision::Reject
    } else {
        Decision::Accept
    };
    assert_eq!(r.decision, expect);
    assert_eq!(r.series.len(), r.dimension);
    assert_eq!(r.statistic, r.series[r.selected - 1].statistic);
    // same input and seed, same bytes
    assert_eq!(
        out.stdout,
        ntgof(&["test", "--input", &input, "--alpha", "0.1", "--seed", "5"]).stdout
    );
}

#[test]
fn ties_produce_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(
        dir.path(),
        "t.csv",
        "x,y\n1,2\n1,3\n2,1\n3,5\n4,4\n5,5\n6,0\n",
    );
    let out = ntgof(&[
        "test",
        "--kind",
        "independence",
        "--input",
        &input,
        "--mc-reps",
        "200",
    ]);
    let r = report(&out);
    assert_eq!(r.warnings.len(), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("ties"));
}

#[test]
fn composite_reports_fitted_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = substream(9, Purpose::Data, 0);
    let mut csv = String::from("x\n");
    for _ in 0..300 {
        let x: f64 = rng.sample(rand_distr::StandardNormal);
        csv.push_str(&format!("{}\n", 3.0 + 2.0 * x));
    }
    let input = write(dir.path(), "c.csv", &csv);
    let r = report(&ntgof(&[
        "test",
        "--kind",
        "composite",
        "--input",
        &input,
        "--mc-reps",
        "300",
    ]));
    let beta = r.beta_hat.unwrap();
    assert_eq!(beta.len(), 2);
    assert!(
        (beta[0] - 3.0).abs() < 0.5 && (beta[1] - 2.0).abs() < 0.5,
        "{beta:?}"
    );
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "e.csv", "");
    assert_eq!(ntgof(&["test", "--input", &empty]).status.code(), Some(2));

    let bad = write(dir.path(), "b.csv", "x\n0.5\nnope\n");
    let out = ntgof(&["test", "--input", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));

    let outside = write(dir.path(), "o.csv", "x\n0.5\n1.5\n");
    assert_eq!(ntgof(&["test", "--input", &outside]).status.code(), Some(2));

    let u = write(dir.path(), "u.csv", &uniform_csv(20, 1));
    for args in [
        vec!["test", "--input", &u, "--alpha", "1.5"],
        vec!["test", "--input", &u, "--mc-reps", "10"],
        vec!["test", "--input", &u, "--penalty", "bogus"],
        vec!["test", "--input", "/nonexistent/file.csv"],
        vec!["power", "--alternative", "contamination:0:0.3"],
    ] {
        assert_eq!(ntgof(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn singular_normalizing_matrix_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "m.toml",
        "[deconvolution]\nnoise = { kind = \"gaussian\", sd = 0.25 }\nmoment_draws = 5000\nmoment_seed = 1\n",
    );
    let input = write(dir.path(), "d.csv", &uniform_csv(50, 2));
    let out = ntgof(&[
        "test",
        "--kind",
        "deconvolution",
        "--input",
        &input,
        "--config",
        &config,
        "--dmax",
        "12",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn calibrate_and_probe_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.json");
    let o = out.to_str().unwrap();
    assert_eq!(
        ntgof(&["calibrate", "--n", "100", "--mc-reps", "200", "--out", o])
            .status
            .code(),
        Some(0)
    );
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(v["statistics"].as_array().unwrap().len(), 200);

    let p = ntgof(&[
        "probe",
        "--probe",
        "tail-rate",
        "--n-grid",
        "16,32",
        "--mc-reps",
        "1000",
    ]);
    assert_eq!(p.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&p.stdout).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 2);
}
