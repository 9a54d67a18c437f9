//! End-to-end tests of the `aerochannel` binary: flag handling, file
//! formats, exit codes, and reproducibility contracts.

use std::path::Path;
use std::process::{Command, Output};

use aerochannel::environment::EnvironmentSpec;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aerochannel"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(args: &[&str]) -> String {
    String::from_utf8(run_ok(args).stdout).expect("utf8 stdout")
}

/// Pull the closed-form column out of an analytic table row.
fn closed_form_value(stdout: &str, label: &str) -> f64 {
    for line in stdout.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() == Some(&label) {
            return fields[1].parse().expect("numeric closed_form column");
        }
    }
    panic!("no row labeled `{label}` in:\n{stdout}");
}

#[test]
fn analytic_z_reports_the_maximum() {
    let out = stdout_of(&["analytic", "z", "--p1", "0.3678794", "--q1", "1"]);
    let value = closed_form_value(&out, "z");
    assert!((value - 0.530738).abs() < 1e-6, "got {value}");
}

#[test]
fn analytic_two_tx_with_silent_second_source_equals_z() {
    let z = closed_form_value(
        &stdout_of(&["analytic", "z", "--p1", "0.3", "--q1", "0.8"]),
        "z",
    );
    let two = closed_form_value(
        &stdout_of(&[
            "analytic", "two-tx", "--p1", "0.3", "--q1", "0.8", "--p2", "0", "--q2", "0.9",
        ]),
        "two-tx",
    );
    assert_eq!(z, two);
}

#[test]
fn analytic_relay_endtoend_value() {
    let out = stdout_of(&[
        "analytic",
        "relay-endtoend",
        "--p1",
        ".5",
        "--q1",
        ".5",
        "--q2",
        ".5",
    ]);
    let value = closed_form_value(&out, "relay-endtoend");
    assert!((value - 0.125).abs() < 1e-9);
    // Closed form and exact evaluator agree on this model.
    let diff: f64 = out
        .lines()
        .find(|l| l.starts_with("relay-endtoend"))
        .unwrap()
        .split_whitespace()
        .nth(3)
        .unwrap()
        .parse()
        .unwrap();
    assert!(diff.abs() < 1e-12);
}

#[test]
fn analytic_rejects_out_of_range_with_exit_1() {
    let out = bin()
        .args(["analytic", "z", "--p1", "1.5", "--q1", "0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("p1"), "stderr: {stderr}");
}

#[test]
fn analytic_csv_written_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("table.csv");
    run_ok(&[
        "analytic",
        "two-rx",
        "--p1",
        "0.5",
        "--q1",
        "1",
        "--q2",
        "0.5",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("model,p1,q1,p2,q2,boost,closed_form,exact,difference"));
    assert_eq!(text.lines().count(), 3); // header + one row per receiver
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn simulate_corridor_is_byte_identical_across_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "simulate".to_string(),
            "--env".into(),
            "corridor".into(),
            "--runs".into(),
            "2".into(),
            "--seed".into(),
            "7".into(),
            "--out".into(),
            out.to_string_lossy().into_owned(),
        ]
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run_ok(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    run_ok(&args(&b).iter().map(String::as_str).collect::<Vec<_>>());
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_eq!(read(&a, "transitions.csv"), read(&b, "transitions.csv"));
    assert_eq!(read(&a, "trials.csv"), read(&b, "trials.csv"));

    // The worker count must not leak into the results.
    let c = dir.path().join("c");
    let mut single = args(&c);
    single.extend(["--workers".into(), "1".into()]);
    run_ok(&single.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(read(&a, "transitions.csv"), read(&c, "transitions.csv"));
    assert_eq!(read(&a, "trials.csv"), read(&c, "trials.csv"));
}

#[test]
fn simulate_office_schema_covers_every_receiver_bin_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("office");
    run_ok(&[
        "simulate",
        "--env",
        "office",
        "--runs",
        "2",
        "--seed",
        "11",
        "--n-events",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("transitions.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "receiver_id,d_lo,d_hi,emitted,hits,q_hat,stderr"
    );
    let env = aerochannel::environment::builtin("office").unwrap();
    let expected_rows = env.receivers.len() * env.emission.diameter_distribution.bins().len();
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), expected_rows);
    for row in rows {
        let q: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&q));
    }
}

#[test]
fn simulate_classroom_within_protocol_run_range() {
    // Trim the classroom to keep 90 runs cheap: fewer particles, one cough.
    let dir = tempfile::tempdir().unwrap();
    let preset_path = dir.path().join("classroom.json");
    run_ok(&[
        "presets",
        "export",
        "classroom",
        preset_path.to_str().unwrap(),
    ]);
    let mut env =
        EnvironmentSpec::from_json(&std::fs::read_to_string(&preset_path).unwrap()).unwrap();
    env.n_events = 1;
    env.emission.particles_per_event = 40;
    let trimmed = dir.path().join("classroom-small.json");
    std::fs::write(&trimmed, env.to_json()).unwrap();

    let runs = 90u32;
    assert!((90..=240).contains(&runs));
    let out = dir.path().join("out");
    run_ok(&[
        "simulate",
        "--env",
        trimmed.to_str().unwrap(),
        "--runs",
        &runs.to_string(),
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    assert_eq!(manifest["runs"], 90);
    assert_eq!(manifest["master_seed"], 5);
    // 19 student receivers each get a hits column in the trial summary.
    let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 90);
    assert_eq!(
        trials
            .lines()
            .next()
            .unwrap()
            .matches("hits_student")
            .count(),
        19
    );
}

#[test]
fn sweep_linear_measure_is_monotone_and_n_scales() {
    // A synthetic office variant with few, heavy droplets keeps 240 events cheap.
    let dir = tempfile::tempdir().unwrap();
    let preset_path = dir.path().join("office.json");
    run_ok(&["presets", "export", "office", preset_path.to_str().unwrap()]);
    let mut env =
        EnvironmentSpec::from_json(&std::fs::read_to_string(&preset_path).unwrap()).unwrap();
    env.emission.particles_per_event = 40;
    let small = dir.path().join("office-small.json");
    std::fs::write(&small, env.to_json()).unwrap();

    let out = dir.path().join("out");
    run_ok(&[
        "sweep",
        "--env",
        small.to_str().unwrap(),
        "--runs",
        "1",
        "--seed",
        "2",
        "--loads",
        "1e4:1e10:12,log",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("rate_office-peer.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "load,R_bits,linear_measure,phi,n,nR,nPhi"
    );
    let mut last_linear = -1.0;
    for line in lines {
        let f: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        let (load, r, linear, _phi, n, n_r, _n_phi) = (f[0], f[1], f[2], f[3], f[4], f[5], f[6]);
        assert!(load > 0.0);
        assert!(linear >= last_linear, "linear measure must not decrease");
        last_linear = linear;
        assert_eq!(n, 240.0);
        assert!((n_r - 240.0 * r).abs() <= 1e-9 * n_r.abs().max(1e-300));
    }
    assert!(out.join("plot.gp").is_file());
    assert!(out.join("transitions.csv").is_file());
}

#[test]
fn sweep_single_bin_synthetic_peaks_where_expected() {
    // Degenerate 20 um spectrum with an enclosing receiver: the estimated
    // transition probability is one, so the rate column must peak where the
    // per-bin infection probability crosses 1/e.
    let env = serde_json::json!({
        "room": {"x": 4.0, "y": 4.0, "ceiling": 3.0},
        "emitters": [{"mouth_position": [2.0, 2.0, 1.5], "facing": [1.0, 0.0, 0.0]}],
        "receivers": [{"id": "engulf", "center": [2.0, 2.0, 1.5], "radius": 0.4}],
        "emission": {
            "particles_per_event": 200,
            "diameter_distribution": [[2e-5, 2e-5, 1.0]]
        },
        "n_events": 1,
        "event_interval_s": 60.0
    });
    let dir = tempfile::tempdir().unwrap();
    let env_path = dir.path().join("engulf.json");
    std::fs::write(&env_path, env.to_string()).unwrap();
    let out = dir.path().join("out");
    run_ok(&[
        "sweep",
        "--env",
        env_path.to_str().unwrap(),
        "--runs",
        "1",
        "--seed",
        "1",
        "--loads",
        "1e6:1e12:61,log",
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(out.join("rate_engulf.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    let (loads, rs): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r[0], r[1])).unzip();
    let argmax = rs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    // Load at which a 20 um particle carries a virion with probability 1/e.
    let lambda_unit = std::f64::consts::FRAC_PI_6 * (2e-5f64).powi(3) * 1e6;
    let target = -(1.0 - 1.0 / std::f64::consts::E).ln() / lambda_unit;
    let grid_step = (loads[1] / loads[0]).log10();
    assert!(
        (loads[argmax].log10() - target.log10()).abs() <= grid_step + 1e-12,
        "peak at {:.3e}, expected near {:.3e}",
        loads[argmax],
        target
    );
    // Rises to the peak, falls after it.
    assert!(rs[..argmax].windows(2).all(|w| w[0] <= w[1]));
    assert!(rs[argmax..].windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn presets_list_names_exactly_four() {
    let out = stdout_of(&["presets", "list"]);
    let names: Vec<&str> = out.lines().collect();
    assert_eq!(names, ["office", "corridor", "classroom", "bus"]);
}

#[test]
fn exported_preset_reproduces_builtin_results() {
    let dir = tempfile::tempdir().unwrap();
    let preset_path = dir.path().join("corridor.json");
    run_ok(&[
        "presets",
        "export",
        "corridor",
        preset_path.to_str().unwrap(),
    ]);
    // The exported document validates against the schema.
    let env = EnvironmentSpec::from_json(&std::fs::read_to_string(&preset_path).unwrap());
    assert!(env.is_ok());

    let from_builtin = dir.path().join("builtin");
    let from_file = dir.path().join("file");
    run_ok(&[
        "simulate",
        "--env",
        "corridor",
        "--runs",
        "2",
        "--seed",
        "3",
        "--out",
        from_builtin.to_str().unwrap(),
    ]);
    run_ok(&[
        "simulate",
        "--env",
        preset_path.to_str().unwrap(),
        "--runs",
        "2",
        "--seed",
        "3",
        "--out",
        from_file.to_str().unwrap(),
    ]);
    assert_eq!(
        std::fs::read(from_builtin.join("transitions.csv")).unwrap(),
        std::fs::read(from_file.join("transitions.csv")).unwrap()
    );
}

#[test]
fn preset_dir_env_var_overrides_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let mut env = aerochannel::environment::builtin("corridor").unwrap();
    env.emission.particles_per_event = 5;
    std::fs::write(dir.path().join("corridor.json"), env.to_json()).unwrap();

    let out = dir.path().join("out");
    let output = bin()
        .args([
            "simulate",
            "--env",
            "corridor",
            "--runs",
            "1",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
        ])
        .env("AEROCHANNEL_PRESET_DIR", dir.path())
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = std::fs::read_to_string(out.join("transitions.csv")).unwrap();
    let emitted: u64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(
        emitted, 5,
        "the override preset emits 5 particles per cough"
    );
}

#[test]
fn unknown_preset_is_a_validation_error() {
    for args in [
        vec!["simulate", "--env", "atrium", "--runs", "1"],
        vec!["presets", "export", "atrium", "/tmp/never-written.json"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(1), "args: {args:?}");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.contains("unknown preset"), "stderr: {stderr}");
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, b"plain file").unwrap();
    let out = bin()
        .args([
            "simulate",
            "--env",
            "corridor",
            "--runs",
            "1",
            "--out",
            blocker.join("nested").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn growing_runs_keeps_earlier_trials() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let two = dir.path().join("two");
    run_ok(&[
        "simulate",
        "--env",
        "corridor",
        "--runs",
        "1",
        "--seed",
        "9",
        "--out",
        one.to_str().unwrap(),
    ]);
    run_ok(&[
        "simulate",
        "--env",
        "corridor",
        "--runs",
        "2",
        "--seed",
        "9",
        "--out",
        two.to_str().unwrap(),
    ]);
    let first = |p: &Path| {
        std::fs::read_to_string(p.join("trials.csv"))
            .unwrap()
            .lines()
            .nth(1)
            .unwrap()
            .to_string()
    };
    assert_eq!(first(&one), first(&two));
}
