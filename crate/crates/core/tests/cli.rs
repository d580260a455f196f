use std::f64::consts::{FRAC_PI_2, PI};
use std::process::{Command, Output};

use jointmeas::cli::{
    ConvergeOutput, EffectsOutput, FeasibilityOutput, SimulateOutput, ValidateOutput, SWEEP_HEADER,
};
use jointmeas::scheme::{four_effects, SchemeParams};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jointmeas"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn canonical_angles() -> Vec<String> {
    let t = (PI / 3.0).to_string();
    [
        "--theta-o",
        &t,
        "--phi-o",
        "0",
        "--theta-p",
        &t,
        "--phi-p",
        "0",
        "--phi",
        "0",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn with_angles(cmd: &str, extra: &[&str]) -> Output {
    let angles = canonical_angles();
    let mut args = vec![cmd];
    args.extend(angles.iter().map(String::as_str));
    args.extend(extra);
    run(&args)
}

#[test]
fn effects_json_round_trips() {
    let out = with_angles("effects", &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: EffectsOutput = serde_json::from_str(&stdout(&out)).unwrap();
    let p = SchemeParams::new(PI / 3.0, 0.0, PI / 3.0, 0.0, 0.0).unwrap();
    let povm = four_effects(&p);
    assert_eq!(parsed.params, p);
    assert!(parsed.complete);
    for (rec, e) in parsed.effects.iter().zip(povm.effects()) {
        assert_eq!(rec.effect(), e);
        assert_eq!(rec.valid, rec.effect().is_valid());
        assert_eq!((rec.lambda_min, rec.lambda_max), e.eigenvalues());
    }
    let total = parsed
        .effects
        .iter()
        .map(|r| r.effect())
        .fold(jointmeas::qubit::Effect::zero(), |acc, e| acc + e);
    assert!(total.max_abs_diff(&jointmeas::qubit::Effect::identity()) <= 1e-12);
}

#[test]
fn effects_text_and_csv() {
    let out = with_angles("effects", &["--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout(&out);
    assert!(s.starts_with("outcome,f0,f1,f2,f3,lambda_min,lambda_max,valid\n"));
    assert_eq!(s.lines().count(), 5);
    let out = with_angles("effects", &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!stdout(&out).is_empty());
}

#[test]
fn invalid_angles_are_usage_errors() {
    let out = run(&[
        "effects",
        "--theta-o",
        "NaN",
        "--phi-o",
        "0",
        "--theta-p",
        "1",
        "--phi-p",
        "0",
        "--phi",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "effects",
        "--theta-o",
        "4",
        "--phi-o",
        "0",
        "--theta-p",
        "1",
        "--phi-p",
        "0",
        "--phi",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = run(&["effects", "--theta-o", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn degrees_match_radians() {
    let deg = run(&[
        "effects",
        "--theta-o",
        "60",
        "--phi-o",
        "0",
        "--theta-p",
        "60",
        "--phi-p",
        "0",
        "--phi",
        "0",
        "--degrees",
        "--format",
        "json",
    ]);
    let rad = with_angles("effects", &["--format", "json"]);
    let deg: EffectsOutput = serde_json::from_str(&stdout(&deg)).unwrap();
    let rad: EffectsOutput = serde_json::from_str(&stdout(&rad)).unwrap();
    for (a, b) in deg.effects.iter().zip(&rad.effects) {
        assert!(a.effect().max_abs_diff(&b.effect()) <= 1e-15);
    }
}

#[test]
fn marginals_with_state() {
    let out = with_angles(
        "marginals",
        &[
            "--pure",
            "0.7071067811865476,0,0.7071067811865476,0",
            "--format",
            "json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["command"], "marginals");
    assert_eq!(with_angles("marginals", &[]).status.code(), Some(0));
    assert_eq!(
        with_angles("marginals", &["--pure", "1,0,1,0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn validate_passes_at_canonical_point() {
    let out = with_angles(
        "validate",
        &[
            "--random-states",
            "1000",
            "--seed",
            "42",
            "--format",
            "json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v: ValidateOutput = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.passed && v.max_abs_deviation <= 1e-10);
    assert_eq!(v.n_states, 1000);
}

#[test]
fn payoff_sweep_csv() {
    let half_pi = FRAC_PI_2.to_string();
    let out = run(&[
        "payoff-sweep",
        "--theta-o",
        &half_pi,
        "--phi-o",
        "0",
        "--theta-p",
        "0:3.141592653589793:5",
        "--phi-p",
        "0",
        "--phi",
        "0",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout(&out);
    let mut lines = s.lines();
    assert_eq!(lines.next(), Some(SWEEP_HEADER));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        // theta_o = π/2 with φ_o + φ = 0 makes the first marginal sharp
        assert!((r[9] - 1.0).abs() <= 1e-12 && r[11].abs() <= 1e-12);
        assert!(r[15] <= 1e-12);
    }

    let out = run(&[
        "payoff-sweep",
        "--theta-o",
        "90",
        "--phi-o",
        "90",
        "--theta-p",
        "90",
        "--degrees",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let row: Vec<f64> = stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((row[11] - 1.0).abs() <= 1e-12 && row[9].abs() <= 1e-12 && row[10].abs() <= 1e-12);

    let out = run(&["payoff-sweep", "--theta-o", "0:1:0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn coexist_text() {
    let out = run(&["coexist", "--a", "0,0,0.6", "--b", "0.8,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("coexistent (lhs=1.000000)"));
    let out = run(&["coexist", "--a", "0,0,1", "--b", "1,0,0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("not coexistent"));
    let out = run(&["coexist", "--a", "0,0,1.5", "--b", "1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn feasibility_json_and_errors() {
    let out = run(&[
        "feasibility",
        "--e",
        "0.5,0,0,0.3",
        "--f",
        "0.5,0.3,0,0",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: FeasibilityOutput = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.result.feasible);
    assert!(v.joint_effects.iter().all(|r| r.lambda_min >= -1e-5));

    let out = run(&["feasibility", "--e", "0.5,0,0,1", "--f", "0.5,1,0,0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["feasibility", "--e", "0.5,0,0", "--f", "0.5,1,0,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_seeded() {
    let args = [
        "--pure", "1,0,0,0", "-n", "100000", "--seed", "7", "--format", "json",
    ];
    let a = with_angles("simulate", &args);
    let b = with_angles("simulate", &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let s: SimulateOutput = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(s.counts.n_total, 100_000);
    assert!((s.estimate.p_sigma3_hat.unwrap() - 1.0).abs() < 0.02);

    let out = run(&[
        "simulate",
        "--theta-o",
        "0",
        "--phi-o",
        "0",
        "--theta-p",
        "0",
        "--phi-p",
        "0",
        "--phi",
        "0",
        "--pure",
        "1,0,0,0",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(
        with_angles("simulate", &["-n", "10"]).status.code(),
        Some(2)
    );
}

#[test]
fn converge_rows_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("converge.json");
    let out = with_angles(
        "converge",
        &[
            "--pure",
            "0.7071067811865476,0,0.7071067811865476,0",
            "--n-list",
            "1000,10000",
            "--reps",
            "5",
            "--format",
            "json",
            "--output",
            path.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let c: ConvergeOutput = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(
        c.rows.iter().map(|r| r.n).collect::<Vec<_>>(),
        vec![1000, 10000]
    );
    assert_eq!(c.reps, 5);

    let out = with_angles("converge", &["--pure", "1,0,0,0", "--n-list", "5"]);
    assert_eq!(out.status.code(), Some(2));
}
