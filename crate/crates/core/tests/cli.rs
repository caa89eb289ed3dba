use std::path::PathBuf;
use std::process::{Command, Output};

fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets").join(name)
}

fn jamcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamcut")).args(args).output().unwrap()
}

fn triangle_args(cmd: &str) -> Vec<String> {
    vec![
        cmd.into(),
        "--topology".into(),
        asset("triangle.txt").display().to_string(),
        "--scenario".into(),
        asset("triangle.toml").display().to_string(),
    ]
}

fn run(args: Vec<String>) -> Output {
    jamcut(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

fn json_lines(out: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn attack_prints_one_plan_per_kind() {
    let out = run(triangle_args("attack"));
    assert_eq!(out.status.code(), Some(0));
    let lines = json_lines(&out);
    let costs: Vec<(String, f64)> =
        lines.iter().map(|v| (v["attack"].as_str().unwrap().to_string(), v["cost"].as_f64().unwrap())).collect();
    assert_eq!(
        costs,
        vec![("hidden".into(), 2.0), ("detectable".into(), 2.0), ("jamming".into(), 1.25)]
    );
    // buses 2 and 3 are symmetric: each is cut off by two insecure flows
    let side = &lines[2]["side1_buses"];
    assert!(*side == serde_json::json!([2]) || *side == serde_json::json!([3]), "{side}");
}

#[test]
fn flags_override_scenario_costs() {
    let mut args = triangle_args("attack");
    args.extend(["--p-j".into(), "0.75".into()]);
    let lines = json_lines(&run(args));
    assert_eq!(lines[2]["cost"].as_f64(), Some(1.75));
    assert_eq!(lines[2]["jam"].as_array().unwrap().len(), 1);
}

#[test]
fn verify_reports_success() {
    let out = run(triangle_args("verify"));
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out)[0];
    assert_eq!(v["success"], true);
    assert_eq!(v["detected"], false);
}

#[test]
fn oracle_check_is_sound() {
    let out = run(triangle_args("oracle-check"));
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out)[0];
    assert_eq!(v["oracle_cost"].as_f64(), Some(1.25));
    assert_eq!(v["sound"], true);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "phasors = [9]\n").unwrap();
    let out = jamcut(&[
        "attack",
        "--topology",
        asset("triangle.txt").to_str().unwrap(),
        "--scenario",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let mut args = triangle_args("attack");
    args.extend(["--p-j".into(), "3".into()]);
    assert_eq!(run(args).status.code(), Some(2));
    assert_eq!(jamcut(&["attack", "--topology"]).status.code(), Some(2));
    assert_eq!(jamcut(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_without_timing_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.csv"), dir.path().join("b.csv")];
    for p in &paths {
        let out = jamcut(&[
            "sweep",
            "--topology",
            "ieee14",
            "--trials",
            "5",
            "--fractions",
            "0,0.3",
            "--seed",
            "3",
            "--no-timing",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read_to_string(&paths[0]).unwrap();
    assert_eq!(a, std::fs::read_to_string(&paths[1]).unwrap());
    let mut lines = a.lines();
    assert_eq!(
        lines.next(),
        Some("system,secure_fraction,attack,p_J,beta,trials,mean_cost,feasible_fraction,mean_runtime_ms")
    );
    assert_eq!(lines.count(), 2 * 9);
    assert!(a.contains("ieee14,0,hidden,NA,NA,5,"));
}
