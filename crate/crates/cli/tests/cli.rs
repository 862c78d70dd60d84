use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lanealloc::output::Summary;
use lanealloc::scenario::{emit_scenario, load_scenario_file};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lanealloc"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_scenario(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    let out = run(&[
        "generate",
        "--users",
        "8",
        "--slots",
        "12",
        "--subcarriers",
        "3",
        "--seed",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn generate_writes_a_loadable_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = small_scenario(dir.path());
    let s = load_scenario_file(&path).unwrap();
    assert_eq!(s.dims(), (8, 12, 3, 3));
    // same seed, same bytes
    let again = run(&["generate", "--users", "8", "--slots", "12", "--subcarriers", "3", "--seed", "4"]);
    assert_eq!(again.stdout, std::fs::read(&path).unwrap());
}

#[test]
fn simulate_feasible_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let csv = dir.path().join("alloc.csv");
    let dump = dir.path().join("gains.bin");
    let out = run(&[
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--allocation-csv",
        csv.to_str().unwrap(),
        "--channel-dump",
        dump.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = Summary::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(summary.scheme, "proposed");
    assert!(summary.feasible && summary.deficits.is_empty());
    assert!(summary.avg_power_w > 0.0);
    let csv = std::fs::read_to_string(csv).unwrap();
    assert!(csv.starts_with("k,m,j,n,power_w,assigned\n"));
    assert!(csv.lines().count() > 1);
    assert!(std::fs::metadata(dump).unwrap().len() > 0);

    for scheme in ["myopic", "equal_power"] {
        let out = run(&["simulate", "--scenario", scenario.to_str().unwrap(), "--scheme", scheme]);
        assert_eq!(code(&out), 0, "{scheme}");
    }
}

#[test]
fn simulate_infeasible_exits_two_with_deficits() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let heavy = load_scenario_file(&scenario).unwrap().with_demand_scale(1e4).unwrap();
    let path = dir.path().join("heavy.toml");
    std::fs::write(&path, emit_scenario(&heavy)).unwrap();
    let out = run(&["simulate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("missing_bits"), "{stderr}");
    let summary = Summary::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(!summary.feasible && !summary.deficits.is_empty());
}

#[test]
fn errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(code(&run(&["simulate", "--scenario", missing.to_str().unwrap()])), 1);
    let scenario = small_scenario(dir.path());
    let s = scenario.to_str().unwrap();
    assert_eq!(code(&run(&["simulate", "--scenario", s, "--scheme", "oracle"])), 1);
    assert_eq!(code(&run(&["simulate"])), 1);
    assert_eq!(code(&run(&["sweep", "--scenario", s, "--axis", "K", "--values", "1"])), 1);
    assert_eq!(code(&run(&["sweep", "--scenario", s, "--axis", "M", "--values", "4,2"])), 1);
    assert_eq!(code(&run(&["verify", "everything"])), 1);
    assert_eq!(code(&run(&["--bogus-flag"])), 1);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "this is not a scenario").unwrap();
    let out = run(&["simulate", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(!out.stderr.is_empty());
}

#[test]
fn sweep_rows_are_complete_and_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let s = scenario.to_str().unwrap();
    let out = run(&[
        "sweep", "--scenario", s, "--axis", "M", "--values", "2,4,6,8,12", "--schemes", "proposed,myopic",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "axis,value,scheme,replication,avg_power_w,feasible,iterations");
    assert_eq!(lines.len(), 1 + 10);
    assert!(lines[1].starts_with("M,2,proposed,0,"));
    assert!(lines[2].starts_with("M,2,myopic,0,"));

    let out = run(&[
        "sweep",
        "--scenario",
        s,
        "--axis",
        "N",
        "--values",
        "1,2,3,4",
        "--schemes",
        "proposed,myopic,equal_power",
        "--jobs",
        "3",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 12);

    let out = run(&["sweep", "--scenario", s, "--axis", "M", "--values", "6"]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1 + 1);
}

#[test]
fn sweep_output_ignores_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small_scenario(dir.path());
    let s = scenario.to_str().unwrap();
    let args = |jobs: &'static str| {
        run(&[
            "sweep", "--scenario", s, "--axis", "M", "--values", "3,6,12", "--schemes", "proposed,equal_power",
            "--jobs", jobs,
        ])
        .stdout
    };
    assert_eq!(args("1"), args("4"));
}

#[test]
fn verify_reports_every_check() {
    let out = run(&["verify", "fixedpoint"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("suite,check,tolerance,observed,passed\n"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("fixedpoint,") && l.ends_with(",true")));
}
