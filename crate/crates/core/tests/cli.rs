use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).to_string_lossy().into_owned()
}

fn profile() -> String {
    root().join("profiles/paper.json").to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offload-opt")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn validate_fixture() {
    let o = run(&["validate", &fixture("fig8.json")]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("separators=[2,3,4]"));
}

#[test]
fn validate_rejects_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cyclic.json");
    std::fs::write(
        &path,
        r#"{"nodes":[{"id":1,"cycles":0,"is_data":true},{"id":2,"cycles":1,"is_data":false},
            {"id":3,"cycles":1,"is_data":false},{"id":4,"cycles":1,"is_data":false}],
            "edges":[{"from":1,"to":2,"bits":1},{"from":2,"to":3,"bits":1},{"from":3,"to":2,"bits":1},
            {"from":3,"to":4,"bits":1}],"root":4}"#,
    )
    .unwrap();
    let o = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&run(&["solve", "serial", "--graph", &fixture("fig8.json")])), 1);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn parallel_deadline_too_tight() {
    let f = fixture("fig8.json");
    let o = run(&["solve", "parallel", "--graph", &f, "--profile", &profile(), "--lmax", "1", "--eps", "0.1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unsupported_structure_exits_three() {
    // A long shared prefix before the only fork puts 21 free nodes in the
    // enumerated core.
    let dir = tempfile::tempdir().unwrap();
    let n = 26;
    let mut nodes = Vec::new();
    for id in 1..=n {
        nodes.push(format!(r#"{{"id":{id},"cycles":{},"is_data":{}}}"#, if id == 1 { 0 } else { 100000000 }, id == 1));
    }
    let mut edges: Vec<String> = (1..23).map(|i| format!(r#"{{"from":{i},"to":{},"bits":1000}}"#, i + 1)).collect();
    for (a, b) in [(23, 24), (23, 25), (24, 26), (25, 26)] {
        edges.push(format!(r#"{{"from":{a},"to":{b},"bits":1000}}"#));
    }
    let text = format!(r#"{{"nodes":[{}],"edges":[{}],"root":{n}}}"#, nodes.join(","), edges.join(","));
    let path = dir.path().join("long.json");
    std::fs::write(&path, text).unwrap();
    let p = path.to_str().unwrap();
    assert_eq!(code(&run(&["validate", p])), 0);
    let o = run(&["solve", "parallel", "--graph", p, "--lmax", "10", "--eps", "0.5"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn serial_sweep_csv() {
    let f = fixture("fig8.json");
    let args = ["sweep", "serial", "--graph", &f, "--profile", &profile(), "--lambdas", "0.01:10:log20"];
    let o = run(&args);
    assert_eq!(code(&o), 0);
    let csv = stdout(&o);
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(3).map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(csv.lines().next().unwrap(), "lambda,energy_J,latency_s,decisions_bitstring");
    assert_eq!(rows.len(), 20);
    for w in rows.windows(2) {
        assert!(w[1][2] <= w[0][2] && w[1][1] >= w[0][1]);
    }
    assert_eq!(stdout(&run(&args)), csv, "output must be deterministic");
}

#[test]
fn parallel_sweep_csv() {
    let f = fixture("fig8.json");
    let o = run(&["sweep", "parallel", "--graph", &f, "--lmax", "1,6,10", "--eps", "0.1", "--eps-d", "0.01"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "lmax_s,eps_s,conc,dp_energy_J,recursion_latency_s,sim_energy_J,sim_latency_s,decisions_bitstring"
    );
    assert_eq!(lines[1], "1,0.1,1,inf,,,,");
    for line in &lines[2..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 8);
        let lmax: f64 = cols[0].parse().unwrap();
        let l: f64 = cols[4].parse().unwrap();
        assert!(l <= lmax);
        assert_eq!(cols[7].len(), 15);
    }
}

#[test]
fn solve_save_evaluate_and_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("fig8.json");
    let plan = dir.path().join("plan.json");
    let plan_s = plan.to_str().unwrap();
    let o = run(&["solve", "serial", "--graph", &f, "--lambda", "1", "--plan-out", plan_s]);
    assert_eq!(code(&o), 0);
    let solved: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();

    let o = run(&["evaluate", "--graph", &f, "--plan", plan_s, "--mode", "serial"]);
    assert_eq!(code(&o), 0);
    let eval: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let e1 = solved["energy_J"].as_f64().unwrap();
    let e2 = eval["energy_J"].as_f64().unwrap();
    assert!(((e1 - e2) / e1).abs() < 1e-8);

    let o = run(&["evaluate", "--graph", &f, "--plan", plan_s, "--mode", "simulate", "--eps-d", "0.01"]);
    assert_eq!(code(&o), 0);
    let sim: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(sim["steps"].as_u64().unwrap() > 0);
    assert_eq!(sim["eps_d"].as_f64().unwrap(), 0.01);

    let o = run(&["evaluate", "--graph", &f, "--plan", plan_s, "--mode", "recursion"]);
    assert_eq!(code(&o), 0);

    let tl = dir.path().join("timeline.csv");
    let o = run(&["timeline", "--graph", &f, "--plan", plan_s, "--out", tl.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(&tl).unwrap();
    assert!(csv.starts_with("node,state,start_s,end_s\n"));
    assert!(csv.lines().count() > 15);
}

#[test]
fn oracle_matches_solver() {
    let f = fixture("fig8.json");
    let a: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["solve", "serial", "--graph", &f, "--lambda", "0.1"]))).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&stdout(&run(&["oracle", "serial", "--graph", &f, "--lambda", "0.1"]))).unwrap();
    let (x, y) = (a["objective"].as_f64().unwrap(), b["objective"].as_f64().unwrap());
    assert!(((x - y) / y).abs() < 1e-8);
    assert_eq!(b["enumerated"].as_f64().unwrap(), 8192.0);

    let t = fixture("t2subtree.json");
    let o = run(&["oracle", "parallel", "--graph", &t, "--lmax", "4", "--grid", "20"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn baselines_run() {
    let f = fixture("fig8.json");
    assert_eq!(code(&run(&["baseline", "serial", "--graph", &f])), 0);
    assert_eq!(code(&run(&["baseline", "parallel", "--graph", &f, "--lmax", "10"])), 0);
}

#[test]
fn scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let s = dir.path().join("scenario.json");
    std::fs::write(
        &s,
        format!(
            r#"{{"graph": {:?}, "profile": {:?}, "mode": "serial", "lambdas": [0.1, 1, 10]}}"#,
            fixture("fig8.json"),
            profile()
        ),
    )
    .unwrap();
    let o = run(&["run", s.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
}

#[test]
fn thread_cap_is_validated() {
    let f = fixture("fig8.json");
    let o = Command::new(env!("CARGO_BIN_EXE_offload-opt"))
        .args(["sweep", "serial", "--graph", &f, "--lambdas", "1,2"])
        .env("OFFLOAD_OPT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    let o = Command::new(env!("CARGO_BIN_EXE_offload-opt"))
        .args(["sweep", "serial", "--graph", &f, "--lambdas", "1,2"])
        .env("OFFLOAD_OPT_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
}
