use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn dsa(args: &[&str], scenario: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsa"))
        .args(&args[..1])
        .arg("--scenario")
        .arg(scenario)
        .arg("--out")
        .arg(out)
        .args(&args[1..])
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Copy of a shipped scenario with an absolute case path, edited by `edit`.
fn variant(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let text = std::fs::read_to_string(data(&format!("scenarios/{name}.json"))).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    let case = data("scenarios").join(v["case"].as_str().unwrap());
    v["case"] = Value::from(case.to_str().unwrap());
    edit(&mut v);
    let path = dir.join(format!("{name}_variant.json"));
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

#[test]
fn powerflow_writes_every_bus() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsa(&["powerflow"], &data("scenarios/ne39.json"), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("powerflow.csv")).unwrap();
    assert_eq!(csv.lines().count(), 40);
    assert!(csv.starts_with("bus,kind,v,theta,p,q"));
    assert!(tmp.path().join("powerflow.log").exists());
}

#[test]
fn overloaded_feeder_is_a_powerflow_failure() {
    let tmp = tempfile::tempdir().unwrap();
    // 1/(2x) = 2.5 p.u. is the most the line can carry
    let mut case: Value =
        serde_json::from_str(&std::fs::read_to_string(data("cases/twobus.case.json")).unwrap()).unwrap();
    case["buses"][1]["p_load"] = Value::from(4.0);
    let case_path = tmp.path().join("heavy.case.json");
    std::fs::write(&case_path, case.to_string()).unwrap();
    let sc = variant(tmp.path(), "twobus", |v| {
        v["case"] = Value::from(case_path.to_str().unwrap());
    });
    let o = dsa(&["powerflow"], &sc, &tmp.path().join("out"));
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("out/powerflow.log").exists());
}

#[test]
fn planner_refuses_to_run_without_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsa(&["dsa"], &data("scenarios/twobus.json"), tmp.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn malformed_scenarios_are_parse_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = variant(tmp.path(), "smib", |v| v["colour"] = Value::from("red"));
    assert_eq!(code(&dsa(&["dsa"], &unknown, tmp.path())), 3);

    let schema = variant(tmp.path(), "smib", |v| v["schema"] = Value::from(2));
    assert_eq!(code(&dsa(&["powerflow"], &schema, tmp.path())), 3);

    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&dsa(&["powerflow"], &missing, tmp.path())), 3);

    let broken_case = tmp.path().join("broken.case.json");
    std::fs::write(&broken_case, "{\"name\": \"x\", \"buses\": [").unwrap();
    let sc = variant(tmp.path(), "smib", |v| {
        v["case"] = Value::from(broken_case.to_str().unwrap());
    });
    assert_eq!(code(&dsa(&["powerflow"], &sc, tmp.path())), 3);

    let threads = dsa(&["dsa", "--threads", "0"], &data("scenarios/smib.json"), tmp.path());
    assert_eq!(code(&threads), 3);
}

#[test]
fn loss_of_synchronism_is_a_solver_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsa(&["simulate", "--mode", "q1"], &data("scenarios/smib.json"), tmp.path());
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|d| {
            let out = tmp.path().join(d);
            let o = dsa(&["simulate"], &data("scenarios/smib.json"), &out);
            assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
            for chart in ["omega", "delta_coi", "v", "theta_rel"] {
                assert!(out.join(format!("simulate_{chart}.svg")).exists());
            }
            std::fs::read(out.join("simulate.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs[0].clone()).unwrap();
    assert!(text.starts_with("t,delta_1,omega_1,"));
    // 0..10 s on a 0.01 s grid, with the switching instants repeated
    assert!(text.lines().count() > 1000);
}

#[test]
fn empty_budget_is_undecided() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsa(&["dsa", "--k", "0"], &data("scenarios/smib.json"), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(tmp.path().join("summary.txt")).unwrap();
    assert!(summary.contains("status: UNDECIDED"));
    assert!(summary.contains("sims_total: 0"));
    assert!(summary.contains("sims_bound: 0 (|Q|=2 x |U|=11 x |S_N|=0)"));
    let tree: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("tree.json")).unwrap()).unwrap();
    assert_eq!(tree["nodes"].as_array().unwrap().len(), 1);
    assert!(!tmp.path().join("execution.json").exists());
}

#[test]
fn smib_search_writes_a_secure_execution() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsa(&["dsa", "--seed", "3"], &data("scenarios/smib.json"), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("status: SECURE"));
    assert!(stdout.contains("seed: 3"));
    for f in ["tree.json", "metrics.csv", "summary.txt", "execution.json", "execution.csv"] {
        assert!(tmp.path().join(f).exists(), "{f} missing");
    }
    let metrics = std::fs::read_to_string(tmp.path().join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("iter,t_step2,t_step3,t_step4,t_step5,nodes,sims_total"));

    let tree: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("tree.json")).unwrap()).unwrap();
    let nodes = tree["nodes"].as_array().unwrap();
    assert!(nodes[0]["parent"].is_null());
    for n in &nodes[1..] {
        for key in ["id", "parent", "mode", "input", "x"] {
            assert!(!n[key].is_null(), "node field {key}");
        }
        assert!(n["parent"].as_u64().unwrap() < n["id"].as_u64().unwrap());
    }
}

#[test]
fn bench_writes_one_row_per_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dsa(&["bench"], &data("scenarios/smib.json"), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 11);
    assert!(tmp.path().join("bench.svg").exists());

    let single = tmp.path().join("single");
    let o = dsa(&["bench", "--k", "50"], &data("scenarios/smib.json"), &single);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(single.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("50,"));
}
