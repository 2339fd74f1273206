use std::path::PathBuf;
use std::process::{Command, Output};

use qmcircuit::{resistance_matrix, Circuit, ResistanceMatrix, SolveConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qmcircuit"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qmcircuit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn generated(family: &str, name: &str, extra: &[&str]) -> PathBuf {
    let path = scratch(name);
    let mut args = vec![
        "generate",
        "--family",
        family,
        "--out",
        path.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path
}

#[test]
fn triangle_resistance_is_six_fifths() {
    let tri = generated("triangle", "tri.json", &[]);
    let o = run(&[
        "resistance",
        "--circuit",
        tri.to_str().unwrap(),
        "--source",
        "a",
        "--sink",
        "b",
    ]);
    assert!(o.status.success());
    let mu: f64 = stdout(&o).trim().parse().unwrap();
    assert!((mu - 1.2).abs() < 1e-9, "{mu}");

    let back = run(&[
        "resistance",
        "--circuit",
        tri.to_str().unwrap(),
        "--source",
        "b",
        "--sink",
        "a",
    ]);
    assert_eq!(stdout(&back).trim(), "inf");
}

#[test]
fn metric_check_classifies_the_triangle() {
    let tri = generated("triangle", "tri-metric.json", &[]);
    let o = run(&["metric-check", "--circuit", tri.to_str().unwrap(), "--all"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text
        .lines()
        .find(|l| l.split_whitespace().take(3).collect::<Vec<_>>() == ["a", "c", "b"])
        .expect("row for a c b");
    let cols: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(&cols[6..], ["false", "false", "ok"]);
}

#[test]
fn shortest_sweep_approaches_two() {
    let tri = generated("triangle", "tri-sweep.json", &[]);
    let o = run(&[
        "limit-sweep",
        "--circuit",
        tri.to_str().unwrap(),
        "--source",
        "a",
        "--sink",
        "b",
        "--mode",
        "shortest",
        "--t",
        "4,16,64",
        "--jobs",
        "2",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rows = text.lines();
    assert_eq!(
        rows.next(),
        Some("t,r,s,mu,oracle,rel_error,sweeps,residual")
    );
    let last: Vec<&str> = rows.last().unwrap().split(',').collect();
    let mu: f64 = last[3].parse().unwrap();
    assert!((mu - 2.0).abs() / 2.0 <= 0.05);
}

#[test]
fn matrix_json_round_trips() {
    let c = generated(
        "random",
        "rand.json",
        &["--n", "5", "--p", "0.5", "--seed", "3"],
    );
    let o = run(&[
        "matrix",
        "--circuit",
        c.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let parsed = ResistanceMatrix::from_json(&text).unwrap();
    assert_eq!(parsed.to_json().unwrap().trim(), text.trim());
    assert_eq!(
        ResistanceMatrix::from_json(&parsed.to_json().unwrap()).unwrap(),
        parsed
    );

    let direct = resistance_matrix(&Circuit::load(&c).unwrap(), &SolveConfig::default()).unwrap();
    for (row, want) in parsed.entries.iter().zip(&direct.entries) {
        for (got, want) in row.iter().zip(want) {
            match (got.finite(), want.finite()) {
                (Some(g), Some(w)) => assert!((g - w).abs() <= 1e-12 * w),
                _ => assert_eq!(got, want),
            }
        }
    }
}

#[test]
fn solve_json_has_balanced_interior() {
    let c = generated("five-node", "five.json", &[]);
    let o = run(&[
        "solve",
        "--circuit",
        c.to_str().unwrap(),
        "--source",
        "a",
        "--sink",
        "b",
        "--json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["residual"].as_f64().unwrap() <= v["flux_tol"].as_f64().unwrap());
}

#[test]
fn exit_codes() {
    let tri = generated("triangle", "tri-codes.json", &[]);
    let tri = tri.to_str().unwrap();

    let missing = run(&[
        "resistance",
        "--circuit",
        "/nonexistent.json",
        "--source",
        "a",
        "--sink",
        "b",
    ]);
    assert_eq!(missing.status.code(), Some(2));

    let unknown = run(&[
        "resistance",
        "--circuit",
        tri,
        "--source",
        "a",
        "--sink",
        "zz",
    ]);
    assert_eq!(unknown.status.code(), Some(2));

    let broken = scratch("broken.json");
    std::fs::write(&broken, "{\"r\": 1,\n \"s\": }").unwrap();
    let o = run(&[
        "resistance",
        "--circuit",
        broken.to_str().unwrap(),
        "--source",
        "a",
        "--sink",
        "b",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("broken.json") && err.contains("line 2"),
        "{err}"
    );

    let r = generated(
        "random",
        "stiff.json",
        &["--n", "8", "--p", "0.5", "--r", "0.5"],
    );
    let o = run(&[
        "solve",
        "--circuit",
        r.to_str().unwrap(),
        "--source",
        "0",
        "--sink",
        "5",
        "--max-sweeps",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("residual"));

    let five = generated("five-node", "five-ultra.json", &[]);
    let m = scratch("five.csv");
    let o = run(&["matrix", "--circuit", five.to_str().unwrap()]);
    std::fs::write(&m, &o.stdout).unwrap();
    let o = run(&["ultra-check", "--matrix", m.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn balanced_flow_and_reductions() {
    let five = generated("five-node", "five-flow.json", &[]);
    let five = five.to_str().unwrap();
    let bnd = scratch("bnd.json");
    std::fs::write(&bnd, r#"{"a": 1, "b": -1}"#).unwrap();
    let o = run(&[
        "balanced-flow",
        "--circuit",
        five,
        "--boundary",
        bnd.to_str().unwrap(),
        "--json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["stages"][0]["ratio"].as_f64(), Some(1.0));

    let o = run(&[
        "monotone-check",
        "--circuit",
        five,
        "--source",
        "a",
        "--sink",
        "b",
        "--edge",
        "4",
        "--mu-new",
        "inf",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("monotone"));

    let tri = generated("triangle", "tri-sp.json", &[]);
    let o = run(&[
        "sp-reduce",
        "--circuit",
        tri.to_str().unwrap(),
        "--source",
        "a",
        "--sink",
        "b",
    ]);
    assert_eq!(stdout(&o).trim(), "1.2");
}
