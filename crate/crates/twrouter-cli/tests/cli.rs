use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn twrouter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twrouter")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_edp_on_a_single_pair_path() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("path.dimacs");
    let td = dir.path().join("path.td");
    let routing = dir.path().join("routing.json");
    fs::write(&graph, "p 4 3 1\ne 1 2 1\ne 2 3 1\ne 3 4 1\nd 1 4\n").unwrap();
    fs::write(&td, "s td 3 2 4\nb 1 1 2\nb 2 2 3\nb 3 3 4\n1 2\n2 3\n").unwrap();
    let out = twrouter(&[
        "solve-edp",
        "--graph",
        path_str(&graph),
        "--td",
        path_str(&td),
        "--json",
        "--routing-out",
        path_str(&routing),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rep["routed"], 1);
    assert_eq!(rep["routed_core"], 1);
    assert_eq!(rep["r"], 2);
    let paths: serde_json::Value = serde_json::from_str(&fs::read_to_string(&routing).unwrap()).unwrap();
    assert_eq!(paths["paths"]["0"], serde_json::json!([0, 1, 2, 3]));
}

#[test]
fn bench_grid_prints_one_row_per_size() {
    let out = twrouter(&["bench", "--family", "grid", "--k", "1..4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance,n,m,k,r,lp,flow,l1,l2,routed,bound,constant,ms");
    assert_eq!(lines.len(), 5);
    for (i, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 13);
        assert_eq!(cols[0], format!("grid-k{}", i + 1));
        assert_eq!(cols[9], "1");
    }
}

#[test]
fn gen_then_solve_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("cat.json");
    let td = dir.path().join("cat.td");
    let out = twrouter(&[
        "gen", "--family", "caterpillar", "--n", "5", "--w", "2", "--k", "3", "--seed", "4", "--out",
        path_str(&graph), "--td-out", path_str(&td),
    ]);
    assert!(out.status.success());
    let solved = twrouter(&["solve-ndp", "--graph", path_str(&graph), "--td", path_str(&td), "--csv"]);
    assert!(solved.status.success(), "{}", String::from_utf8_lossy(&solved.stderr));
    let row = stdout(&solved).lines().nth(1).unwrap().to_owned();
    let routed: usize = row.split(',').nth(9).unwrap().parse().unwrap();
    let oracle = twrouter(&["oracle", "--graph", path_str(&graph), "--json"]);
    assert!(oracle.status.success());
    let opt: serde_json::Value = serde_json::from_str(&stdout(&oracle)).unwrap();
    assert!(routed as u64 <= opt["opt"].as_u64().unwrap());
}

#[test]
fn wl_decompose_reports_components() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("kt.json");
    let td = dir.path().join("kt.td");
    let gen = twrouter(&[
        "gen", "--family", "ktree", "--n", "14", "--w", "2", "--k", "4", "--out", path_str(&graph), "--td-out",
        path_str(&td),
    ]);
    assert!(gen.status.success());
    let out = twrouter(&["wl-decompose", "--graph", path_str(&graph), "--td", path_str(&td), "--json"]);
    assert!(out.status.success());
    let wl: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(!wl["components"].as_array().unwrap().is_empty());
}

#[test]
fn gen_hardness_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("gadget.json");
    let out = twrouter(&["gen-hardness", "--k", "3", "--n", "2", "--seed", "1", "--verify", "--out", path_str(&out_path)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("gadget vertices 21"));
    assert!(text.contains("equivalence     holds"));
    assert!(dir.path().join("gadget.roles.json").exists());
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("bad.dimacs");
    fs::write(&graph, "p 2 1 1\ne 1 5 1\nd 1 2\n").unwrap();
    let out = twrouter(&["solve-edp", "--graph", path_str(&graph)]);
    assert_eq!(out.status.code(), Some(1));
    let missing = twrouter(&["solve-edp", "--graph", path_str(&dir.path().join("none.json"))]);
    assert_eq!(missing.status.code(), Some(1));
}
