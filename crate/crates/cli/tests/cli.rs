use std::process::{Command, Output};

const Z2_PLUS_1: &str = r#"{"d":2,"F0":[["1","2,0"],["1","0,2"]],"F1":[["1","0,2"]]}"#;
const Z2_PLUS_3: &str = r#"{"d":2,"F0":[["1","2,0"],["3","0,2"]],"F1":[["1","0,2"]]}"#;
const C: &str = r#"{"kind":"arch","eps":1}"#;
const Q3: &str = r#"{"kind":"padic","p":3,"eps":1}"#;

fn berkdyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_berkdyn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn green_csv_over_c() {
    let o = berkdyn(&["--quiet", "green", "--map", Z2_PLUS_1, "--place", C, "--points", r#"[{"t":"cls","re":0},{"t":"inf"}]"#]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("point_id,lambda,n_used,certified_error"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn green_json_good_reduction_is_exactly_zero() {
    let o = berkdyn(&["--quiet", "--out", "json", "green", "--map", Z2_PLUS_3, "--place", Q3, "--points", r#"[{"t":"disk","center":"0","logr":"1/2"}]"#]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["lambda"], "0");
}

#[test]
fn nonarch_equilibrium_is_gauss() {
    let o = berkdyn(&["--quiet", "equilibrium", "--map", Z2_PLUS_3, "--place", Q3, "--mode", "nonarch"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let atoms: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(atoms.len(), 1, "{text}");
    assert!(atoms[0].ends_with(",1"), "{text}");
}

#[test]
fn contraction_ratios_stay_below_one_half() {
    let o = berkdyn(&["--quiet", "--out", "json", "contraction", "--map", Z2_PLUS_1, "--place", C, "--levels", "6"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for row in v["rows"].as_array().unwrap() {
        if let Some(r) = row["ratio"].as_f64() {
            assert!(r <= 0.5 + 1e-6);
        }
    }
}

#[test]
fn sweep_chi_reads_config_and_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(&cfg, r#"{"grid": [{"kind":"arch","eps":1},{"kind":"trivial"}], "select": ["one"]}"#).unwrap();
    let out = dir.path().join("table.csv");
    let o = berkdyn(&["--quiet", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(), "sweep-chi"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("place_kind,place_param,fn_id,value,cert_err,n_used"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"gird": []}"#).unwrap();
    let o = berkdyn(&["--config", cfg.to_str().unwrap(), "sweep-eq"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_place_is_a_config_error() {
    let o = berkdyn(&["green", "--map", Z2_PLUS_1, "--place", r#"{"kind":"padic","p":4,"eps":1}"#, "--points", "[]"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn random_tree_is_reproducible_from_seed() {
    let a = berkdyn(&["--quiet", "--seed", "9", "graph", "random-tree", "--vertices", "12"]);
    let b = berkdyn(&["--quiet", "--seed", "9", "graph", "random-tree", "--vertices", "12"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn graph_laplacian_of_a_tent() {
    let g = r#"{"vertices":[null,null,null],"edges":[[0,1,"1"],[1,2,"1"]],"boundary":[0,2]}"#;
    let o = berkdyn(&["--quiet", "--out", "json", "graph", "laplacian", "--graph", g, "--values", r#"["0","1","0"]"#]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("-2"), "{text}");
}
