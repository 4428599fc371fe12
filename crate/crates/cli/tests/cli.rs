use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL: [&str; 4] = ["--terms", "128", "--precision-bits", "128"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rankgroth"))
        .args(args)
        .output()
        .expect("spawn rankgroth")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = run(&all);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const C5: &str = "# five-cycle\n5 5\n0 1 1\n1 2 1\n2 3 1\n3 4 1\n4 0 1\n";
const TRIANGLE: &str = "3 3\n0 1 -1\n1 2 -1\n0 2 -1\n";
const SQUARE: &str = "4 4\n0 1 1\n1 2 -1\n2 3 1\n3 0 1\n";

#[test]
fn constants_json_matches_closed_form() {
    let mut args = vec!["constants", "--rmax", "1", "--theta", "2"];
    args.extend(SMALL);
    let doc = json(&args);
    assert_eq!(doc["command"], "constants");
    assert_eq!(doc["config"]["terms"], 128);
    let row = &doc["result"][0];
    let exact = std::f64::consts::PI / (2.0 * 1f64.asinh());
    assert!((row["k_bound"].as_f64().unwrap() - exact).abs() < 1e-9, "{row}");
}

#[test]
fn constants_csv_and_text() {
    let mut args = vec!["constants", "--rmax", "2", "--chi", "3", "--format", "csv"];
    args.extend(SMALL);
    let out = run(&args);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,theta,beta,K,terms,residual");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,3,0.3063489"), "{}", lines[1]);

    let mut args = vec!["constants", "--rmax", "1"];
    args.extend(SMALL);
    let out = run(&args);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.782213978"), "{text}");
    assert!(text.contains("3.264251302"), "{text}");
}

#[test]
fn theta_of_five_cycle() {
    let dir = TempDir::new().unwrap();
    let g = write(&dir, "c5.txt", C5);
    for method in ["interior-point", "projections"] {
        let doc = json(&["theta", "--graph", s(&g), "--method", method]);
        let lambda = doc["result"]["lambda"].as_f64().unwrap();
        assert!((lambda - 5f64.sqrt()).abs() < 1e-4, "{method}: {lambda}");
        assert_eq!(doc["result"]["Z"].as_array().unwrap().len(), 5);
    }
}

#[test]
fn solve_triangle() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "tri.txt", TRIANGLE);
    let doc = json(&["solve", "--instance", s(&inst)]);
    let res = &doc["result"];
    assert!((res["value"].as_f64().unwrap() - 1.5).abs() < 1e-8, "{res}");
    assert!(res["dual_gap"].as_f64().unwrap() < 1e-6);
    assert_eq!(res["vectors"].as_array().unwrap().len(), 3);
}

#[test]
fn round_and_ground_state() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "sq.txt", SQUARE);
    let mut args = vec!["round", "--instance", s(&inst), "--r", "2", "--samples", "300"];
    args.extend(SMALL);
    let doc = json(&args);
    let res = &doc["result"];
    assert_eq!(res["theta_mode"], "chi:2");
    let ratio = res["ratio"].as_f64().unwrap();
    assert!(ratio > 0.0 && ratio <= 1.0 + 1e-12, "{ratio}");

    let mut args = vec!["ground-state", "--lattice", "2,2", "--couplings", "ferro", "--samples", "100"];
    args.extend(SMALL);
    let doc = json(&args);
    let res = &doc["result"];
    // 2x2 periodic box: a 4-cycle, all aligned is optimal
    assert!((res["energy"].as_f64().unwrap() + 4.0).abs() < 1e-9, "{res}");
    assert!(res["lower_bound"].as_f64().unwrap() <= res["energy"].as_f64().unwrap() + 1e-9);
}

#[test]
fn xor_game_chsh() {
    let dir = TempDir::new().unwrap();
    let game = write(
        &dir,
        "chsh.json",
        r#"{"pi": [[0.25, 0.25], [0.25, 0.25]], "g": [[0, 0], [0, 1]]}"#,
    );
    let doc = json(&["xor-game", "--game", s(&game), "--d", "4", "--restarts", "10"]);
    let res = &doc["result"];
    assert_eq!(res["classical_lower"].as_f64().unwrap(), 0.75);
    assert_eq!(res["entangled_rank"], 2);
    let upper = 0.5 * (1.0 + 0.5f64.sqrt());
    assert!((res["entangled_upper"].as_f64().unwrap() - upper).abs() < 1e-6);
}

#[test]
fn beta_q_and_identity() {
    let mut args = vec!["beta-q", "--q", "3", "--r", "1"];
    args.extend(SMALL);
    let doc = json(&args);
    let k = doc["result"]["k_bound"].as_f64().unwrap();
    assert!(k > 1.5 && k <= 1.518, "{k}");

    let doc = json(&["identity", "--r", "2", "--t", "0.5", "--samples", "20000"]);
    assert!(doc["result"]["z_score"].as_f64().unwrap().abs() < 5.0);
}

#[test]
fn same_seed_same_output_on_both_backends() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "c5.txt", C5);
    let mut base = vec!["round", "--instance", s(&inst), "--samples", "200", "--seed", "9"];
    base.extend(SMALL);
    let a = json(&base);
    let b = json(&base);
    assert_eq!(a, b);
    let mut seq = base.clone();
    seq.extend(["--backend", "sequential"]);
    let c = json(&seq);
    assert_eq!(a["result"], c["result"]);
}

#[test]
fn output_file_is_written_whole() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("table.csv");
    let mut args = vec!["constants", "--rmax", "1", "--format", "csv", "--output", s(&target)];
    args.extend(SMALL);
    let out = run(&args);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&target).unwrap();
    assert!(text.starts_with("r,theta,beta,K"));
    let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1, "{names:?}");
}

#[test]
fn failed_runs_leave_no_output() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("out.json");
    let missing = dir.path().join("missing.txt");
    let out = run(&["solve", "--instance", s(&missing), "--output", s(&target)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);

    let nowhere = dir.path().join("no/such/dir/out.csv");
    let mut args = vec!["constants", "--rmax", "1", "--output", s(&nowhere)];
    args.extend(SMALL);
    assert_eq!(code(&run(&args)), 2);
    assert!(!nowhere.exists());
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.txt", "3 2\n0 1 1\n1 1 2\n");
    let c5 = write(&dir, "c5.txt", C5);
    for args in [
        vec!["frobnicate"],
        vec!["constants", "--format", "yaml"],
        vec!["constants", "--rmax", "0"],
        vec!["constants", "--theta", "1.5"],
        vec!["beta-q", "--q", "1", "--r", "1"],
        vec!["identity", "--r", "2", "--t", "1.5"],
        vec!["round", "--instance", s(&c5), "--samples", "0"],
        vec!["round", "--instance", s(&c5), "--r", "0"],
        vec!["round", "--instance", s(&c5), "--theta-mode", "chi:1"],
        vec!["solve", "--instance", s(&bad)],
        vec!["solve"],
        vec!["xor-game", "--game", s(&c5)],
        vec!["constants", "--log-base", "1"],
    ] {
        let out = run(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn parse_errors_name_the_line() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.txt", "3 2\n0 1 1\n1 x 2\n");
    let out = run(&["solve", "--instance", s(&bad)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt:3"), "{err}");
}

#[test]
fn wrong_colouring_is_rejected() {
    let dir = TempDir::new().unwrap();
    let c5 = write(&dir, "c5.txt", C5);
    let mut args = vec!["round", "--instance", s(&c5), "--theta-mode", "chi:2", "--samples", "10"];
    args.extend(SMALL);
    let out = run(&args);
    assert_ne!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    let out = run(&["ground-state", "--help"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("--theta-mode"));
}
