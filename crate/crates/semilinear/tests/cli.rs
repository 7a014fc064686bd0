use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../problems").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semilinear")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn decompose_prints_the_split() {
    let out = run(&["decompose", "--input", path(&problem("ch2_radial.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["s"], 2);
    assert_eq!(v["kernel_dim"], 1);
    let csv = run(&["decompose", "--input", path(&problem("ch2_radial.json")), "--emit", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert!(text.starts_with("index,eigenvalue,block,kernel\n"));
    assert_eq!(text.lines().count(), 9);
}

#[test]
fn solve_writes_report_and_leaves_input_alone() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.json");
    std::fs::copy(problem("schrodinger_nemytskii.json"), &input).unwrap();
    let before = std::fs::read(&input).unwrap();
    let out_path = dir.path().join("r.json");
    let out = run(&["solve", "--input", path(&input), "--tol", "1e-9", "--out", path(&out_path)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    assert_eq!(std::fs::read(&input).unwrap(), before);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&out_path).unwrap()).unwrap();
    assert_eq!(v["status"], "converged");
    assert!(v["residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["strategy"], "monotone_inversion");
}

#[test]
fn solve_emits_trace_csv() {
    let out = run(&["solve", "--input", path(&problem("ch2_radial.json")), "--emit", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("eps,norm,residual,unperturbed_residual"));
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first[0], 0.5);
}

#[test]
fn overrides_are_validated() {
    let p = problem("ch2_radial.json");
    assert_eq!(run(&["solve", "--input", path(&p), "--eps-start", "1.5"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--input", path(&p), "--tol", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--input", path(&p), "--strategy", "fast"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--input", path(&p), "--strategy", "monotone"]).status.code(), Some(2));
    assert_eq!(run(&["decompose", "--input", path(&p), "--delta", "2.0"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--input", "/nonexistent/p.json"]).status.code(), Some(2));
}

#[test]
fn verify_reports_failing_kernel_condition() {
    let out = run(&["verify", "--input", path(&problem("ch2_radial_weak.json")), "--theorem", "ch2"]);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["condition_iii"]["passed"], false);
    assert!(v["condition_iii"]["failing_direction"].is_array());
    let ok = run(&["verify", "--input", path(&problem("ch2_radial.json")), "--theorem", "ch2"]);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn degree_certificate() {
    let out = run(&["degree", "--input", path(&problem("ch2_radial.json"))]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["stabilized_degree"], 1);
    assert!(v["radius"].as_f64().unwrap() > 4.0);
    let bad = run(&["degree", "--input", path(&problem("ch2_radial.json")), "--eps", "1.0"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_merges_in_input_order() {
    let a = problem("ch2_radial.json");
    let b = problem("linear_inconsistent.json");
    let out = run(&["sweep", "--input", path(&a), "--input", path(&b), "--seeds", "3,1", "--jobs", "3", "--emit", "csv"]);
    assert_eq!(out.status.code(), Some(4));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    let order: Vec<(&str, &str)> = rows.iter().map(|r| (r[1], r[2])).collect();
    assert_eq!(order, [("3", "converged"), ("1", "converged"), ("3", "unbounded"), ("1", "unbounded")]);
    assert!(rows[0][0].ends_with("ch2_radial.json"));
    let serial = run(&["sweep", "--input", path(&a), "--input", path(&b), "--seeds", "3,1", "--jobs", "1", "--emit", "csv"]);
    assert_eq!(serial.stdout, text.as_bytes());
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&[]).status.code(), Some(2));
}
