use pdkit::partition::read_csv;
use pdkit::suites::SuiteReport;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn pdkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdkit"))
        .args(args)
        .env_remove("PD_DEFAULT_SEED")
        .output()
        .expect("binary runs")
}

fn pdkit_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_pdkit"))
        .args(args)
        .env_remove("PD_DEFAULT_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn row_sums_are_one(csv: &str) {
    let rows = read_csv(csv).unwrap();
    assert!(!rows.is_empty());
    for r in rows {
        assert!((r.stored_mass() + r.residual() - 1.0).abs() < 1e-12);
    }
}

const STICK: &[&str] = &["sample", "--alpha", "0.5", "--theta", "0.5", "--method", "stick", "--samples", "3", "--seed", "7"];

#[test]
fn sample_is_deterministic() {
    let a = pdkit(STICK);
    let b = pdkit(STICK);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let other = pdkit(&["sample", "--alpha", "0.5", "--theta", "0.5", "--samples", "3", "--seed", "8"]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn seed_defaults_from_environment() {
    let base = ["sample", "--alpha", "0.5", "--theta", "0.5", "--samples", "3"];
    let via_env = Command::new(env!("CARGO_BIN_EXE_pdkit")).args(base).env("PD_DEFAULT_SEED", "7").output().unwrap();
    let explicit = pdkit(&[&base[..], &["--seed", "7"]].concat());
    assert_eq!(via_env.stdout, explicit.stdout);
}

#[test]
fn output_is_independent_of_job_count() {
    let args = ["sample", "--alpha", "0.3", "--theta", "1", "--samples", "50", "--seed", "3"];
    let one = pdkit(&[&args[..], &["--jobs", "1"]].concat());
    let three = pdkit(&[&args[..], &["--jobs", "3"]].concat());
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn csv_header_lists_weights_then_residual() {
    let out = stdout(&pdkit(STICK));
    let header: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    assert_eq!(*header.last().unwrap(), "residual");
    for (i, h) in header[..header.len() - 1].iter().enumerate() {
        assert_eq!(*h, format!("w{}", i + 1));
    }
    assert_eq!(out.lines().count(), 4);
    row_sums_are_one(&out);
}

#[test]
fn json_format_parses() {
    let o = pdkit(&[STICK, &["--format", "json"]].concat());
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn invalid_parameters_exit_two() {
    let o = pdkit(&["sample", "--alpha", "0.5", "--theta", "-0.1", "--method", "subordinator"]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert_eq!(code(&pdkit(&["sample", "--alpha", "1.5", "--theta", "1"])), 2);
    assert_eq!(code(&pdkit(&["sample", "--alpha", "0.5", "--theta", "-0.6"])), 2);
    assert_eq!(code(&pdkit(&["sample", "--alpha", "0.5"])), 2);
    assert_eq!(code(&pdkit(&["no-such-command"])), 2);
}

#[test]
fn crp_sample_rows_label_blocks() {
    let o = pdkit(&["sample", "--alpha", "0.5", "--theta", "1", "--method", "crp", "--n", "6", "--samples", "5"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "l1,l2,l3,l4,l5,l6");
    for row in lines {
        let ids: Vec<usize> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(ids.len(), 6);
        assert_eq!(ids[0], 0);
    }
}

#[test]
fn histogram_sidecar_counts_every_replica() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = pdkit(&[STICK, &["--emit-hist", "4", "--out", out.to_str().unwrap()]].concat());
    assert_eq!(code(&o), 0);
    let hist = std::fs::read_to_string(dir.path().join("x.csv.hist.csv")).unwrap();
    let counts: u64 = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(counts, 3);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn frag_and_coag_conserve_row_mass_with_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "in.csv", &stdout(&pdkit(&["sample", "--alpha", "0.5", "--theta", "1.5", "--samples", "6"])));
    let fout = dir.path().join("f.csv");
    let o = pdkit(&["frag", "--input", &input, "--alpha", "0.5", "--emit-witness", "--out", fout.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    row_sums_are_one(&std::fs::read_to_string(&fout).unwrap());
    let witnesses = std::fs::read_to_string(dir.path().join("f.csv.witness.jsonl")).unwrap();
    assert_eq!(witnesses.lines().count(), 6);
    for (i, l) in witnesses.lines().enumerate() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert_eq!(v["row"], i + 1);
    }

    let cout = dir.path().join("c.csv");
    let o = pdkit(&["coag", "--input", fout.to_str().unwrap(), "--alpha", "0.5", "--theta", "0.5", "--emit-witness", "--out", cout.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    row_sums_are_one(&std::fs::read_to_string(&cout).unwrap());
    assert_eq!(std::fs::read_to_string(dir.path().join("c.csv.witness.jsonl")).unwrap().lines().count(), 6);
}

#[test]
fn frag_output_pipes_into_coag() {
    let sample = pdkit(&["sample", "--alpha", "0.3", "--theta", "1", "--samples", "4"]);
    let fragged = pdkit_stdin(&["frag", "--alpha", "0.3"], &sample.stdout);
    assert_eq!(code(&fragged), 0);
    let merged = pdkit_stdin(&["coag", "--input", "-", "--alpha", "0.3", "--theta", "0"], &fragged.stdout);
    assert_eq!(code(&merged), 0);
    row_sums_are_one(&stdout(&merged));
}

#[test]
fn malformed_row_is_identified() {
    let bad = "w1,w2,residual\n0.5,0.5,0\n0.7,abc,0\n";
    let o = pdkit_stdin(&["frag", "--alpha", "0.5"], bad.as_bytes());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3"), "{err}");
    let o = pdkit_stdin(&["coag", "--alpha", "0.5", "--theta", "0.5"], b"w1,residual\n0.2,0.1\n");
    assert_eq!(code(&o), 2);
}

const TREE: &[&str] = &["tree", "--alpha", "0.5", "--theta", "0.5", "--n", "40", "--seed", "11"];

#[test]
fn tree_dot_has_n_edges() {
    let out = stdout(&pdkit(&[TREE, &["--emit", "dot"]].concat()));
    assert_eq!(out.matches("->").count(), 40);
}

#[test]
fn tree_parents_precede_children() {
    let o = pdkit(&[TREE, &["--emit", "parents"]].concat());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let mut rows = 0;
    for l in out.lines().skip(1) {
        let mut f = l.split(',').map(|x| x.parse::<usize>().unwrap());
        let (v, p) = (f.next().unwrap(), f.next().unwrap());
        assert!(p < v);
        rows += 1;
    }
    assert_eq!(rows, 40);
}

#[test]
fn tree_partitions_cover_stripped_labels() {
    let depth = 3;
    let o = pdkit(&[TREE, &["--emit", "partitions", "--strip-depth", "3"]].concat());
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    for d in 0..=depth {
        let mut labels: Vec<usize> = out
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse::<usize>().unwrap()).collect::<Vec<_>>())
            .filter(|r| r[0] == d)
            .map(|r| r[1])
            .collect();
        labels.sort_unstable();
        assert_eq!(labels, (d + 1..=40).collect::<Vec<_>>());
    }
}

#[test]
fn tree_strip_depth_must_be_below_n() {
    let o = pdkit(&["tree", "--alpha", "0.5", "--theta", "0.5", "--n", "4", "--emit", "partitions", "--strip-depth", "4"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_rejects_unknown_suite() {
    assert_eq!(code(&pdkit(&["verify", "--suite", "nope"])), 2);
    assert_eq!(code(&pdkit(&["verify", "--suite", "stage", "--alpha", "0.5"])), 2);
}

#[test]
fn verify_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = pdkit(&["verify", "--suite", "sb-marginal", "--samples", "2000", "--seed", "5", "--report", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(p).unwrap()
    };
    let a = run("a.json");
    assert_eq!(a, run("b.json"));
    let report: SuiteReport = serde_json::from_str(&a).unwrap();
    assert_eq!(report.suite, "sb-marginal");
    assert!(!report.tests.is_empty());
    assert_eq!(report.pass, report.tests.iter().all(|t| t.pass));
}

#[test]
fn verify_reports_statistical_failure_with_exit_one() {
    let o = pdkit(&["verify", "--suite", "stage", "--samples", "500", "--alpha-level", "0.9999"]);
    assert_eq!(code(&o), 1);
    let report: SuiteReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(!report.pass);
}

#[test]
fn verify_all_passes_at_acceptance_seed() {
    let o = pdkit(&["verify", "--suite", "all", "--alpha", "0.5", "--theta", "0.5", "--seed", "42"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: SuiteReport = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report.pass);
}
