use std::path::Path;
use std::process::{Command, Output};

use prosparse::cli_io::files::{DictKind, DictSpec, InstanceFile, Provenance, SolutionFile};
use prosparse::numerics::C64;
use prosparse::prosparse::prosparse_solve;
use prosparse::Tolerances;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prosparse"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn write_instance(dir: &Path, name: &str, y: &[C64]) {
    let file = InstanceFile::new(
        DictSpec::new(DictKind::FourierCanonical),
        y,
        Provenance::new("test", None),
    );
    std::fs::write(dir.join(name), serde_json::to_string(&file).unwrap()).unwrap();
}

#[test]
fn generated_instance_solves_to_its_planted_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "3",
            "--out",
            "inst.json",
            "generate",
            "random",
            "--n",
            "32",
            "--kp",
            "2",
            "--kq",
            "3",
        ],
    );
    ok(d, &["--out", "sol.json", "solve", "--input", "inst.json"]);
    let inst = InstanceFile::from_json(&read(d, "inst.json")).unwrap();
    let sol = SolutionFile::from_json(&read(d, "sol.json")).unwrap();
    let (pp, pq) = inst.planted.as_ref().unwrap().parts(32).unwrap();
    let hit = sol
        .solutions
        .iter()
        .find(|s| {
            let (p, q) = s.parts(32).unwrap();
            p.indices == pp.indices && q.indices == pq.indices
        })
        .expect("planted pair in the output");
    let (p, q) = hit.parts(32).unwrap();
    assert!(p.max_abs_diff(&pp).max(q.max_abs_diff(&pq)) <= 1e-7 * pp.max_abs().max(pq.max_abs()));
}

#[test]
fn written_solutions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "12",
            "--out",
            "inst.json",
            "generate",
            "random",
            "--n",
            "48",
            "--kp",
            "3",
            "--kq",
            "4",
        ],
    );
    ok(d, &["--out", "sol.json", "solve", "--input", "inst.json"]);
    let inst = InstanceFile::from_json(&read(d, "inst.json")).unwrap();
    let set = prosparse_solve(&inst.signal().unwrap(), &Tolerances::default()).unwrap();
    let sol = SolutionFile::from_json(&read(d, "sol.json")).unwrap();
    assert_eq!(sol.solutions.len(), set.len());
    for (entry, s) in sol.solutions.iter().zip(set.iter()) {
        let (p, q) = entry.parts(48).unwrap();
        assert_eq!(p, s.segment);
        assert_eq!(q, s.local);
    }
}

#[test]
fn counterexample_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--out",
            "cx.json",
            "generate",
            "counterexample-bp",
            "--d",
            "4",
        ],
    );
    ok(d, &["--out", "sol.json", "solve", "--input", "cx.json"]);
    let sol = SolutionFile::from_json(&read(d, "sol.json")).unwrap();
    assert!(sol.solutions.iter().any(|s| (s.kp, s.kq) == (8, 3)));

    ok(d, &["--out", "bp.json", "bp", "--input", "cx.json"]);
    let bp: serde_json::Value = serde_json::from_str(&read(d, "bp.json")).unwrap();
    assert_eq!(bp["converged"], true);
    assert_eq!(bp["matches_planted"], false);
    let objective = bp["objective"].as_f64().unwrap();
    assert!(objective < 16.0 * 2f64.sqrt() + 6.0);
}

#[test]
fn basis_pursuit_iteration_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--out", "cx.json", "generate", "counterexample-bp"]);
    let o = run(d, &["bp", "--input", "cx.json", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), "{ not json").unwrap();
    assert_eq!(
        run(d, &["solve", "--input", "bad.json"]).status.code(),
        Some(1)
    );
    assert_eq!(
        run(d, &["solve", "--input", "missing.json"]).status.code(),
        Some(1)
    );
    assert_eq!(run(d, &["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(
        run(d, &["generate", "counterexample-bp", "--d", "3"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(d, &["--tol-rank", "-1", "selftest"]).status.code(),
        Some(1)
    );
}

#[test]
fn zero_signal_has_no_nontrivial_solution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_instance(d, "zero.json", &[C64::new(0.0, 0.0); 16]);
    assert_eq!(
        run(d, &["solve", "--input", "zero.json"]).status.code(),
        Some(4)
    );
    ok(d, &["solve", "--input", "zero.json", "--allow-empty"]);
}

#[test]
fn stdin_and_csv_output() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut y = vec![C64::new(0.0, 0.0); 16];
    y[2] = C64::new(1.0, 0.0);
    y[9] = C64::new(0.0, -2.0);
    write_instance(d, "two.json", &y);
    let child = Command::new(env!("CARGO_BIN_EXE_prosparse"))
        .args(["--format", "csv", "solve", "--allow-empty"])
        .stdin(std::fs::File::open(d.join("two.json")).unwrap())
        .output()
        .unwrap();
    assert_eq!(child.status.code(), Some(0));
    let text = String::from_utf8(child.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("solution,kp,kq,basis,index,re,im"));
    assert!(text.contains(",local,9,0.0,-2.0") || text.contains(",local,9,0,-2"));
}

#[test]
fn bounds_table_for_n_144() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(
        dir.path(),
        &["--format", "csv", "bounds", "--n", "144", "--mu", "1/12"],
    );
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (kp, kq, p0) = (col("kp"), col("kq"), col("p0_unique"));
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        rows += 1;
        let total: usize = rec[kp].parse::<usize>().unwrap() + rec[kq].parse::<usize>().unwrap();
        assert_eq!(&rec[p0] == "true", total < 12, "{rec:?}");
    }
    assert!(rows > 0);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(dir.path(), &["selftest"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() >= 9);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}

#[test]
fn output_does_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "--seed",
            "5",
            "--out",
            "inst.json",
            "generate",
            "random",
            "--n",
            "64",
            "--kp",
            "4",
            "--kq",
            "3",
        ],
    );
    let a = ok(d, &["--threads", "1", "solve", "--input", "inst.json"]).stdout;
    let b = ok(d, &["--threads", "4", "solve", "--input", "inst.json"]).stdout;
    assert_eq!(a, b);
}
