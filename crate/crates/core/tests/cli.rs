use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rqsim::casebook::{mm1, CapacityCase, EscalationCase};

fn rqsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqsim"))
        .args(args)
        .env_remove("RQSIM_OUT")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small(dir: &Path) -> PathBuf {
    mm1(0.05, 0.1, 500, 8).write_to(&dir.join("mm1")).unwrap()
}

#[test]
fn run_writes_artifacts_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = rqsim(&["run", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{o:?}");
        assert!(stdout(&o).contains("events/s"));
    }
    for f in [
        "events.ndjson",
        "trace.ndjson",
        "summary.json",
        "series/load_q.csv",
        "series/load_total.csv",
    ] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    assert_eq!(
        fs::read(a.join("events.ndjson")).unwrap(),
        fs::read(b.join("events.ndjson")).unwrap()
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["jobs_closed"], 500);
}

#[test]
fn seed_override_changes_synthetic_workload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(rqsim(&["run", "--config", s(&cfg), "--out", s(&a)])
        .status
        .success());
    assert!(
        rqsim(&["run", "--config", s(&cfg), "--out", s(&b), "--seed", "9"])
            .status
            .success()
    );
    assert_ne!(
        fs::read(a.join("events.ndjson")).unwrap(),
        fs::read(b.join("events.ndjson")).unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    let out = dir.path().join("out");

    let o = rqsim(&["validate", "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "OK");

    let missing = dir.path().join("nope.toml");
    assert_eq!(
        rqsim(&["run", "--config", s(&missing), "--out", s(&out)])
            .status
            .code(),
        Some(1)
    );

    // synthetic jobs carry no recorded trajectory, so replay is refused up front
    let o = rqsim(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&out),
        "--mode",
        "replay",
    ]);
    assert_eq!(o.status.code(), Some(1), "{o:?}");

    let broken = dir.path().join("broken.toml");
    fs::write(
        &broken,
        "horizon_ms = 1000\n[[queues]]\nid = \"a\"\nmax_size = 1\noverflow_queue = \"b\"\n",
    )
    .unwrap();
    let o = rqsim(&["validate", "--config", s(&broken)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("overflow_queue"), "{}", stdout(&o));
    assert_eq!(
        rqsim(&["run", "--config", s(&broken), "--out", s(&out)])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn sweep_table_is_independent_of_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let case = EscalationCase {
        days: 1,
        reviewers: 5,
        ..Default::default()
    };
    case.scenario(0.0, 1)
        .write_to(&dir.path().join("base"))
        .unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(
        &spec,
        "base = \"base/scenario.toml\"\nparameter = \"queues.main.formula.alpha\"\nvalues = [2.0, 0.0, 0.5]\nseeds = [1, 2]\n",
    )
    .unwrap();
    let mut tables = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("out{jobs}"));
        let o = rqsim(&[
            "sweep",
            "--config",
            s(&spec),
            "--out",
            s(&out),
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{o:?}");
        tables.push(fs::read_to_string(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    let rows: Vec<&str> = tables[0].lines().collect();
    assert_eq!(rows.len(), 7);
    // sorted by value, then seed
    let keys: Vec<String> = rows[1..]
        .iter()
        .map(|r| r.split(',').take(2).collect::<Vec<_>>().join(","))
        .collect();
    assert_eq!(keys, ["0.0,1", "0.0,2", "0.5,1", "0.5,2", "2.0,1", "2.0,2"]);
}

#[test]
fn compare_requires_a_shared_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut case = CapacityCase {
        days: 1,
        ..Default::default()
    };
    let a = case
        .scenario(false)
        .write_to(&dir.path().join("a"))
        .unwrap();
    let b = case.scenario(true).write_to(&dir.path().join("b")).unwrap();
    let out = dir.path().join("cmp");
    let o = rqsim(&[
        "compare",
        "--config",
        s(&a),
        "--config",
        s(&b),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{o:?}");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("compare.json")).unwrap()).unwrap();
    assert!(report["delta_avg_tat_s"].as_f64().unwrap() > 0.0);
    assert!(out.join("compare.csv").is_file());

    case.seed += 1;
    let c = case.scenario(true).write_to(&dir.path().join("c")).unwrap();
    let o = rqsim(&[
        "compare",
        "--config",
        s(&a),
        "--config",
        s(&c),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("same job trace"));
}
