use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybrid-ei"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn hybrid-ei")
}

fn stderr_record(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(text.trim_end().lines().count(), 1, "error record spans lines: {text}");
    serde_json::from_str(text.trim_end()).expect("error record is JSON")
}

#[test]
fn simulate_writes_csv_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["simulate", "--out", "o", "--set", "mode=hybrid", "--set", "horizon=10", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let csv = fs::read_to_string(dir.path().join("o/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x0,u0,event_flag"));
    let mut flags = [0usize; 3];
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 4);
        for c in &cells[..3] {
            let mantissa = c.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.replace('.', "").len(), 17, "{c}");
            c.parse::<f64>().unwrap();
        }
        flags[cells[3].parse::<usize>().unwrap()] += 1;
    }
    assert!(flags[1] > 0 && flags[2] > 0, "{flags:?}");
    let events = fs::read_to_string(dir.path().join("o/events.csv")).unwrap();
    assert_eq!(events.lines().count() - 1, flags[1] + flags[2]);
}

#[test]
fn identical_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), "mode = hybrid # worked example constants\nhorizon = 20\n").unwrap();
    for o in ["a", "b"] {
        let out = run(dir.path(), &["simulate", "--config", "run.cfg", "--out", o, "--quiet"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["trajectory.csv", "events.csv", "summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), "mode = hybrid\n\nfoo = 3\n").unwrap();
    let out = run(dir.path(), &["simulate", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = stderr_record(&out);
    assert_eq!(rec["category"], "parse");
    assert_eq!(rec["line"], 3);

    let out = run(dir.path(), &["simulate", "--set", "dt=-0.1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_record(&out)["key"], "dt");
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("blocker"), "").unwrap();
    let out = run(dir.path(), &["verify", "--out", "blocker/sub"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_record(&out)["category"], "io");
}

#[test]
fn zeno_guard_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["zeno", "--out", "z", "--set", "zeno_guard=500", "--set", "horizon=10"]);
    assert_eq!(out.status.code(), Some(4));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["verdict"], "zeno_suspected");
    assert!(summary["events"].as_u64().unwrap() >= 500);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("z/report.json")).unwrap()).unwrap();
    assert!(report["oracle"]["max_time_deviation"].as_f64().unwrap() < 1e-4);
}

#[test]
fn verify_reports_roots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["verify", "--out", "v"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v/report.json")).unwrap()).unwrap();
    let roots = report["roots"].as_array().unwrap();
    assert!((roots[0].as_f64().unwrap() - 1.6792).abs() < 0.01);
    assert_eq!(report["condition_iii"]["passes"], true);
}

#[test]
fn compare_and_sweep_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["compare", "--out", "c", "--set", "horizon=40", "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    let table = fs::read_to_string(dir.path().join("c/compare.csv")).unwrap();
    assert!(table.starts_with("mode,feedback_updates,impulses,total_updates,decay_rate,final_time\n"));
    assert!(table.contains("\nimpulsive_only,0,60,60,"));

    let out = run(
        dir.path(),
        &["sweep", "--out", "s", "--set", "mode=hybrid", "--set", "horizon=5", "--set", "sweep_key=h", "--set", "sweep_values=0.4,0.666", "--set", "svg=true", "--quiet"],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap().lines().count(), 3);
    assert!(dir.path().join("s/h_000/trajectory.svg").exists());
}
