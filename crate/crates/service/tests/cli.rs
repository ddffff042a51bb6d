mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;

fn ordlog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ordlog"))
        .args(args)
        .env_remove("ORDLOG_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn inspect_compensation() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "compensation.csv", COMPENSATION);
    let o = ordlog(&["inspect", s(&log)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    for line in [
        "events:          12",
        "cases:           2",
        "explicit pairs:  0",
        "consistent:      yes (global)",
        "time-constrained:  yes",
        "timestamp precision:",
    ] {
        assert!(text.contains(line), "missing {line:?} in\n{text}");
    }
    assert!(!text.contains("violations"));

    let o = ordlog(&["inspect", s(&log), "--json"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["summary"]["events"], 12);
    assert_eq!(doc["summary"]["activities"], 8);
    assert_eq!(doc["consistency"]["consistent"], true);
    let total: u64 = doc["summary"]["precision"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["events"].as_u64().unwrap())
        .sum();
    assert_eq!(total, 12);
}

#[test]
fn inspect_empty_log() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [("empty.csv", ""), ("header.csv", "case,activity,timestamp\n")] {
        let log = write(dir.path(), name, text);
        let o = ordlog(&["inspect", s(&log)]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let out = stdout(&o);
        assert!(out.contains("events:          0"), "{out}");
        assert!(out.contains("cases:           0"));
        assert!(out.contains("consistent:      yes"));
    }
}

#[test]
fn inspect_nurse_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "nurse.csv", NURSE);
    let o = ordlog(&["inspect", s(&log), "--order", "row-per-case"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("consistent:      no"), "{out}");
    assert!(out.contains("violations (3):"));
    assert!(out.contains("e1 (2021-05-19T17:55:00.000Z) is ordered before e2 (2021-05-19T17:15:00.000Z)"));

    // without an explicit order there is nothing to contradict
    assert_eq!(ordlog(&["inspect", s(&log)]).status.code(), Some(0));
}

#[test]
fn variants_compensation_day() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "compensation.csv", COMPENSATION);
    let out = dir.path().join("variants.json");
    let o = ordlog(&["variants", s(&log), "--granularity", "day", "--json", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("2 variant(s) over 2 case(s) at day granularity\n"));
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&out).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["variant_count"], 2);

    let tb = write(dir.path(), "tb.txt", "# reg first\nregister request -> check ticket\n");
    let with_tb = dir.path().join("tb.json");
    let o = ordlog(&["variants", s(&log), "-g", "day", "--tiebreaker", s(&tb), "--json", s(&with_tb)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let tied: serde_json::Value = serde_json::from_slice(&fs::read(&with_tb).unwrap()).unwrap();
    let keys = |d: &serde_json::Value| -> Vec<String> {
        d["variants"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v["canonical_key"].as_str().unwrap().to_string())
            .collect()
    };
    assert_ne!(keys(&doc), keys(&tied));
}

#[test]
fn variant_errors_have_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let nurse = write(dir.path(), "nurse.csv", NURSE);
    let o = ordlog(&["variants", s(&nurse), "--order", "row-per-case"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("is ordered before"));

    let steps = write(dir.path(), "steps.csv", TWO_STEPS);
    let tb = write(dir.path(), "tb.txt", "b -> a\n");
    let args = ["variants", s(&steps), "--order", "row-per-case", "--tiebreaker", s(&tb), "-g"];
    let o = ordlog(&[&args[..], &["day"]].concat());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("contradicts the explicit order"), "{}", stderr(&o));
    assert_eq!(ordlog(&[&args[..], &["hour"]].concat()).status.code(), Some(0));
}

#[test]
fn bad_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "case,activity,timestamp\nc,a,yesterday\n");
    let o = ordlog(&["inspect", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("yesterday"));
    assert_eq!(ordlog(&["inspect", s(&dir.path().join("missing.csv"))]).status.code(), Some(1));
    let log = write(dir.path(), "compensation.csv", COMPENSATION);
    assert_eq!(ordlog(&["variants", s(&log), "-g", "fortnight"]).status.code(), Some(1));
    assert_eq!(ordlog(&["inspect", s(&log), "--order", "edges"]).status.code(), Some(1));
    assert_eq!(ordlog(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ordlog(&["--help"]).status.code(), Some(0));
}

#[test]
fn explicit_columns_and_edges() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(
        dir.path(),
        "odd.csv",
        "ref;who;what;at\n1;c;a;2021-05-19\n2;c;b;2021-05-19\n3;c;c;2021-05-19\n",
    );
    let edges = write(dir.path(), "edges.txt", "1,2\n2,3\n");
    let o = ordlog(&[
        "inspect",
        s(&log),
        "--delimiter",
        ";",
        "--case-column",
        "who",
        "--activity-column",
        "what",
        "--timestamp-column",
        "at",
        "--event-id-column",
        "ref",
        "--edges",
        s(&edges),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("explicit pairs:  2"));

    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"delimiter":";","columns":{"case":"who","activity":"what","timestamp":"at","event_id":"ref"}}"#,
    );
    let o = ordlog(&["inspect", s(&log), "--config", s(&cfg), "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["summary"]["events"], 3);
}

#[test]
fn sequentialize_files() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "compensation.csv", COMPENSATION);
    let xes = dir.path().join("out.xes");
    let o = ordlog(&["sequentialize", s(&log), "-k", "3", "--seed", "7", "-g", "day", "-o", s(&xes)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 6 trace(s), 36 event(s)"));
    let first = fs::read_to_string(&xes).unwrap();
    assert_eq!(first.matches("<trace>").count(), 6);
    assert!(first.contains(r#"key="ordlog:tie_offset_ms" value="1""#));

    ordlog(&["sequentialize", s(&log), "-k", "3", "--seed", "7", "-g", "day", "-o", s(&xes)]);
    assert_eq!(fs::read_to_string(&xes).unwrap(), first);

    let csv = dir.path().join("out.csv");
    let o = ordlog(&["sequentialize", s(&log), "-k", "2", "-o", s(&csv)]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("case,activity,position,timestamp\n"));
    assert_eq!(text.lines().count(), 1 + 24);

    assert_eq!(ordlog(&["sequentialize", s(&log), "-k", "0", "-o", s(&csv)]).status.code(), Some(1));
}

#[test]
fn sequentialize_p2p_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let log = write(dir.path(), "p2p.csv", &p2p_csv(2352, 302));
    let out = dir.path().join("p2p-k10.xes");
    let o = ordlog(&["sequentialize", s(&log), "-k", "10", "--seed", "1", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("wrote 26540 trace(s), 162260 event(s)"), "{}", stdout(&o));
}
