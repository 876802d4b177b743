use std::path::Path;
use std::process::{Command, Output};

fn heapscope(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heapscope")).args(args).current_dir(dir).output().unwrap()
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    heapscope(dir, args).status.code().unwrap()
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            assert_eq!(code(dir.path(), &["fixture", "facegrid:40", "-o", "f.json"]), 0);
            assert_eq!(code(dir.path(), &["abstract", "f.json", "-o", "g.json", "--dgml", "g.dgml", "--heat"]), 0);
            let report = heapscope(dir.path(), &["diagnose", "f.json"]).stdout;
            let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
            (read("g.json"), read("g.dgml"), report)
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn compare_reports_a_diff_when_incomparable() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    for (spec, out) in [("list:3", "a"), ("exprtree", "b")] {
        assert_eq!(code(p, &["fixture", spec, "-o", &format!("{out}.json")]), 0);
        assert_eq!(code(p, &["abstract", &format!("{out}.json"), "-o", &format!("{out}.ahg")]), 0);
    }
    let out = heapscope(p, &["compare", "a.ahg", "b.ahg"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v.to_string().is_empty());
    assert_eq!(code(p, &["merge", "a.ahg", "b.ahg", "-o", "m.ahg"]), 0);
    assert_eq!(code(p, &["compare", "a.ahg", "m.ahg"]), 0);
    assert_eq!(code(p, &["compare", "b.ahg", "m.ahg"]), 0);
}

#[test]
fn check_rejects_a_foreign_map() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    code(p, &["fixture", "list:4", "-o", "l.json"]);
    code(p, &["abstract", "l.json", "-o", "l.ahg", "--mu", "l.mu"]);
    code(p, &["fixture", "list:5", "-o", "k.json"]);
    assert_eq!(code(p, &["check", "l.json", "l.ahg", "l.mu"]), 0);
    let out = heapscope(p, &["check", "k.json", "l.ahg", "l.mu"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    assert_eq!(code(p, &[]), 2);
    assert_eq!(code(p, &["fixture", "teapot"]), 2);
    assert_eq!(code(p, &["reduce", "absent.ahg"]), 3);
    std::fs::write(p.join("junk"), "[1, 2").unwrap();
    assert_eq!(code(p, &["abstract", "junk"]), 3);
}
