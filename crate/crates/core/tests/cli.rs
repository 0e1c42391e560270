mod common;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::{json, Value};

use common::*;
use ledgerfit::catalog;

fn ledgerfit(store: &Path, args: &[&str], stdin: Option<&str>) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ledgerfit"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("LEDGERFIT_STORE")
        .env_remove("LEDGERFIT_CATALOG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut pipe = child.stdin.take().unwrap();
    pipe.write_all(stdin.unwrap_or("").as_bytes()).unwrap();
    drop(pipe);
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write_json(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_str().unwrap().to_string()
}

fn golden_file() -> String {
    fixture("clinical-trial.answers.json").to_str().unwrap().to_string()
}

fn new_session(store: &Path) -> String {
    let out = ledgerfit(store, &["apply", "--new", "clinical trial", &golden_file()], None);
    assert!(out.status.success(), "{}", text(&out.stderr));
    text(&out.stdout).trim().to_string()
}

#[test]
fn validate_default_catalog() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledgerfit(dir.path(), &["validate"], None);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("86 questions (31/23/32), 0 error(s)"), "{stdout}");
    assert!(stdout.trim_end().ends_with(GOLDEN_HASH));
}

#[test]
fn validate_cyclic_catalog_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = serde_json::from_str(&catalog::default_catalog_document()).unwrap();
    for q in doc["stages"][0]["substages"][0]["questions"].as_array_mut().unwrap() {
        if q["id"] == "ev.bp.legal_compliance" {
            q["requires"] = json!([{"question_id": "ev.bp.compliance_on_ledger", "option_id": "yes"}]);
        }
    }
    let path = write_json(dir.path(), "cyclic.json", &doc);
    let out = ledgerfit(dir.path(), &["validate", &path], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("dependency_cycle"), "{}", text(&out.stderr));

    let out = ledgerfit(dir.path(), &["validate", "--jsonl", &path], None);
    assert_eq!(out.status.code(), Some(1));
    let lines: Vec<Value> = text(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(lines.iter().any(|d| d["code"] == "dependency_cycle" && d["severity"] == "error"));
}

#[test]
fn validate_missing_file_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledgerfit(dir.path(), &["validate", "/definitely/not/here.json"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn apply_golden_and_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledgerfit(dir.path(), &["apply", "--new", "clinical trial", &golden_file()], None);
    assert!(out.status.success());
    let stderr = text(&out.stderr);
    assert!(stderr.contains("#1 ev.bp.business_case = yes -> version 1"), "{stderr}");
    assert!(stderr.trim_end().ends_with(": suitable"));
    let id = text(&out.stdout).trim().to_string();

    let list = ledgerfit(dir.path(), &["list", "--json"], None);
    let v: Value = serde_json::from_slice(&list.stdout).unwrap();
    assert_eq!(v[0]["id"], id.as_str());
    assert_eq!(v[0]["verdict"], "suitable");
    assert_eq!(v[0]["version"], 86);
    let plain = text(&ledgerfit(dir.path(), &["list"], None).stdout);
    assert!(plain.contains(&id) && plain.contains("clinical trial"));
}

#[test]
fn apply_with_stale_hash_applies_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(
        dir.path(),
        "stale.json",
        &json!({"catalog_hash": "0".repeat(64), "answers": [{"question_id": "ev.bp.business_case", "option_id": "yes"}]}),
    );
    let out = ledgerfit(dir.path(), &["apply", "--new", "s", &path], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("stale answers file"));
    let list: Value = serde_json::from_slice(&ledgerfit(dir.path(), &["list", "--json"], None).stdout).unwrap();
    assert_eq!(list, json!([]));
}

#[test]
fn apply_reports_failing_index_and_saves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let id = new_session(dir.path());
    let path = write_json(
        dir.path(),
        "bad.json",
        &json!({"catalog_hash": GOLDEN_HASH, "answers": [
            {"question_id": "ev.it.big_data", "option_id": "yes"},
            {"question_id": "ev.it.big_data", "option_id": "perhaps"}
        ]}),
    );
    let out = ledgerfit(dir.path(), &["apply", "--session", &id, &path], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("answer #2 (ev.it.big_data)"), "{}", text(&out.stderr));
    assert!(text(&out.stderr).contains("nothing saved"));
    let list: Value = serde_json::from_slice(&ledgerfit(dir.path(), &["list", "--json"], None).stdout).unwrap();
    assert_eq!(list[0]["version"], 86);
}

#[test]
fn apply_empty_answers_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_json(dir.path(), "empty.json", &json!({"catalog_hash": GOLDEN_HASH, "answers": []}));
    let out = ledgerfit(dir.path(), &["apply", "--new", "empty", &path], None);
    assert!(out.status.success());
    assert!(text(&out.stderr).contains("at version 0: incomplete"));
}

#[test]
fn apply_requires_exactly_one_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledgerfit(dir.path(), &["apply", &golden_file()], None);
    assert_eq!(out.status.code(), Some(2));
    let out = ledgerfit(dir.path(), &["apply", "--new", "a", "--session", "b", &golden_file()], None);
    assert_eq!(out.status.code(), Some(2));
    let out = ledgerfit(dir.path(), &["apply", "--session", "missing", &golden_file()], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_scripted_answers() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledgerfit(dir.path(), &["run", "--new", "scripted"], Some("1\n9\n2\ns\nq\n"));
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("ev.bp.business_case"));
    assert!(stdout.contains("invalid choice"));
    assert!(stdout.contains("version 2"), "{stdout}");
    let list: Value = serde_json::from_slice(&ledgerfit(dir.path(), &["list", "--json"], None).stdout).unwrap();
    assert_eq!(list[0]["version"], 2);
    assert_eq!(list[0]["name"], "scripted");
}

#[test]
fn run_immediate_quit_and_eof_save() {
    let dir = tempfile::tempdir().unwrap();
    let out = ledgerfit(dir.path(), &["run", "--new", "quit"], Some("q\n"));
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("at version 0"));
    let out = ledgerfit(dir.path(), &["run", "--new", "eof"], Some("1\n"));
    assert!(out.status.success());
    let list: Value = serde_json::from_slice(&ledgerfit(dir.path(), &["list", "--json"], None).stdout).unwrap();
    let versions: Vec<u64> = list.as_array().unwrap().iter().map(|l| l["version"].as_u64().unwrap()).collect();
    assert!(versions.contains(&0) && versions.contains(&1), "{versions:?}");
}

#[test]
fn run_resumes_and_retracts() {
    let dir = tempfile::tempdir().unwrap();
    let id = new_session(dir.path());
    let out = ledgerfit(dir.path(), &["run", "--session", &id], Some("r ev.it.big_data\nw consensus\nq\n"));
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("ev.it.big_data"));
    assert!(stdout.contains("at version 87"), "{stdout}");
}

#[test]
fn report_views_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let id = new_session(dir.path());
    let out = ledgerfit(dir.path(), &["report", &id], None);
    assert!(out.status.success());
    let md = text(&out.stdout);
    for h in ["## Functional view", "## Process view", "## Output view"] {
        assert!(md.contains(h), "{h}");
    }

    let only = text(&ledgerfit(dir.path(), &["report", &id, "--view", "output", "--view", "process"], None).stdout);
    assert!(only.contains("## Output view") && only.contains("## Process view") && !only.contains("## Functional view"));

    let target = dir.path().join("r.json");
    let out = ledgerfit(dir.path(), &["report", &id, "--format", "json", "--out", target.to_str().unwrap()], None);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_slice(&fs::read(&target).unwrap()).unwrap();
    assert_eq!(v["verdict"]["status"], "suitable");

    assert_eq!(ledgerfit(dir.path(), &["report", &id, "--view", "structural"], None).status.code(), Some(2));
    assert_eq!(ledgerfit(dir.path(), &["report", &id, "--format", "pdf"], None).status.code(), Some(2));
    assert_eq!(ledgerfit(dir.path(), &["report", "missing"], None).status.code(), Some(1));
}

#[test]
fn clone_then_report_matches() {
    let dir = tempfile::tempdir().unwrap();
    let id = new_session(dir.path());
    let out = ledgerfit(dir.path(), &["clone", &id, "clinical trial"], None);
    assert!(out.status.success());
    let cid = text(&out.stdout).trim().to_string();
    assert_ne!(cid, id);
    let a = ledgerfit(dir.path(), &["report", &id, "--format", "json"], None).stdout;
    let b = ledgerfit(dir.path(), &["report", &cid, "--format", "json"], None).stdout;
    assert_eq!(a, b);
    let list: Value = serde_json::from_slice(&ledgerfit(dir.path(), &["list", "--json"], None).stdout).unwrap();
    assert_eq!(list.as_array().unwrap().len(), 2);
}

#[test]
fn store_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ledgerfit"))
        .args(["apply", "--new", "env", &golden_file()])
        .env("LEDGERFIT_STORE", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("sessions").read_dir().unwrap().count() == 1);
}
