use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use neclust_ffi::*;

const SAMPLE_KB: &str = include_str!("../../core/fixtures/sample_kb.json");
const SAMPLE_CORPUS: &str = include_str!("../../core/fixtures/sample_corpus.jsonl");

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

/// Takes ownership of a library string.
unsafe fn take(p: *mut c_char) -> String {
    assert!(!p.is_null());
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    neclust_string_free(p);
    s
}

unsafe fn last_error() -> Option<String> {
    let p = neclust_last_error_message();
    if p.is_null() {
        None
    } else {
        Some(take(p))
    }
}

unsafe fn load(kb_json: &str, corpus_jsonl: &str) -> (*mut NeclustKb, *mut NeclustCorpus) {
    let mut kb = ptr::null_mut();
    assert_eq!(
        neclust_kb_from_json(c(kb_json).as_ptr(), &mut kb),
        NeclustStatus::Ok
    );
    let mut corpus = ptr::null_mut();
    assert_eq!(
        neclust_corpus_from_jsonl(kb, c(corpus_jsonl).as_ptr(), &mut corpus),
        NeclustStatus::Ok,
        "{:?}",
        last_error()
    );
    (kb, corpus)
}

#[test]
fn load_and_vectorize_fixture() {
    unsafe {
        let (kb, corpus) = load(SAMPLE_KB, SAMPLE_CORPUS);
        assert_eq!(neclust_corpus_len(corpus), 4);
        let mut out = ptr::null_mut();
        assert_eq!(
            neclust_vectorize(corpus, c("identifier").as_ptr(), &mut out),
            NeclustStatus::Ok
        );
        let text = take(out);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        let s1 = first["weights"]["#S1"].as_f64().unwrap();
        assert!((s1 - 2f64.ln()).abs() < 1e-15);
        neclust_corpus_free(corpus);
        neclust_kb_free(kb);
    }
}

#[test]
fn corpus_outlives_its_kb_handle() {
    unsafe {
        let (kb, corpus) = load(SAMPLE_KB, SAMPLE_CORPUS);
        neclust_kb_free(kb);
        let mut out = ptr::null_mut();
        assert_eq!(
            neclust_vectorize(corpus, c("type").as_ptr(), &mut out),
            NeclustStatus::Ok
        );
        assert_eq!(take(out).lines().count(), 4);
        neclust_corpus_free(corpus);
    }
}

#[test]
fn synthetic_cluster_and_tune() {
    unsafe {
        let mut kb_json = ptr::null_mut();
        let mut corpus_jsonl = ptr::null_mut();
        let params = c(r#"{"seed": 7}"#);
        assert_eq!(
            neclust_generate_synthetic(params.as_ptr(), &mut kb_json, &mut corpus_jsonl),
            NeclustStatus::Ok
        );
        let (kb, corpus) = load(&take(kb_json), &take(corpus_jsonl));
        assert_eq!(neclust_corpus_len(corpus), 60);

        let mut report = ptr::null_mut();
        let opts =
            c(r#"{"phases": [{"space": "type", "k": 3}, {"space": "identifier", "k": "auto"}], "seed": 1}"#);
        assert_eq!(
            neclust_cluster(corpus, opts.as_ptr(), &mut report),
            NeclustStatus::Ok,
            "{:?}",
            last_error()
        );
        let report: serde_json::Value = serde_json::from_str(&take(report)).unwrap();
        assert_eq!(report["tree"]["children"].as_array().unwrap().len(), 3);
        assert_eq!(report["config"]["seed"], 1);
        assert_eq!(report["phases"].as_array().unwrap().len(), 2);

        let mut tuned = ptr::null_mut();
        let opts = c(r#"{"space": "type", "k_range": [2, 3, 4, 5]}"#);
        assert_eq!(neclust_tune(corpus, opts.as_ptr(), &mut tuned), NeclustStatus::Ok);
        let tuned: serde_json::Value = serde_json::from_str(&take(tuned)).unwrap();
        assert_eq!(tuned["best_k"], 3);
        assert_eq!(tuned["table"].as_array().unwrap().len(), 4);

        let mut default_report = ptr::null_mut();
        assert_eq!(
            neclust_cluster(corpus, ptr::null(), &mut default_report),
            NeclustStatus::Ok
        );
        take(default_report);

        neclust_corpus_free(corpus);
        neclust_kb_free(kb);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut kb = ptr::null_mut();
        assert_eq!(
            neclust_kb_from_json(ptr::null(), &mut kb),
            NeclustStatus::NullPointer
        );
        assert!(kb.is_null());
        assert_eq!(
            neclust_kb_from_json(c("{").as_ptr(), &mut kb),
            NeclustStatus::Parse
        );
        assert!(last_error().unwrap().contains("parse"));

        let cyclic = c(r#"{"types":[{"id":"A","parent":"B"},{"id":"B","parent":"A"}],"entities":[]}"#);
        assert_eq!(
            neclust_kb_from_json(cyclic.as_ptr(), &mut kb),
            NeclustStatus::Validation
        );
        assert!(last_error().unwrap().contains("cycle"));

        let bad_utf8 = [0xffu8, 0xfe, 0];
        assert_eq!(
            neclust_kb_from_json(bad_utf8.as_ptr().cast(), &mut kb),
            NeclustStatus::InvalidUtf8
        );

        let (kb, corpus) = load(SAMPLE_KB, SAMPLE_CORPUS);
        let mut other = ptr::null_mut();
        let unknown = c(r##"{"doc_id":"x","annotations":[{"name":"X","entity_id":"#X9"}]}"##);
        assert_eq!(
            neclust_corpus_from_jsonl(kb, unknown.as_ptr(), &mut other),
            NeclustStatus::Validation
        );
        assert!(last_error().unwrap().contains("#X9"));

        let mut out = ptr::null_mut();
        assert_eq!(
            neclust_vectorize(corpus, c("colour").as_ptr(), &mut out),
            NeclustStatus::InvalidArgument
        );
        assert_eq!(
            neclust_cluster(corpus, c(r#"{"alpha": 3}"#).as_ptr(), &mut out),
            NeclustStatus::InvalidArgument
        );
        assert_eq!(
            neclust_cluster(corpus, c("[").as_ptr(), &mut out),
            NeclustStatus::InvalidArgument
        );
        assert_eq!(
            neclust_cluster(ptr::null(), ptr::null(), &mut out),
            NeclustStatus::NullPointer
        );
        assert_eq!(
            neclust_cluster(corpus, ptr::null(), ptr::null_mut()),
            NeclustStatus::NullPointer
        );
        assert!(out.is_null());

        assert_eq!(
            neclust_vectorize(corpus, c("name").as_ptr(), &mut out),
            NeclustStatus::Ok
        );
        assert!(last_error().is_none());
        take(out);

        neclust_corpus_free(corpus);
        neclust_kb_free(kb);
        assert_eq!(neclust_corpus_len(ptr::null()), 0);
        neclust_string_free(ptr::null_mut());
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(neclust_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/neclust.h")
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(header_path()).unwrap();
    for decl in [
        "typedef struct NeclustKb NeclustKb;",
        "typedef struct NeclustCorpus NeclustCorpus;",
        "NECLUST_STATUS_OK = 0",
        "NECLUST_STATUS_PANIC = 6",
        "neclust_kb_from_json(",
        "neclust_kb_free(",
        "neclust_corpus_from_jsonl(",
        "neclust_corpus_len(",
        "neclust_corpus_free(",
        "neclust_cluster(",
        "neclust_tune(",
        "neclust_vectorize(",
        "neclust_generate_synthetic(",
        "neclust_string_free(",
        "neclust_last_error_message(",
        "neclust_version(",
    ] {
        assert!(header.contains(decl), "header lacks {decl}");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "neclust.h"

int main(void) {
    char *kb_json = NULL, *corpus_jsonl = NULL, *report = NULL;
    NeclustKb *kb = NULL;
    NeclustCorpus *corpus = NULL;
    if (neclust_generate_synthetic("{\"seed\": 3}", &kb_json, &corpus_jsonl) != NECLUST_STATUS_OK) return 1;
    if (neclust_kb_from_json(kb_json, &kb) != NECLUST_STATUS_OK) return 2;
    if (neclust_corpus_from_jsonl(kb, corpus_jsonl, &corpus) != NECLUST_STATUS_OK) return 3;
    if (neclust_cluster(corpus, "{\"phases\": [{\"space\": \"type\", \"k\": 3}]}", &report) != NECLUST_STATUS_OK) return 4;
    if (strstr(report, "\"cluster_id\"") == NULL) return 5;
    if (neclust_kb_from_json("{", &kb) != NECLUST_STATUS_PARSE) return 6;
    char *msg = neclust_last_error_message();
    if (msg == NULL) return 7;
    printf("%zu %s\n", neclust_corpus_len(corpus), neclust_version());
    neclust_string_free(msg);
    neclust_string_free(report);
    neclust_string_free(kb_json);
    neclust_string_free(corpus_jsonl);
    neclust_corpus_free(corpus);
    neclust_kb_free(kb);
    return 0;
}
"#;

fn c_compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc)
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|_| cc)
}

/// The static library sits next to the `deps` directory holding this test.
fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let lib = exe.parent()?.parent()?.join("libneclust_ffi.a");
    lib.exists().then_some(lib)
}

#[test]
fn c_program_links_against_static_library() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let include = header_path().parent().unwrap().to_path_buf();

    let syntax = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(
        syntax.status.success(),
        "{}",
        String::from_utf8_lossy(&syntax.stderr)
    );

    let Some(lib) = static_lib() else {
        eprintln!("static library not built; header checked only");
        return;
    };
    let exe = dir.path().join("main");
    let build = Command::new(&cc)
        .arg("-I")
        .arg(&include)
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(
        build.status.success(),
        "{}",
        String::from_utf8_lossy(&build.stderr)
    );
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(
        String::from_utf8(run.stdout).unwrap(),
        format!("60 {}\n", env!("CARGO_PKG_VERSION"))
    );
}
