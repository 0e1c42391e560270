use std::ffi::{CStr, CString};
use std::ptr;

use ledgerfit_ffi::*;

fn take(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let text = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    unsafe { lf_string_free(s) };
    text
}

fn last_error() -> String {
    let p = lf_last_error_message();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

struct Fixture {
    catalog: *mut LfCatalog,
    session: *mut LfSession,
}

impl Fixture {
    fn new() -> Self {
        let mut catalog = ptr::null_mut();
        assert_eq!(unsafe { lf_catalog_load_default(&mut catalog) }, LfStatus::Ok);
        let mut session = ptr::null_mut();
        let name = c("ffi");
        assert_eq!(unsafe { lf_session_new(catalog, name.as_ptr(), &mut session) }, LfStatus::Ok);
        Fixture { catalog, session }
    }

    fn answer(&self, q: &str, o: &str) -> LfStatus {
        let (q, o) = (c(q), c(o));
        unsafe { lf_session_answer(self.session, q.as_ptr(), o.as_ptr(), lf_session_version(self.session)) }
    }
}

impl Drop for Fixture {
    fn drop(&mut self) {
        unsafe {
            lf_session_free(self.session);
            lf_catalog_free(self.catalog);
        }
    }
}

#[test]
fn default_catalog_hash_and_lint() {
    let f = Fixture::new();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_catalog_hash(f.catalog, &mut out) }, LfStatus::Ok);
    let hash = take(out);
    assert_eq!(hash.len(), 64);
    assert_eq!(hash, ledgerfit::catalog::default_catalog().hash());

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_catalog_validate_jsonl(f.catalog, &mut out) }, LfStatus::Ok);
    assert_eq!(take(out), "");
}

#[test]
fn parse_rejects_garbage_with_message() {
    let mut out = ptr::null_mut();
    let text = c("{ not json");
    assert_eq!(unsafe { lf_catalog_parse(text.as_ptr(), &mut out) }, LfStatus::Parse);
    assert!(out.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn parse_round_trips_bundled_document() {
    let text = c(ledgerfit::catalog::default_catalog_document());
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_catalog_parse(text.as_ptr(), &mut out) }, LfStatus::Ok);
    unsafe { lf_catalog_free(out) };
}

#[test]
fn null_arguments_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_catalog_hash(ptr::null(), &mut out) }, LfStatus::NullArgument);
    assert!(last_error().contains("catalog"));
    assert_eq!(unsafe { lf_session_version(ptr::null()) }, 0);
    unsafe {
        lf_string_free(ptr::null_mut());
        lf_session_free(ptr::null_mut());
        lf_catalog_free(ptr::null_mut());
    }
}

#[test]
fn answers_advance_version_and_stale_writes_conflict() {
    let f = Fixture::new();
    assert_eq!(lf_session_version_of(&f), 0);
    assert_eq!(f.answer("ev.bp.misaligned_interests", "yes"), LfStatus::Ok);
    assert_eq!(lf_session_version_of(&f), 1);

    let (q, o) = (c("ev.bp.misaligned_interests"), c("no"));
    let status = unsafe { lf_session_answer(f.session, q.as_ptr(), o.as_ptr(), 0) };
    assert_eq!(status, LfStatus::VersionConflict);
    assert!(last_error().contains("version conflict"));

    assert_eq!(f.answer("ev.bp.nope", "yes"), LfStatus::NotFound);
    assert_eq!(f.answer("ev.bp.misaligned_interests", "maybe"), LfStatus::NotFound);

    let q = c("ev.bp.misaligned_interests");
    assert_eq!(unsafe { lf_session_retract(f.session, q.as_ptr(), 1) }, LfStatus::Ok);
    assert_eq!(lf_session_version_of(&f), 2);
}

fn lf_session_version_of(f: &Fixture) -> u64 {
    unsafe { lf_session_version(f.session) }
}

#[test]
fn disqualifier_gates_until_override() {
    let f = Fixture::new();
    assert_eq!(f.answer("ev.bp.business_case", "no"), LfStatus::Ok);
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_session_verdict_json(f.session, &mut out) }, LfStatus::Ok);
    let verdict: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert_eq!(verdict["status"], "not_suitable", "{verdict}");

    assert_eq!(f.answer("el.sh.participants_known", "yes"), LfStatus::Gated);
    let note = c("pilot");
    assert_eq!(unsafe { lf_session_override(f.session, note.as_ptr(), lf_session_version(f.session)) }, LfStatus::Ok);
    assert_eq!(f.answer("el.sh.participants_known", "yes"), LfStatus::Ok);
}

#[test]
fn session_json_round_trip_and_report() {
    let f = Fixture::new();
    assert_eq!(f.answer("ev.bp.misaligned_interests", "yes"), LfStatus::Ok);

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_session_to_json(f.session, &mut out) }, LfStatus::Ok);
    let json = take(out);
    let text = c(&json);
    let mut restored = ptr::null_mut();
    assert_eq!(unsafe { lf_session_from_json(f.catalog, text.as_ptr(), &mut restored) }, LfStatus::Ok);
    assert_eq!(unsafe { lf_session_version(restored) }, 1);

    for format in [LfReportFormat::Json, LfReportFormat::Markdown] {
        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(unsafe { lf_report(f.session, format, &mut a) }, LfStatus::Ok);
        assert_eq!(unsafe { lf_report(restored, format, &mut b) }, LfStatus::Ok);
        assert_eq!(take(a), take(b));
    }

    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_session_recommendation_json(restored, &mut out) }, LfStatus::Ok);
    let rec: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
    assert!(rec.is_object());
    unsafe { lf_session_free(restored) };

    let bad = c("{}");
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { lf_session_from_json(f.catalog, bad.as_ptr(), &mut out) }, LfStatus::Parse);
}
