//! C ABI over the ledgerfit engine.
//!
//! Catalogs and sessions are opaque handles. Every fallible call returns an
//! [`LfStatus`]; on failure [`lf_last_error_message`] describes the cause for
//! the calling thread. Strings handed out by the library must be released
//! with [`lf_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use chrono::Utc;
use std::ffi::c_char;

use ledgerfit::blueprint::{self, ReportFormat, ReportOptions, ViewKind};
use ledgerfit::catalog::{self, Catalog};
use ledgerfit::engine::{EngineError, OverrideFlag, Session, SessionMeta};
use ledgerfit::outcomes;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Invalid = 4,
    NotFound = 5,
    VersionConflict = 6,
    Ineligible = 7,
    Gated = 8,
    Validation = 9,
    Internal = 10,
}

/// Report encoding for [`lf_report`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfReportFormat {
    Json = 0,
    Markdown = 1,
}

/// Opaque catalog handle.
pub struct LfCatalog {
    inner: Arc<Catalog>,
}

/// Opaque session handle. Keeps its catalog alive.
pub struct LfSession {
    catalog: Arc<Catalog>,
    session: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).ok());
}

fn fail(status: LfStatus, message: impl Into<String>) -> LfStatus {
    set_error(message);
    status
}

fn guard(body: impl FnOnce() -> LfStatus) -> LfStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(LfStatus::Internal, "internal panic"),
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, LfStatus> {
    if p.is_null() {
        return Err(fail(LfStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(LfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, text: String) -> LfStatus {
    if out.is_null() {
        return fail(LfStatus::NullArgument, "output pointer is null");
    }
    match CString::new(text) {
        Ok(s) => {
            *out = s.into_raw();
            LfStatus::Ok
        }
        Err(_) => fail(LfStatus::Internal, "output contains a NUL byte"),
    }
}

unsafe fn write_handle<T>(out: *mut *mut T, value: T) -> LfStatus {
    if out.is_null() {
        return fail(LfStatus::NullArgument, "output pointer is null");
    }
    *out = Box::into_raw(Box::new(value));
    LfStatus::Ok
}

fn engine_status(e: EngineError) -> LfStatus {
    let status = match &e {
        EngineError::VersionConflict { .. } => LfStatus::VersionConflict,
        EngineError::UnknownQuestion(_) | EngineError::UnknownOption { .. } => LfStatus::NotFound,
        EngineError::Ineligible { .. } => LfStatus::Ineligible,
        EngineError::Gated { .. } => LfStatus::Gated,
        EngineError::NotAnswered(_) => LfStatus::Validation,
        EngineError::CatalogMismatch { .. } => LfStatus::Invalid,
    };
    fail(status, e.to_string())
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! handle {
    ($p:expr, $what:literal) => {
        match $p.as_ref() {
            Some(h) => h,
            None => return fail(LfStatus::NullArgument, concat!($what, " is null")),
        }
    };
}

macro_rules! handle_mut {
    ($p:expr, $what:literal) => {
        match $p.as_mut() {
            Some(h) => h,
            None => return fail(LfStatus::NullArgument, concat!($what, " is null")),
        }
    };
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by the library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn lf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads the bundled catalog.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn lf_catalog_load_default(out: *mut *mut LfCatalog) -> LfStatus {
    guard(|| write_handle(out, LfCatalog { inner: Arc::new(catalog::load_default_catalog()) }))
}

/// Parses a catalog document. Structural problems fail with `Parse`; use
/// [`lf_catalog_validate_jsonl`] for the full lint.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_catalog_parse(json: *const c_char, out: *mut *mut LfCatalog) -> LfStatus {
    guard(|| {
        let text = try_ffi!(read_str(json, "json"));
        match catalog::parse_catalog(text) {
            Ok(c) => write_handle(out, LfCatalog { inner: Arc::new(c) }),
            Err(e) => fail(LfStatus::Parse, e.to_string()),
        }
    })
}

/// # Safety
/// `catalog` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_catalog_free(catalog: *mut LfCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Content hash of the catalog as lowercase hex.
///
/// # Safety
/// `catalog` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_catalog_hash(catalog: *const LfCatalog, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let c = handle!(catalog, "catalog");
        write_string(out, c.inner.hash().to_string())
    })
}

/// Writes validation diagnostics as JSON lines to `out`. Returns `Invalid`
/// when any diagnostic is an error; `out` is filled either way.
///
/// # Safety
/// `catalog` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_catalog_validate_jsonl(catalog: *const LfCatalog, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let c = handle!(catalog, "catalog");
        let report = catalog::validate_catalog(&c.inner);
        let status = write_string(out, report.to_jsonl());
        if status != LfStatus::Ok {
            return status;
        }
        if report.has_errors() {
            fail(LfStatus::Invalid, format!("{} error(s)", report.errors().count()))
        } else {
            LfStatus::Ok
        }
    })
}

/// Starts an empty session pinned to `catalog`.
///
/// # Safety
/// `catalog` must be a live handle, `name` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_session_new(catalog: *const LfCatalog, name: *const c_char, out: *mut *mut LfSession) -> LfStatus {
    guard(|| {
        let c = handle!(catalog, "catalog");
        let name = try_ffi!(read_str(name, "name"));
        let session = Session::new(&c.inner, SessionMeta::new(name, Utc::now()));
        write_handle(out, LfSession { catalog: Arc::clone(&c.inner), session })
    })
}

/// Restores a session document produced by [`lf_session_to_json`].
///
/// # Safety
/// `catalog` must be a live handle, `json` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_session_from_json(catalog: *const LfCatalog, json: *const c_char, out: *mut *mut LfSession) -> LfStatus {
    guard(|| {
        let c = handle!(catalog, "catalog");
        let text = try_ffi!(read_str(json, "json"));
        let session = match Session::from_json(text) {
            Ok(s) => s,
            Err(e) => return fail(LfStatus::Parse, e.to_string()),
        };
        if let Err(e) = session.check_against(&c.inner) {
            return fail(LfStatus::Invalid, e.to_string());
        }
        write_handle(out, LfSession { catalog: Arc::clone(&c.inner), session })
    })
}

/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_session_to_json(session: *const LfSession, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let s = handle!(session, "session");
        write_string(out, s.session.to_json())
    })
}

/// # Safety
/// `session` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_session_free(session: *mut LfSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Current session version, or 0 for a null handle.
///
/// # Safety
/// `session` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_session_version(session: *const LfSession) -> u64 {
    session.as_ref().map_or(0, |s| s.session.version)
}

/// Records `option_id` for `question_id`. Fails with `VersionConflict` when
/// `expected_version` is not the current version.
///
/// # Safety
/// `session` must be a live handle; the ids must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn lf_session_answer(
    session: *mut LfSession,
    question_id: *const c_char,
    option_id: *const c_char,
    expected_version: u64,
) -> LfStatus {
    guard(|| {
        let s = handle_mut!(session, "session");
        let qid = try_ffi!(read_str(question_id, "question_id"));
        let oid = try_ffi!(read_str(option_id, "option_id"));
        match s.session.record_answer(&s.catalog, qid, oid, None, expected_version, Utc::now()) {
            Ok(_) => LfStatus::Ok,
            Err(e) => engine_status(e),
        }
    })
}

/// # Safety
/// `session` must be a live handle and `question_id` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lf_session_retract(session: *mut LfSession, question_id: *const c_char, expected_version: u64) -> LfStatus {
    guard(|| {
        let s = handle_mut!(session, "session");
        let qid = try_ffi!(read_str(question_id, "question_id"));
        match s.session.retract_answer(&s.catalog, qid, expected_version, Utc::now()) {
            Ok(_) => LfStatus::Ok,
            Err(e) => engine_status(e),
        }
    })
}

/// Records the proceed-despite-not-suitable override. `note` may be null.
///
/// # Safety
/// `session` must be a live handle; `note` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn lf_session_override(session: *mut LfSession, note: *const c_char, expected_version: u64) -> LfStatus {
    guard(|| {
        let s = handle_mut!(session, "session");
        let note = if note.is_null() { None } else { Some(try_ffi!(read_str(note, "note")).to_string()) };
        match s.session.set_override(&s.catalog, OverrideFlag::ProceedDespiteNotSuitable, note, expected_version, Utc::now()) {
            Ok(_) => LfStatus::Ok,
            Err(e) => engine_status(e),
        }
    })
}

/// Suitability verdict as JSON.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_session_verdict_json(session: *const LfSession, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let s = handle!(session, "session");
        let verdict = outcomes::evaluate_suitability(&s.catalog, &s.session);
        match serde_json::to_string(&verdict) {
            Ok(text) => write_string(out, text),
            Err(e) => fail(LfStatus::Internal, e.to_string()),
        }
    })
}

/// Access-model recommendation as JSON.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_session_recommendation_json(session: *const LfSession, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let s = handle!(session, "session");
        let rec = outcomes::recommend_access_model(&s.catalog, &s.session);
        match serde_json::to_string(&rec) {
            Ok(text) => write_string(out, text),
            Err(e) => fail(LfStatus::Internal, e.to_string()),
        }
    })
}

/// Full decision report with all three views, byte-identical to the CLI
/// and HTTP exports.
///
/// # Safety
/// `session` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_report(session: *const LfSession, format: LfReportFormat, out: *mut *mut c_char) -> LfStatus {
    guard(|| {
        let s = handle!(session, "session");
        let format = match format {
            LfReportFormat::Json => ReportFormat::Json,
            LfReportFormat::Markdown => ReportFormat::Markdown,
        };
        let bytes = blueprint::export_report(&s.catalog, &s.session, format, &ViewKind::ALL, &ReportOptions::default());
        match String::from_utf8(bytes) {
            Ok(text) => write_string(out, text),
            Err(e) => fail(LfStatus::Internal, e.to_string()),
        }
    })
}
