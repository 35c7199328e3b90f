//! C ABI over `fuzzy_prefs`.
//!
//! Objects are handed out as opaque pointers and released with the matching
//! `*_free` function. Every fallible call returns an [`FpStatus`]; on failure
//! [`fp_last_error`] describes the problem. Strings returned to the caller
//! are NUL-terminated UTF-8 and must be released with [`fp_string_free`].
//!
//! Handles are immutable after creation and may be shared between threads;
//! the last-error slot is per thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fuzzy_prefs::cli::format_tsv;
use fuzzy_prefs::eval::{rank, Ranking};
use fuzzy_prefs::kb::{build_knowledge_base, ingest_tabular, membership_of, IngestOptions, KbConfig, KnowledgeBase};
use fuzzy_prefs::query::{parse_query, CompiledQuery};
use fuzzy_prefs::ucp::UtilityMode;
use fuzzy_prefs::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or out-of-range index.
    InvalidArgument = 1,
    /// Malformed or degenerate input data, or an invalid document.
    Data = 2,
    Io = 3,
    /// Query text failed to parse; the message carries `line:column`.
    Syntax = 4,
    /// Query values do not match the knowledge base labels.
    Binding = 5,
    /// Requested more than the data allows (terms, outcomes, buffer).
    Capacity = 6,
    Panic = 7,
}

pub struct FpKnowledgeBase(KnowledgeBase);

pub struct FpQuery(CompiledQuery);

pub struct FpRanking {
    ranking: Ranking,
    terms: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let text = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

struct Fail(FpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Syntax { .. } | Error::Semantic { .. } => FpStatus::Syntax,
            Error::Binding(_) => FpStatus::Binding,
            Error::Capacity(_) => FpStatus::Capacity,
            Error::Io(_) => FpStatus::Io,
            _ => FpStatus::Data,
        };
        Fail(status, e.to_string())
    }
}

fn invalid(message: &str) -> Fail {
    Fail(FpStatus::InvalidArgument, message.to_owned())
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => FpStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FpStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(invalid(&format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| invalid(&format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| invalid("string contains NUL"))?;
    put(out, c.into_raw())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a knowledge base from CSV text with a header row. `clusters` is the
/// region count for every attribute (0 picks the default of 3).
///
/// # Safety
/// `csv` must be a NUL-terminated string, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fp_kb_build_csv(
    csv: *const c_char,
    clusters: u32,
    seed: u64,
    out: *mut *mut FpKnowledgeBase,
) -> FpStatus {
    guard(|| {
        let csv = text(csv, "csv")?;
        let dataset = ingest_tabular(csv.as_bytes(), IngestOptions::default())?;
        let mut config = KbConfig {
            seed,
            ..KbConfig::default()
        };
        if clusters > 0 {
            config.default_clusters = clusters as usize;
        }
        let kb = build_knowledge_base(&dataset, &config)?;
        put(out, Box::into_raw(Box::new(FpKnowledgeBase(kb))))
    })
}

/// # Safety
/// `json` must be a NUL-terminated string, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fp_kb_from_json(json: *const c_char, out: *mut *mut FpKnowledgeBase) -> FpStatus {
    guard(|| {
        let kb = KnowledgeBase::from_json(text(json, "json")?)?;
        put(out, Box::into_raw(Box::new(FpKnowledgeBase(kb))))
    })
}

/// # Safety
/// `kb` must be a live handle, `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn fp_kb_to_json(kb: *const FpKnowledgeBase, out: *mut *mut c_char) -> FpStatus {
    guard(|| put_string(out, handle(kb, "kb")?.0.to_json()?))
}

/// Membership of `value` to each region of `attribute`, lowest region first.
/// Writes at most `capacity` degrees to `buf` and the region count to
/// `out_len`; returns `Capacity` if the buffer is too small.
///
/// # Safety
/// `buf` must hold `capacity` doubles; `attribute` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fp_kb_membership(
    kb: *const FpKnowledgeBase,
    attribute: *const c_char,
    value: f64,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> FpStatus {
    guard(|| {
        let degrees = membership_of(&handle(kb, "kb")?.0, text(attribute, "attribute")?, value)?;
        put(out_len, degrees.len())?;
        if degrees.len() > capacity {
            return Err(Fail(
                FpStatus::Capacity,
                format!("{} regions, buffer holds {capacity}", degrees.len()),
            ));
        }
        if buf.is_null() {
            return Err(invalid("buffer is null"));
        }
        ptr::copy_nonoverlapping(degrees.as_ptr(), buf, degrees.len());
        Ok(())
    })
}

/// # Safety
/// `kb` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_kb_free(kb: *mut FpKnowledgeBase) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Compiles query source against `kb`. `terms` of 0 keeps the query's own
/// term count (or the default).
///
/// # Safety
/// `source` must be NUL-terminated, `kb` live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_query_compile(
    kb: *const FpKnowledgeBase,
    source: *const c_char,
    terms: u32,
    out: *mut *mut FpQuery,
) -> FpStatus {
    guard(|| {
        let kb = handle(kb, "kb")?;
        let spec = parse_query(text(source, "source")?)?;
        let terms = (terms > 0).then_some(terms as usize);
        let compiled = CompiledQuery::compile(spec, &kb.0, terms, UtilityMode::Dominance)?;
        put(out, Box::into_raw(Box::new(FpQuery(compiled))))
    })
}

/// # Safety
/// `json` must be NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_query_from_json(json: *const c_char, out: *mut *mut FpQuery) -> FpStatus {
    guard(|| {
        let compiled = CompiledQuery::from_json(text(json, "json")?)?;
        put(out, Box::into_raw(Box::new(FpQuery(compiled))))
    })
}

/// # Safety
/// `query` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_query_to_json(query: *const FpQuery, out: *mut *mut c_char) -> FpStatus {
    guard(|| put_string(out, handle(query, "query")?.0.to_json()?))
}

/// Number of terms, or 0 for a null handle.
///
/// # Safety
/// `query` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn fp_query_term_count(query: *const FpQuery) -> usize {
    query.as_ref().map_or(0, |q| q.0.query.terms.len())
}

/// Importance U of term `index` (0-based, best first).
///
/// # Safety
/// `query` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_query_term_importance(query: *const FpQuery, index: usize, out: *mut f64) -> FpStatus {
    guard(|| {
        let term = handle(query, "query")?
            .0
            .query
            .terms
            .get(index)
            .ok_or_else(|| invalid("term index out of range"))?;
        put(out, term.importance)
    })
}

/// # Safety
/// `query` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_query_free(query: *mut FpQuery) {
    if !query.is_null() {
        drop(Box::from_raw(query));
    }
}

/// Ranks the records of CSV text (header row, empty cells allowed). `top`
/// of 0 keeps every record.
///
/// # Safety
/// `csv` must be NUL-terminated, `kb` and `query` live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_rank_csv(
    kb: *const FpKnowledgeBase,
    query: *const FpQuery,
    csv: *const c_char,
    top: usize,
    out: *mut *mut FpRanking,
) -> FpStatus {
    guard(|| {
        let kb = handle(kb, "kb")?;
        let query = handle(query, "query")?;
        let options = IngestOptions {
            allow_missing: true,
            ..IngestOptions::default()
        };
        let dataset = ingest_tabular(text(csv, "csv")?.as_bytes(), options)?;
        let ranking = rank(&kb.0, &query.0.query, &dataset, (top > 0).then_some(top))?;
        let terms = query.0.query.terms.len();
        put(out, Box::into_raw(Box::new(FpRanking { ranking, terms })))
    })
}

/// Number of ranked records, or 0 for a null handle.
///
/// # Safety
/// `ranking` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn fp_ranking_len(ranking: *const FpRanking) -> usize {
    ranking.as_ref().map_or(0, |r| r.ranking.results.len())
}

/// Records that could not be scored, or 0 for a null handle.
///
/// # Safety
/// `ranking` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn fp_ranking_failure_count(ranking: *const FpRanking) -> usize {
    ranking.as_ref().map_or(0, |r| r.ranking.failures.len())
}

/// Input row index and relevance of the result at `position` (0-based).
///
/// # Safety
/// `ranking` must be live, the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fp_ranking_get(
    ranking: *const FpRanking,
    position: usize,
    out_record: *mut usize,
    out_eval: *mut f64,
) -> FpStatus {
    guard(|| {
        let result = handle(ranking, "ranking")?
            .ranking
            .results
            .get(position)
            .ok_or_else(|| invalid("position out of range"))?;
        put(out_record, result.record_index)?;
        put(out_eval, result.eval)
    })
}

/// The ranking as the command-line tool prints it.
///
/// # Safety
/// `ranking` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_ranking_to_tsv(ranking: *const FpRanking, out: *mut *mut c_char) -> FpStatus {
    guard(|| {
        let r = handle(ranking, "ranking")?;
        put_string(out, format_tsv(&r.ranking, r.terms))
    })
}

/// # Safety
/// `ranking` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_ranking_free(ranking: *mut FpRanking) {
    if !ranking.is_null() {
        drop(Box::from_raw(ranking));
    }
}
