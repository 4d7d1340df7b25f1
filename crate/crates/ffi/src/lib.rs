//! C ABI for `neclust`.
//!
//! Knowledge bases and corpora live behind opaque handles. Options and
//! results cross the boundary as UTF-8 JSON strings. Every fallible call
//! returns a [`NeclustStatus`]; on failure a description is available from
//! [`neclust_last_error_message`] on the same thread. Strings returned
//! through out-parameters are owned by the caller and must be released with
//! [`neclust_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use neclust::corpus::{Corpus, Document};
use neclust::eval::{self, doc_label, DocLabel, TuneOptions};
use neclust::hierarchy::{hierarchical_cluster, ClusterConfig, PhaseSpec};
use neclust::kb::KnowledgeBase;
use neclust::report::{self, ClusterReport, ConfigEcho, EntropyRow};
use neclust::synth::{self, SyntheticParams};
use neclust::vsm::{FeatureSpace, SpaceModel};
use serde::{Deserialize, Serialize};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeclustStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    InvalidArgument = 5,
    Panic = 6,
}

/// A validated knowledge base.
pub struct NeclustKb {
    kb: Arc<KnowledgeBase>,
}

/// A corpus validated against a knowledge base; keeps that knowledge base
/// alive.
pub struct NeclustCorpus {
    kb: Arc<KnowledgeBase>,
    corpus: Corpus,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(NeclustStatus, String);

impl From<neclust::Error> for Failure {
    fn from(e: neclust::Error) -> Self {
        use neclust::Error as E;
        let status = match &e {
            E::Parse { .. } | E::Io(_) => NeclustStatus::Parse,
            E::InvalidParameter(_) => NeclustStatus::InvalidArgument,
            E::Validation { .. } | E::UnknownType(_) | E::UnknownEntity(_) | E::SpaceMismatch { .. } => {
                NeclustStatus::Validation
            }
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NeclustStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NeclustStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal panic: {what}"));
            NeclustStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(NeclustStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(NeclustStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Reads an optional JSON options string; null means all defaults.
unsafe fn read_options<T: for<'de> Deserialize<'de> + Default>(p: *const c_char) -> Result<T, Failure> {
    if p.is_null() {
        return Ok(T::default());
    }
    let text = read_str(p, "options")?;
    serde_json::from_str(text).map_err(|e| Failure(NeclustStatus::InvalidArgument, format!("options: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(NeclustStatus::NullPointer, format!("{what} is null")))
}

fn check_out<T>(p: *mut T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(NeclustStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

fn parse_space(s: &str) -> Result<FeatureSpace, Failure> {
    s.parse::<FeatureSpace>().map_err(Failure::from)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn neclust_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copy of the last error message on this thread, or null if the last call
/// succeeded. Release with `neclust_string_free`.
#[no_mangle]
pub extern "C" fn neclust_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(c) => c.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn neclust_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a knowledge base from JSON.
///
/// # Safety
/// `json` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn neclust_kb_from_json(
    json: *const c_char,
    out: *mut *mut NeclustKb,
) -> NeclustStatus {
    guard(|| {
        check_out(out, "out")?;
        let kb = KnowledgeBase::from_json_str(read_str(json, "json")?)?;
        *out = Box::into_raw(Box::new(NeclustKb { kb: Arc::new(kb) }));
        Ok(())
    })
}

/// Releases a knowledge base handle. Null is ignored. Corpora loaded against
/// it stay valid.
///
/// # Safety
/// `kb` must be null or a live handle from `neclust_kb_from_json`.
#[no_mangle]
pub unsafe extern "C" fn neclust_kb_free(kb: *mut NeclustKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// Parses a JSON-Lines corpus and validates it against `kb`.
///
/// # Safety
/// `kb` must be a live handle; `jsonl` a NUL-terminated string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn neclust_corpus_from_jsonl(
    kb: *const NeclustKb,
    jsonl: *const c_char,
    out: *mut *mut NeclustCorpus,
) -> NeclustStatus {
    guard(|| {
        check_out(out, "out")?;
        let kb = handle(kb, "kb")?;
        let corpus = Corpus::from_jsonl_str(read_str(jsonl, "jsonl")?, &kb.kb)?;
        *out = Box::into_raw(Box::new(NeclustCorpus {
            kb: Arc::clone(&kb.kb),
            corpus,
        }));
        Ok(())
    })
}

/// Number of documents in the corpus; 0 for null.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn neclust_corpus_len(corpus: *const NeclustCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.corpus.len())
}

/// Releases a corpus handle. Null is ignored.
///
/// # Safety
/// `corpus` must be null or a live handle from `neclust_corpus_from_jsonl`.
#[no_mangle]
pub unsafe extern "C" fn neclust_corpus_free(corpus: *mut NeclustCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct ClusterOptions {
    phases: Vec<PhaseSpec>,
    #[serde(flatten)]
    config: ClusterConfig,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            phases: vec![PhaseSpec {
                space: FeatureSpace::Type,
                k: neclust::KChoice::Auto,
            }],
            config: ClusterConfig::default(),
        }
    }
}

/// Clusters the corpus and writes the JSON report to `*report_out`.
///
/// `options_json` may be null for defaults, or an object with `phases`
/// (`[{"space": "type", "k": "auto"}, ...]`) and any of `seed`,
/// `max_iterations`, `restarts`, `min_split_size`, `alpha`, `tc_fraction`,
/// `rescope_idf`, `full_sweep`.
///
/// # Safety
/// `corpus` must be a live handle; `options_json` null or NUL-terminated;
/// `report_out` writable.
#[no_mangle]
pub unsafe extern "C" fn neclust_cluster(
    corpus: *const NeclustCorpus,
    options_json: *const c_char,
    report_out: *mut *mut c_char,
) -> NeclustStatus {
    guard(|| {
        check_out(report_out, "report_out")?;
        let c = handle(corpus, "corpus")?;
        let opts: ClusterOptions = read_options(options_json)?;
        let h = hierarchical_cluster(&c.corpus, &opts.phases, &opts.config, &c.kb)?;
        let echo = ConfigEcho::new("", "", &opts.phases, &opts.config);
        *report_out = into_c_string(ClusterReport::new(echo, &h, &c.corpus).to_json());
        Ok(())
    })
}

#[derive(Debug, Deserialize)]
#[serde(default)]
struct TuneRequest {
    space: FeatureSpace,
    k_range: Option<Vec<usize>>,
    alpha: f64,
    tc_fraction: f64,
    seed: u64,
    restarts: usize,
    max_iterations: usize,
}

impl Default for TuneRequest {
    fn default() -> Self {
        let opts = TuneOptions::default();
        TuneRequest {
            space: FeatureSpace::Type,
            k_range: None,
            alpha: opts.alpha,
            tc_fraction: eval::DEFAULT_TC_FRACTION,
            seed: opts.seed,
            restarts: opts.restarts,
            max_iterations: opts.max_iterations,
        }
    }
}

#[derive(Serialize)]
struct TuneResponse {
    best_k: usize,
    table: Vec<EntropyRow>,
}

/// Sweeps k on one feature space and writes `{"best_k", "table"}` JSON.
///
/// `options_json` may be null, or an object with any of `space`, `k_range`
/// (array of k), `alpha`, `tc_fraction`, `seed`, `restarts`,
/// `max_iterations`.
///
/// # Safety
/// As for `neclust_cluster`.
#[no_mangle]
pub unsafe extern "C" fn neclust_tune(
    corpus: *const NeclustCorpus,
    options_json: *const c_char,
    result_out: *mut *mut c_char,
) -> NeclustStatus {
    guard(|| {
        check_out(result_out, "result_out")?;
        let c = handle(corpus, "corpus")?;
        let req: TuneRequest = read_options(options_json)?;
        let docs: Vec<&Document> = c.corpus.documents.iter().collect();
        let model = SpaceModel::build(&docs, req.space, &c.kb)?;
        let labels = model
            .vectors
            .iter()
            .map(|v| doc_label(v, &model.index, req.tc_fraction))
            .collect::<neclust::Result<Vec<DocLabel>>>()?;
        let range = req
            .k_range
            .unwrap_or_else(|| eval::default_k_range(c.corpus.len()));
        let opts = TuneOptions {
            alpha: req.alpha,
            restarts: req.restarts,
            seed: req.seed,
            max_iterations: req.max_iterations,
        };
        let tuned = eval::tune_k(&model.vectors, &labels, &range, &opts)?;
        let response = TuneResponse {
            best_k: tuned.best_k,
            table: tuned.table.iter().map(EntropyRow::from).collect(),
        };
        *result_out = into_c_string(serde_json::to_string(&response).expect("serializable"));
        Ok(())
    })
}

/// Writes one JSON line per document with its tf.idf weights in `space`
/// (`name`, `type`, `nametype` or `identifier`).
///
/// # Safety
/// `corpus` must be a live handle; `space` NUL-terminated; `vectors_out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn neclust_vectorize(
    corpus: *const NeclustCorpus,
    space: *const c_char,
    vectors_out: *mut *mut c_char,
) -> NeclustStatus {
    guard(|| {
        check_out(vectors_out, "vectors_out")?;
        let c = handle(corpus, "corpus")?;
        let space = parse_space(read_str(space, "space")?)?;
        let docs: Vec<&Document> = c.corpus.documents.iter().collect();
        let model = SpaceModel::build(&docs, space, &c.kb)?;
        *vectors_out = into_c_string(report::vectors_jsonl(&c.corpus, &model));
        Ok(())
    })
}

/// Generates a synthetic knowledge base (JSON) and corpus (JSON-Lines).
/// `params_json` may be null or an object with any generator parameter.
///
/// # Safety
/// `params_json` null or NUL-terminated; both out-parameters writable.
#[no_mangle]
pub unsafe extern "C" fn neclust_generate_synthetic(
    params_json: *const c_char,
    kb_out: *mut *mut c_char,
    corpus_out: *mut *mut c_char,
) -> NeclustStatus {
    guard(|| {
        check_out(kb_out, "kb_out")?;
        check_out(corpus_out, "corpus_out")?;
        let params: SyntheticParams = read_options(params_json)?;
        let s = synth::generate(&params)?;
        *kb_out = into_c_string(s.kb.to_json_string());
        *corpus_out = into_c_string(s.corpus.to_jsonl());
        Ok(())
    })
}
