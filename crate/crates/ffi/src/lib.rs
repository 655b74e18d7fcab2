//! C interface to the recommendation engine.
//!
//! Every function returns a [`JrStatus`]. On failure the message is kept per
//! thread and read with [`jr_last_error_message`]. Strings handed out by the
//! library are released with [`jr_string_free`]; engines with
//! [`jr_engine_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use jobrec::compose::{compose_many, ComposeConfig, ComposeContext, Indices, StarvationCounter};
use jobrec::domain::{load_dir, Dataset};
use jobrec::evalharness::chi_square_two_proportions;
use jobrec::featurize::Featurizer;
use jobrec::seqnet::{predict_for_candidate, ProgressionEncoder, ProgressionModel};
use jobrec::simindex::cosine;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JrStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Data = 4,
    NotFound = 5,
    NoModel = 6,
    InvalidArgument = 7,
    Panic = 8,
}

/// Loaded data, featurizer, optional model and starvation counters.
pub struct JrEngine {
    dataset: Dataset,
    featurizer: Featurizer,
    model: Option<ProgressionModel>,
    indices: Indices,
    counters: StarvationCounter,
    seed: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(JrStatus, String);

impl Fail {
    fn new(status: JrStatus, msg: impl ToString) -> Self {
        Fail(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> JrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => JrStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            JrStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(JrStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(JrStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Fail> {
    unsafe { p.as_mut() }.ok_or_else(|| Fail::new(JrStatus::NullArgument, format!("{name} is null")))
}

fn engine<'a>(p: *const JrEngine) -> Result<&'a JrEngine, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| Fail::new(JrStatus::NullArgument, "engine is null"))
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn jr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a data directory and featurizer, plus a model when `model_path` is
/// not null. `seed` drives slate composition.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out_engine` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn jr_engine_open(
    data_dir: *const c_char,
    featurizer_path: *const c_char,
    model_path: *const c_char,
    seed: u64,
    out_engine: *mut *mut JrEngine,
) -> JrStatus {
    guard(|| {
        let slot = out(out_engine, "out_engine")?;
        *slot = ptr::null_mut();
        let data = text(data_dir, "data_dir")?;
        let fpath = text(featurizer_path, "featurizer_path")?;
        let dataset = load_dir(Path::new(data)).map_err(|e| Fail::new(JrStatus::Data, e))?;
        let featurizer = Featurizer::load(Path::new(fpath)).map_err(|e| Fail::new(JrStatus::Io, e))?;
        let model = if model_path.is_null() {
            None
        } else {
            let m = text(model_path, "model_path")?;
            Some(ProgressionModel::load(Path::new(m)).map_err(|e| Fail::new(JrStatus::Io, e))?)
        };
        let indices = Indices::build(&dataset, &featurizer);
        *slot = Box::into_raw(Box::new(JrEngine {
            dataset,
            featurizer,
            model,
            indices,
            counters: StarvationCounter::default(),
            seed,
        }));
        Ok(())
    })
}

/// # Safety
/// `engine` must be null or come from [`jr_engine_open`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn jr_engine_free(engine: *mut JrEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Number of candidates, jobs and interactions loaded.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jr_engine_counts(
    engine: *const JrEngine,
    candidates: *mut usize,
    jobs: *mut usize,
    interactions: *mut usize,
) -> JrStatus {
    guard(|| {
        let e = self::engine(engine)?;
        let (c, j, i) = e.dataset.counts();
        *out(candidates, "candidates")? = c;
        *out(jobs, "jobs")? = j;
        *out(interactions, "interactions")? = i;
        Ok(())
    })
}

/// Composes one slate and writes it as JSON to `out_json` (free with
/// [`jr_string_free`]). `top` of 0 means no cap. `now` is the composition
/// time in Unix seconds. Starvation counters persist inside the engine.
///
/// # Safety
/// Pointers must be valid; `candidate_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jr_engine_recommend(
    engine: *mut JrEngine,
    candidate_id: *const c_char,
    top: usize,
    now: i64,
    out_json: *mut *mut c_char,
) -> JrStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        *slot = ptr::null_mut();
        let e = unsafe { engine.as_mut() }.ok_or_else(|| Fail::new(JrStatus::NullArgument, "engine is null"))?;
        let cid = text(candidate_id, "candidate_id")?;
        if !e.dataset.candidates.contains_key(cid) {
            return Err(Fail::new(JrStatus::NotFound, format!("unknown candidate {cid}")));
        }
        let config = ComposeConfig {
            top: (top > 0).then_some(top),
            ..ComposeConfig::default()
        };
        let ctx = ComposeContext {
            dataset: &e.dataset,
            featurizer: &e.featurizer,
            model: e.model.as_ref().map(|m| &m.params),
            append_competency: e.model.as_ref().is_none_or(|m| m.append_competency),
            indices: &e.indices,
            config: &config,
        };
        let outcome = compose_many(&[cid.to_string()], &ctx, &mut e.counters, e.seed, 1, now)
            .map_err(|err| Fail::new(JrStatus::Data, err))?
            .pop()
            .expect("one outcome per candidate");
        let json = serde_json::to_string(&outcome).map_err(|err| Fail::new(JrStatus::Data, err))?;
        *slot = CString::new(json).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// Model probability that the candidate clicks the job next.
///
/// # Safety
/// Pointers must be valid; ids NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn jr_engine_predict(
    engine: *const JrEngine,
    candidate_id: *const c_char,
    job_id: *const c_char,
    out_probability: *mut f64,
) -> JrStatus {
    guard(|| {
        let e = self::engine(engine)?;
        let slot = out(out_probability, "out_probability")?;
        let cid = text(candidate_id, "candidate_id")?;
        let jid = text(job_id, "job_id")?;
        let model = e
            .model
            .as_ref()
            .ok_or_else(|| Fail::new(JrStatus::NoModel, "engine was opened without a model"))?;
        let job = e
            .dataset
            .jobs
            .get(jid)
            .ok_or_else(|| Fail::new(JrStatus::NotFound, format!("unknown job {jid}")))?;
        if !e.dataset.candidates.contains_key(cid) {
            return Err(Fail::new(JrStatus::NotFound, format!("unknown candidate {cid}")));
        }
        let encoder = ProgressionEncoder::new(&e.featurizer, model.append_competency);
        let p = predict_for_candidate(&model.params, &encoder, &e.dataset, cid, &[job])
            .map_err(|err| Fail::new(JrStatus::Data, err))?;
        *slot = p[0];
        Ok(())
    })
}

/// Cosine similarity of two vectors of length `len`.
///
/// # Safety
/// `a` and `b` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn jr_cosine(a: *const f64, b: *const f64, len: usize, out_similarity: *mut f64) -> JrStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(Fail::new(JrStatus::NullArgument, "vector is null"));
        }
        let slot = out(out_similarity, "out_similarity")?;
        let (a, b) = unsafe { (std::slice::from_raw_parts(a, len), std::slice::from_raw_parts(b, len)) };
        *slot = cosine(a, b).map_err(|e| Fail::new(JrStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Pearson chi-square for two click-through proportions, with the verdict at
/// the 0.01 level.
///
/// # Safety
/// Output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn jr_chi_square_two_proportions(
    clicks_a: u64,
    impressions_a: u64,
    clicks_b: u64,
    impressions_b: u64,
    out_statistic: *mut f64,
    out_significant: *mut bool,
) -> JrStatus {
    guard(|| {
        let stat = out(out_statistic, "out_statistic")?;
        let sig = out(out_significant, "out_significant")?;
        let r = chi_square_two_proportions(clicks_a, impressions_a, clicks_b, impressions_b)
            .map_err(|e| Fail::new(JrStatus::InvalidArgument, e))?;
        *stat = r.statistic;
        *sig = r.significant_at_01;
        Ok(())
    })
}
