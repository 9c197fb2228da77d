//! C ABI for `amicus-ip`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Fallible functions return an
//! [`AmipStatus`] and write results through out-pointers; on failure the
//! message is available from [`amip_last_error`] on the same thread. Panics
//! never unwind into the caller.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use amicus_ip::corpus::load_corpus;
use amicus_ip::counterfactual::{drop_amici_predict, roster, Keep};
use amicus_ip::ipmodel::{putil_factor, vote_logit, vote_prob};
use amicus_ip::predict::pairwise_partition_accuracy;
use amicus_ip::{rng, sampler, CaseParams, Corpus, Error, FitResult, Hyperparams, JusticeParams, Mixtures, ModelKind};
use amicus_ip::{SamplerConfig, Side};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmipStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Numeric = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmipSide {
    Petitioner = 0,
    Respondent = 1,
}

impl From<AmipSide> for Side {
    fn from(s: AmipSide) -> Self {
        match s {
            AmipSide::Petitioner => Side::Petitioner,
            AmipSide::Respondent => Side::Respondent,
        }
    }
}

impl From<Side> for AmipSide {
    fn from(s: Side) -> Self {
        match s {
            Side::Petitioner => AmipSide::Petitioner,
            Side::Respondent => AmipSide::Respondent,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmipModelKind {
    Unidimensional = 0,
    Issues = 1,
    Amici = 2,
    RandomUtility = 3,
}

impl From<AmipModelKind> for ModelKind {
    fn from(k: AmipModelKind) -> Self {
        match k {
            AmipModelKind::Unidimensional => ModelKind::Unidimensional,
            AmipModelKind::Issues => ModelKind::Issues,
            AmipModelKind::Amici => ModelKind::Amici,
            AmipModelKind::RandomUtility => ModelKind::RandomUtility,
        }
    }
}

impl From<ModelKind> for AmipModelKind {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Unidimensional => AmipModelKind::Unidimensional,
            ModelKind::Issues => AmipModelKind::Issues,
            ModelKind::Amici => AmipModelKind::Amici,
            ModelKind::RandomUtility => AmipModelKind::RandomUtility,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmipKeep {
    All = 0,
    None = 1,
    PetitionerOnly = 2,
    RespondentOnly = 3,
}

impl From<AmipKeep> for Keep {
    fn from(k: AmipKeep) -> Self {
        match k {
            AmipKeep::All => Keep::All,
            AmipKeep::None => Keep::None,
            AmipKeep::PetitionerOnly => Keep::PetitionerOnly,
            AmipKeep::RespondentOnly => Keep::RespondentOnly,
        }
    }
}

/// Per-case parameters: popularity, polarity, and the two amicus polarities.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmipCaseParams {
    pub a: f64,
    pub b: f64,
    pub c_p: f64,
    pub c_r: f64,
}

impl From<AmipCaseParams> for CaseParams {
    fn from(k: AmipCaseParams) -> Self {
        CaseParams::new(k.a, k.b, k.c_p, k.c_r)
    }
}

/// Opaque corpus handle.
pub struct AmipCorpus(Corpus);
/// Opaque topic-mixture handle.
pub struct AmipMixtures(Mixtures);
/// Opaque fitted-model handle.
pub struct AmipFit(FitResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

struct Failure(AmipStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => AmipStatus::Io,
            Error::Numeric(_) => AmipStatus::Numeric,
            _ => AmipStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AmipStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic for [`amip_last_error`].
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AmipStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AmipStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            AmipStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(AmipStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn opt_slice<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    (!p.is_null()).then(|| slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn boxed<T>(out: &mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full message length.
/// Passing a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn amip_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn amip_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a JSONL corpus.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amip_corpus_load(path: *const c_char, out: *mut *mut AmipCorpus) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let corpus = load_corpus(str_arg(path, "path")?)?;
        boxed(out, AmipCorpus(corpus));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle from [`amip_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn amip_corpus_free(corpus: *mut AmipCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn amip_corpus_num_cases(corpus: *const AmipCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.cases.len())
}

/// # Safety
/// `corpus` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn amip_corpus_num_justices(corpus: *const AmipCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.justices.len())
}

/// Loads topic mixtures written by `lda-infer`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amip_mixtures_load(path: *const c_char, out: *mut *mut AmipMixtures) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = Mixtures::load(str_arg(path, "path")?)?;
        boxed(out, AmipMixtures(m));
        Ok(())
    })
}

/// # Safety
/// `mixtures` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn amip_mixtures_free(mixtures: *mut AmipMixtures) {
    if !mixtures.is_null() {
        drop(Box::from_raw(mixtures));
    }
}

/// Loads a fit written by the `fit` subcommand.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amip_fit_load(path: *const c_char, out: *mut *mut AmipFit) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let f = FitResult::load(str_arg(path, "path")?)?;
        boxed(out, AmipFit(f));
        Ok(())
    })
}

/// Writes a fit as JSON.
///
/// # Safety
/// `fit` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn amip_fit_save(fit: *const AmipFit, path: *const c_char) -> AmipStatus {
    guard(|| {
        handle(fit, "fit")?.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Fits a model with default hyperparameters and sampler settings, except
/// for the seed and the number of Gibbs iterations.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn amip_fit_run(
    corpus: *const AmipCorpus,
    mixtures: *const AmipMixtures,
    kind: AmipModelKind,
    gibbs_iters: usize,
    seed: u64,
    out: *mut *mut AmipFit,
) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let corpus = &handle(corpus, "corpus")?.0;
        let mixtures = &handle(mixtures, "mixtures")?.0;
        let cfg = SamplerConfig { gibbs_iters, seed, ..SamplerConfig::default() };
        let f = sampler::fit(corpus, mixtures, kind.into(), &Hyperparams::default(), &cfg)?;
        boxed(out, AmipFit(f));
        Ok(())
    })
}

/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn amip_fit_free(fit: *mut AmipFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn amip_fit_num_justices(fit: *const AmipFit) -> usize {
    fit.as_ref().map_or(0, |f| f.0.psi_hat.len())
}

/// # Safety
/// `fit` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn amip_fit_kind(fit: *const AmipFit, out: *mut AmipModelKind) -> AmipStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(fit, "fit")?.0.kind.into();
        Ok(())
    })
}

/// Copies justice `justice`'s ideal point into `out` (length `len`, which
/// must equal the fit's dimension).
///
/// # Safety
/// `fit` must be a live handle; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn amip_fit_ideal_point(fit: *const AmipFit, justice: usize, out: *mut f64, len: usize) -> AmipStatus {
    guard(|| {
        let f = &handle(fit, "fit")?.0;
        let psi = &f
            .psi_hat
            .get(justice)
            .ok_or_else(|| Failure(AmipStatus::InvalidArgument, format!("no justice {justice}")))?
            .psi;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != psi.len() {
            return Err(Error::DimensionMismatch { expected: psi.len(), got: len }.into());
        }
        slice::from_raw_parts_mut(out, len).copy_from_slice(psi);
        Ok(())
    })
}

/// Vote logit for one justice. `psi` has length 1 for the unidimensional
/// kind and `dim` otherwise; `delta_p`/`delta_r` may be null when that
/// side filed no briefs.
///
/// # Safety
/// Non-null pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn amip_vote_logit(
    psi: *const f64,
    psi_len: usize,
    theta: *const f64,
    delta_p: *const f64,
    delta_r: *const f64,
    dim: usize,
    kappa: AmipCaseParams,
    kind: AmipModelKind,
    out: *mut f64,
) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let psi = slice_arg(psi, psi_len, "psi")?;
        let theta = slice_arg(theta, dim, "theta")?;
        *out = vote_logit(psi, theta, opt_slice(delta_p, dim), opt_slice(delta_r, dim), &kappa.into(), kind.into())?;
        Ok(())
    })
}

/// Probability of `vote` given a logit.
#[no_mangle]
pub extern "C" fn amip_vote_prob(logit: f64, vote: AmipSide) -> f64 {
    vote_prob(logit, vote.into())
}

/// Random-utility factor of a brief mixture. `psi_all` holds
/// `num_justices` row-major ideal points of length `dim`.
///
/// # Safety
/// Pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn amip_putil_factor(
    psi_all: *const f64,
    num_justices: usize,
    theta: *const f64,
    delta: *const f64,
    dim: usize,
    kappa: AmipCaseParams,
    side: AmipSide,
    xi: f64,
    out: *mut f64,
) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let flat = slice_arg(psi_all, num_justices * dim, "psi_all")?;
        let psi: Vec<JusticeParams> = flat.chunks(dim.max(1)).map(|c| JusticeParams::new(c.to_vec())).collect();
        let theta = slice_arg(theta, dim, "theta")?;
        let delta = slice_arg(delta, dim, "delta")?;
        *out = putil_factor(&psi, theta, delta, &kappa.into(), side.into(), xi)?;
        Ok(())
    })
}

/// Pairwise partition accuracy between two vote vectors over the same `n`
/// justices.
///
/// # Safety
/// `pred` and `actual` must hold `n` entries.
#[no_mangle]
pub unsafe extern "C" fn amip_pairwise_accuracy(
    pred: *const AmipSide,
    actual: *const AmipSide,
    n: usize,
    out: *mut f64,
) -> AmipStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let to_map = |s: &[AmipSide]| s.iter().enumerate().map(|(j, &v)| (j, Side::from(v))).collect();
        let p = to_map(slice_arg(pred, n, "pred")?);
        let a = to_map(slice_arg(actual, n, "actual")?);
        *out = pairwise_partition_accuracy(&p, &a)?;
        Ok(())
    })
}

/// Predicts the vote partition of a case over the fit's full roster.
/// `partition` and `marginals` must each hold `n` entries, where `n` is the
/// fit's number of justices; `marginals` may be null.
///
/// # Safety
/// Handles must be live; `case_id` NUL-terminated; arrays sized `n`.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn amip_predict_case(
    fit: *const AmipFit,
    mixtures: *const AmipMixtures,
    case_id: *const c_char,
    keep: AmipKeep,
    samples: usize,
    seed: u64,
    partition: *mut AmipSide,
    marginals: *mut f64,
    n: usize,
) -> AmipStatus {
    guard(|| {
        let fit = &handle(fit, "fit")?.0;
        let mixtures = &handle(mixtures, "mixtures")?.0;
        let id = str_arg(case_id, "case_id")?;
        let mix = mixtures
            .get(id)
            .ok_or_else(|| Failure(AmipStatus::InvalidArgument, format!("case {id:?} not in mixtures")))?;
        if partition.is_null() {
            return Err(null("partition"));
        }
        let justices = roster(fit);
        if n != justices.len() {
            return Err(Error::DimensionMismatch { expected: justices.len(), got: n }.into());
        }
        let mut r = rng::seeded(seed);
        let pred = drop_amici_predict(fit, mix, &justices, keep.into(), samples, &mut r)?;
        let part = slice::from_raw_parts_mut(partition, n);
        for (slot, side) in part.iter_mut().zip(pred.partition.values()) {
            *slot = (*side).into();
        }
        if !marginals.is_null() {
            let m = slice::from_raw_parts_mut(marginals, n);
            for (slot, p) in m.iter_mut().zip(pred.marginals.values()) {
                *slot = *p;
            }
        }
        Ok(())
    })
}
