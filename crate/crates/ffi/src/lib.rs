//! C interface to the voting, baseline, diversity and cost routines.
//!
//! Every entry point returns a [`BendStatus`]. On failure the message is
//! kept per thread and can be read with [`bend_last_error`]. Handles are
//! opaque and must be released with [`bend_predictions_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use bend_core::analysis::{cost_model, diversity_between, diversity_within, wrong_set_iou, CostModelInputs};
use bend_core::data::load_predictions;
use bend_core::ensemble::{abend, abend_trials, baseline_stats, sbend, EnsembleResult, PredictionMatrix};
use bend_core::BendError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BendStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Shape = 3,
    Input = 4,
    Config = 5,
    Format = 6,
    Corrupt = 7,
    Version = 8,
    Io = 9,
    Numeric = 10,
    UndefinedBreakEven = 11,
    MissingTarget = 12,
    Panic = 13,
}

/// Prediction matrix plus an optional ground-truth row.
pub struct BendPredictions {
    matrix: PredictionMatrix,
    target: Option<Vec<usize>>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BendBaseline {
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub potential: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BendTrials {
    pub mean: f64,
    pub std: f64,
}

/// `d_o` is NaN when no second matrix was given.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BendDiversity {
    pub d_i_raw: f64,
    pub d_i_rate: f64,
    pub d_o: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BendIou {
    pub allway: f64,
    pub pairwise_mean: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BendCostInputs {
    pub k_pre: u64,
    pub k: u64,
    pub t_orge: f64,
    pub t_ate: f64,
    pub t_ddpm: f64,
    pub t_sgen: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BendCostEstimate {
    pub t_diff: f64,
    pub t_trad: f64,
    pub breakeven_m: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(BendStatus, String);

impl From<BendError> for Failure {
    fn from(e: BendError) -> Self {
        let status = match &e {
            BendError::Shape(_) => BendStatus::Shape,
            BendError::Input(_) => BendStatus::Input,
            BendError::Config(_) => BendStatus::Config,
            BendError::Format { .. } => BendStatus::Format,
            BendError::Corrupt { .. } => BendStatus::Corrupt,
            BendError::Version { .. } => BendStatus::Version,
            BendError::Io { .. } => BendStatus::Io,
            BendError::Numeric(_) => BendStatus::Numeric,
            BendError::UndefinedBreakEven(_) => BendStatus::UndefinedBreakEven,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BendStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            BendStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            BendStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(BendStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn labels(p: *const u32, len: usize, what: &str) -> Result<Vec<usize>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len).iter().map(|&v| v as usize).collect())
}

fn target(h: &BendPredictions) -> Result<&[usize], Failure> {
    h.target.as_deref().ok_or_else(|| {
        Failure(
            BendStatus::MissingTarget,
            "no target labels; call bend_predictions_set_target".into(),
        )
    })
}

fn label_u32(v: usize) -> Result<u32, Failure> {
    u32::try_from(v).map_err(|_| Failure(BendStatus::Input, format!("label {v} does not fit in 32 bits")))
}

unsafe fn write_vote(r: EnsembleResult, inferred: *mut u32, accuracy: *mut f64) -> Result<(), Failure> {
    *out(accuracy, "accuracy")? = r.accuracy;
    if !inferred.is_null() {
        let dst = std::slice::from_raw_parts_mut(inferred, r.inferred.len());
        for (d, &v) in dst.iter_mut().zip(&r.inferred) {
            *d = label_u32(v)?;
        }
    }
    Ok(())
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bend_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a handle from `m * n` row-major labels.
///
/// # Safety
/// `preds` must point to `m * n` readable values and `out_handle` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn bend_predictions_new(
    m: usize,
    n: usize,
    preds: *const u32,
    out_handle: *mut *mut BendPredictions,
) -> BendStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        let len = m
            .checked_mul(n)
            .ok_or_else(|| Failure(BendStatus::Input, "m * n overflows".into()))?;
        let matrix = PredictionMatrix::new(m, n, labels(preds, len, "preds")?)?;
        *slot = Box::into_raw(Box::new(BendPredictions { matrix, target: None }));
        Ok(())
    })
}

/// Reads a predictions CSV. A `target` row, if present, becomes the target.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_predictions_load(
    path: *const c_char,
    out_handle: *mut *mut BendPredictions,
) -> BendStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure(BendStatus::InvalidUtf8, "path is not valid UTF-8".into()))?;
        let loaded = load_predictions(Path::new(path))?;
        *slot = Box::into_raw(Box::new(BendPredictions {
            matrix: loaded.matrix,
            target: loaded.target,
        }));
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `handle` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bend_predictions_free(handle: *mut BendPredictions) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be live; `m` and `n` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_predictions_shape(
    handle: *const BendPredictions,
    m: *mut usize,
    n: *mut usize,
) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        *out(m, "m")? = h.matrix.m();
        *out(n, "n")? = h.matrix.n();
        Ok(())
    })
}

/// Replaces the target row; `len` must equal the sample count.
///
/// # Safety
/// `handle` must be live and `target` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn bend_predictions_set_target(
    handle: *mut BendPredictions,
    target: *const u32,
    len: usize,
) -> BendStatus {
    guard(|| {
        let h = out(handle, "handle")?;
        if len != h.matrix.n() {
            return Err(Failure(
                BendStatus::Shape,
                format!("target has {len} labels but the matrix has {} samples", h.matrix.n()),
            ));
        }
        h.target = Some(labels(target, len, "target")?);
        Ok(())
    })
}

/// Majority vote. `inferred` may be null; otherwise it receives `n` labels.
///
/// # Safety
/// `handle` must be live, `accuracy` writable, and `inferred` null or
/// writable for `n` values.
#[no_mangle]
pub unsafe extern "C" fn bend_sbend(
    handle: *const BendPredictions,
    inferred: *mut u32,
    accuracy: *mut f64,
) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        write_vote(sbend(&h.matrix, target(h)?)?, inferred, accuracy)
    })
}

/// One stochastic vote drawn with `seed`.
///
/// # Safety
/// Same contract as [`bend_sbend`].
#[no_mangle]
pub unsafe extern "C" fn bend_abend(
    handle: *const BendPredictions,
    seed: u64,
    inferred: *mut u32,
    accuracy: *mut f64,
) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        write_vote(abend(&h.matrix, target(h)?, seed)?, inferred, accuracy)
    })
}

/// Mean and population std of `trials` stochastic votes seeded
/// `seed, seed + 1, ...`.
///
/// # Safety
/// `handle` must be live and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_abend_trials(
    handle: *const BendPredictions,
    seed: u64,
    trials: usize,
    result: *mut BendTrials,
) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let slot = out(result, "result")?;
        let t = abend_trials(&h.matrix, target(h)?, seed, trials)?;
        *slot = BendTrials {
            mean: t.mean,
            std: t.std,
        };
        Ok(())
    })
}

/// # Safety
/// `handle` must be live and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_baseline(handle: *const BendPredictions, result: *mut BendBaseline) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let slot = out(result, "result")?;
        let s = baseline_stats(&h.matrix, target(h)?)?;
        *slot = BendBaseline {
            max: s.max,
            mean: s.mean,
            median: s.median,
            potential: s.potential,
        };
        Ok(())
    })
}

/// Within-set diversity of `handle`, and between-set diversity against
/// `other` when it is not null.
///
/// # Safety
/// `handle` must be live, `other` null or live, `result` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_diversity(
    handle: *const BendPredictions,
    other: *const BendPredictions,
    result: *mut BendDiversity,
) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let slot = out(result, "result")?;
        let w = diversity_within(&h.matrix)?;
        let d_o = match other.as_ref() {
            Some(o) => diversity_between(&h.matrix, &o.matrix)?,
            None => f64::NAN,
        };
        *slot = BendDiversity {
            d_i_raw: w.raw,
            d_i_rate: w.rate,
            d_o,
        };
        Ok(())
    })
}

/// Overlap of the classifiers' misclassified-sample sets.
///
/// # Safety
/// `handle` must be live and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_wrong_set_iou(handle: *const BendPredictions, result: *mut BendIou) -> BendStatus {
    guard(|| {
        let h = deref(handle, "handle")?;
        let slot = out(result, "result")?;
        let iou = wrong_set_iou(&h.matrix, target(h)?)?;
        *slot = BendIou {
            allway: iou.allway,
            pairwise_mean: iou.pairwise_mean,
        };
        Ok(())
    })
}

/// Training-time estimates for `m` classifiers and the break-even size.
///
/// # Safety
/// `inputs` must be readable and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn bend_cost_model(
    inputs: *const BendCostInputs,
    m: u64,
    result: *mut BendCostEstimate,
) -> BendStatus {
    guard(|| {
        let i = deref(inputs, "inputs")?;
        let slot = out(result, "result")?;
        let e = cost_model(
            &CostModelInputs {
                k_pre: i.k_pre,
                k: i.k,
                t_orge: i.t_orge,
                t_ate: i.t_ate,
                t_ddpm: i.t_ddpm,
                t_sgen: i.t_sgen,
            },
            m,
        )?;
        *slot = BendCostEstimate {
            t_diff: e.t_diff,
            t_trad: e.t_trad,
            breakeven_m: e.breakeven_m,
        };
        Ok(())
    })
}

/// Reference measurements used by the `cost` command when no inputs are given.
#[no_mangle]
pub extern "C" fn bend_cost_reference() -> BendCostInputs {
    let r = CostModelInputs::REFERENCE;
    BendCostInputs {
        k_pre: r.k_pre,
        k: r.k,
        t_orge: r.t_orge,
        t_ate: r.t_ate,
        t_ddpm: r.t_ddpm,
        t_sgen: r.t_sgen,
    }
}
