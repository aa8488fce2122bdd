//! C ABI over `obslearn`. Objects cross the boundary as opaque handles owned by the caller
//! and released with the matching `*_free`. Every fallible call returns an [`ObsStatus`];
//! on failure [`obs_last_error`] describes the cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use obslearn::clockham::verify_perfect_transfer;
use obslearn::harness::{run_experiment, ExperimentConfig};
use obslearn::learners::lasso::{lasso_train, project_l1, LassoConfig, LassoModel};
use obslearn::learners::sample_complexity;
use obslearn::rng::stream_rng;
use obslearn::{Circuit, StateVector, C64};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObsStatus {
    Ok = 0,
    NullPointer = 1,
    /// Bad argument, malformed input text or a resource limit.
    Invalid = 2,
    /// A verification ran but its check failed.
    CheckFailed = 3,
    /// Numerical or internal failure.
    Internal = 4,
    Panic = 5,
}

pub struct ObsCircuit(Circuit);

pub struct ObsLassoModel(LassoModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(e: obslearn::Error) -> ObsStatus {
    let status = if e.is_validation() {
        ObsStatus::Invalid
    } else {
        ObsStatus::Internal
    };
    set_error(e.to_string());
    status
}

/// Runs `f`, turning panics into [`ObsStatus::Panic`].
fn guard(f: impl FnOnce() -> ObsStatus) -> ObsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ObsStatus::Panic
        }
    }
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

macro_rules! nonnull {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            set_error(concat!(stringify!($p), " is null"));
            return ObsStatus::NullPointer;
        })+
    };
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, ObsStatus> {
    CStr::from_ptr(p).to_str().map_err(|e| {
        set_error(format!("argument is not UTF-8: {e}"));
        ObsStatus::Invalid
    })
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn obs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn obs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn obs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a circuit from its text form.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn obs_circuit_parse(text: *const c_char, out: *mut *mut ObsCircuit) -> ObsStatus {
    guard(|| {
        nonnull!(text, out);
        let text = match str_arg(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let c = tri!(Circuit::parse(text));
        *out = Box::into_raw(Box::new(ObsCircuit(c)));
        ObsStatus::Ok
    })
}

/// Random circuit of `gates` gates on `n` qubits, seeded.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn obs_circuit_random(n: usize, gates: usize, seed: u64, out: *mut *mut ObsCircuit) -> ObsStatus {
    guard(|| {
        nonnull!(out);
        let c = tri!(Circuit::random(n, gates, &mut stream_rng(seed, 0)));
        *out = Box::into_raw(Box::new(ObsCircuit(c)));
        ObsStatus::Ok
    })
}

/// # Safety
/// `c` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn obs_circuit_free(c: *mut ObsCircuit) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_circuit_n_qubits(c: *const ObsCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.0.n_qubits())
}

/// # Safety
/// `c` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_circuit_len(c: *const ObsCircuit) -> usize {
    c.as_ref().map_or(0, |c| c.0.len())
}

/// Text form of the circuit; free with [`obs_string_free`].
///
/// # Safety
/// `c` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn obs_circuit_to_string(c: *const ObsCircuit, out: *mut *mut c_char) -> ObsStatus {
    guard(|| {
        nonnull!(c, out);
        *out = CString::new((*c).0.to_string()).unwrap().into_raw();
        ObsStatus::Ok
    })
}

/// Perfect-transfer check of the weighted clock Hamiltonian on the input state
/// `re + i·im` (length `2^n`, normalized here). Writes the fidelity with `U|ψ⟩|k⟩`;
/// returns [`ObsStatus::CheckFailed`] when it is below `1 − tol`.
///
/// # Safety
/// `re` and `im` must hold `len` doubles; `fidelity` must be writable.
#[no_mangle]
pub unsafe extern "C" fn obs_verify_transfer(
    c: *const ObsCircuit,
    re: *const f64,
    im: *const f64,
    len: usize,
    tol: f64,
    fidelity: *mut f64,
) -> ObsStatus {
    guard(|| {
        nonnull!(c, re, im, fidelity);
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let amps = re.iter().zip(im).map(|(a, b)| C64::new(*a, *b)).collect();
        let psi = tri!(StateVector::normalized(amps));
        let rep = tri!(verify_perfect_transfer(&(*c).0, &psi, tol));
        *fidelity = rep.fidelity;
        if rep.pass {
            ObsStatus::Ok
        } else {
            set_error(format!("fidelity {} below 1 - {tol}", rep.fidelity));
            ObsStatus::CheckFailed
        }
    })
}

/// LASSO training-set size for budget `b`, `m` features, confidence `delta`, slack `eps3`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn obs_sample_complexity(b: f64, m: usize, delta: f64, eps3: f64, out: *mut u64) -> ObsStatus {
    guard(|| {
        nonnull!(out);
        *out = tri!(sample_complexity(b, m, delta, eps3));
        ObsStatus::Ok
    })
}

/// Euclidean projection of `v` onto the ℓ1 ball of radius `b`, in place.
///
/// # Safety
/// `v` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn obs_project_l1(v: *mut f64, len: usize, b: f64) -> ObsStatus {
    guard(|| {
        nonnull!(v);
        let v = std::slice::from_raw_parts_mut(v, len);
        let p = tri!(project_l1(v, b));
        v.copy_from_slice(&p);
        ObsStatus::Ok
    })
}

/// Trains an ℓ1-constrained linear model on `n` rows of `m` features (row-major).
///
/// # Safety
/// `features` must hold `n·m` doubles, `labels` `n` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn obs_lasso_train(
    features: *const f64,
    labels: *const f64,
    n: usize,
    m: usize,
    b: f64,
    eps3: f64,
    out: *mut *mut ObsLassoModel,
) -> ObsStatus {
    guard(|| {
        nonnull!(features, labels, out);
        if m == 0 {
            set_error("feature count must be positive");
            return ObsStatus::Invalid;
        }
        let flat = std::slice::from_raw_parts(features, n * m);
        let rows: Vec<Vec<f64>> = flat.chunks(m).map(<[f64]>::to_vec).collect();
        let y = std::slice::from_raw_parts(labels, n);
        let cfg = LassoConfig {
            b,
            eps3,
            ..LassoConfig::default()
        };
        let model = tri!(lasso_train(&rows, y, &cfg));
        *out = Box::into_raw(Box::new(ObsLassoModel(model)));
        ObsStatus::Ok
    })
}

/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn obs_lasso_free(model: *mut ObsLassoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of weights in the model.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn obs_lasso_dim(model: *const ObsLassoModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.w.len())
}

/// Copies the weights into `w` (capacity `len`, at least [`obs_lasso_dim`]).
///
/// # Safety
/// `model` must be live and `w` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn obs_lasso_weights(model: *const ObsLassoModel, w: *mut f64, len: usize) -> ObsStatus {
    guard(|| {
        nonnull!(model, w);
        let src = &(*model).0.w;
        if len < src.len() {
            set_error(format!("buffer holds {len} weights, model has {}", src.len()));
            return ObsStatus::Invalid;
        }
        std::slice::from_raw_parts_mut(w, src.len()).copy_from_slice(src);
        ObsStatus::Ok
    })
}

/// Training MSE of the model.
///
/// # Safety
/// `model` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn obs_lasso_train_mse(model: *const ObsLassoModel, out: *mut f64) -> ObsStatus {
    guard(|| {
        nonnull!(model, out);
        *out = (*model).0.diagnostics.train_mse;
        ObsStatus::Ok
    })
}

/// Predicts `w·φ` for one feature vector of length `len`.
///
/// # Safety
/// `model` must be live, `phi` hold `len` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn obs_lasso_predict(model: *const ObsLassoModel, phi: *const f64, len: usize, out: *mut f64) -> ObsStatus {
    guard(|| {
        nonnull!(model, phi, out);
        *out = tri!((*model).0.predict(std::slice::from_raw_parts(phi, len)));
        ObsStatus::Ok
    })
}

/// Runs an experiment from a JSON config. Writes the deterministic report payload as JSON;
/// free it with [`obs_string_free`]. Returns [`ObsStatus::CheckFailed`] (with the report
/// still written) when the experiment does not pass.
///
/// # Safety
/// `config_json` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn obs_run_experiment(config_json: *const c_char, out: *mut *mut c_char) -> ObsStatus {
    guard(|| {
        nonnull!(config_json, out);
        *out = ptr::null_mut();
        let text = match str_arg(config_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg: ExperimentConfig = tri!(serde_json::from_str(text).map_err(obslearn::Error::from));
        tri!(cfg.validate());
        let report = tri!(run_experiment(&cfg));
        let json = tri!(report.payload_json());
        *out = CString::new(json).unwrap().into_raw();
        if report.payload.pass {
            ObsStatus::Ok
        } else {
            set_error(format!("{}/{} repetitions passed", report.payload.pass_count, report.payload.runs.len()));
            ObsStatus::CheckFailed
        }
    })
}
