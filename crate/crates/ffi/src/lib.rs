//! C ABI over the `cqbc` library.
//!
//! Objects are passed as opaque handles that the caller releases with the
//! matching `*_free` function. Every fallible call returns a [`CqbcStatus`];
//! the message of the last failure on the calling thread is available from
//! [`cqbc_last_error_message`]. Strings returned through `char **` are owned
//! by the caller and released with [`cqbc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cqbc::cqstates::{AuxiliaryModel, CqBroadcastChannel};
use cqbc::quantum::{validate, von_neumann_entropy, CMatrix};
use cqbc::regions::{stepii_system, stepiii_system, thm1_system, InequalitySystem, RatePoint};
use cqbc::sim::{run, SimConfig};
use cqbc::srm::SumDecoderSpec;
use cqbc::Error;

pub const CQBC_THEOREM_THM1: u32 = 0;
pub const CQBC_THEOREM_STEP2: u32 = 1;
pub const CQBC_THEOREM_STEP3: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqbcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Computation = 4,
    Panic = 5,
}

/// Opaque broadcast channel.
pub struct CqbcChannel(CqBroadcastChannel);

/// Opaque auxiliary model.
pub struct CqbcModel(AuxiliaryModel);

/// Opaque inequality system for one channel and model.
pub struct CqbcSystem(InequalitySystem);

/// Parameters of a Monte Carlo run; rates are in bits per channel use.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CqbcSimParams {
    pub n: usize,
    pub delta1: f64,
    pub delta: f64,
    pub tau: f64,
    pub r1: f64,
    pub r: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Per-receiver error rates with 95% Wilson intervals.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CqbcSimResult {
    pub errors: [u64; 3],
    pub rate: [f64; 3],
    pub ci_lo: [f64; 3],
    pub ci_hi: [f64; 3],
    pub mean_weight: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

enum Fail {
    Null(&'static str),
    Utf8,
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

fn status_of(f: Fail) -> CqbcStatus {
    let (status, msg) = match f {
        Fail::Null(what) => (CqbcStatus::NullPointer, format!("null pointer: {what}")),
        Fail::Utf8 => (CqbcStatus::Parse, "string is not valid UTF-8".to_string()),
        Fail::Lib(e) => {
            let s = match e {
                Error::Json(_) => CqbcStatus::Parse,
                ref e if cqbc::cli::is_spec_error(e) => CqbcStatus::InvalidArgument,
                _ => CqbcStatus::Computation,
            };
            (s, e.to_string())
        }
    };
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CqbcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CqbcStatus::Ok,
        Ok(Err(e)) => status_of(e),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CqbcStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Utf8)
}

unsafe fn get<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cqbc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cqbc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn cqbc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Von Neumann entropy in bits of a density matrix given as JSON.
///
/// # Safety
/// `state_json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_entropy(state_json: *const c_char, out_bits: *mut f64) -> CqbcStatus {
    guard(|| {
        let m: CMatrix = serde_json::from_str(text(state_json, "state_json")?).map_err(Error::from)?;
        let v = von_neumann_entropy(&validate(m)?);
        *out(out_bits, "out_bits")? = v;
        Ok(())
    })
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_channel_from_json(json: *const c_char, out_channel: *mut *mut CqbcChannel) -> CqbcStatus {
    guard(|| {
        let slot = out(out_channel, "out_channel")?;
        let ch = CqBroadcastChannel::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(CqbcChannel(ch)));
        Ok(())
    })
}

/// # Safety
/// `channel` must be null or a handle from [`cqbc_channel_from_json`].
#[no_mangle]
pub unsafe extern "C" fn cqbc_channel_free(channel: *mut CqbcChannel) {
    if !channel.is_null() {
        drop(Box::from_raw(channel));
    }
}

/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_model_from_json(json: *const c_char, out_model: *mut *mut CqbcModel) -> CqbcStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let m = AuxiliaryModel::from_json(text(json, "json")?)?;
        *slot = Box::into_raw(Box::new(CqbcModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`cqbc_model_from_json`].
#[no_mangle]
pub unsafe extern "C" fn cqbc_model_free(model: *mut CqbcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds the inequality system of `theorem` (one of `CQBC_THEOREM_*`).
///
/// # Safety
/// Handles must be live and `out_system` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_system_build(
    channel: *const CqbcChannel,
    model: *const CqbcModel,
    theorem: u32,
    out_system: *mut *mut CqbcSystem,
) -> CqbcStatus {
    guard(|| {
        let ch = &get(channel, "channel")?.0;
        let m = &get(model, "model")?.0;
        let slot = out(out_system, "out_system")?;
        let sys = match theorem {
            CQBC_THEOREM_THM1 => thm1_system(m, ch)?,
            CQBC_THEOREM_STEP2 => stepii_system(m, ch)?,
            CQBC_THEOREM_STEP3 => stepiii_system(m, ch)?,
            t => return Err(Error::Parameter(format!("unknown theorem {t}")).into()),
        };
        *slot = Box::into_raw(Box::new(CqbcSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `system` must be null or a handle from [`cqbc_system_build`].
#[no_mangle]
pub unsafe extern "C" fn cqbc_system_free(system: *mut CqbcSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Tests a rate triple under cost budget `tau`. `out_boundary` may be null.
///
/// # Safety
/// `system` must be live and `out_feasible` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_system_admits(
    system: *const CqbcSystem,
    r1: f64,
    r2: f64,
    r3: f64,
    tau: f64,
    out_feasible: *mut bool,
    out_boundary: *mut bool,
) -> CqbcStatus {
    guard(|| {
        let sys = &get(system, "system")?.0;
        let feasible = out(out_feasible, "out_feasible")?;
        let p = RatePoint::new(r1, r2, r3, tau)?;
        *feasible = sys.admits(&p)?;
        if let Some(b) = out_boundary.as_mut() {
            *b = sys.on_boundary(&p)?;
        }
        Ok(())
    })
}

/// Support point of the region in direction `(d1, d2, d3)`. Sets
/// `out_nonempty` to false when the region is empty.
///
/// # Safety
/// `system` must be live, `out_point` must hold three doubles.
#[no_mangle]
pub unsafe extern "C" fn cqbc_system_support(
    system: *const CqbcSystem,
    d1: f64,
    d2: f64,
    d3: f64,
    out_point: *mut f64,
    out_nonempty: *mut bool,
) -> CqbcStatus {
    guard(|| {
        let sys = &get(system, "system")?.0;
        if out_point.is_null() {
            return Err(Fail::Null("out_point"));
        }
        let nonempty = out(out_nonempty, "out_nonempty")?;
        let p = sys.support([d1, d2, d3])?;
        *nonempty = p.is_some();
        std::slice::from_raw_parts_mut(out_point, 3).copy_from_slice(&p.unwrap_or([0.0; 3]));
        Ok(())
    })
}

/// Serializes the system as JSON into a caller-owned string.
///
/// # Safety
/// `system` must be live and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_system_to_json(system: *const CqbcSystem, out_json: *mut *mut c_char) -> CqbcStatus {
    guard(|| {
        let sys = &get(system, "system")?.0;
        *out(out_json, "out_json")? = owned_string(sys.to_json());
        Ok(())
    })
}

/// Runs the SRM sum-decoder lab on a JSON spec and returns the JSON report.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string and `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_srm_lab(spec_json: *const c_char, out_json: *mut *mut c_char) -> CqbcStatus {
    guard(|| {
        let slot = out(out_json, "out_json")?;
        let report = SumDecoderSpec::from_json(text(spec_json, "spec_json")?)?.run()?;
        *slot = owned_string(serde_json::to_string(&report).map_err(Error::from)?);
        Ok(())
    })
}

/// Monte Carlo block-error rates of the binary coset-code scheme.
///
/// # Safety
/// `params` must be readable and `out_result` writable.
#[no_mangle]
pub unsafe extern "C" fn cqbc_simulate(params: *const CqbcSimParams, out_result: *mut CqbcSimResult) -> CqbcStatus {
    guard(|| {
        let p = *get(params, "params")?;
        let slot = out(out_result, "out_result")?;
        let cfg = SimConfig::at_rates(p.n, p.delta1, p.delta, p.tau, p.r1, p.r, p.trials, p.seed);
        let res = run(&cfg)?;
        let mut o = CqbcSimResult { mean_weight: res.mean_weight, ..Default::default() };
        for (j, s) in res.receivers.iter().enumerate() {
            o.errors[j] = s.errors;
            o.rate[j] = s.rate;
            o.ci_lo[j] = s.ci_lo;
            o.ci_hi[j] = s.ci_hi;
        }
        *slot = o;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        unsafe { CStr::from_ptr(cqbc_last_error_message()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn panics_become_status() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let s = guard(|| panic!("boom"));
        std::panic::set_hook(prev);
        assert_eq!(s, CqbcStatus::Panic);
        assert_eq!(message(), "panic: boom");
    }

    #[test]
    fn errors_map_to_codes() {
        assert_eq!(guard(|| Err(Error::Parameter("x".into()).into())), CqbcStatus::InvalidArgument);
        assert_eq!(guard(|| Err(Error::Numerical("x".into()).into())), CqbcStatus::Computation);
        assert_eq!(guard(|| Err(Fail::Utf8)), CqbcStatus::Parse);
        assert_eq!(guard(|| Ok(())), CqbcStatus::Ok);
    }

    #[test]
    fn interior_nul_in_message_is_kept() {
        set_error("a\0b".into());
        assert_eq!(message(), "a b");
    }
}
