//! C ABI for the trustflow engine.
//!
//! Every fallible function returns a [`TfStatus`] and writes results through
//! out-pointers, which are left untouched on failure. The message of the
//! most recent failure on the calling thread is available from
//! [`tf_last_error`]. Handles are opaque; each `*_new` has a matching
//! `*_free` that accepts null.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trustflow::config::ScenarioConfig;
use trustflow::sim::Simulation;
use trustflow::trust::{
    map_combined_trust, social_trust, wallpost_trust, CombinedTrustState, Outcome, TrustOpinion,
};
use trustflow::NodeId;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    Panic = 4,
}

/// Combined trust of one observer in one subject.
pub struct TfTrustState {
    inner: CombinedTrustState,
}

/// A running simulation.
pub struct TfSimulation {
    inner: Simulation,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TfRoundMetrics {
    pub round: u64,
    pub packets_sent: u64,
    pub packets_delivered: u64,
    pub delivery_ratio: f64,
    pub throughput: f64,
    pub avoid_probability: f64,
    pub detected_malicious: u64,
    pub spoofed_fraction: f64,
    pub admissible_paths: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: TfStatus, message: impl Into<String>) -> TfStatus {
    set_error(message);
    status
}

fn guard(f: impl FnOnce() -> TfStatus) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(TfStatus::Panic, "internal panic"),
    }
}

/// Beta opinion of `Beta(alpha, beta)`: belief and uncertainty.
///
/// # Safety
/// `belief` and `uncertainty` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_beta_opinion(
    alpha: f64,
    beta: f64,
    belief: *mut f64,
    uncertainty: *mut f64,
) -> TfStatus {
    guard(|| {
        if belief.is_null() || uncertainty.is_null() {
            return fail(TfStatus::NullPointer, "null output pointer");
        }
        match TrustOpinion::from_beta(alpha, beta) {
            Ok(o) => {
                *belief = o.belief;
                *uncertainty = o.uncertainty;
                TfStatus::Ok
            }
            Err(e) => fail(TfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// MAP trust after `r` positive outcomes out of `n` under a
/// `Beta(prior_alpha, prior_beta)` prior.
///
/// # Safety
/// `out` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_map_trust(
    r: u64,
    n: u64,
    prior_alpha: f64,
    prior_beta: f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return fail(TfStatus::NullPointer, "null output pointer");
        }
        match map_combined_trust(r, n, prior_alpha, prior_beta) {
            Ok(v) => {
                *out = v;
                TfStatus::Ok
            }
            Err(e) => fail(TfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Wall-post trust from post counts, contact count and decay constant.
///
/// # Safety
/// `out` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_wallpost_trust(
    posts_on_j: u64,
    total_posts: u64,
    contacts: u64,
    decay: f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return fail(TfStatus::NullPointer, "null output pointer");
        }
        if posts_on_j > total_posts || !(decay.is_finite() && decay > 0.0) {
            return fail(
                TfStatus::InvalidArgument,
                "need posts_on_j <= total_posts and decay > 0",
            );
        }
        *out = wallpost_trust(posts_on_j, total_posts, contacts, decay);
        TfStatus::Ok
    })
}

/// `eta * wallpost + (1 - eta) * ips`.
///
/// # Safety
/// `out` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_social_trust(
    ips: f64,
    wallpost: f64,
    eta: f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return fail(TfStatus::NullPointer, "null output pointer");
        }
        match social_trust(ips, wallpost, eta) {
            Ok(v) => {
                *out = v;
                TfStatus::Ok
            }
            Err(e) => fail(TfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// New trust state seeded from a social trust value with prior weight
/// `strength` (in observations).
///
/// # Safety
/// `out` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_trust_state_new(
    social: f64,
    strength: f64,
    out: *mut *mut TfTrustState,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return fail(TfStatus::NullPointer, "null output pointer");
        }
        match CombinedTrustState::from_social(social, strength) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(TfTrustState { inner }));
                TfStatus::Ok
            }
            Err(e) => fail(TfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Records one forwarding observation.
///
/// # Safety
/// `state` must come from [`tf_trust_state_new`] and not be freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn tf_trust_state_observe(
    state: *mut TfTrustState,
    forwarded: bool,
) -> TfStatus {
    guard(|| {
        let Some(state) = state.as_mut() else {
            return fail(TfStatus::NullPointer, "null trust state");
        };
        state.inner.observe(if forwarded {
            Outcome::Positive
        } else {
            Outcome::Negative
        });
        TfStatus::Ok
    })
}

/// # Safety
/// `state` must come from [`tf_trust_state_new`] or be null; `out` must be
/// valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_trust_state_value(
    state: *const TfTrustState,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let (Some(state), false) = (state.as_ref(), out.is_null()) else {
            return fail(TfStatus::NullPointer, "null argument");
        };
        *out = state.inner.value;
        TfStatus::Ok
    })
}

/// # Safety
/// `state` must come from [`tf_trust_state_new`] and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn tf_trust_state_free(state: *mut TfTrustState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// New simulation from scenario INI text, or the built-in desk profile
/// when `config` is null.
///
/// # Safety
/// `config` must be a NUL-terminated string or null; `out` must be valid
/// for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_new(
    config: *const c_char,
    out: *mut *mut TfSimulation,
) -> TfStatus {
    guard(|| {
        if out.is_null() {
            return fail(TfStatus::NullPointer, "null output pointer");
        }
        let cfg = if config.is_null() {
            ScenarioConfig::desk()
        } else {
            let Ok(text) = CStr::from_ptr(config).to_str() else {
                return fail(TfStatus::InvalidArgument, "config is not UTF-8");
            };
            match ScenarioConfig::from_ini(text) {
                Ok(c) => c,
                Err(e) => return fail(TfStatus::InvalidArgument, e.to_string()),
            }
        };
        match Simulation::new(&cfg) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(TfSimulation { inner }));
                TfStatus::Ok
            }
            Err(e) => fail(TfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Runs one round and writes its metrics.
///
/// # Safety
/// `sim` must come from [`tf_simulation_new`] or be null; `out` must be
/// valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_step(
    sim: *mut TfSimulation,
    out: *mut TfRoundMetrics,
) -> TfStatus {
    guard(|| {
        let (Some(sim), false) = (sim.as_mut(), out.is_null()) else {
            return fail(TfStatus::NullPointer, "null argument");
        };
        match sim.inner.step() {
            Ok(report) => {
                let m = report.metrics;
                *out = TfRoundMetrics {
                    round: m.round as u64,
                    packets_sent: m.packets_sent,
                    packets_delivered: m.packets_delivered,
                    delivery_ratio: m.delivery_ratio,
                    throughput: m.throughput,
                    avoid_probability: m.avoid_probability,
                    detected_malicious: m.detected_malicious as u64,
                    spoofed_fraction: m.spoofed_fraction,
                    admissible_paths: m.admissible_paths as u64,
                };
                TfStatus::Ok
            }
            Err(e) => fail(TfStatus::DomainError, e.to_string()),
        }
    })
}

/// Current trust of `observer` in `subject`.
///
/// # Safety
/// `sim` must come from [`tf_simulation_new`] or be null; `out` must be
/// valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_trust(
    sim: *const TfSimulation,
    observer: u32,
    subject: u32,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let (Some(sim), false) = (sim.as_ref(), out.is_null()) else {
            return fail(TfStatus::NullPointer, "null argument");
        };
        let n = sim.inner.nodes().len() as u32;
        if observer >= n || subject >= n {
            return fail(
                TfStatus::InvalidArgument,
                format!("node ids must be below {n}"),
            );
        }
        *out = sim.inner.trust(NodeId(observer), NodeId(subject));
        TfStatus::Ok
    })
}

/// # Safety
/// `sim` must come from [`tf_simulation_new`] and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn tf_simulation_free(sim: *mut TfSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Copies the calling thread's last error message into a new string, or
/// writes null if there is none. Free the string with [`tf_string_free`].
///
/// # Safety
/// `out` must be valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn tf_last_error(out: *mut *mut c_char) -> TfStatus {
    if out.is_null() {
        return TfStatus::NullPointer;
    }
    *out = LAST_ERROR
        .with(|e| e.borrow().clone())
        .map_or(ptr::null_mut(), CString::into_raw);
    TfStatus::Ok
}

/// # Safety
/// `s` must come from this library and not be freed already, or be null.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
