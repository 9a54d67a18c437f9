//! C ABI for the aerochannel library.
//!
//! Conventions:
//! * Every fallible function returns an [`AeroStatus`] code and writes its
//!   result through out-pointers; `AERO_OK` (0) means success.
//! * On failure, a thread-local message is readable via [`aero_last_error`]
//!   until the next failing call on the same thread.
//! * Channels and simulation estimates are opaque handles created and
//!   destroyed by this library; strings returned through `char **` must be
//!   released with [`aero_string_free`].
//!
//! The matching declarations live in `include/aerochannel.h`, which is
//! maintained by hand and kept in sync by a unit test.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use aerochannel::closed_forms::{
    mi_active_relay, mi_passive_relay, mi_relay_end_to_end, mi_ternary, mi_two_rx, mi_two_tx, mi_z,
    RelayParams, TwoPartyParams, ZParams,
};
use aerochannel::dmc::{self, ChannelDocument, DmcChannel, InfectiousSet, InputDistribution};
use aerochannel::dose::{expected_virions, virion_probability, ViralLoad};
use aerochannel::environment::{builtin, EnvironmentSpec};
use aerochannel::error::Error;
use aerochannel::kinematics::{terminal_velocity, PhysicsConfig};
use aerochannel::mc::{self, TransitionEstimate};

/// Result codes for every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AeroStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Parameter or configuration validation failed.
    Invalid = 3,
    /// I/O or other runtime failure.
    Runtime = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> AeroStatus {
    match err {
        Error::Io(_) | Error::Csv(_) => AeroStatus::Runtime,
        _ => AeroStatus::Invalid,
    }
}

fn fail(err: Error) -> AeroStatus {
    let status = status_for(&err);
    set_last_error(&err.to_string());
    status
}

/// Run `f` with a panic guard; a panic across the FFI boundary would be
/// undefined behavior.
fn guarded(f: impl FnOnce() -> AeroStatus) -> AeroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            AeroStatus::Runtime
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> AeroStatus {
    if out.is_null() {
        set_last_error("output pointer is null");
        return AeroStatus::NullPointer;
    }
    unsafe { out.write(value) };
    AeroStatus::Ok
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, AeroStatus> {
    if ptr.is_null() {
        set_last_error("string pointer is null");
        return Err(AeroStatus::NullPointer);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error("string is not valid UTF-8");
        AeroStatus::InvalidUtf8
    })
}

/// Message describing the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn aero_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Release a string returned through a `char **` out-parameter.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn aero_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

fn string_out(out: *mut *mut c_char, value: String) -> AeroStatus {
    let c = match CString::new(value) {
        Ok(c) => c,
        Err(_) => {
            set_last_error("result contained an interior NUL byte");
            return AeroStatus::Runtime;
        }
    };
    unsafe { write_out(out, c.into_raw()) }
}

// ---------------------------------------------------------------------------
// Closed-form infection rates
// ---------------------------------------------------------------------------

/// Point-to-point infection rate `-q1 p1 log2 p1`, in bits per event.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_z(p1: f64, q1: f64, out: *mut f64) -> AeroStatus {
    guarded(|| match ZParams::new(p1, q1) {
        Ok(params) => unsafe { write_out(out, mi_z(&params)) },
        Err(e) => fail(e),
    })
}

/// Two-transmitter rate: the single-source rates add.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_two_tx(
    p1: f64,
    q1: f64,
    p2: f64,
    q2: f64,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| match TwoPartyParams::new(p1, q1, p2, q2) {
        Ok(params) => unsafe { write_out(out, mi_two_tx(&params)) },
        Err(e) => fail(e),
    })
}

/// Two-receiver rates for a common source.
///
/// # Safety
/// `out_rx1` and `out_rx2` must point to writable doubles.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_two_rx(
    p1: f64,
    q1: f64,
    q2: f64,
    out_rx1: *mut f64,
    out_rx2: *mut f64,
) -> AeroStatus {
    guarded(|| match TwoPartyParams::new(p1, q1, 0.0, q2) {
        Ok(params) => {
            let (r1, r2) = mi_two_rx(&params);
            let status = unsafe { write_out(out_rx1, r1) };
            if status != AeroStatus::Ok {
                return status;
            }
            unsafe { write_out(out_rx2, r2) }
        }
        Err(e) => fail(e),
    })
}

/// Passive relay, second-hop form: `-q2 (p1 q1) log2(p1 q1)`.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_passive_relay(
    p1: f64,
    q1: f64,
    q2: f64,
    out: *mut f64,
) -> AeroStatus {
    guarded(
        || match RelayParams::new(p1, q1, q2, None, false).and_then(|p| mi_passive_relay(&p)) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        },
    )
}

/// Passive relay, end-to-end composed channel: `mi_z(p1, q1 q2)`.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_relay_end_to_end(
    p1: f64,
    q1: f64,
    q2: f64,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        match RelayParams::new(p1, q1, q2, None, false).and_then(|p| mi_relay_end_to_end(&p)) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        }
    })
}

/// Active relay past its incubation time: `-q2 boost log2 boost`.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_active_relay(boost: f64, q2: f64, out: *mut f64) -> AeroStatus {
    guarded(|| {
        match RelayParams::new(0.0, 0.0, q2, Some(boost), true).and_then(|p| mi_active_relay(&p)) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        }
    })
}

/// Ternary-input (aerosol/droplet) rate; requires `p1 + p2 <= 1`.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_mi_ternary(
    p1: f64,
    q1: f64,
    p2: f64,
    q2: f64,
    out: *mut f64,
) -> AeroStatus {
    guarded(
        || match TwoPartyParams::new(p1, q1, p2, q2).and_then(|p| mi_ternary(&p)) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        },
    )
}

// ---------------------------------------------------------------------------
// Dose and kinematics helpers
// ---------------------------------------------------------------------------

/// Probability that a particle of the given diameter (meters) carries at
/// least one virion at the given oral-fluid load (copies per milliliter).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_virion_probability(
    diameter_m: f64,
    copies_per_ml: f64,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        if diameter_m <= 0.0 || diameter_m.is_nan() {
            return fail(Error::InvalidParam(format!(
                "diameter = {diameter_m}, must be > 0"
            )));
        }
        match ViralLoad::new(copies_per_ml) {
            Ok(load) => unsafe { write_out(out, virion_probability(diameter_m, load)) },
            Err(e) => fail(e),
        }
    })
}

/// Expected virion count per particle of the given diameter (meters).
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_expected_virions(
    diameter_m: f64,
    copies_per_ml: f64,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        if diameter_m <= 0.0 || diameter_m.is_nan() {
            return fail(Error::InvalidParam(format!(
                "diameter = {diameter_m}, must be > 0"
            )));
        }
        match ViralLoad::new(copies_per_ml) {
            Ok(load) => unsafe { write_out(out, expected_virions(diameter_m, load)) },
            Err(e) => fail(e),
        }
    })
}

/// Stokes terminal settling speed (m/s) at the default physics constants.
///
/// # Safety
/// `out` must point to a writable double.
#[no_mangle]
pub unsafe extern "C" fn aero_terminal_velocity(diameter_m: f64, out: *mut f64) -> AeroStatus {
    guarded(|| {
        if diameter_m <= 0.0 || diameter_m.is_nan() {
            return fail(Error::InvalidParam(format!(
                "diameter = {diameter_m}, must be > 0"
            )));
        }
        unsafe {
            write_out(
                out,
                terminal_velocity(diameter_m, &PhysicsConfig::default()),
            )
        }
    })
}

// ---------------------------------------------------------------------------
// Channels
// ---------------------------------------------------------------------------

/// Opaque: a validated channel together with its input distribution.
pub struct AeroChannel {
    channel: DmcChannel,
    input: InputDistribution,
}

/// Parse a channel document of the form
/// `{"inputs": [...], "outputs": [...], "p_x": [...], "transitions": [[...], ...]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable. The
/// returned handle must be released with [`aero_channel_free`].
#[no_mangle]
pub unsafe extern "C" fn aero_channel_from_json(
    json: *const c_char,
    out: *mut *mut AeroChannel,
) -> AeroStatus {
    guarded(|| {
        let json = match unsafe { read_str(json) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match ChannelDocument::from_json(json) {
            Ok((channel, input)) => {
                let handle = Box::new(AeroChannel { channel, input });
                unsafe { write_out(out, Box::into_raw(handle)) }
            }
            Err(e) => fail(e),
        }
    })
}

/// Release a channel handle.
///
/// # Safety
/// `ch` must be a handle from [`aero_channel_from_json`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aero_channel_free(ch: *mut AeroChannel) {
    if !ch.is_null() {
        drop(unsafe { Box::from_raw(ch) });
    }
}

unsafe fn channel_ref<'a>(ch: *const AeroChannel) -> Result<&'a AeroChannel, AeroStatus> {
    if ch.is_null() {
        set_last_error("channel handle is null");
        return Err(AeroStatus::NullPointer);
    }
    Ok(unsafe { &*ch })
}

unsafe fn infectious_from_raw(
    members: *const usize,
    len: usize,
    output_len: usize,
) -> Result<InfectiousSet, AeroStatus> {
    let slice = if len == 0 {
        &[][..]
    } else {
        if members.is_null() {
            set_last_error("infectious set pointer is null");
            return Err(AeroStatus::NullPointer);
        }
        unsafe { std::slice::from_raw_parts(members, len) }
    };
    InfectiousSet::new(slice.iter().copied(), output_len).map_err(|e| {
        set_last_error(&e.to_string());
        AeroStatus::Invalid
    })
}

/// Average mutual information of the channel, in bits.
///
/// # Safety
/// `ch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aero_channel_mutual_information(
    ch: *const AeroChannel,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        let h = match unsafe { channel_ref(ch) } {
            Ok(h) => h,
            Err(s) => return s,
        };
        match dmc::mutual_information(&h.channel, &h.input) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        }
    })
}

/// Contribution of one output event to the mutual information.
///
/// # Safety
/// `ch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aero_channel_per_output_mi(
    ch: *const AeroChannel,
    output_index: usize,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        let h = match unsafe { channel_ref(ch) } {
            Ok(h) => h,
            Err(s) => return s,
        };
        match dmc::per_output_mi(&h.channel, &h.input, output_index) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        }
    })
}

/// Infection rate over the given set of infectious output indices.
///
/// # Safety
/// `ch` must be a live handle; `infectious` must point to `len` indices (or
/// be null when `len` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aero_channel_infection_rate(
    ch: *const AeroChannel,
    infectious: *const usize,
    len: usize,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        let h = match unsafe { channel_ref(ch) } {
            Ok(h) => h,
            Err(s) => return s,
        };
        let set = match unsafe { infectious_from_raw(infectious, len, h.channel.output_len()) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match dmc::infection_rate(&h.channel, &h.input, &set) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        }
    })
}

/// Linear infection measure over the given infectious output indices.
///
/// # Safety
/// Same contract as [`aero_channel_infection_rate`].
#[no_mangle]
pub unsafe extern "C" fn aero_channel_linear_measure(
    ch: *const AeroChannel,
    infectious: *const usize,
    len: usize,
    out: *mut f64,
) -> AeroStatus {
    guarded(|| {
        let h = match unsafe { channel_ref(ch) } {
            Ok(h) => h,
            Err(s) => return s,
        };
        let set = match unsafe { infectious_from_raw(infectious, len, h.channel.output_len()) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match dmc::linear_infection_measure(&h.channel, &h.input, &set) {
            Ok(v) => unsafe { write_out(out, v) },
            Err(e) => fail(e),
        }
    })
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

/// Opaque: an aggregated transition estimate plus the environment it came from.
pub struct AeroEstimate {
    env: EnvironmentSpec,
    estimate: TransitionEstimate,
}

/// Run seeded Monte Carlo trials for an environment document and return the
/// aggregated estimate as an opaque handle.
///
/// # Safety
/// `env_json` must be a NUL-terminated string; `out` must be writable. The
/// returned handle must be released with [`aero_estimate_free`].
#[no_mangle]
pub unsafe extern "C" fn aero_estimate_run(
    env_json: *const c_char,
    runs: u32,
    master_seed: u64,
    out: *mut *mut AeroEstimate,
) -> AeroStatus {
    guarded(|| {
        let json = match unsafe { read_str(env_json) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        if runs == 0 {
            return fail(Error::InvalidParam("runs must be >= 1".into()));
        }
        let env = match EnvironmentSpec::from_json(json) {
            Ok(env) => env,
            Err(e) => return fail(e),
        };
        match mc::estimate_transitions(&env, runs, master_seed) {
            Ok(estimate) => {
                let handle = Box::new(AeroEstimate { env, estimate });
                unsafe { write_out(out, Box::into_raw(handle)) }
            }
            Err(e) => fail(e),
        }
    })
}

/// Release an estimate handle.
///
/// # Safety
/// `est` must be a handle from [`aero_estimate_run`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn aero_estimate_free(est: *mut AeroEstimate) {
    if !est.is_null() {
        drop(unsafe { Box::from_raw(est) });
    }
}

/// Transition table as CSV (`receiver_id,d_lo,d_hi,emitted,hits,q_hat,stderr`).
///
/// # Safety
/// `est` must be a live handle; `out` receives a string to release with
/// [`aero_string_free`].
#[no_mangle]
pub unsafe extern "C" fn aero_estimate_transitions_csv(
    est: *const AeroEstimate,
    out: *mut *mut c_char,
) -> AeroStatus {
    guarded(|| {
        if est.is_null() {
            set_last_error("estimate handle is null");
            return AeroStatus::NullPointer;
        }
        let handle = unsafe { &*est };
        string_out(out, handle.estimate.to_csv_string())
    })
}

/// Infection measures versus viral load for one receiver, as CSV
/// (`load,R_bits,linear_measure,phi,n,nR,nPhi`).
///
/// # Safety
/// `est` must be a live handle; `receiver_id` a NUL-terminated string;
/// `loads` must point to `n_loads` doubles; `out` receives a string to
/// release with [`aero_string_free`].
#[no_mangle]
pub unsafe extern "C" fn aero_estimate_rate_curve_csv(
    est: *const AeroEstimate,
    receiver_id: *const c_char,
    loads: *const f64,
    n_loads: usize,
    n_events: u64,
    out: *mut *mut c_char,
) -> AeroStatus {
    guarded(|| {
        if est.is_null() {
            set_last_error("estimate handle is null");
            return AeroStatus::NullPointer;
        }
        if loads.is_null() || n_loads == 0 {
            set_last_error("loads pointer is null or empty");
            return AeroStatus::NullPointer;
        }
        let handle = unsafe { &*est };
        let receiver = match unsafe { read_str(receiver_id) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        let loads = unsafe { std::slice::from_raw_parts(loads, n_loads) };
        match mc::rate_curve(
            &handle.estimate,
            receiver,
            loads,
            &handle.env.emission,
            n_events,
        ) {
            Ok(curve) => string_out(out, curve.to_csv_string(None)),
            Err(e) => fail(e),
        }
    })
}

/// Environment document of a builtin preset (`office`, `corridor`,
/// `classroom`, or `bus`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` receives a string to
/// release with [`aero_string_free`].
#[no_mangle]
pub unsafe extern "C" fn aero_preset_json(
    name: *const c_char,
    out: *mut *mut c_char,
) -> AeroStatus {
    guarded(|| {
        let name = match unsafe { read_str(name) } {
            Ok(s) => s,
            Err(status) => return status,
        };
        match builtin(name) {
            Ok(env) => string_out(out, env.to_json()),
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn cstr(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn z_doc(p1: f64, q1: f64) -> CString {
        cstr(&format!(
            r#"{{"inputs":["0","1"],"outputs":["0","1"],"p_x":[{},{}],
                "transitions":[[1.0,0.0],[{},{}]]}}"#,
            1.0 - p1,
            p1,
            1.0 - q1,
            q1
        ))
    }

    #[test]
    fn closed_forms_compute_through_the_abi() {
        let mut v = 0.0f64;
        unsafe {
            assert_eq!(aero_mi_z(0.5, 0.5, &mut v), AeroStatus::Ok);
            assert!((v - 0.25).abs() < 1e-15);

            assert_eq!(aero_mi_two_tx(0.5, 0.5, 0.0, 0.9, &mut v), AeroStatus::Ok);
            assert!((v - 0.25).abs() < 1e-15);

            let (mut r1, mut r2) = (0.0, 0.0);
            assert_eq!(
                aero_mi_two_rx(0.5, 1.0, 0.5, &mut r1, &mut r2),
                AeroStatus::Ok
            );
            assert!((r1 - 0.5).abs() < 1e-15 && (r2 - 0.25).abs() < 1e-15);

            assert_eq!(aero_mi_passive_relay(0.5, 0.5, 1.0, &mut v), AeroStatus::Ok);
            assert!((v - 0.5).abs() < 1e-15);

            assert_eq!(
                aero_mi_relay_end_to_end(0.5, 0.5, 0.5, &mut v),
                AeroStatus::Ok
            );
            assert!((v - 0.125).abs() < 1e-15);

            assert_eq!(
                aero_mi_active_relay(1.0 / std::f64::consts::E, 1.0, &mut v),
                AeroStatus::Ok
            );
            assert!((v - 0.530738).abs() < 1e-6);

            assert_eq!(aero_mi_ternary(0.2, 0.3, 0.1, 0.6, &mut v), AeroStatus::Ok);
            assert!((v - 0.338632).abs() < 1e-6);
        }
    }

    #[test]
    fn invalid_parameters_set_the_error_message() {
        let mut v = 0.0f64;
        unsafe {
            assert_eq!(aero_mi_z(1.5, 0.5, &mut v), AeroStatus::Invalid);
            let msg = CStr::from_ptr(aero_last_error()).to_str().unwrap();
            assert!(msg.contains("p1"), "message: {msg}");

            // p1 + p2 > 1
            assert_eq!(
                aero_mi_ternary(0.7, 0.5, 0.5, 0.5, &mut v),
                AeroStatus::Invalid
            );
        }
    }

    #[test]
    fn null_pointers_are_rejected_not_dereferenced() {
        unsafe {
            assert_eq!(
                aero_mi_z(0.5, 0.5, ptr::null_mut()),
                AeroStatus::NullPointer
            );
            let mut out: *mut AeroChannel = ptr::null_mut();
            assert_eq!(
                aero_channel_from_json(ptr::null(), &mut out),
                AeroStatus::NullPointer
            );
            let mut v = 0.0f64;
            assert_eq!(
                aero_channel_mutual_information(ptr::null(), &mut v),
                AeroStatus::NullPointer
            );
            aero_channel_free(ptr::null_mut()); // must be a no-op
            aero_estimate_free(ptr::null_mut());
            aero_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn channel_lifecycle_and_measures() {
        unsafe {
            let mut ch: *mut AeroChannel = ptr::null_mut();
            let doc = z_doc(0.5, 1.0);
            assert_eq!(
                aero_channel_from_json(doc.as_ptr(), &mut ch),
                AeroStatus::Ok
            );

            let mut v = 0.0f64;
            assert_eq!(aero_channel_per_output_mi(ch, 1, &mut v), AeroStatus::Ok);
            assert!((v - 0.5).abs() < 1e-15);

            assert_eq!(aero_channel_mutual_information(ch, &mut v), AeroStatus::Ok);
            assert!((v - 1.0).abs() < 1e-12);

            let infectious = [1usize];
            assert_eq!(
                aero_channel_infection_rate(ch, infectious.as_ptr(), 1, &mut v),
                AeroStatus::Ok
            );
            assert!((v - 0.5).abs() < 1e-15);

            assert_eq!(
                aero_channel_linear_measure(ch, infectious.as_ptr(), 1, &mut v),
                AeroStatus::Ok
            );
            assert!((v - 0.5).abs() < 1e-15);

            // Empty infectious set is a valid degenerate case.
            assert_eq!(
                aero_channel_infection_rate(ch, ptr::null(), 0, &mut v),
                AeroStatus::Ok
            );
            assert_eq!(v, 0.0);

            // Out-of-range output index.
            assert_eq!(
                aero_channel_per_output_mi(ch, 5, &mut v),
                AeroStatus::Invalid
            );

            aero_channel_free(ch);
        }
    }

    #[test]
    fn malformed_channel_json_is_invalid() {
        unsafe {
            let mut ch: *mut AeroChannel = ptr::null_mut();
            let doc =
                cstr(r#"{"inputs":["0"],"outputs":["0"],"p_x":[0.5,0.5],"transitions":[[1.0]]}"#);
            assert_eq!(
                aero_channel_from_json(doc.as_ptr(), &mut ch),
                AeroStatus::Invalid
            );
            let msg = CStr::from_ptr(aero_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());
        }
    }

    #[test]
    fn estimate_lifecycle_through_the_abi() {
        // Tiny drag-free scene so the trial is instantaneous.
        let env = r#"{
            "room": {"x": 4.0, "y": 4.0, "ceiling": 3.0},
            "physics": {"g": 0.0, "viscosity": 0.0},
            "emission": {
                "particles_per_event": 100,
                "beam_sigma_deg": 3.0,
                "head_sigma_h_deg": 0.0,
                "head_sigma_v_deg": 0.0,
                "diameter_distribution": [[2e-5, 2e-5, 1.0]]
            },
            "emitters": [{"mouth_position": [1.0, 2.0, 1.5], "facing": [1.0, 0.0, 0.0]}],
            "receivers": [{"id": "r", "center": [2.0, 2.0, 1.5], "radius": 0.1}],
            "n_events": 1,
            "event_interval_s": 60.0
        }"#;
        unsafe {
            let mut est: *mut AeroEstimate = ptr::null_mut();
            let doc = cstr(env);
            assert_eq!(
                aero_estimate_run(doc.as_ptr(), 2, 42, &mut est),
                AeroStatus::Ok
            );

            let mut csv: *mut c_char = ptr::null_mut();
            assert_eq!(aero_estimate_transitions_csv(est, &mut csv), AeroStatus::Ok);
            let text = CStr::from_ptr(csv).to_str().unwrap().to_string();
            assert!(text.starts_with("receiver_id,d_lo,d_hi,emitted,hits,q_hat,stderr"));
            assert!(text.contains("\nr,"));
            aero_string_free(csv);

            let loads = [1e6f64, 1e8, 1e10];
            let receiver = cstr("r");
            let mut curve: *mut c_char = ptr::null_mut();
            assert_eq!(
                aero_estimate_rate_curve_csv(
                    est,
                    receiver.as_ptr(),
                    loads.as_ptr(),
                    loads.len(),
                    240,
                    &mut curve
                ),
                AeroStatus::Ok
            );
            let text = CStr::from_ptr(curve).to_str().unwrap().to_string();
            assert!(text.starts_with("load,R_bits,linear_measure,phi,n,nR,nPhi"));
            assert_eq!(text.lines().count(), 1 + loads.len());
            aero_string_free(curve);

            // Unknown receiver fails cleanly.
            let missing = cstr("ghost");
            let mut bad: *mut c_char = ptr::null_mut();
            assert_eq!(
                aero_estimate_rate_curve_csv(
                    est,
                    missing.as_ptr(),
                    loads.as_ptr(),
                    loads.len(),
                    1,
                    &mut bad
                ),
                AeroStatus::Invalid
            );

            aero_estimate_free(est);
        }
    }

    #[test]
    fn preset_json_round_trips() {
        unsafe {
            let name = cstr("bus");
            let mut out: *mut c_char = ptr::null_mut();
            assert_eq!(aero_preset_json(name.as_ptr(), &mut out), AeroStatus::Ok);
            let text = CStr::from_ptr(out).to_str().unwrap();
            let env = EnvironmentSpec::from_json(text).unwrap();
            assert_eq!(env.room.ceiling, 2.3);
            aero_string_free(out);

            let unknown = cstr("atrium");
            assert_eq!(
                aero_preset_json(unknown.as_ptr(), &mut out),
                AeroStatus::Invalid
            );
        }
    }

    #[test]
    fn header_declares_every_exported_symbol() {
        let header = include_str!("../include/aerochannel.h");
        let source = include_str!("lib.rs");
        let mut exported = Vec::new();
        for chunk in source.split("pub extern \"C\" fn ").skip(1) {
            let name: String = chunk
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            exported.push(name);
        }
        // Also the unsafe variants.
        for chunk in source.split("pub unsafe extern \"C\" fn ").skip(1) {
            let name: String = chunk
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                .collect();
            exported.push(name);
        }
        exported.sort();
        exported.dedup();
        assert!(
            exported.len() >= 20,
            "expected a full surface, got {exported:?}"
        );
        for name in &exported {
            assert!(
                header.contains(&format!("{name}(")),
                "header missing declaration for `{name}`"
            );
        }
    }
}
