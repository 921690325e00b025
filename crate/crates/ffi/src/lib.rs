//! C ABI over the `qutrit` crate.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Every fallible call returns a [`QtStatus`]; on failure
//! [`qt_last_error_message`] describes the error for the calling thread.
//! Complex matrices cross the boundary as 18 doubles: row-major `re, im` pairs.
//!
//! Every pointer argument is either null (reported as
//! [`QtStatus::NullPointer`]) or valid for the documented element count.
//! Handles must come from this library and be freed at most once.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use qutrit::dynamics::FourierVariant;
use qutrit::qmath::{distance_mod_phase, fidelity, from_pairs, purity, to_pairs, CVec3};
use qutrit::synth::named_gate;
use qutrit::tomo::{
    mle_reconstruct, simulate_fractions, MleOptions, Noise, ReadoutSet, TomographyData,
};
use qutrit::{Channel, DensityMatrix3, Error, PulseSequence, Scheme, Unitary3};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotUnitary = 3,
    InvalidDensity = 4,
    Numerical = 5,
    Parse = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtScheme {
    /// Channels A, B, A.
    SingleTone = 0,
    /// Channels AB, B, A.
    DualTone = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtChannel {
    A = 0,
    B = 1,
    Ab = 2,
}

/// One pulse: rotation angle and drive phase in radians.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QtPulse {
    pub channel: QtChannel,
    pub angle: f64,
    pub phase: f64,
}

pub struct QtUnitary(Unitary3);
pub struct QtSequence(PulseSequence);
pub struct QtDensity(DensityMatrix3);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> QtStatus {
    match err {
        Error::NotUnitary { .. } => QtStatus::NotUnitary,
        Error::InvalidDensity(_) | Error::NotHermitian { .. } => QtStatus::InvalidDensity,
        Error::Parse { .. } | Error::Json(_) | Error::Csv(_) => QtStatus::Parse,
        e if e.is_numerical() => QtStatus::Numerical,
        _ => QtStatus::InvalidArgument,
    }
}

struct Fail(QtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

type FfiResult = Result<(), Fail>;

fn guard(f: impl FnOnce() -> FfiResult) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            QtStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QtStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(QtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> FfiResult {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn read_pairs(p: *const f64) -> Result<[[f64; 2]; 9], Fail> {
    if p.is_null() {
        return Err(null("entries"));
    }
    let s = std::slice::from_raw_parts(p, 18);
    Ok(std::array::from_fn(|k| [s[2 * k], s[2 * k + 1]]))
}

unsafe fn write_pairs(out: *mut f64, pairs: &[[f64; 2]; 9]) -> FfiResult {
    if out.is_null() {
        return Err(null("out"));
    }
    let s = std::slice::from_raw_parts_mut(out, 18);
    for (k, p) in pairs.iter().enumerate() {
        s[2 * k] = p[0];
        s[2 * k + 1] = p[1];
    }
    Ok(())
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(QtStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn qt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Validates `entries` (18 doubles) as a unitary.
#[no_mangle]
pub unsafe extern "C" fn qt_unitary_new(entries: *const f64, out: *mut *mut QtUnitary) -> QtStatus {
    guard(|| {
        let u = Unitary3::new(from_pairs(&read_pairs(entries)?))?;
        put(out, boxed(QtUnitary(u)), "out")
    })
}

/// Named gate: `identity`, `fourier`, `fourier-swap12`, `fourier-swap01`,
/// `fourier-swap02`.
#[no_mangle]
pub unsafe extern "C" fn qt_unitary_named(
    name: *const c_char,
    out: *mut *mut QtUnitary,
) -> QtStatus {
    guard(|| {
        let u = named_gate(read_str(name, "name")?)?;
        put(out, boxed(QtUnitary(u)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_unitary_entries(u: *const QtUnitary, out: *mut f64) -> QtStatus {
    guard(|| write_pairs(out, &to_pairs(get(u, "unitary")?.0.matrix())))
}

#[no_mangle]
pub unsafe extern "C" fn qt_unitary_free(u: *mut QtUnitary) {
    free(u)
}

/// `min over theta of max |u - e^{i theta} v|` entrywise.
#[no_mangle]
pub unsafe extern "C" fn qt_distance_mod_phase(
    u: *const QtUnitary,
    v: *const QtUnitary,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let d = distance_mod_phase(&get(u, "u")?.0, &get(v, "v")?.0);
        put(out, d, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_decompose(
    u: *const QtUnitary,
    scheme: QtScheme,
    out: *mut *mut QtSequence,
) -> QtStatus {
    guard(|| {
        let scheme = match scheme {
            QtScheme::SingleTone => Scheme::SingleTone,
            QtScheme::DualTone => Scheme::DualTone,
        };
        let seq = qutrit::decompose(&get(u, "unitary")?.0, scheme)?;
        put(out, boxed(QtSequence(seq)), "out")
    })
}

/// Closed-form Fourier sequence for the given scheme.
#[no_mangle]
pub unsafe extern "C" fn qt_sequence_fourier(
    scheme: QtScheme,
    out: *mut *mut QtSequence,
) -> QtStatus {
    guard(|| {
        let v = match scheme {
            QtScheme::SingleTone => FourierVariant::SingleTone,
            QtScheme::DualTone => FourierVariant::DualTone,
        };
        put(out, boxed(QtSequence(v.sequence())), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_sequence_len(seq: *const QtSequence, out: *mut usize) -> QtStatus {
    guard(|| put(out, get(seq, "sequence")?.0.len(), "out"))
}

#[no_mangle]
pub unsafe extern "C" fn qt_sequence_pulse(
    seq: *const QtSequence,
    index: usize,
    out: *mut QtPulse,
) -> QtStatus {
    guard(|| {
        let s = &get(seq, "sequence")?.0;
        let p = s.pulses.get(index).ok_or_else(|| {
            Fail(
                QtStatus::OutOfRange,
                format!("pulse index {index} out of range for {} pulses", s.len()),
            )
        })?;
        let channel = match p.channel() {
            Channel::A => QtChannel::A,
            Channel::B => QtChannel::B,
            Channel::AB => QtChannel::Ab,
        };
        put(
            out,
            QtPulse {
                channel,
                angle: p.angle(),
                phase: p.phase(),
            },
            "out",
        )
    })
}

/// Trailing virtual phase `(eta, epsilon)` and the global phase.
#[no_mangle]
pub unsafe extern "C" fn qt_sequence_phases(
    seq: *const QtSequence,
    eta: *mut f64,
    epsilon: *mut f64,
    global_phase: *mut f64,
) -> QtStatus {
    guard(|| {
        let s = &get(seq, "sequence")?.0;
        put(eta, s.virtual_phase.eta, "eta")?;
        put(epsilon, s.virtual_phase.epsilon, "epsilon")?;
        put(global_phase, s.global_phase, "global_phase")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_sequence_unitary(
    seq: *const QtSequence,
    out: *mut *mut QtUnitary,
) -> QtStatus {
    guard(|| {
        let u = get(seq, "sequence")?.0.unitary();
        put(out, boxed(QtUnitary(u)), "out")
    })
}

/// Text record of the sequence; release with [`qt_string_free`].
#[no_mangle]
pub unsafe extern "C" fn qt_sequence_to_text(
    seq: *const QtSequence,
    out: *mut *mut c_char,
) -> QtStatus {
    guard(|| {
        let text = get(seq, "sequence")?.0.to_string();
        let c = CString::new(text).expect("sequence text has no NULs");
        put(out, c.into_raw(), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_sequence_from_text(
    text: *const c_char,
    out: *mut *mut QtSequence,
) -> QtStatus {
    guard(|| {
        let seq: PulseSequence = read_str(text, "text")?.parse()?;
        put(out, boxed(QtSequence(seq)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_sequence_free(seq: *mut QtSequence) {
    free(seq)
}

#[no_mangle]
pub unsafe extern "C" fn qt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `|psi><psi|` from 6 doubles (`re, im` per amplitude); `psi` is normalized.
#[no_mangle]
pub unsafe extern "C" fn qt_density_pure(psi: *const f64, out: *mut *mut QtDensity) -> QtStatus {
    guard(|| {
        if psi.is_null() {
            return Err(null("psi"));
        }
        let s = std::slice::from_raw_parts(psi, 6);
        let v = CVec3::new(
            qutrit::qmath::c64(s[0], s[1]),
            qutrit::qmath::c64(s[2], s[3]),
            qutrit::qmath::c64(s[4], s[5]),
        );
        let norm = v.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Fail(
                QtStatus::InvalidArgument,
                "psi has zero or non-finite norm".into(),
            ));
        }
        let rho = DensityMatrix3::pure(&(v / qutrit::qmath::c64(norm, 0.0)))?;
        put(out, boxed(QtDensity(rho)), "out")
    })
}

/// Validates `entries` (18 doubles) as a density matrix.
#[no_mangle]
pub unsafe extern "C" fn qt_density_new(entries: *const f64, out: *mut *mut QtDensity) -> QtStatus {
    guard(|| {
        let rho = DensityMatrix3::new(from_pairs(&read_pairs(entries)?))?;
        put(out, boxed(QtDensity(rho)), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn qt_density_entries(rho: *const QtDensity, out: *mut f64) -> QtStatus {
    guard(|| write_pairs(out, &to_pairs(get(rho, "density")?.0.matrix())))
}

#[no_mangle]
pub unsafe extern "C" fn qt_density_free(rho: *mut QtDensity) {
    free(rho)
}

#[no_mangle]
pub unsafe extern "C" fn qt_purity(rho: *const QtDensity, out: *mut f64) -> QtStatus {
    guard(|| put(out, purity(&get(rho, "density")?.0), "out"))
}

/// `<input| G^dagger rho G |input>`.
#[no_mangle]
pub unsafe extern "C" fn qt_fidelity(
    rho: *const QtDensity,
    gate: *const QtUnitary,
    input: u32,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        if input > 2 {
            return Err(Fail(
                QtStatus::OutOfRange,
                format!("input level {input} out of range"),
            ));
        }
        let f = fidelity(
            &get(rho, "density")?.0,
            &get(gate, "gate")?.0,
            input as usize,
        );
        put(out, f, "out")
    })
}

/// Read-out fractions for the six standard read-outs, 18 doubles ordered by
/// read-out then level. `atoms == 0` gives exact probabilities; otherwise
/// counts are sampled deterministically from `seed`.
#[no_mangle]
pub unsafe extern "C" fn qt_simulate_fractions(
    rho: *const QtDensity,
    atoms: u64,
    seed: u64,
    out: *mut f64,
) -> QtStatus {
    guard(|| {
        let noise = if atoms == 0 {
            Noise::Exact
        } else {
            Noise::Multinomial { atoms, seed }
        };
        let data = simulate_fractions(&get(rho, "density")?.0, &ReadoutSet::standard(), &noise)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = std::slice::from_raw_parts_mut(out, 18);
        for (k, v) in data.fractions.iter().flatten().enumerate() {
            s[k] = *v;
        }
        Ok(())
    })
}

/// Maximum-likelihood reconstruction from 18 fractions (layout of
/// [`qt_simulate_fractions`]). `max_iters == 0` keeps the default budget.
/// `iterations` may be null.
#[no_mangle]
pub unsafe extern "C" fn qt_mle_reconstruct(
    fractions: *const f64,
    max_iters: u32,
    out: *mut *mut QtDensity,
    iterations: *mut u32,
) -> QtStatus {
    guard(|| {
        if fractions.is_null() {
            return Err(null("fractions"));
        }
        let s = std::slice::from_raw_parts(fractions, 18);
        let f: [[f64; 3]; 6] = std::array::from_fn(|r| std::array::from_fn(|j| s[3 * r + j]));
        let data = TomographyData::new(f, None, 0)?;
        let mut opts = MleOptions::default();
        if max_iters > 0 {
            opts.max_iters = max_iters as usize;
        }
        let res = mle_reconstruct(&data, &ReadoutSet::standard(), &opts)?;
        if !iterations.is_null() {
            iterations.write(res.iterations.min(u32::MAX as usize) as u32);
        }
        put(out, boxed(QtDensity(res.rho)), "out")
    })
}
