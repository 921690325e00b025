use std::ffi::{CStr, CString};
use std::ptr;

use qutrit_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(qt_last_error_message()) }
        .to_str()
        .unwrap()
        .to_owned()
}

#[test]
fn decompose_and_recompose_through_the_abi() {
    unsafe {
        let name = CString::new("fourier").unwrap();
        let mut u = ptr::null_mut();
        assert_eq!(qt_unitary_named(name.as_ptr(), &mut u), QtStatus::Ok);
        for scheme in [QtScheme::SingleTone, QtScheme::DualTone] {
            let mut seq = ptr::null_mut();
            assert_eq!(qt_decompose(u, scheme, &mut seq), QtStatus::Ok);
            let mut n = 0usize;
            assert_eq!(qt_sequence_len(seq, &mut n), QtStatus::Ok);
            assert_eq!(n, 3);
            let mut p = QtPulse {
                channel: QtChannel::A,
                angle: 0.0,
                phase: 0.0,
            };
            assert_eq!(qt_sequence_pulse(seq, 0, &mut p), QtStatus::Ok);
            let first = if scheme == QtScheme::DualTone {
                QtChannel::Ab
            } else {
                QtChannel::A
            };
            assert_eq!(p.channel, first);
            assert_eq!(qt_sequence_pulse(seq, 3, &mut p), QtStatus::OutOfRange);

            let mut v = ptr::null_mut();
            assert_eq!(qt_sequence_unitary(seq, &mut v), QtStatus::Ok);
            let mut d = 1.0;
            assert_eq!(qt_distance_mod_phase(u, v, &mut d), QtStatus::Ok);
            assert!(d < 1e-9);

            let mut text = ptr::null_mut();
            assert_eq!(qt_sequence_to_text(seq, &mut text), QtStatus::Ok);
            let mut back = ptr::null_mut();
            assert_eq!(qt_sequence_from_text(text, &mut back), QtStatus::Ok);
            let mut w = ptr::null_mut();
            assert_eq!(qt_sequence_unitary(back, &mut w), QtStatus::Ok);
            assert_eq!(qt_distance_mod_phase(v, w, &mut d), QtStatus::Ok);
            assert!(d < 1e-12);

            qt_string_free(text);
            qt_unitary_free(w);
            qt_unitary_free(v);
            qt_sequence_free(back);
            qt_sequence_free(seq);
        }
        qt_unitary_free(u);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    unsafe {
        let mut entries = [0.0f64; 18];
        entries[0] = 2.0;
        entries[8] = 1.0;
        entries[16] = 1.0;
        let mut u = ptr::null_mut();
        assert_eq!(
            qt_unitary_new(entries.as_ptr(), &mut u),
            QtStatus::NotUnitary
        );
        assert!(u.is_null());
        assert!(last_error().contains("not unitary"));

        assert_eq!(qt_unitary_new(ptr::null(), &mut u), QtStatus::NullPointer);
        let bad = CString::new("not a gate").unwrap();
        assert_eq!(
            qt_unitary_named(bad.as_ptr(), &mut u),
            QtStatus::InvalidArgument
        );
        let junk = CString::new("garbage").unwrap();
        let mut seq = ptr::null_mut();
        assert_eq!(
            qt_sequence_from_text(junk.as_ptr(), &mut seq),
            QtStatus::Parse
        );

        entries[0] = 1.0;
        assert_eq!(qt_unitary_new(entries.as_ptr(), &mut u), QtStatus::Ok);
        assert_eq!(last_error(), "");
        qt_unitary_free(u);
        qt_unitary_free(ptr::null_mut());
    }
}

#[test]
fn tomography_round_trip_through_the_abi() {
    unsafe {
        let mut seq = ptr::null_mut();
        assert_eq!(
            qt_sequence_fourier(QtScheme::DualTone, &mut seq),
            QtStatus::Ok
        );
        let mut gate = ptr::null_mut();
        assert_eq!(qt_sequence_unitary(seq, &mut gate), QtStatus::Ok);
        let mut out = [0.0f64; 18];
        assert_eq!(qt_unitary_entries(gate, out.as_mut_ptr()), QtStatus::Ok);
        // Column 1 of the gate is the output for |1>.
        let psi = [out[2], out[3], out[8], out[9], out[14], out[15]];
        let mut rho = ptr::null_mut();
        assert_eq!(qt_density_pure(psi.as_ptr(), &mut rho), QtStatus::Ok);

        let mut fractions = [0.0f64; 18];
        assert_eq!(
            qt_simulate_fractions(rho, 0, 0, fractions.as_mut_ptr()),
            QtStatus::Ok
        );
        let mut rec = ptr::null_mut();
        let mut iters = 0u32;
        assert_eq!(
            qt_mle_reconstruct(fractions.as_ptr(), 0, &mut rec, &mut iters),
            QtStatus::Ok
        );
        assert!(iters > 0);
        let (mut f, mut p) = (0.0, 0.0);
        assert_eq!(qt_fidelity(rec, gate, 1, &mut f), QtStatus::Ok);
        assert_eq!(qt_purity(rec, &mut p), QtStatus::Ok);
        assert!((f - 1.0).abs() < 1e-5, "fidelity {f}");
        assert!((p - 1.0).abs() < 1e-5, "purity {p}");
        assert_eq!(qt_fidelity(rec, gate, 3, &mut f), QtStatus::OutOfRange);

        let mut noisy = [0.0f64; 18];
        assert_eq!(
            qt_simulate_fractions(rho, 10_000, 3, noisy.as_mut_ptr()),
            QtStatus::Ok
        );
        let mut again = [0.0f64; 18];
        assert_eq!(
            qt_simulate_fractions(rho, 10_000, 3, again.as_mut_ptr()),
            QtStatus::Ok
        );
        assert_eq!(noisy, again);

        qt_density_free(rec);
        qt_density_free(rho);
        qt_unitary_free(gate);
        qt_sequence_free(seq);
    }
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/qutrit.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 20);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}
