//! Compilation of arbitrary qutrit gates into three pulses plus a virtual
//! phase gate.
//!
//! The target `U` is reduced column-pair by column-pair. Each step picks a
//! pulse `P_k` so that one element of `U P_1† ... P_k†` vanishes; after three
//! steps only a diagonal remains, which becomes the trailing virtual phase and
//! the global phase.
//!
//! | scheme      | step 1        | step 2        | step 3        |
//! |-------------|---------------|---------------|---------------|
//! | single-tone | A, row 2, col 0 | B, row 2, col 1 | A, row 1, col 0 |
//! | dual-tone   | AB, row 2, col 0 | B, row 2, col 1 | A, row 1, col 0 |

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::{pulse_unitary, Channel, Pulse, PulseSequence, VirtualPhase};
use crate::qmath::{c64, swap_matrix, CMat3, Unitary3};

/// Max modulus of an eliminated element after its step.
pub const STEP_TOL: f64 = 1e-10;
/// Max off-diagonal modulus of the residual after the last step.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Channels A, B, A.
    #[serde(rename = "single")]
    SingleTone,
    /// Channels AB, B, A.
    #[serde(rename = "dual")]
    DualTone,
}

impl Scheme {
    pub fn channels(self) -> [Channel; 3] {
        match self {
            Scheme::SingleTone => [Channel::A, Channel::B, Channel::A],
            Scheme::DualTone => [Channel::AB, Channel::B, Channel::A],
        }
    }

    /// `(row, zeroed column, channel)` for each step.
    fn schedule(self) -> [(usize, usize, Channel); 3] {
        let ch = self.channels();
        [(2, 0, ch[0]), (2, 1, ch[1]), (1, 0, ch[2])]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::SingleTone => "single",
            Scheme::DualTone => "dual",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" | "single-tone" | "I" => Ok(Scheme::SingleTone),
            "dual" | "dual-tone" | "II" => Ok(Scheme::DualTone),
            other => Err(Error::InvalidArgument(format!(
                "unknown scheme '{other}' (expected single or dual)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionStep {
    /// 1-based step index.
    pub index: usize,
    pub row: usize,
    /// `(m, n)`: `m` is the zeroed column, `n` the other coupled level.
    pub basis: (usize, usize),
    pub pulse: Pulse,
    /// `|<row| U_k P† |m>|` after the step.
    pub residual: f64,
}

/// Element `<row| u P† |col>`.
fn eliminated(u: &CMat3, p: &Pulse, row: usize, col: usize) -> C64 {
    (u * pulse_unitary(p).matrix().adjoint())[(row, col)]
}

/// Pulse on `channel` that zeroes `<row| u P† |m>`.
///
/// The area follows `tau = 2 arcsin sqrt(|u_am|^2 / (|u_am|^2 + |u_an|^2))`
/// (the artifact's area is `tau / 2`, also for the dual-tone mixing angle) and
/// the phase `phi = pi/2 + arg u_am - arg u_an` in the `exp(-i tau/2 (cos phi
/// sx + sin phi sy))` convention, translated to the channel's own phase
/// convention. If the zeroing check fails the phase is flipped by `pi` and
/// checked again.
pub fn givens_step(u: &CMat3, row: usize, m: usize, channel: Channel) -> Result<Pulse> {
    let (lo, hi) = channel.levels();
    let n = match m {
        _ if m == lo => hi,
        _ if m == hi => lo,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "column {m} is not coupled by channel {channel}"
            )))
        }
    };
    if row > 2 {
        return Err(Error::InvalidArgument(format!("row {row} out of range")));
    }
    let (um, un) = (u[(row, m)], u[(row, n)]);
    let (am, an) = (um.norm_sqr(), un.norm_sqr());
    if am + an == 0.0 || um.norm() <= STEP_TOL * 1e-3 {
        return Ok(Pulse::identity(channel));
    }
    let tau = 2.0 * (am / (am + an)).sqrt().min(1.0).asin();
    let phi = FRAC_PI_2 + um.arg() - un.arg();

    // The two-level rotation's off-diagonal convention matches the channel's
    // lower-left entry for (A, m=0), (B, m=2), (AB, m=0) and the upper-right
    // entry otherwise.
    let lower_left = matches!(
        (channel, m),
        (Channel::A, 0) | (Channel::B, 2) | (Channel::AB, 0)
    );
    let phase = if lower_left {
        FRAC_PI_2 - phi
    } else {
        phi + FRAC_PI_2
    };

    let candidate = Pulse::new(channel, tau / 2.0, phase)?;
    if eliminated(u, &candidate, row, m).norm() <= STEP_TOL {
        return Ok(candidate);
    }
    let flipped = Pulse::new(channel, tau / 2.0, phase + PI)?;
    let residual = eliminated(u, &flipped, row, m).norm();
    if residual <= STEP_TOL {
        Ok(flipped)
    } else {
        Err(Error::Tolerance {
            what: format!("step on channel {channel} left <{row}|U|{m}>"),
            value: residual,
            limit: STEP_TOL,
        })
    }
}

/// Compile `u` into a [`PulseSequence`] together with the per-step record.
pub fn decompose_with_steps(
    u: &Unitary3,
    scheme: Scheme,
) -> Result<(PulseSequence, [DecompositionStep; 3])> {
    let mut remaining = *u.matrix();
    let mut pulses = Vec::with_capacity(3);
    let mut steps = Vec::with_capacity(3);
    for (k, (row, m, channel)) in scheme.schedule().into_iter().enumerate() {
        let pulse = givens_step(&remaining, row, m, channel)?;
        remaining *= pulse_unitary(&pulse).matrix().adjoint();
        let (lo, hi) = channel.levels();
        steps.push(DecompositionStep {
            index: k + 1,
            row,
            basis: (m, if m == lo { hi } else { lo }),
            pulse,
            residual: remaining[(row, m)].norm(),
        });
        pulses.push(pulse);
    }

    let off_diagonal = (0..3)
        .flat_map(|r| (0..3).map(move |c| (r, c)))
        .filter(|(r, c)| r != c)
        .map(|(r, c)| remaining[(r, c)].norm())
        .fold(0.0, f64::max);
    if off_diagonal > RESIDUAL_TOL {
        return Err(Error::Tolerance {
            what: "residual after three steps is not diagonal".into(),
            value: off_diagonal,
            limit: RESIDUAL_TOL,
        });
    }

    let theta: [f64; 3] = std::array::from_fn(|k| remaining[(k, k)].arg());
    let g = theta.iter().sum::<f64>() / 3.0;
    let seq = PulseSequence::new(pulses, VirtualPhase::new(theta[0] - g, theta[1] - g), g);
    let steps: [DecompositionStep; 3] = steps.try_into().expect("three steps");
    Ok((seq, steps))
}

/// Compile `u` (unitary, any determinant) into three pulses and a virtual
/// phase; the recorded global phase makes the sequence equal to `u` exactly.
pub fn decompose(u: &Unitary3, scheme: Scheme) -> Result<PulseSequence> {
    decompose_with_steps(u, scheme).map(|(seq, _)| seq)
}

/// The qutrit Fourier (Walsh-Hadamard) gate.
pub fn fourier_matrix() -> Unitary3 {
    let w = C64::from_polar(1.0, TAU / 3.0);
    let one = c64(1.0, 0.0);
    let f =
        CMat3::new(one, one, one, one, w, w.conj(), one, w.conj(), w) / C64::new(3f64.sqrt(), 0.0);
    Unitary3::new_unchecked(f)
}

/// Target realized by [`fourier_single_tone`]: the Fourier gate with `|1>` and
/// `|2>` exchanged on the output (equivalently on the input).
pub fn fourier_single_tone_target() -> Unitary3 {
    Unitary3::new_unchecked(swap_matrix(1, 2) * fourier_matrix().matrix())
}

/// Target realized by [`fourier_dual_tone`]: the Fourier gate in the basis
/// with `|0>` and `|1>` exchanged.
pub fn fourier_dual_tone_target() -> Unitary3 {
    fourier_matrix().conjugate_by_swap(0, 1)
}

/// Closed-form single-tone Fourier sequence (B, A, B).
pub fn fourier_single_tone() -> PulseSequence {
    let tau_a = (-1.0f64 / 3.0).acos() / 2.0;
    PulseSequence::new(
        vec![
            Pulse::b(FRAC_PI_4, 0.0).expect("valid"),
            Pulse::a(tau_a, PI).expect("valid"),
            Pulse::b(5.0 * FRAC_PI_4, FRAC_PI_2).expect("valid"),
        ],
        VirtualPhase::new(-FRAC_PI_6, -FRAC_PI_6),
        FRAC_PI_6,
    )
}

/// Closed-form dual-tone Fourier sequence (AB, B, A).
pub fn fourier_dual_tone() -> PulseSequence {
    let tau_b = PI + (1.0 / 2f64.sqrt()).atan();
    PulseSequence::new(
        vec![
            Pulse::ab(FRAC_PI_4, -2.0 * FRAC_PI_3).expect("valid"),
            Pulse::b(tau_b, FRAC_PI_3).expect("valid"),
            Pulse::a(FRAC_PI_4, FRAC_PI_6).expect("valid"),
        ],
        VirtualPhase::new(FRAC_PI_3, -FRAC_PI_2),
        FRAC_PI_2,
    )
}

/// Named gates accepted by the CLI and the C interface.
pub fn named_gate(name: &str) -> Result<Unitary3> {
    match name {
        "identity" => Ok(Unitary3::identity()),
        "fourier" => Ok(fourier_matrix()),
        "fourier-swap12" => Ok(fourier_single_tone_target()),
        "fourier-swap01" => Ok(fourier_dual_tone_target()),
        "fourier-swap02" => Ok(fourier_matrix().conjugate_by_swap(0, 2)),
        other => Err(Error::InvalidArgument(format!(
            "unknown gate '{other}' (known: {})",
            NAMED_GATES.join(", ")
        ))),
    }
}

pub const NAMED_GATES: [&str; 5] = [
    "identity",
    "fourier",
    "fourier-swap12",
    "fourier-swap01",
    "fourier-swap02",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::sequence_unitary;
    use crate::qmath::{distance_mod_phase, haar_special_unitary, haar_unitary};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_step_is_zero_area() {
        let p = givens_step(&CMat3::identity(), 2, 0, Channel::A).unwrap();
        assert_eq!(p.angle(), 0.0);
    }

    #[test]
    fn givens_step_rejects_uncoupled_column() {
        assert!(givens_step(&CMat3::identity(), 2, 2, Channel::A).is_err());
    }

    #[test]
    fn fourier_dual_tone_first_step() {
        let f = fourier_matrix();
        let p = givens_step(f.matrix(), 2, 0, Channel::AB).unwrap();
        assert_eq!(p.channel(), Channel::AB);
        let r = (f.matrix() * pulse_unitary(&p).matrix().adjoint())[(2, 0)];
        assert!(r.norm() <= 1e-10);
    }

    #[test]
    fn every_orientation_zeroes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let u = haar_unitary(&mut rng);
            for channel in [Channel::A, Channel::B, Channel::AB] {
                let (lo, hi) = channel.levels();
                for m in [lo, hi] {
                    for row in 0..3 {
                        let p = givens_step(u.matrix(), row, m, channel).unwrap();
                        assert!(eliminated(u.matrix(), &p, row, m).norm() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn decompose_identity() {
        for scheme in [Scheme::SingleTone, Scheme::DualTone] {
            let seq = decompose(&Unitary3::identity(), scheme).unwrap();
            assert!(seq.pulses.iter().all(|p| p.angle() == 0.0));
            let u = sequence_unitary(&seq);
            assert!(distance_mod_phase(&u, &Unitary3::identity()) < 1e-15);
        }
    }

    #[test]
    fn decompose_random_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let u = haar_special_unitary(&mut rng);
            for scheme in [Scheme::SingleTone, Scheme::DualTone] {
                let (seq, steps) = decompose_with_steps(&u, scheme).unwrap();
                assert!(steps.iter().all(|s| s.residual <= 1e-10));
                assert!(distance_mod_phase(&sequence_unitary(&seq), &u) <= 1e-9);
                let ab = seq
                    .pulses
                    .iter()
                    .filter(|p| p.channel() == Channel::AB)
                    .count();
                assert_eq!(ab, usize::from(scheme == Scheme::DualTone));
            }
        }
    }

    #[test]
    fn closed_form_fourier_sequences() {
        let f1 = sequence_unitary(&fourier_single_tone());
        assert!(distance_mod_phase(&f1, &fourier_single_tone_target()) < 1e-12);
        let f2 = sequence_unitary(&fourier_dual_tone());
        assert!(distance_mod_phase(&f2, &fourier_dual_tone_target()) < 1e-12);
        for u in [f1, f2] {
            for z in u.matrix().iter() {
                assert!((z.norm() - 1.0 / 3f64.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_forms_agree_with_decomposition() {
        let d1 = decompose(&fourier_single_tone_target(), Scheme::SingleTone).unwrap();
        assert!(
            distance_mod_phase(
                &sequence_unitary(&d1),
                &sequence_unitary(&fourier_single_tone())
            ) <= 1e-9
        );
        let d2 = decompose(&fourier_dual_tone_target(), Scheme::DualTone).unwrap();
        assert!(
            distance_mod_phase(
                &sequence_unitary(&d2),
                &sequence_unitary(&fourier_dual_tone())
            ) <= 1e-9
        );
    }

    #[test]
    fn named_gates_resolve() {
        for name in NAMED_GATES {
            named_gate(name).unwrap();
        }
        assert!(named_gate("toffoli").is_err());
    }
}
