//! Resonant pulse operators and the pulse-sequence data model.
//!
//! Single-tone pulses drive either the A (`|0> <-> |1>`) or B
//! (`|1> <-> |2>`) transition. Driving both tones for exactly
//! `t_AB = 2 pi / sqrt(|Omega_A|^2 + |Omega_B|^2)` realizes a direct
//! `|0> <-> |2>` operation. Diagonal phase gates are virtual: they are
//! carried as a trailing [`VirtualPhase`] and folded into later pulse phases.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{c64, wrap_phase, CMat3, Unitary3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    A,
    B,
    AB,
}

impl Channel {
    /// The pair of basis states the channel couples.
    pub fn levels(self) -> (usize, usize) {
        match self {
            Channel::A => (0, 1),
            Channel::B => (1, 2),
            Channel::AB => (0, 2),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::A => "A",
            Channel::B => "B",
            Channel::AB => "AB",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Channel::A),
            "B" | "b" => Ok(Channel::B),
            "AB" | "ab" => Ok(Channel::AB),
            other => Err(Error::InvalidArgument(format!("unknown channel '{other}'"))),
        }
    }
}

/// One physical pulse.
///
/// For A and B, `angle` is the pulse area `tau = |Omega| t / 2` and `phase` is
/// `arg(Omega)`. For AB, `angle` is the mixing angle `alpha` in `[0, pi]` and
/// `phase` is the relative phase `beta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PulseRecord", into = "PulseRecord")]
pub struct Pulse {
    channel: Channel,
    angle: f64,
    phase: f64,
}

#[derive(Serialize, Deserialize)]
struct PulseRecord {
    channel: Channel,
    angle: f64,
    phase: f64,
}

impl TryFrom<PulseRecord> for Pulse {
    type Error = Error;

    fn try_from(r: PulseRecord) -> Result<Self> {
        Pulse::new(r.channel, r.angle, r.phase)
    }
}

impl From<Pulse> for PulseRecord {
    fn from(p: Pulse) -> Self {
        PulseRecord {
            channel: p.channel,
            angle: p.angle,
            phase: p.phase,
        }
    }
}

impl Pulse {
    pub fn new(channel: Channel, angle: f64, phase: f64) -> Result<Self> {
        if !angle.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite pulse parameters ({angle}, {phase})"
            )));
        }
        if angle < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "pulse area must be non-negative, got {angle}"
            )));
        }
        if channel == Channel::AB && angle > PI {
            return Err(Error::InvalidArgument(format!(
                "dual-tone mixing angle must lie in [0, pi], got {angle}"
            )));
        }
        Ok(Self {
            channel,
            angle,
            phase: wrap_phase(phase),
        })
    }

    pub fn a(area: f64, phase: f64) -> Result<Self> {
        Self::new(Channel::A, area, phase)
    }

    pub fn b(area: f64, phase: f64) -> Result<Self> {
        Self::new(Channel::B, area, phase)
    }

    pub fn ab(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Channel::AB, alpha, beta)
    }

    /// Zero-area pulse on `channel`.
    pub fn identity(channel: Channel) -> Self {
        Self {
            channel,
            angle: 0.0,
            phase: 0.0,
        }
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub(crate) fn with_phase(&self, phase: f64) -> Self {
        Self {
            phase: wrap_phase(phase),
            ..*self
        }
    }

    pub fn unitary(&self) -> Unitary3 {
        pulse_unitary(self)
    }
}

/// Trailing diagonal phase gate `U_theta(eta, epsilon)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VirtualPhase {
    pub eta: f64,
    pub epsilon: f64,
}

impl VirtualPhase {
    pub fn new(eta: f64, epsilon: f64) -> Self {
        Self {
            eta: wrap_phase(eta),
            epsilon: wrap_phase(epsilon),
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// Phase gate equal to `self` applied after `earlier`.
    pub fn then(&self, later: &VirtualPhase) -> Self {
        Self::new(self.eta + later.eta, self.epsilon + later.epsilon)
    }

    pub fn unitary(&self) -> Unitary3 {
        u_theta(self.eta, self.epsilon)
    }
}

/// `U_A(tau, phi)` on `{|0>, |1>}`.
pub fn u_a(tau: f64, phi: f64) -> Unitary3 {
    let (s, c) = tau.sin_cos();
    let e = C64::from_polar(1.0, phi);
    let o = c64(0.0, 0.0);
    Unitary3::new_unchecked(CMat3::new(
        c64(c, 0.0),
        -e * s,
        o,
        e.conj() * s,
        c64(c, 0.0),
        o,
        o,
        o,
        c64(1.0, 0.0),
    ))
}

/// `U_B(tau, phi)` on `{|1>, |2>}`.
pub fn u_b(tau: f64, phi: f64) -> Unitary3 {
    let (s, c) = tau.sin_cos();
    let e = C64::from_polar(1.0, phi);
    let o = c64(0.0, 0.0);
    Unitary3::new_unchecked(CMat3::new(
        c64(1.0, 0.0),
        o,
        o,
        o,
        c64(c, 0.0),
        e.conj() * s,
        o,
        -e * s,
        c64(c, 0.0),
    ))
}

/// Resonant dual-tone operator `U_AB(alpha, beta)`; acts as `-1` on `|1>`.
pub fn u_ab(alpha: f64, beta: f64) -> Unitary3 {
    let (s, c) = alpha.sin_cos();
    let e = C64::from_polar(1.0, beta);
    let o = c64(0.0, 0.0);
    Unitary3::new_unchecked(CMat3::new(
        c64(c, 0.0),
        o,
        -e * s,
        o,
        c64(-1.0, 0.0),
        o,
        -e.conj() * s,
        o,
        c64(-c, 0.0),
    ))
}

/// `diag(e^{i eta}, e^{i epsilon}, e^{-i (eta + epsilon)})`
pub fn u_theta(eta: f64, epsilon: f64) -> Unitary3 {
    Unitary3::from_diagonal_phases([eta, epsilon, -(eta + epsilon)])
}

pub fn pulse_unitary(p: &Pulse) -> Unitary3 {
    match p.channel {
        Channel::A => u_a(p.angle, p.phase),
        Channel::B => u_b(p.angle, p.phase),
        Channel::AB => u_ab(p.angle, p.phase),
    }
}

/// Rotating-frame Hamiltonian (hbar = 1) for complex couplings on the A and B
/// transitions.
pub fn rwa_hamiltonian(omega_a: C64, omega_b: C64) -> CMat3 {
    let o = c64(0.0, 0.0);
    let half_i = c64(0.0, 0.5);
    CMat3::new(
        o,
        -omega_a,
        o,
        omega_a.conj(),
        o,
        omega_b.conj(),
        o,
        -omega_b,
        o,
    ) * half_i
}

/// Drive settings realizing `U_AB(alpha, beta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualToneDrive {
    pub omega_a: C64,
    pub omega_b: C64,
    pub duration: f64,
}

/// Couplings and duration for `U_AB(alpha, beta)` at total Rabi frequency
/// `omega_total = sqrt(|Omega_A|^2 + |Omega_B|^2)` (rad/s). `arg(Omega_B)` is
/// fixed to zero.
pub fn ab_couplings(alpha: f64, beta: f64, omega_total: f64) -> Result<DualToneDrive> {
    if !(alpha > 0.0 && alpha < PI) {
        return Err(Error::DegenerateDualTone { alpha });
    }
    if !(omega_total > 0.0) || !omega_total.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "total Rabi frequency must be positive, got {omega_total}"
        )));
    }
    Ok(dual_tone_drive(alpha, beta, omega_total))
}

/// Same mapping as [`ab_couplings`] without rejecting the single-tone limits.
pub(crate) fn dual_tone_drive(alpha: f64, beta: f64, omega_total: f64) -> DualToneDrive {
    let (s, c) = (alpha / 2.0).sin_cos();
    DualToneDrive {
        omega_a: C64::from_polar(omega_total * s, beta),
        omega_b: c64(omega_total * c, 0.0),
        duration: TAU / omega_total,
    }
}

/// Inverse of [`ab_couplings`]: `alpha = 2 arctan|Omega_A / Omega_B|`,
/// `beta = arg(Omega_A / Omega_B)`.
pub fn ab_angles(omega_a: C64, omega_b: C64) -> (f64, f64) {
    let alpha = 2.0 * omega_a.norm().atan2(omega_b.norm());
    let beta = wrap_phase(omega_a.arg() - omega_b.arg());
    (alpha, beta)
}

/// Rewrite `p` so that `U(p') = U_theta(vp)† U(p) U_theta(vp)`, i.e. move the
/// phase gate from before the pulse to after it.
pub fn shift_through_phase(p: &Pulse, vp: &VirtualPhase) -> Pulse {
    let (eta, eps) = (vp.eta, vp.epsilon);
    let phase = match p.channel {
        Channel::A => p.phase + eps - eta,
        Channel::B => p.phase + eta + 2.0 * eps,
        Channel::AB => p.phase - eps - 2.0 * eta,
    };
    p.with_phase(phase)
}

/// Pulses in application order followed by a virtual phase gate and a global
/// phase.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub pulses: Vec<Pulse>,
    pub virtual_phase: VirtualPhase,
    pub global_phase: f64,
}

impl PulseSequence {
    pub fn new(pulses: Vec<Pulse>, virtual_phase: VirtualPhase, global_phase: f64) -> Self {
        Self {
            pulses,
            virtual_phase,
            global_phase: wrap_phase(global_phase),
        }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    /// Unitary of the physical pulses alone, first pulse applied first.
    pub fn pulse_product(&self) -> Unitary3 {
        self.pulses
            .iter()
            .fold(Unitary3::identity(), |acc, p| pulse_unitary(p) * acc)
    }

    pub fn unitary(&self) -> Unitary3 {
        sequence_unitary(self)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `e^{i g} U_theta(eta, epsilon) U_n ... U_1`
pub fn sequence_unitary(seq: &PulseSequence) -> Unitary3 {
    (seq.virtual_phase.unitary() * seq.pulse_product()).with_global_phase(seq.global_phase)
}

const TEXT_HEADER: &str = "# qutrit pulse sequence";

/// Line-oriented record: one pulse per line (`A|B|AB angle phase`), then
/// `VP eta epsilon` and `GP phase`. Values in radians, 17 significant digits.
impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{TEXT_HEADER}")?;
        for p in &self.pulses {
            writeln!(f, "{} {:.16e} {:.16e}", p.channel, p.angle, p.phase)?;
        }
        writeln!(
            f,
            "VP {:.16e} {:.16e}",
            self.virtual_phase.eta, self.virtual_phase.epsilon
        )?;
        writeln!(f, "GP {:.16e}", self.global_phase)
    }
}

impl FromStr for PulseSequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut seq = PulseSequence::empty();
        for (idx, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |k: usize| -> Result<f64> {
                fields
                    .get(k)
                    .ok_or_else(|| err(format!("missing field {k}")))?
                    .parse::<f64>()
                    .map_err(|e| err(e.to_string()))
            };
            match fields[0] {
                "VP" => seq.virtual_phase = VirtualPhase::new(num(1)?, num(2)?),
                "GP" => seq.global_phase = wrap_phase(num(1)?),
                tag => {
                    let channel = tag.parse::<Channel>().map_err(|e| err(e.to_string()))?;
                    let pulse =
                        Pulse::new(channel, num(1)?, num(2)?).map_err(|e| err(e.to_string()))?;
                    seq.pulses.push(pulse);
                }
            }
        }
        Ok(seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{expm_coupling, max_abs};
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn m(rows: [[C64; 3]; 3]) -> CMat3 {
        CMat3::from_fn(|r, c| rows[r][c])
    }

    const O: C64 = c64(0.0, 0.0);
    const ONE: C64 = c64(1.0, 0.0);
    const I: C64 = c64(0.0, 1.0);

    #[test]
    fn u_a_matches_readout_r1() {
        let r1 = m([[ONE, -ONE, O], [ONE, ONE, O], [O, O, ONE * SQRT_2]]) * c64(FRAC_1_SQRT_2, 0.0);
        assert!(max_abs(&(u_a(FRAC_PI_4, 0.0).matrix() - r1)) < 1e-15);
        assert!(max_abs(&(u_a(0.0, 1.3).matrix() - CMat3::identity())) < 1e-15);
        let flip = m([[O, ONE, O], [-ONE, O, O], [O, O, ONE]]);
        assert!(max_abs(&(u_a(FRAC_PI_2, PI).matrix() - flip)) < 1e-15);
    }

    #[test]
    fn u_b_matches_readouts_r3_r4() {
        let r3 = m([[ONE * SQRT_2, O, O], [O, ONE, ONE], [O, -ONE, ONE]]) * c64(FRAC_1_SQRT_2, 0.0);
        let r4 = m([[ONE * SQRT_2, O, O], [O, ONE, -I], [O, -I, ONE]]) * c64(FRAC_1_SQRT_2, 0.0);
        assert!(max_abs(&(u_b(FRAC_PI_4, 0.0).matrix() - r3)) < 1e-15);
        assert!(max_abs(&(u_b(FRAC_PI_4, FRAC_PI_2).matrix() - r4)) < 1e-15);
        assert!(max_abs(&(u_b(0.0, 0.3).matrix() - CMat3::identity())) < 1e-15);
    }

    #[test]
    fn u_ab_matches_readout_r5() {
        let r5 =
            m([[ONE, O, -ONE], [O, -ONE * SQRT_2, O], [-ONE, O, -ONE]]) * c64(FRAC_1_SQRT_2, 0.0);
        assert!(max_abs(&(u_ab(FRAC_PI_4, 0.0).matrix() - r5)) < 1e-15);
        let d = m([[ONE, O, O], [O, -ONE, O], [O, O, -ONE]]);
        assert!(max_abs(&(u_ab(0.0, 2.0).matrix() - d)) < 1e-15);
    }

    #[test]
    fn u_theta_examples() {
        assert!(max_abs(&(u_theta(0.0, 0.0).matrix() - CMat3::identity())) < 1e-15);
        let t = u_theta(TAU / 3.0, -TAU / 3.0);
        let expected = Unitary3::from_diagonal_phases([TAU / 3.0, -TAU / 3.0, 0.0]);
        assert!(max_abs(&(t.matrix() - expected.matrix())) < 1e-15);
        for k in 0..100 {
            let (eta, eps) = (0.37 * k as f64, -1.1 * k as f64 + 0.2);
            assert!((u_theta(eta, eps).determinant() - ONE).norm() < 1e-13);
        }
    }

    #[test]
    fn ab_couplings_equal_split() {
        let omega = TAU * 2000.0;
        let d = ab_couplings(FRAC_PI_2, 0.0, omega).unwrap();
        assert!((d.omega_a.norm() - omega / SQRT_2).abs() < 1e-9);
        assert!((d.omega_b.norm() - omega / SQRT_2).abs() < 1e-9);
        assert!((d.duration - 500e-6).abs() < 1e-15);
    }

    #[test]
    fn ab_couplings_rejects_single_tone_limits() {
        assert!(matches!(
            ab_couplings(0.0, 0.0, 1.0),
            Err(Error::DegenerateDualTone { .. })
        ));
        assert!(matches!(
            ab_couplings(PI, 0.0, 1.0),
            Err(Error::DegenerateDualTone { .. })
        ));
        assert!(ab_couplings(1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn ab_couplings_round_trip_and_exponentiate() {
        for k in 1..50 {
            let alpha = PI * k as f64 / 50.0;
            let beta = wrap_phase(0.731 * k as f64);
            let d = ab_couplings(alpha, beta, 3.7).unwrap();
            let (a2, b2) = ab_angles(d.omega_a, d.omega_b);
            assert!((a2 - alpha).abs() < 1e-12);
            assert!((wrap_phase(b2 - beta)).abs() < 1e-12);
            let u = expm_coupling(&rwa_hamiltonian(d.omega_a, d.omega_b), d.duration).unwrap();
            assert!(max_abs(&(u.matrix() - u_ab(alpha, beta).matrix())) < 1e-10);
        }
    }

    #[test]
    fn resonant_half_period_on_a() {
        let omega = 2.5;
        let u = expm_coupling(&rwa_hamiltonian(c64(omega, 0.0), O), PI / omega).unwrap();
        assert!(max_abs(&(u.matrix() - u_a(FRAC_PI_2, 0.0).matrix())) < 1e-12);
    }

    #[test]
    fn shift_through_phase_examples() {
        let p = Pulse::a(0.4, 0.0).unwrap();
        assert_eq!(shift_through_phase(&p, &VirtualPhase::zero()), p);
        let q = shift_through_phase(&p, &VirtualPhase::new(0.0, FRAC_PI_2));
        assert!((q.phase() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn pulse_validation() {
        assert!(Pulse::a(-0.1, 0.0).is_err());
        assert!(Pulse::ab(4.0, 0.0).is_err());
        assert!(Pulse::b(f64::NAN, 0.0).is_err());
        assert_eq!(Pulse::a(1.0, -PI).unwrap().phase(), PI);
    }

    #[test]
    fn empty_sequence_is_identity() {
        let u = sequence_unitary(&PulseSequence::empty());
        assert!(max_abs(&(u.matrix() - CMat3::identity())) < 1e-15);
    }

    #[test]
    fn text_record_parses_back() {
        let seq = PulseSequence::new(
            vec![
                Pulse::ab(0.3, -2.0).unwrap(),
                Pulse::b(3.7, 1.0).unwrap(),
                Pulse::a(0.1, 0.5).unwrap(),
            ],
            VirtualPhase::new(0.2, -0.4),
            1.1,
        );
        let text = seq.to_string();
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("AB 2.9999999999999999e-1"));
        let back: PulseSequence = text.parse().unwrap();
        assert_eq!(back, seq);
        let err = "A 1.0\n".parse::<PulseSequence>().unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn json_rejects_invalid_pulse() {
        let bad = r#"{"pulses":[{"channel":"A","angle":-1.0,"phase":0.0}],
                      "virtual_phase":{"eta":0.0,"epsilon":0.0},"global_phase":0.0}"#;
        assert!(PulseSequence::from_json(bad).is_err());
    }
}
