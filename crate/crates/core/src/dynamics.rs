//! Time-domain simulation of pulse sequences with detuning, and the
//! trap-induced Stark-shift ensemble.
//!
//! In the frame used throughout, transition couplings carry the detuning as a
//! phase on one global clock:
//!
//! ```text
//! H(t) = (i/2) [[0, -Om_A e^{i D_A t}, 0],
//!               [(Om_A e^{i D_A t})*, 0, (Om_B e^{i D_B t})*],
//!               [0, -Om_B e^{i D_B t}, 0]]
//! ```
//!
//! Writing `H(t) = D(t) H0 D(t)†` with `D(t) = diag(e^{i D_A t}, 1, e^{i D_B t})`
//! gives the time-independent drive-frame generator `H0 + diag(D_A, 0, D_B)`.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::{dual_tone_drive, pulse_unitary, rwa_hamiltonian, Channel, PulseSequence};
use crate::qmath::{
    basis, c64, expm_coupling, fidelity, fidelity_with, max_abs, purify, purity, CMat3, CVec3,
    DensityMatrix3, Unitary3,
};
use crate::synth::{fourier_dual_tone, fourier_single_tone};

/// Max `|exp(-i H0 T) - U(pulse)|` for a drive to count as realizing a pulse.
pub const DRIVE_MATCH_TOL: f64 = 1e-9;
/// Max unitarity error accepted from the integrator.
pub const PROPAGATOR_UNITARITY_TOL: f64 = 1e-8;

/// One constant-amplitude drive segment on the global clock.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveConfig {
    pub omega_a: C64,
    pub omega_b: C64,
    /// Detunings in rad/s.
    pub delta_a: f64,
    pub delta_b: f64,
    /// Segment start on the global clock (s).
    pub start: f64,
    pub duration: f64,
}

impl DriveConfig {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    fn max_rate(&self) -> f64 {
        [
            self.omega_a.norm(),
            self.omega_b.norm(),
            self.delta_a.abs(),
            self.delta_b.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Hamiltonian at global time `t`.
    pub fn hamiltonian(&self, t: f64) -> CMat3 {
        rwa_hamiltonian(
            self.omega_a * C64::from_polar(1.0, self.delta_a * t),
            self.omega_b * C64::from_polar(1.0, self.delta_b * t),
        )
    }

    /// `D(t)` for this segment's detunings.
    fn frame(&self, t: f64) -> CMat3 {
        CMat3::from_diagonal(&CVec3::new(
            C64::from_polar(1.0, self.delta_a * t),
            c64(1.0, 0.0),
            C64::from_polar(1.0, self.delta_b * t),
        ))
    }
}

/// Back-to-back drives realizing each pulse of `seq` at Rabi magnitude `rabi`
/// (rad/s), starting at `origin`. A and B pulses use `|Omega| = rabi`; AB
/// pulses use `sqrt(|Omega_A|^2 + |Omega_B|^2) = rabi`.
pub fn drive_schedule(
    seq: &PulseSequence,
    rabi: f64,
    delta_a: f64,
    delta_b: f64,
    origin: f64,
) -> Result<Vec<DriveConfig>> {
    if !(rabi > 0.0 && rabi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "Rabi frequency must be positive, got {rabi}"
        )));
    }
    if !(delta_a.is_finite() && delta_b.is_finite() && origin.is_finite()) {
        return Err(Error::InvalidArgument(
            "detunings and origin must be finite".into(),
        ));
    }
    let mut t = origin;
    let mut drives = Vec::with_capacity(seq.len());
    for p in &seq.pulses {
        let (omega_a, omega_b, duration) = match p.channel() {
            Channel::A => (
                C64::from_polar(rabi, p.phase()),
                c64(0.0, 0.0),
                2.0 * p.angle() / rabi,
            ),
            Channel::B => (
                c64(0.0, 0.0),
                C64::from_polar(rabi, p.phase()),
                2.0 * p.angle() / rabi,
            ),
            Channel::AB => {
                let d = dual_tone_drive(p.angle(), p.phase(), rabi);
                (d.omega_a, d.omega_b, d.duration)
            }
        };
        drives.push(DriveConfig {
            omega_a,
            omega_b,
            delta_a,
            delta_b,
            start: t,
            duration,
        });
        t += duration;
    }
    Ok(drives)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step fourth-order Runge-Kutta on the clocked Hamiltonian.
    Rk4,
    /// Per-segment exponentials of the drive-frame generator.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// The clocked frame in which the Hamiltonian is written.
    Atomic,
    /// `D(t_end)† U D(t_start)`: the frame rotating with the detuned drives,
    /// in which a resonant sequence is compared against its ideal gate.
    Drive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagateOptions {
    pub method: Method,
    pub frame: Frame,
    /// Rerun RK4 at half the step and fail if the two disagree by more than
    /// `tolerance`.
    pub self_check: bool,
    pub tolerance: f64,
    /// Minimum RK4 steps per segment.
    pub min_steps: usize,
    /// Max `h * max(|Omega|, |Delta|)` per RK4 step.
    pub max_phase_step: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            frame: Frame::Drive,
            self_check: true,
            tolerance: 1e-7,
            min_steps: 1000,
            max_phase_step: 0.01,
        }
    }
}

impl PropagateOptions {
    pub fn exact() -> Self {
        Self {
            method: Method::Exact,
            self_check: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Propagation {
    pub unitary: Unitary3,
    /// Halved-step RK4 result, when the self-check ran.
    pub reference: Option<Unitary3>,
    /// `max |U_h - U_{h/2}|`, when the self-check ran.
    pub error_estimate: Option<f64>,
}

fn rk4_segment(d: &DriveConfig, steps: usize) -> CMat3 {
    let h = d.duration / steps as f64;
    let minus_i = c64(0.0, -1.0);
    let f = |t: f64, u: &CMat3| d.hamiltonian(t) * u * minus_i;
    let mut u = CMat3::identity();
    for k in 0..steps {
        let t = d.start + k as f64 * h;
        let k1 = f(t, &u);
        let k2 = f(t + 0.5 * h, &(u + k1 * c64(0.5 * h, 0.0)));
        let k3 = f(t + 0.5 * h, &(u + k2 * c64(0.5 * h, 0.0)));
        let k4 = f(t + h, &(u + k3 * c64(h, 0.0)));
        u += (k1 + k2 * c64(2.0, 0.0) + k3 * c64(2.0, 0.0) + k4) * c64(h / 6.0, 0.0);
    }
    u
}

fn rk4_steps(d: &DriveConfig, opts: &PropagateOptions) -> usize {
    let rate = d.max_rate();
    let by_rate = if rate > 0.0 {
        (d.duration * rate / opts.max_phase_step).ceil() as usize
    } else {
        0
    };
    by_rate.max(opts.min_steps).max(1)
}

fn exact_segment(d: &DriveConfig) -> Result<CMat3> {
    let mut gen = rwa_hamiltonian(d.omega_a, d.omega_b);
    gen[(0, 0)] += d.delta_a;
    gen[(2, 2)] += d.delta_b;
    let e = expm_coupling(&gen, d.duration)?;
    Ok(d.frame(d.end()) * e.matrix() * d.frame(d.start).adjoint())
}

fn validate_drives(seq: &PulseSequence, drives: &[DriveConfig]) -> Result<()> {
    if drives.len() != seq.len() {
        return Err(Error::InvalidArgument(format!(
            "{} drives for {} pulses",
            drives.len(),
            seq.len()
        )));
    }
    let mut clock = f64::NEG_INFINITY;
    for (k, (d, p)) in drives.iter().zip(&seq.pulses).enumerate() {
        let finite = [
            d.delta_a,
            d.delta_b,
            d.start,
            d.duration,
            d.omega_a.norm(),
            d.omega_b.norm(),
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite || d.duration < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "drive {k} has a negative or non-finite parameter"
            )));
        }
        if d.start < clock {
            return Err(Error::InvalidArgument(format!(
                "drive {k} starts at {} before the previous drive ends at {clock}",
                d.start
            )));
        }
        clock = d.end();
        let realized = expm_coupling(&rwa_hamiltonian(d.omega_a, d.omega_b), d.duration)?;
        let mismatch = max_abs(&(realized.matrix() - pulse_unitary(p).matrix()));
        if mismatch > DRIVE_MATCH_TOL {
            return Err(Error::InvalidArgument(format!(
                "drive {k} does not realize pulse {} {} {} (mismatch {mismatch:.3e})",
                p.channel(),
                p.angle(),
                p.phase()
            )));
        }
    }
    Ok(())
}

fn chain(
    drives: &[DriveConfig],
    segment: impl Fn(&DriveConfig) -> Result<CMat3>,
    frame: Frame,
) -> Result<CMat3> {
    let mut u = CMat3::identity();
    for d in drives {
        u = segment(d)? * u;
    }
    if let (Frame::Drive, Some(first), Some(last)) = (frame, drives.first(), drives.last()) {
        u = last.frame(last.end()).adjoint() * u * first.frame(first.start);
    }
    Ok(u)
}

/// Time-ordered propagator of `seq` driven by `drives`, followed by the
/// sequence's virtual phase gate and global phase. At zero detuning it equals
/// [`crate::pulses::sequence_unitary`].
pub fn propagate_detailed(
    seq: &PulseSequence,
    drives: &[DriveConfig],
    opts: &PropagateOptions,
) -> Result<Propagation> {
    validate_drives(seq, drives)?;
    let tail = seq
        .virtual_phase
        .unitary()
        .with_global_phase(seq.global_phase);
    let finish = |u: CMat3| tail.matrix() * u;

    let (u, reference, error_estimate) = match opts.method {
        Method::Exact => (chain(drives, exact_segment, opts.frame)?, None, None),
        Method::Rk4 => {
            let u = chain(
                drives,
                |d| Ok(rk4_segment(d, rk4_steps(d, opts))),
                opts.frame,
            )?;
            if opts.self_check {
                let fine = chain(
                    drives,
                    |d| Ok(rk4_segment(d, 2 * rk4_steps(d, opts))),
                    opts.frame,
                )?;
                let estimate = max_abs(&(u - fine));
                if !(estimate <= opts.tolerance) {
                    return Err(Error::Integration {
                        estimate,
                        tolerance: opts.tolerance,
                    });
                }
                (u, Some(finish(fine)), Some(estimate))
            } else {
                (u, None, None)
            }
        }
    };
    let u = finish(u);
    let deviation = Unitary3::unitarity_error(&u);
    if !(deviation <= PROPAGATOR_UNITARITY_TOL) {
        return Err(Error::Tolerance {
            what: "propagator unitarity".into(),
            value: deviation,
            limit: PROPAGATOR_UNITARITY_TOL,
        });
    }
    Ok(Propagation {
        unitary: Unitary3::new_unchecked(u),
        reference: reference.map(Unitary3::new_unchecked),
        error_estimate,
    })
}

pub fn propagate(
    seq: &PulseSequence,
    drives: &[DriveConfig],
    opts: &PropagateOptions,
) -> Result<Unitary3> {
    propagate_detailed(seq, drives, opts).map(|p| p.unitary)
}

/// `2 pi / sqrt(|Omega_A|^2 + |Omega_B|^2)`.
pub fn t_ab(omega_a: C64, omega_b: C64) -> f64 {
    TAU / omega_a.norm().hypot(omega_b.norm())
}

/// Populations under a resonant simultaneous drive at each time of `t_grid`.
pub fn population_scan(
    omega_a: C64,
    omega_b: C64,
    psi_in: &CVec3,
    t_grid: &[f64],
) -> Result<Vec<[f64; 3]>> {
    let norm = psi_in.norm();
    if !((norm - 1.0).abs() <= 1e-10) {
        return Err(Error::InvalidArgument(format!(
            "input state must be normalized, |psi| = {norm}"
        )));
    }
    let h = rwa_hamiltonian(omega_a, omega_b);
    t_grid
        .iter()
        .map(|&t| {
            if !t.is_finite() {
                return Err(Error::InvalidArgument(format!("time {t} is not finite")));
            }
            let psi = expm_coupling(&h, t)?.apply(psi_in);
            Ok(std::array::from_fn(|k| psi[k].norm_sqr()))
        })
        .collect()
}

/// Mean over inputs `|0>, |1>, |2>` of `|<n| G† U |n>|^2`.
pub fn average_fidelity(ideal: &Unitary3, actual: &Unitary3) -> f64 {
    let m = ideal.matrix().adjoint() * actual.matrix();
    (0..3).map(|n| m[(n, n)].norm_sqr()).sum::<f64>() / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetuningPoint {
    /// `Delta / Omega` with `Delta = Delta_A = -Delta_B`.
    pub delta_over_omega: f64,
    pub fidelity: f64,
    /// Average fidelity from the halved-step integration.
    pub reference_fidelity: f64,
}

/// Average fidelity of `seq` against its ideal unitary with `Delta_A = Delta`,
/// `Delta_B = -Delta` held on every pulse, for each `Delta / Omega` in
/// `grid`. `opts.method` must be RK4 with the self-check on, so every point
/// carries its halved-step reference.
pub fn detuning_sweep(
    seq: &PulseSequence,
    grid: &[f64],
    omega_total: f64,
    opts: &PropagateOptions,
) -> Result<Vec<DetuningPoint>> {
    if opts.method != Method::Rk4 || !opts.self_check {
        return Err(Error::InvalidArgument(
            "detuning sweep requires RK4 with the halved-step check".into(),
        ));
    }
    let ideal = seq.unitary();
    grid.par_iter()
        .map(|&x| {
            if !x.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "grid value {x} is not finite"
                )));
            }
            let delta = x * omega_total;
            let drives = drive_schedule(seq, omega_total, delta, -delta, 0.0)?;
            let p = propagate_detailed(seq, &drives, opts)?;
            let reference = p.reference.as_ref().expect("self-check ran");
            Ok(DetuningPoint {
                delta_over_omega: x,
                fidelity: average_fidelity(&ideal, &p.unitary),
                reference_fidelity: average_fidelity(&ideal, reference),
            })
        })
        .collect()
}

/// How a level shift of `|1>` enters the two transition detunings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StarkMapping {
    /// `Delta_A = Delta_B`: `|1>` moves relative to both `|0>` and `|2>`.
    Common,
    /// `Delta_A = -Delta_B`.
    Opposite,
}

/// Trap geometry and light shifts. Shifts are in Hz (energy / h).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrapModel {
    /// Thomas-Fermi radius (m).
    pub r_tf: f64,
    pub tensor_center_hz: f64,
    pub tensor_edge_hz: f64,
    pub scalar_center_hz: f64,
    pub scalar_edge_hz: f64,
    /// Adds the scalar spread to the `|1>` shift, a worst case for a shift
    /// that is nominally common to all levels.
    pub include_scalar: bool,
    /// Trap frequency (rad/s); informational.
    pub omega_ho: f64,
    pub samples: usize,
    pub mapping: StarkMapping,
}

impl Default for TrapModel {
    fn default() -> Self {
        Self {
            r_tf: 6.5e-6,
            tensor_center_hz: 25.8e3,
            tensor_edge_hz: 25.3e3,
            scalar_center_hz: 6.0e3,
            scalar_edge_hz: 5.9e3,
            include_scalar: false,
            omega_ho: TAU * 100.0,
            samples: 1000,
            mapping: StarkMapping::Common,
        }
    }
}

impl TrapModel {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.r_tf,
            self.tensor_center_hz,
            self.tensor_edge_hz,
            self.scalar_center_hz,
            self.scalar_edge_hz,
            self.omega_ho,
        ]
        .iter()
        .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidArgument(
                "trap parameters must be finite".into(),
            ));
        }
        if !(self.r_tf > 0.0) {
            return Err(Error::InvalidArgument(
                "Thomas-Fermi radius must be positive".into(),
            ));
        }
        if self.tensor_center_hz < self.tensor_edge_hz
            || self.scalar_center_hz < self.scalar_edge_hz
        {
            return Err(Error::InvalidArgument(
                "center shift must not be below the edge shift".into(),
            ));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument(
                "sample count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Scale the center-to-edge spread of both shifts by `k`, keeping the edge.
    pub fn with_spread_scaled(&self, k: f64) -> Self {
        Self {
            tensor_center_hz: self.tensor_edge_hz
                + k * (self.tensor_center_hz - self.tensor_edge_hz),
            scalar_center_hz: self.scalar_edge_hz
                + k * (self.scalar_center_hz - self.scalar_edge_hz),
            ..*self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarkShift {
    pub tensor_hz: f64,
    pub scalar_hz: f64,
}

fn intensity_profile(r: f64, r_tf: f64) -> f64 {
    let x = r / r_tf;
    1.0 - x * x
}

/// Shifts at radius `r`: `edge + (center - edge)(1 - r^2 / R^2)`.
pub fn stark_profile(model: &TrapModel, r: f64) -> StarkShift {
    let q = intensity_profile(r, model.r_tf);
    StarkShift {
        tensor_hz: model.tensor_edge_hz + (model.tensor_center_hz - model.tensor_edge_hz) * q,
        scalar_hz: model.scalar_edge_hz + (model.scalar_center_hz - model.scalar_edge_hz) * q,
    }
}

/// Radial Thomas-Fermi density `15 r^2 (1 - r^2/R^2) / (2 R^3)` on `[0, R]`,
/// zero outside; integrates to 1.
pub fn tf_density(model: &TrapModel, r: f64) -> f64 {
    let big_r = model.r_tf;
    if !(0.0..=big_r).contains(&r) {
        return 0.0;
    }
    15.0 * r * r * intensity_profile(r, big_r) / (2.0 * big_r.powi(3))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Sampling {
    /// Midpoint nodes on `[0, R]`.
    Quadrature,
    /// Uniform radii from a seeded generator.
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetuningSample {
    pub r: f64,
    /// rad/s
    pub delta_a: f64,
    pub delta_b: f64,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSpec {
    pub samples: Vec<DetuningSample>,
    /// Density-weighted mean tensor shift (Hz).
    pub mean_tensor_hz: f64,
}

impl EnsembleSpec {
    /// Weights are normalized; they must be non-negative with a positive sum.
    pub fn new(mut samples: Vec<DetuningSample>, mean_tensor_hz: f64) -> Result<Self> {
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        let valid = samples
            .iter()
            .all(|s| s.weight >= 0.0 && s.delta_a.is_finite() && s.delta_b.is_finite());
        if samples.is_empty() || !valid || !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidArgument(
                "ensemble needs finite samples with non-negative weights of positive sum".into(),
            ));
        }
        for s in &mut samples {
            s.weight /= total;
        }
        Ok(Self {
            samples,
            mean_tensor_hz,
        })
    }

    /// A single resonant sample.
    pub fn resonant() -> Self {
        Self {
            samples: vec![DetuningSample {
                r: 0.0,
                delta_a: 0.0,
                delta_b: 0.0,
                weight: 1.0,
            }],
            mean_tensor_hz: 0.0,
        }
    }

    pub fn weighted_mean_delta_a(&self) -> f64 {
        self.samples.iter().map(|s| s.weight * s.delta_a).sum()
    }
}

/// Density-weighted detuning samples `Delta(r) = E(r) - <E>` in rad/s.
pub fn ensemble_detunings(model: &TrapModel, sampling: Sampling) -> Result<EnsembleSpec> {
    model.validate()?;
    let n = model.samples;
    let radii: Vec<f64> = match sampling {
        Sampling::Quadrature => (0..n)
            .map(|i| (i as f64 + 0.5) / n as f64 * model.r_tf)
            .collect(),
        Sampling::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.random_range(0.0..model.r_tf)).collect()
        }
    };
    let raw: Vec<f64> = radii.iter().map(|&r| tf_density(model, r)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument(
            "all samples fall on zero density".into(),
        ));
    }
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let profile: Vec<f64> = radii
        .iter()
        .map(|&r| intensity_profile(r, model.r_tf))
        .collect();
    let mean_profile: f64 = weights.iter().zip(&profile).map(|(w, q)| w * q).sum();

    let tensor_spread = model.tensor_center_hz - model.tensor_edge_hz;
    let scalar_spread = if model.include_scalar {
        model.scalar_center_hz - model.scalar_edge_hz
    } else {
        0.0
    };
    let samples = radii
        .iter()
        .zip(&profile)
        .zip(&weights)
        .map(|((&r, &q), &weight)| {
            let dq = q - mean_profile;
            let delta = TAU * (tensor_spread * dq + scalar_spread * dq);
            let delta_b = match model.mapping {
                StarkMapping::Common => delta,
                StarkMapping::Opposite => -delta,
            };
            DetuningSample {
                r,
                delta_a: delta,
                delta_b,
                weight,
            }
        })
        .collect();
    Ok(EnsembleSpec {
        samples,
        mean_tensor_hz: model.tensor_edge_hz + tensor_spread * mean_profile,
    })
}

/// `sum_i w_i U_i |psi><psi| U_i†` with each `U_i` propagated at that
/// sample's detunings. Samples run in parallel; the sum is taken in sample
/// order.
pub fn ensemble_density_matrix(
    seq: &PulseSequence,
    spec: &EnsembleSpec,
    psi_in: &CVec3,
    rabi: f64,
    opts: &PropagateOptions,
) -> Result<DensityMatrix3> {
    let rho_in = DensityMatrix3::pure(psi_in)?;
    let terms: Vec<CMat3> = spec
        .samples
        .par_iter()
        .map(|s| {
            let drives = drive_schedule(seq, rabi, s.delta_a, s.delta_b, 0.0)?;
            let u = propagate(seq, &drives, opts)?;
            Ok(rho_in.evolve(&u).into_inner() * c64(s.weight, 0.0))
        })
        .collect::<Result<_>>()?;
    let sum = terms.into_iter().fold(CMat3::zeros(), |acc, m| acc + m);
    DensityMatrix3::new(sum)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FourierVariant {
    /// Single-tone sequence.
    #[serde(rename = "F_I")]
    SingleTone,
    /// Dual-tone sequence.
    #[serde(rename = "F_II")]
    DualTone,
}

impl FourierVariant {
    pub fn sequence(self) -> PulseSequence {
        match self {
            FourierVariant::SingleTone => fourier_single_tone(),
            FourierVariant::DualTone => fourier_dual_tone(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            FourierVariant::SingleTone => "F_I",
            FourierVariant::DualTone => "F_II",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StarkRow {
    pub operator: FourierVariant,
    pub input: usize,
    pub purity: f64,
    pub fidelity: f64,
    pub fidelity_pure: f64,
}

/// Output state of one ensemble row.
pub fn stark_state(
    variant: FourierVariant,
    input: usize,
    spec: &EnsembleSpec,
    rabi: f64,
    opts: &PropagateOptions,
) -> Result<DensityMatrix3> {
    if input > 2 {
        return Err(Error::InvalidArgument(format!(
            "input level {input} out of range"
        )));
    }
    ensemble_density_matrix(&variant.sequence(), spec, &basis(input), rabi, opts)
}

/// Purity, fidelity and purity-adjusted fidelity of `rho` as the output of
/// `gate` on `|input>`.
pub fn state_metrics(rho: &DensityMatrix3, gate: &Unitary3, input: usize) -> (f64, f64, f64) {
    let pure = purify(rho);
    (
        purity(rho),
        fidelity(rho, gate, input),
        fidelity_with(&pure.matrix, gate, input),
    )
}

/// The six (operator, input) rows, dual-tone first.
pub fn stark_table(
    spec: &EnsembleSpec,
    rabi: f64,
    opts: &PropagateOptions,
) -> Result<Vec<StarkRow>> {
    let mut rows = Vec::with_capacity(6);
    for variant in [FourierVariant::DualTone, FourierVariant::SingleTone] {
        let gate = variant.sequence().unitary();
        for input in 0..3 {
            let rho = stark_state(variant, input, spec, rabi, opts)?;
            let (purity, fidelity, fidelity_pure) = state_metrics(&rho, &gate, input);
            rows.push(StarkRow {
                operator: variant,
                input,
                purity,
                fidelity,
                fidelity_pure,
            });
        }
    }
    Ok(rows)
}

/// Default Rabi magnitude for the ensemble simulation (rad/s).
pub const DEFAULT_RABI: f64 = TAU * 2.0e3;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{sequence_unitary, u_a, Pulse, VirtualPhase};
    use crate::qmath::{distance_mod_phase, haar_unitary, random_state};
    use crate::synth::{decompose, fourier_dual_tone_target, Scheme};
    use std::f64::consts::FRAC_PI_4;

    const RABI: f64 = DEFAULT_RABI;

    fn resonant(seq: &PulseSequence) -> Vec<DriveConfig> {
        drive_schedule(seq, RABI, 0.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn single_pulse_resonant_limit() {
        let seq = PulseSequence::new(
            vec![Pulse::a(FRAC_PI_4, 0.7).unwrap()],
            VirtualPhase::zero(),
            0.0,
        );
        let u = propagate(&seq, &resonant(&seq), &PropagateOptions::default()).unwrap();
        assert!(max_abs(&(u.matrix() - u_a(FRAC_PI_4, 0.7).matrix())) < 1e-6);
    }

    #[test]
    fn dual_tone_fourier_resonant() {
        let seq = fourier_dual_tone();
        let u = propagate(&seq, &resonant(&seq), &PropagateOptions::default()).unwrap();
        assert!(distance_mod_phase(&u, &fourier_dual_tone_target()) < 1e-6);
    }

    #[test]
    fn exact_matches_rk4_with_detuning() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let seq = decompose(&haar_unitary(&mut rng), Scheme::DualTone).unwrap();
            let da = rng.random_range(-0.1..0.1) * RABI;
            let db = rng.random_range(-0.1..0.1) * RABI;
            let drives = drive_schedule(&seq, RABI, da, db, 1.3e-3).unwrap();
            for frame in [Frame::Atomic, Frame::Drive] {
                let rk = PropagateOptions {
                    frame,
                    ..PropagateOptions::default()
                };
                let ex = PropagateOptions {
                    frame,
                    ..PropagateOptions::exact()
                };
                let a = propagate(&seq, &drives, &rk).unwrap();
                let b = propagate(&seq, &drives, &ex).unwrap();
                assert!(max_abs(&(a.matrix() - b.matrix())) <= 1e-8);
            }
        }
    }

    #[test]
    fn gaps_on_the_clock_only_change_frames() {
        let seq = fourier_single_tone();
        let mut drives = drive_schedule(&seq, RABI, 300.0, -300.0, 0.0).unwrap();
        let u0 = propagate(&seq, &drives, &PropagateOptions::exact()).unwrap();
        drives[2].start += 1e-4;
        let opts = PropagateOptions::exact();
        let u1 = propagate(&seq, &drives, &opts).unwrap();
        assert!(max_abs(&(u0.matrix() - u1.matrix())) > 1e-3);
        let rk = propagate(&seq, &drives, &PropagateOptions::default()).unwrap();
        assert!(max_abs(&(rk.matrix() - u1.matrix())) <= 1e-8);
    }

    #[test]
    fn rejects_inconsistent_drives() {
        let seq = fourier_single_tone();
        let mut drives = resonant(&seq);
        drives[1].duration *= 1.01;
        assert!(propagate(&seq, &drives, &PropagateOptions::default()).is_err());
        let mut drives = resonant(&seq);
        drives[1].start -= 1.0;
        assert!(propagate(&seq, &drives, &PropagateOptions::default()).is_err());
        assert!(propagate(&seq, &drives[..2], &PropagateOptions::default()).is_err());
    }

    #[test]
    fn self_check_reports_coarse_steps() {
        let seq = fourier_single_tone();
        let drives = resonant(&seq);
        let opts = PropagateOptions {
            min_steps: 4,
            max_phase_step: 2.0,
            tolerance: 1e-12,
            ..PropagateOptions::default()
        };
        assert!(matches!(
            propagate(&seq, &drives, &opts),
            Err(Error::Integration { .. })
        ));
    }

    #[test]
    fn detuned_single_tone_fourier() {
        let seq = fourier_single_tone();
        let pts = detuning_sweep(&seq, &[0.0, 0.05], RABI, &PropagateOptions::default()).unwrap();
        assert!((pts[0].fidelity - 1.0).abs() < 1e-6);
        assert!(pts[1].fidelity < 1.0 && pts[1].fidelity > 0.5);
        assert!((pts[1].fidelity - pts[1].reference_fidelity).abs() < 1e-6);
    }

    #[test]
    fn population_scan_examples() {
        let oa = C64::from_polar(RABI * 0.6, 0.4);
        let ob = c64(RABI * 0.8, 0.0);
        let tab = t_ab(oa, ob);
        let alpha = 2.0 * (0.6f64 / 0.8).atan();
        let p = population_scan(oa, ob, &basis(0), &[0.0, tab]).unwrap();
        assert!((p[0][0] - 1.0).abs() < 1e-15 && p[0][1] < 1e-15 && p[0][2] < 1e-15);
        assert!(p[1][1] <= 1e-9);
        assert!((p[1][0] - alpha.cos().powi(2)).abs() < 1e-9);
        assert!((p[1][2] - alpha.sin().powi(2)).abs() < 1e-9);

        let eq = population_scan(
            c64(RABI, 0.0),
            c64(RABI, 0.0),
            &basis(0),
            &[t_ab(c64(RABI, 0.0), c64(RABI, 0.0))],
        )
        .unwrap();
        assert!((eq[0][2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn population_scan_conserves() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let psi = random_state(&mut rng);
        let grid: Vec<f64> = (0..200).map(|k| k as f64 * 5e-6).collect();
        for p in population_scan(c64(1e4, 2e3), c64(-3e3, 7e3), &psi, &grid).unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn stark_profile_endpoints() {
        let m = TrapModel::default();
        assert!((stark_profile(&m, 0.0).tensor_hz - 25.8e3).abs() < 1e-9);
        assert!((stark_profile(&m, m.r_tf).tensor_hz - 25.3e3).abs() < 1e-9);
        assert!((stark_profile(&m, m.r_tf / 2f64.sqrt()).tensor_hz - 25.55e3).abs() < 1e-9);
    }

    #[test]
    fn tf_density_shape() {
        let m = TrapModel::default();
        assert_eq!(tf_density(&m, 0.0), 0.0);
        assert_eq!(tf_density(&m, m.r_tf), 0.0);
        assert_eq!(tf_density(&m, -1e-7), 0.0);
        // Simpson oracle.
        let n = 20_000;
        let h = m.r_tf / n as f64;
        let mut s = tf_density(&m, 0.0) + tf_density(&m, m.r_tf);
        for k in 1..n {
            s += tf_density(&m, k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - 1.0).abs() < 1e-9);
        let argmax = (0..=100_000)
            .map(|k| k as f64 / 100_000.0 * m.r_tf)
            .max_by(|a, b| tf_density(&m, *a).total_cmp(&tf_density(&m, *b)))
            .unwrap();
        assert!((argmax / m.r_tf - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn ensemble_mean_is_removed() {
        let m = TrapModel::default();
        let spec = ensemble_detunings(&m, Sampling::Quadrature).unwrap();
        assert_eq!(spec.samples.len(), 1000);
        let wsum: f64 = spec.samples.iter().map(|s| s.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        assert!(spec.weighted_mean_delta_a().abs() <= 1e-9 * TAU * 500.0);

        // 5-point Gauss-Legendre per panel on the analytic integrand.
        let gl = [
            (0.0, 128.0 / 225.0),
            (
                0.538_469_310_105_683_1,
                (322.0 + 13.0 * 70f64.sqrt()) / 900.0,
            ),
            (
                -0.538_469_310_105_683_1,
                (322.0 + 13.0 * 70f64.sqrt()) / 900.0,
            ),
            (0.906_179_845_938_664, (322.0 - 13.0 * 70f64.sqrt()) / 900.0),
            (
                -0.906_179_845_938_664,
                (322.0 - 13.0 * 70f64.sqrt()) / 900.0,
            ),
        ];
        let panels = 50;
        let w = m.r_tf / panels as f64;
        let mut mean = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * w;
            for (x, wt) in gl {
                let r = mid + x * w / 2.0;
                mean += wt * w / 2.0 * tf_density(&m, r) * stark_profile(&m, r).tensor_hz;
            }
        }
        assert!((spec.mean_tensor_hz - mean).abs() / mean < 1e-6);
    }

    #[test]
    fn flat_trap_has_no_detuning() {
        let m = TrapModel {
            tensor_center_hz: 25.3e3,
            ..TrapModel::default()
        };
        let spec = ensemble_detunings(&m, Sampling::Quadrature).unwrap();
        assert!(spec
            .samples
            .iter()
            .all(|s| s.delta_a == 0.0 && s.delta_b == 0.0));
    }

    #[test]
    fn random_sampling_is_seeded() {
        let m = TrapModel {
            samples: 50,
            ..TrapModel::default()
        };
        let a = ensemble_detunings(&m, Sampling::Random { seed: 4 }).unwrap();
        let b = ensemble_detunings(&m, Sampling::Random { seed: 4 }).unwrap();
        let c = ensemble_detunings(&m, Sampling::Random { seed: 5 }).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn trap_validation() {
        let bad = TrapModel {
            tensor_center_hz: 1.0,
            ..TrapModel::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrapModel {
            samples: 0,
            ..TrapModel::default()
        }
        .validate()
        .is_err());
        assert!(TrapModel {
            r_tf: 0.0,
            ..TrapModel::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn resonant_ensemble_is_pure() {
        let seq = fourier_dual_tone();
        let rho = ensemble_density_matrix(
            &seq,
            &EnsembleSpec::resonant(),
            &basis(0),
            RABI,
            &PropagateOptions::exact(),
        )
        .unwrap();
        assert!((purity(&rho) - 1.0).abs() < 1e-12);
        assert!((fidelity(&rho, &sequence_unitary(&seq), 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn purity_falls_with_spread() {
        let base = TrapModel {
            samples: 200,
            ..TrapModel::default()
        };
        let mut last = f64::INFINITY;
        for k in [0.0, 0.5, 1.0, 1.5, 2.0] {
            let spec =
                ensemble_detunings(&base.with_spread_scaled(k), Sampling::Quadrature).unwrap();
            let rho = stark_state(
                FourierVariant::DualTone,
                0,
                &spec,
                RABI,
                &PropagateOptions::exact(),
            )
            .unwrap();
            let p = purity(&rho);
            assert!(p <= 1.0 + 1e-12);
            assert!(p < last || k == 0.0);
            last = p;
        }
    }
}
