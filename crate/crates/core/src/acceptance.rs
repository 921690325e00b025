//! Acceptance suite shared by the `selftest` command and the `acceptance`
//! test target. Each check returns a deterministic one-line detail string;
//! wall-clock limits are enforced separately so reports stay byte-stable.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{
    detuning_sweep, drive_schedule, ensemble_detunings, population_scan, propagate,
    propagate_detailed, stark_state, state_metrics, t_ab, FourierVariant, PropagateOptions,
    Sampling, TrapModel, DEFAULT_RABI,
};
use crate::pulses::{
    ab_angles, rwa_hamiltonian, sequence_unitary, u_ab, Pulse, PulseSequence, VirtualPhase,
};
use crate::qmath::{
    basis, c64, distance_mod_phase, expm_coupling, gell_mann, haar_special_unitary, max_abs,
    random_density, random_state, trace_distance, CMat3, DensityMatrix3,
};
use crate::synth::{
    decompose, fourier_dual_tone, fourier_dual_tone_target, fourier_single_tone,
    fourier_single_tone_target, Scheme,
};
use crate::tomo::{
    averaging_study, gell_mann_from_readouts, mle_reconstruct, simulate_fractions, AveragingConfig,
    MleOptions, Noise, ReadoutSet,
};

pub const DEFAULT_SEED: u64 = 42;

/// Simulated ensemble targets `(operator, input, purity, fidelity,
/// purity-adjusted fidelity)`.
pub const STARK_TABLE: [(FourierVariant, usize, f64, f64, f64); 6] = [
    (FourierVariant::DualTone, 0, 0.953, 0.980, 1.009),
    (FourierVariant::DualTone, 1, 0.950, 0.974, 1.008),
    (FourierVariant::DualTone, 2, 0.953, 0.980, 1.009),
    (FourierVariant::SingleTone, 0, 0.963, 0.981, 1.006),
    (FourierVariant::SingleTone, 1, 0.965, 0.986, 1.007),
    (FourierVariant::SingleTone, 2, 0.965, 0.986, 1.007),
];
pub const STARK_TOL: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub limit: Option<Duration>,
}

impl CriterionResult {
    pub fn within_time(&self) -> bool {
        self.limit.is_none_or(|l| self.elapsed <= l)
    }

    /// Numeric verdict and wall-clock limit together.
    pub fn ok(&self) -> bool {
        self.passed && self.within_time()
    }

    /// Deterministic report line (no timings unless the limit was exceeded).
    pub fn line(&self) -> String {
        let mut s = format!(
            "[{}] {:>2} {:<28} {}",
            if self.ok() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        );
        if !self.within_time() {
            s.push_str(&format!(
                " (runtime {:.1} s over limit {:.0} s)",
                self.elapsed.as_secs_f64(),
                self.limit.unwrap_or_default().as_secs_f64()
            ));
        }
        s
    }
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(id));
    rng
}

fn recomposition(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 1);
    let targets: Vec<_> = (0..1000).map(|_| haar_special_unitary(&mut rng)).collect();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for scheme in [Scheme::SingleTone, Scheme::DualTone] {
        let dists: Vec<Option<f64>> = targets
            .par_iter()
            .map(|u| {
                decompose(u, scheme)
                    .ok()
                    .map(|seq| distance_mod_phase(&sequence_unitary(&seq), u))
            })
            .collect();
        for d in dists {
            match d {
                Some(d) => worst = worst.max(d),
                None => failures += 1,
            }
        }
    }
    Outcome {
        passed: failures == 0 && worst <= 1e-9,
        detail: format!(
            "2000 decompositions, {failures} errors, max distance {worst:.2e} (limit 1e-9)"
        ),
    }
}

fn closed_form_fourier() -> Outcome {
    let d1 = distance_mod_phase(
        &sequence_unitary(&fourier_single_tone()),
        &fourier_single_tone_target(),
    );
    let d2 = distance_mod_phase(
        &sequence_unitary(&fourier_dual_tone()),
        &fourier_dual_tone_target(),
    );
    Outcome {
        passed: d1 <= 1e-9 && d2 <= 1e-9,
        detail: format!("single-tone {d1:.2e}, dual-tone {d2:.2e} (limit 1e-9)"),
    }
}

fn dual_tone_oracle(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 3);
    let mut worst = 0.0f64;
    let mut errors = 0;
    for _ in 0..100 {
        let oa = C64::from_polar(rng.random_range(0.1..2.0), rng.random_range(-PI..PI)) * 1e4;
        let ob = C64::from_polar(rng.random_range(0.1..2.0), rng.random_range(-PI..PI)) * 1e4;
        let (alpha, beta) = ab_angles(oa, ob);
        let alpha_ref = 2.0 * (oa.norm() / ob.norm()).atan();
        let beta_ref = (oa / ob).arg();
        match expm_coupling(&rwa_hamiltonian(oa, ob), t_ab(oa, ob)) {
            Ok(u) => {
                let closed = u_ab(alpha_ref, beta_ref);
                worst = worst
                    .max(max_abs(&(u.matrix() - closed.matrix())))
                    .max(max_abs(&(u_ab(alpha, beta).matrix() - closed.matrix())));
            }
            Err(_) => errors += 1,
        }
    }
    Outcome {
        passed: errors == 0 && worst <= 1e-10,
        detail: format!("100 coupling pairs, max entry error {worst:.2e} (limit 1e-10)"),
    }
}

/// Read-out matrices written out entry by entry.
pub fn printed_readouts() -> [CMat3; 6] {
    let o = c64(0.0, 0.0);
    let l = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let r = c64(2f64.sqrt(), 0.0);
    let s = c64(FRAC_1_SQRT_2, 0.0);
    [
        CMat3::new(l, -l, o, l, l, o, o, o, r) * s,
        CMat3::new(l, -i, o, -i, l, o, o, o, r) * s,
        CMat3::new(r, o, o, o, l, l, o, -l, l) * s,
        CMat3::new(r, o, o, o, l, -i, o, -i, l) * s,
        CMat3::new(l, o, -l, o, -r, o, -l, o, -l) * s,
        CMat3::new(l, o, -i, o, -r, o, i, o, -l) * s,
    ]
}

fn readout_tables() -> Outcome {
    let set = ReadoutSet::standard();
    let readout_err = set
        .unitaries
        .iter()
        .zip(printed_readouts())
        .map(|(u, m)| max_abs(&(u.matrix() - m)))
        .fold(0.0, f64::max);
    let gm_err = gell_mann_from_readouts(&set)
        .iter()
        .zip(gell_mann())
        .map(|(b, l)| max_abs(&(b - l)))
        .fold(0.0, f64::max);
    Outcome {
        passed: readout_err <= 1e-12 && gm_err <= 1e-12,
        detail: format!(
            "read-outs {readout_err:.2e}, Gell-Mann constructions {gm_err:.2e} (limit 1e-12)"
        ),
    }
}

fn mle_round_trip(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 5);
    let mut states: Vec<DensityMatrix3> = (0..100)
        .map(|_| DensityMatrix3::pure(&random_state(&mut rng)).expect("normalized"))
        .collect();
    states.extend((0..100).map(|_| random_density(&mut rng)));
    let set = ReadoutSet::standard();
    let opts = MleOptions {
        record_likelihood: true,
        ..MleOptions::default()
    };
    let results: Vec<Option<(f64, usize, f64)>> = states
        .par_iter()
        .map(|rho| {
            let data = simulate_fractions(rho, &set, &Noise::Exact).ok()?;
            let r = mle_reconstruct(&data, &set, &opts).ok()?;
            let drop = r
                .history
                .windows(2)
                .map(|w| w[0] - w[1])
                .fold(0.0, f64::max);
            Some((
                trace_distance(r.rho.matrix(), rho.matrix()),
                r.iterations,
                drop,
            ))
        })
        .collect();
    let errors = results.iter().filter(|r| r.is_none()).count();
    let (mut td, mut iters, mut drop) = (0.0f64, 0usize, 0.0f64);
    for (t, i, d) in results.into_iter().flatten() {
        td = td.max(t);
        iters = iters.max(i);
        drop = drop.max(d);
    }
    Outcome {
        passed: errors == 0 && td <= 1e-5 && iters <= 5000 && drop <= 1e-12,
        detail: format!(
            "200 states, max trace distance {td:.2e} (limit 1e-5), max iterations {iters}, max likelihood drop {drop:.1e}"
        ),
    }
}

fn random_sequence<R: Rng>(rng: &mut R) -> PulseSequence {
    let n = rng.random_range(1..=5);
    let pulses = (0..n)
        .map(|_| {
            let phase = rng.random_range(-PI..PI);
            match rng.random_range(0..3) {
                0 => Pulse::a(rng.random_range(0.0..PI), phase),
                1 => Pulse::b(rng.random_range(0.0..PI), phase),
                _ => Pulse::ab(rng.random_range(0.0..PI), phase),
            }
            .expect("valid random pulse")
        })
        .collect();
    let vp = VirtualPhase::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI));
    PulseSequence::new(pulses, vp, rng.random_range(-PI..PI))
}

fn resonant_dynamics(seed: u64) -> Outcome {
    let mut rng = rng_for(seed, 6);
    let seqs: Vec<PulseSequence> = (0..100).map(|_| random_sequence(&mut rng)).collect();
    let opts = PropagateOptions::default();
    let dists: Vec<Option<f64>> = seqs
        .par_iter()
        .map(|seq| {
            let drives = drive_schedule(seq, DEFAULT_RABI, 0.0, 0.0, 0.0).ok()?;
            let u = propagate(seq, &drives, &opts).ok()?;
            Some(max_abs(&(u.matrix() - sequence_unitary(seq).matrix())))
        })
        .collect();
    let errors = dists.iter().filter(|d| d.is_none()).count();
    let worst = dists.into_iter().flatten().fold(0.0, f64::max);

    let mut p1 = 0.0f64;
    for _ in 0..20 {
        let oa =
            C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(-PI..PI)) * DEFAULT_RABI;
        let ob =
            C64::from_polar(rng.random_range(0.1..1.0), rng.random_range(-PI..PI)) * DEFAULT_RABI;
        match population_scan(oa, ob, &basis(0), &[t_ab(oa, ob)]) {
            Ok(p) => p1 = p1.max(p[0][1]),
            Err(_) => p1 = f64::INFINITY,
        }
    }
    Outcome {
        passed: errors == 0 && worst <= 1e-6 && p1 <= 1e-9,
        detail: format!(
            "100 sequences, max entry error {worst:.2e} (limit 1e-6); max P1(t_AB) {p1:.1e} (limit 1e-9)"
        ),
    }
}

/// `Delta / Omega` grid for the detuning sweep.
pub fn default_detuning_grid() -> Vec<f64> {
    (0..=20).map(|k| -0.05 + 0.005 * k as f64).collect()
}

fn detuning_curves() -> Outcome {
    let grid = default_detuning_grid();
    let opts = PropagateOptions::default();
    let mut at_zero = 0.0f64;
    let mut ref_err = 0.0f64;
    let mut max_f = f64::NEG_INFINITY;
    let mut min_f = f64::INFINITY;
    for variant in [FourierVariant::SingleTone, FourierVariant::DualTone] {
        let pts = match detuning_sweep(&variant.sequence(), &grid, DEFAULT_RABI, &opts) {
            Ok(p) => p,
            Err(e) => {
                return Outcome {
                    passed: false,
                    detail: format!("sweep failed: {e}"),
                }
            }
        };
        for p in pts {
            if p.delta_over_omega.abs() < 1e-15 {
                at_zero = at_zero.max((p.fidelity - 1.0).abs());
            }
            ref_err = ref_err.max((p.fidelity - p.reference_fidelity).abs());
            max_f = max_f.max(p.fidelity);
            min_f = min_f.min(p.fidelity);
        }
    }
    Outcome {
        passed: at_zero <= 1e-6 && ref_err <= 1e-6 && max_f <= 1.0 + 1e-12,
        detail: format!(
            "|1 - F(0)| {at_zero:.1e}, max halved-step gap {ref_err:.1e} (limit 1e-6), F in [{min_f:.4}, {max_f:.6}]"
        ),
    }
}

/// Ensemble metrics for the six rows plus the largest exact-versus-RK4
/// propagator gap over a spread of samples.
pub struct StarkRun {
    pub rows: Vec<(FourierVariant, usize, f64, f64, f64)>,
    pub method_gap: f64,
}

pub fn run_stark(model: &TrapModel) -> crate::Result<StarkRun> {
    let spec = ensemble_detunings(model, Sampling::Quadrature)?;
    let exact = PropagateOptions::exact();
    let rk4 = PropagateOptions {
        self_check: false,
        ..PropagateOptions::default()
    };
    let stride = (spec.samples.len() / 10).max(1);
    let mut method_gap = 0.0f64;
    let mut rows = Vec::with_capacity(6);
    for (variant, input, ..) in STARK_TABLE {
        let seq = variant.sequence();
        for s in spec.samples.iter().step_by(stride) {
            let drives = drive_schedule(&seq, DEFAULT_RABI, s.delta_a, s.delta_b, 0.0)?;
            let a = propagate_detailed(&seq, &drives, &exact)?.unitary;
            let b = propagate_detailed(&seq, &drives, &rk4)?.unitary;
            method_gap = method_gap.max(max_abs(&(a.matrix() - b.matrix())));
        }
        let rho = stark_state(variant, input, &spec, DEFAULT_RABI, &exact)?;
        let (p, f, fp) = state_metrics(&rho, &seq.unitary(), input);
        rows.push((variant, input, p, f, fp));
    }
    Ok(StarkRun { rows, method_gap })
}

fn stark_reproduction(run: &crate::Result<StarkRun>) -> Outcome {
    let run = match run {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                passed: false,
                detail: format!("simulation failed: {e}"),
            }
        }
    };
    let mut misses = Vec::new();
    let mut worst = 0.0f64;
    for ((variant, input, p, f, fp), (_, _, tp, tf, tfp)) in run.rows.iter().zip(STARK_TABLE) {
        let dev = [(p - tp).abs(), (f - tf).abs(), (fp - tfp).abs()]
            .into_iter()
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        if dev > STARK_TOL {
            misses.push(format!(
                "{}|{input}> P {p:.3} vs {tp:.3}, F {f:.3} vs {tf:.3}",
                variant.label()
            ));
        }
    }
    let passed = misses.is_empty() && run.method_gap <= 1e-8;
    let mut detail = format!(
        "max deviation {worst:.3} (limit {STARK_TOL}), exact vs RK4 {:.1e}",
        run.method_gap
    );
    if !misses.is_empty() {
        detail.push_str(&format!("; outside: {}", misses.join(", ")));
    }
    Outcome { passed, detail }
}

fn purity_recovery(run: &crate::Result<StarkRun>) -> Outcome {
    match run {
        Ok(r) => {
            let min = r.rows.iter().map(|row| row.4).fold(f64::INFINITY, f64::min);
            Outcome {
                passed: min >= 0.99,
                detail: format!("min purity-adjusted fidelity {min:.4} (limit 0.99)"),
            }
        }
        Err(e) => Outcome {
            passed: false,
            detail: format!("simulation failed: {e}"),
        },
    }
}

fn averaging(seed: u64) -> Outcome {
    let run = || -> crate::Result<Outcome> {
        let spec = ensemble_detunings(&TrapModel::default(), Sampling::Quadrature)?;
        let variant = FourierVariant::DualTone;
        let rho = stark_state(variant, 0, &spec, DEFAULT_RABI, &PropagateOptions::exact())?;
        let target = variant.sequence().unitary().apply(&basis(0));
        let cfg = AveragingConfig {
            seed,
            ..AveragingConfig::default()
        };
        let pts = averaging_study(&rho, &target, &ReadoutSet::standard(), &cfg)?;
        let first = pts[0].fidelity;
        let last = pts[pts.len() - 1].fidelity;
        let ratio = first.spread / last.spread;
        let inside = last.mean >= first.min && last.mean <= first.max;
        Ok(Outcome {
            passed: ratio >= 2.0 && inside,
            detail: format!(
                "spread N=1 {:.2e}, N={} {:.2e} (ratio {ratio:.2}, limit 2); N={} mean {:.5} in [{:.5}, {:.5}]",
                first.spread,
                last_n(&pts),
                last.spread,
                last_n(&pts),
                last.mean,
                first.min,
                first.max
            ),
        })
    };
    run().unwrap_or_else(|e| Outcome {
        passed: false,
        detail: format!("study failed: {e}"),
    })
}

fn last_n(pts: &[crate::tomo::AveragingPoint]) -> usize {
    pts.last().map_or(0, |p| p.scans)
}

const TITLES: [&str; 11] = [
    "recomposition",
    "closed-form Fourier",
    "dual-tone oracle",
    "read-out tables",
    "MLE round trip",
    "resonant dynamics",
    "detuning sweep",
    "Stark ensemble table",
    "purity recovery",
    "scan averaging",
    "determinism",
];

const LIMITS: [Option<u64>; 11] = [
    Some(60),
    None,
    None,
    None,
    Some(120),
    None,
    None,
    Some(300),
    None,
    None,
    None,
];

fn timed(id: u8, f: impl FnOnce() -> Outcome) -> CriterionResult {
    let start = Instant::now();
    let o = f();
    CriterionResult {
        id,
        title: TITLES[usize::from(id) - 1],
        passed: o.passed,
        detail: o.detail,
        elapsed: start.elapsed(),
        limit: LIMITS[usize::from(id) - 1].map(Duration::from_secs),
    }
}

/// Criteria 1 to 10.
pub fn run_numeric(seed: u64) -> Vec<CriterionResult> {
    let mut out = vec![
        timed(1, || recomposition(seed)),
        timed(2, closed_form_fourier),
        timed(3, || dual_tone_oracle(seed)),
        timed(4, readout_tables),
        timed(5, || mle_round_trip(seed)),
        timed(6, || resonant_dynamics(seed)),
        timed(7, detuning_curves),
    ];
    let start = Instant::now();
    let stark = run_stark(&TrapModel::default());
    let stark_time = start.elapsed();
    let mut c8 = timed(8, || stark_reproduction(&stark));
    c8.elapsed += stark_time;
    out.push(c8);
    out.push(timed(9, || purity_recovery(&stark)));
    out.push(timed(10, || averaging(seed)));
    out
}

pub fn report(results: &[CriterionResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&r.line());
        s.push('\n');
    }
    s
}

/// All eleven criteria. The last reruns 1 to 10 and compares the two reports
/// byte for byte.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    let mut first = run_numeric(seed);
    let a = report(&first);
    let c11 = timed(11, || {
        let b = report(&run_numeric(seed));
        Outcome {
            passed: a == b,
            detail: format!(
                "two runs with seed {seed}: reports {}",
                if a == b { "identical" } else { "differ" }
            ),
        }
    });
    first.push(c11);
    first
}
