//! Six-read-out qutrit tomography: simulated measurement and iterative
//! maximum-likelihood reconstruction.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulses::{pulse_unitary, Pulse};
use crate::qmath::{
    c64, hermitian_eigen, projector, purify, purity, CMat3, CVec3, DensityMatrix3, Unitary3,
};

/// Max deviation of a read-out's fractions from summing to one.
pub const FRACTION_SUM_TOL: f64 = 1e-9;
/// Weight of the maximally mixed state blended in when a measured outcome has
/// zero predicted probability.
pub const REGULARIZATION_WEIGHT: f64 = 1e-12;

/// The six read-out pulses and their unitaries.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutSet {
    pub pulses: [Pulse; 6],
    pub unitaries: [Unitary3; 6],
}

impl ReadoutSet {
    /// `pi/2`-area pulses on A, B and AB at phases 0 and `pi/2`.
    pub fn standard() -> Self {
        let pulses = [
            Pulse::a(FRAC_PI_4, 0.0),
            Pulse::a(FRAC_PI_4, FRAC_PI_2),
            Pulse::b(FRAC_PI_4, 0.0),
            Pulse::b(FRAC_PI_4, FRAC_PI_2),
            Pulse::ab(FRAC_PI_4, 0.0),
            Pulse::ab(FRAC_PI_4, FRAC_PI_2),
        ]
        .map(|p| p.expect("valid read-out pulse"));
        let unitaries = pulses.map(|p| pulse_unitary(&p));
        Self { pulses, unitaries }
    }

    /// `R_i† |j><j| R_i`, indexed `[i][j]`.
    pub fn projectors(&self) -> [[CMat3; 3]; 6] {
        std::array::from_fn(|i| {
            let r = self.unitaries[i].matrix();
            std::array::from_fn(|j| r.adjoint() * projector(j) * r)
        })
    }
}

impl Default for ReadoutSet {
    fn default() -> Self {
        Self::standard()
    }
}

/// Gell-Mann matrices assembled from read-out projectors. The `lambda_3` row
/// uses `R_3† |0><0| R_3 - R_5† |1><1| R_5`.
pub fn gell_mann_from_readouts(readouts: &ReadoutSet) -> [CMat3; 8] {
    let p = readouts.projectors();
    let s3 = c64(1.0 / 3f64.sqrt(), 0.0);
    [
        p[0][1] - p[0][0],
        p[1][0] - p[1][1],
        p[2][0] - p[4][1],
        p[4][2] - p[4][0],
        p[5][0] - p[5][2],
        p[2][1] - p[2][2],
        p[3][1] - p[3][2],
        (p[2][0] + p[4][1] - p[0][2] * c64(2.0, 0.0)) * s3,
    ]
}

/// Measured fractions `f[i][j]` for read-out `i` (0-based) and outcome `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyData {
    pub fractions: [[f64; 3]; 6],
    /// Atoms per shot, when the fractions come from counts.
    pub atoms: Option<u64>,
    pub scan: usize,
}

impl TomographyData {
    pub fn new(fractions: [[f64; 3]; 6], atoms: Option<u64>, scan: usize) -> Result<Self> {
        for (i, row) in fractions.iter().enumerate() {
            if row.iter().any(|f| !(0.0..=1.0).contains(f)) {
                return Err(Error::InvalidArgument(format!(
                    "read-out {} has a fraction outside [0, 1]",
                    i + 1
                )));
            }
            let sum: f64 = row.iter().sum();
            if !((sum - 1.0).abs() <= FRACTION_SUM_TOL) {
                return Err(Error::InvalidArgument(format!(
                    "read-out {} fractions sum to {sum}",
                    i + 1
                )));
            }
        }
        if atoms == Some(0) {
            return Err(Error::InvalidArgument("atom count must be positive".into()));
        }
        Ok(Self {
            fractions,
            atoms,
            scan,
        })
    }

    /// Element-wise mean of several scans; keeps the atom count if all agree.
    pub fn average(scans: &[TomographyData]) -> Result<Self> {
        let first = scans
            .first()
            .ok_or_else(|| Error::InvalidArgument("no scans to average".into()))?;
        let n = scans.len() as f64;
        let mut f = [[0.0; 3]; 6];
        for s in scans {
            for (acc, row) in f.iter_mut().zip(&s.fractions) {
                for (a, x) in acc.iter_mut().zip(row) {
                    *a += x;
                }
            }
        }
        for row in &mut f {
            for a in row.iter_mut() {
                *a /= n;
            }
        }
        let atoms = first
            .atoms
            .filter(|a| scans.iter().all(|s| s.atoms == Some(*a)));
        Self::new(f, atoms, 0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FractionRow {
    readout: usize,
    j: usize,
    fraction: f64,
    atoms: Option<u64>,
    scan: usize,
}

/// CSV rows `readout,j,fraction,atoms,scan` (read-outs numbered from 1).
pub fn write_fractions_csv<W: std::io::Write>(out: W, data: &[TomographyData]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for d in data {
        for (i, row) in d.fractions.iter().enumerate() {
            for (j, &fraction) in row.iter().enumerate() {
                w.serialize(FractionRow {
                    readout: i + 1,
                    j,
                    fraction,
                    atoms: d.atoms,
                    scan: d.scan,
                })?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_fractions_csv`]; `#` lines are skipped. Scans are
/// returned in order of first appearance.
pub fn read_fractions_csv<R: std::io::Read>(input: R) -> Result<Vec<TomographyData>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    type Partial = (usize, [[Option<f64>; 3]; 6], Option<u64>);
    let mut scans: Vec<Partial> = Vec::new();
    for (k, rec) in r.deserialize::<FractionRow>().enumerate() {
        let line = k + 2;
        let row = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        if !(1..=6).contains(&row.readout) || row.j > 2 {
            return Err(Error::Parse {
                line,
                message: format!("read-out {} outcome {} out of range", row.readout, row.j),
            });
        }
        let idx = match scans.iter().position(|s| s.0 == row.scan) {
            Some(i) => i,
            None => {
                scans.push((row.scan, [[None; 3]; 6], row.atoms));
                scans.len() - 1
            }
        };
        let slot = &mut scans[idx].1[row.readout - 1][row.j];
        if slot.replace(row.fraction).is_some() {
            return Err(Error::Parse {
                line,
                message: format!(
                    "duplicate entry for read-out {} outcome {}",
                    row.readout, row.j
                ),
            });
        }
    }
    scans
        .into_iter()
        .map(|(scan, f, atoms)| {
            let mut fractions = [[0.0; 3]; 6];
            for (i, row) in f.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    fractions[i][j] = v.ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "scan {scan} lacks read-out {} outcome {j}",
                            i + 1
                        ))
                    })?;
                }
            }
            TomographyData::new(fractions, atoms, scan)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Noise {
    Exact,
    /// Multinomial counts of `atoms` per read-out from a generator seeded
    /// with `seed`.
    Multinomial {
        atoms: u64,
        seed: u64,
    },
}

/// `Tr(R_i† |j><j| R_i rho)` for every read-out and outcome.
pub fn exact_probabilities(rho: &DensityMatrix3, readouts: &ReadoutSet) -> [[f64; 3]; 6] {
    std::array::from_fn(|i| {
        let r = readouts.unitaries[i].matrix();
        let out = r * rho.matrix() * r.adjoint();
        std::array::from_fn(|j| out[(j, j)].re.max(0.0))
    })
}

fn normalized(p: [f64; 3]) -> [f64; 3] {
    let s: f64 = p.iter().sum();
    p.map(|x| x / s)
}

/// Multinomial fractions from one generator, drawn as successive binomials.
pub fn sample_fractions<R: Rng + ?Sized>(
    rho: &DensityMatrix3,
    readouts: &ReadoutSet,
    atoms: u64,
    scan: usize,
    rng: &mut R,
) -> Result<TomographyData> {
    if atoms == 0 {
        return Err(Error::InvalidArgument("atom count must be positive".into()));
    }
    let probs = exact_probabilities(rho, readouts);
    let mut fractions = [[0.0; 3]; 6];
    for (row, p) in fractions.iter_mut().zip(probs) {
        let p = normalized(p);
        let mut left = atoms;
        let mut mass = 1.0;
        let mut counts = [0u64; 3];
        for j in 0..2 {
            let q = if mass > 0.0 {
                (p[j] / mass).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let c = Binomial::new(left, q)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(rng);
            counts[j] = c;
            left -= c;
            mass -= p[j];
        }
        counts[2] = left;
        *row = counts.map(|c| c as f64 / atoms as f64);
    }
    TomographyData::new(fractions, Some(atoms), scan)
}

pub fn simulate_fractions(
    rho: &DensityMatrix3,
    readouts: &ReadoutSet,
    noise: &Noise,
) -> Result<TomographyData> {
    match *noise {
        Noise::Exact => {
            let f = exact_probabilities(rho, readouts).map(normalized);
            TomographyData::new(f, None, 0)
        }
        Noise::Multinomial { atoms, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample_fractions(rho, readouts, atoms, 0, &mut rng)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MleOptions {
    pub max_iters: usize,
    /// Frobenius norm of the step below which the iteration stops.
    pub tolerance: f64,
    /// Race each fixed-point update against a projected-gradient step and keep
    /// the likelier one.
    pub accelerate: bool,
    pub record_likelihood: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            tolerance: 1e-10,
            accelerate: true,
            record_likelihood: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix3,
    pub iterations: usize,
    pub stop: StopReason,
    /// Times the iterate was blended toward the maximally mixed state.
    pub regularizations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood before the first and after every iteration, if recorded.
    pub history: Vec<f64>,
}

struct Likelihood<'a> {
    f: &'a [[f64; 3]; 6],
    proj: [[CMat3; 3]; 6],
}

impl Likelihood<'_> {
    fn prob(&self, rho: &CMat3, i: usize, j: usize) -> f64 {
        (self.proj[i][j] * rho).trace().re
    }

    /// `sum f log p`, or `-inf` if a measured outcome has `p <= 0`.
    fn value(&self, rho: &CMat3) -> f64 {
        let mut l = 0.0;
        for i in 0..6 {
            for j in 0..3 {
                let f = self.f[i][j];
                if f > 0.0 {
                    let p = self.prob(rho, i, j);
                    if !(p > 0.0) {
                        return f64::NEG_INFINITY;
                    }
                    l += f * p.ln();
                }
            }
        }
        l
    }

    /// `sum f/p Pi`, or `None` if a measured outcome has `p <= 0`.
    fn gradient(&self, rho: &CMat3) -> Option<CMat3> {
        let mut q = CMat3::zeros();
        for i in 0..6 {
            for j in 0..3 {
                let f = self.f[i][j];
                if f > 0.0 {
                    let p = self.prob(rho, i, j);
                    if !(p > 0.0) {
                        return None;
                    }
                    q += self.proj[i][j] * c64(f / p, 0.0);
                }
            }
        }
        Some(q)
    }
}

fn simplex_projection(x: [f64; 3]) -> [f64; 3] {
    let mut s = x;
    s.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, v) in s.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.map(|v| (v - theta).max(0.0))
}

/// Nearest density matrix in Frobenius norm.
fn project_to_density(m: &CMat3) -> CMat3 {
    let (vals, vecs) = hermitian_eigen(m);
    let lam = simplex_projection([vals[0], vals[1], vals[2]]);
    let d = CMat3::from_diagonal(&CVec3::new(
        c64(lam[0], 0.0),
        c64(lam[1], 0.0),
        c64(lam[2], 0.0),
    ));
    let out = vecs * d * vecs.adjoint();
    (out + out.adjoint()) * c64(0.5, 0.0)
}

fn fixed_point_step(q: &CMat3, rho: &CMat3) -> CMat3 {
    let m = q * rho * q;
    let m = (m + m.adjoint()) * c64(0.5, 0.0);
    m / m.trace()
}

/// Iterate `rho <- Q rho Q / Tr(Q rho Q)` with `Q = sum f/p R† |j><j| R` from
/// the maximally mixed state.
pub fn mle_reconstruct(
    data: &TomographyData,
    readouts: &ReadoutSet,
    opts: &MleOptions,
) -> Result<MleResult> {
    if !(opts.tolerance >= 0.0) {
        return Err(Error::InvalidArgument(
            "tolerance must be non-negative".into(),
        ));
    }
    let data = TomographyData::new(data.fractions, data.atoms, data.scan)?;
    let like = Likelihood {
        f: &data.fractions,
        proj: readouts.projectors(),
    };
    let mixed = *DensityMatrix3::maximally_mixed().matrix();
    let mut rho = mixed;
    let mut current = like.value(&rho);
    let mut history = Vec::new();
    if opts.record_likelihood {
        history.push(current);
    }
    let mut regularizations = 0;
    let mut eta = 1e-2;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let q = loop {
            match like.gradient(&rho) {
                Some(q) => break q,
                None => {
                    regularizations += 1;
                    rho = rho * c64(1.0 - REGULARIZATION_WEIGHT, 0.0)
                        + mixed * c64(REGULARIZATION_WEIGHT, 0.0);
                    current = like.value(&rho);
                }
            }
        };
        let fixed = fixed_point_step(&q, &rho);

        let next = if opts.accelerate {
            let fixed_l = like.value(&fixed);
            let tr = q.trace().re / 3.0;
            let g = q - CMat3::identity() * c64(tr, 0.0);
            let mut best = (fixed_l, fixed);
            let mut step = eta;
            for _ in 0..40 {
                let cand = project_to_density(&(rho + g * c64(step, 0.0)));
                let l = like.value(&cand);
                if l >= current {
                    if l > best.0 {
                        best = (l, cand);
                    }
                    eta = (2.0 * step).min(1e6);
                    break;
                }
                step *= 0.5;
                eta = step;
            }
            if best.0 >= current {
                current = best.0;
                best.1
            } else {
                rho
            }
        } else {
            current = like.value(&fixed);
            fixed
        };

        let delta = (next - rho).norm();
        rho = next;
        if opts.record_likelihood {
            history.push(current);
        }
        if delta <= opts.tolerance {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok(MleResult {
        rho: DensityMatrix3::new(rho)?,
        iterations,
        stop,
        regularizations,
        log_likelihood: current,
        history,
    })
}

/// `<psi| m |psi>` (real part).
pub fn state_overlap(m: &CMat3, psi: &CVec3) -> f64 {
    (psi.adjoint() * m * psi)[(0, 0)].re
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AveragingConfig {
    pub max_scans: usize,
    /// Independent groups of `max_scans` scans; spreads are taken across them.
    pub replicates: usize,
    /// `None` gives exact fractions.
    pub atoms: Option<u64>,
    pub seed: u64,
    pub mle: MleOptions,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        Self {
            max_scans: 15,
            replicates: 20,
            atoms: Some(100_000),
            seed: 0,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// `max - min` across replicates.
    pub spread: f64,
    /// `mean - mean at max_scans`.
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AveragingPoint {
    pub scans: usize,
    pub fidelity: MetricSummary,
    pub purity: MetricSummary,
    pub fidelity_pure: MetricSummary,
}

fn summarize(values: &[f64]) -> MetricSummary {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    MetricSummary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        min,
        max,
        spread: max - min,
        residual: 0.0,
    }
}

/// For each `N` in `1..=max_scans`, reconstruct every replicate from the mean
/// of its first `N` scans and summarize fidelity to `target`, purity and
/// purity-adjusted fidelity across replicates.
pub fn averaging_study(
    rho: &DensityMatrix3,
    target: &CVec3,
    readouts: &ReadoutSet,
    cfg: &AveragingConfig,
) -> Result<Vec<AveragingPoint>> {
    if cfg.max_scans == 0 || cfg.replicates == 0 {
        return Err(Error::InvalidArgument(
            "scan and replicate counts must be at least 1".into(),
        ));
    }
    if cfg.atoms == Some(0) {
        return Err(Error::InvalidArgument("atom count must be positive".into()));
    }
    let norm = target.norm();
    if !((norm - 1.0).abs() <= 1e-10) {
        return Err(Error::InvalidArgument(
            "target state must be normalized".into(),
        ));
    }

    // metrics[replicate][N - 1] = (F, P, F_pure)
    let metrics: Vec<Vec<(f64, f64, f64)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(rep as u64);
            let scans: Vec<TomographyData> = (0..cfg.max_scans)
                .map(|s| match cfg.atoms {
                    Some(atoms) => sample_fractions(rho, readouts, atoms, s, &mut rng),
                    None => simulate_fractions(rho, readouts, &Noise::Exact),
                })
                .collect::<Result<_>>()?;
            (1..=cfg.max_scans)
                .map(|n| {
                    let avg = TomographyData::average(&scans[..n])?;
                    let rec = mle_reconstruct(&avg, readouts, &cfg.mle)?.rho;
                    let pure = purify(&rec);
                    Ok((
                        state_overlap(rec.matrix(), target),
                        purity(&rec),
                        state_overlap(&pure.matrix, target),
                    ))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut points: Vec<AveragingPoint> = (0..cfg.max_scans)
        .map(|k| {
            let col = |sel: fn(&(f64, f64, f64)) -> f64| -> Vec<f64> {
                metrics.iter().map(|m| sel(&m[k])).collect()
            };
            AveragingPoint {
                scans: k + 1,
                fidelity: summarize(&col(|m| m.0)),
                purity: summarize(&col(|m| m.1)),
                fidelity_pure: summarize(&col(|m| m.2)),
            }
        })
        .collect();
    let last = *points.last().expect("at least one point");
    for p in &mut points {
        p.fidelity.residual = p.fidelity.mean - last.fidelity.mean;
        p.purity.residual = p.purity.mean - last.purity.mean;
        p.fidelity_pure.residual = p.fidelity_pure.mean - last.fidelity_pure.mean;
    }
    Ok(points)
}
