//! Dense 3x3 complex linear algebra for single-qutrit operators.
//!
//! Everything here works on fixed-size `nalgebra` matrices. Comparisons use the
//! max entrywise modulus unless stated otherwise.

use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type CMat3 = Matrix3<C64>;
pub type CVec3 = Vector3<C64>;

/// Max `|U†U - 1|` accepted for a unitary.
pub const UNITARY_TOL: f64 = 1e-10;
/// Max Hermiticity / trace deviation accepted for a density matrix.
pub const DENSITY_TOL: f64 = 1e-10;
/// Most negative eigenvalue accepted for a density matrix.
pub const PSD_TOL: f64 = 1e-9;

pub const fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Wrap a phase into `(-pi, pi]`. `-pi` maps to `+pi`.
pub fn wrap_phase(x: f64) -> f64 {
    if x > -PI && x <= PI {
        return x;
    }
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

pub fn max_abs(m: &CMat3) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Computational basis vector `|n>`.
pub fn basis(n: usize) -> CVec3 {
    assert!(n < 3, "qutrit basis index out of range: {n}");
    let mut v = CVec3::zeros();
    v[n] = C64::new(1.0, 0.0);
    v
}

/// `|n><n|`
pub fn projector(n: usize) -> CMat3 {
    let v = basis(n);
    v * v.adjoint()
}

pub fn hermiticity_error(m: &CMat3) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Row-major `[[re, im]; 9]` view, convenient for serialization.
pub fn to_pairs(m: &CMat3) -> [[f64; 2]; 9] {
    let mut out = [[0.0; 2]; 9];
    for r in 0..3 {
        for c in 0..3 {
            out[3 * r + c] = [m[(r, c)].re, m[(r, c)].im];
        }
    }
    out
}

pub fn from_pairs(p: &[[f64; 2]; 9]) -> CMat3 {
    CMat3::from_fn(|r, c| C64::new(p[3 * r + c][0], p[3 * r + c][1]))
}

/// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues and
/// the matching orthonormal eigenvectors as columns.
pub fn hermitian_eigen(m: &CMat3) -> (Vector3<f64>, CMat3) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = Vector3::from_fn(|k, _| eig.eigenvalues[order[k]]);
    let vectors = CMat3::from_fn(|r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMat3) -> Vector3<f64> {
    hermitian_eigen(m).0
}

/// A 3x3 unitary operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unitary3(CMat3);

impl Unitary3 {
    pub fn new(m: CMat3) -> Result<Self> {
        let deviation = Self::unitarity_error(&m);
        if deviation.is_finite() && deviation <= UNITARY_TOL {
            Ok(Self(m))
        } else {
            Err(Error::NotUnitary { deviation })
        }
    }

    /// Wrap a matrix that is unitary by construction (closed forms, products).
    pub(crate) fn new_unchecked(m: CMat3) -> Self {
        debug_assert!(Self::unitarity_error(&m) < 1e-8);
        Self(m)
    }

    pub fn identity() -> Self {
        Self(CMat3::identity())
    }

    pub fn from_diagonal_phases(phases: [f64; 3]) -> Self {
        Self(CMat3::from_diagonal(&Vector3::from_fn(|k, _| {
            C64::from_polar(1.0, phases[k])
        })))
    }

    /// Max entrywise `|U†U - 1|`.
    pub fn unitarity_error(m: &CMat3) -> f64 {
        max_abs(&(m.adjoint() * m - CMat3::identity()))
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }

    pub fn into_inner(self) -> CMat3 {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn apply(&self, psi: &CVec3) -> CVec3 {
        self.0 * psi
    }

    pub fn determinant(&self) -> C64 {
        self.0.determinant()
    }

    pub fn with_global_phase(&self, phase: f64) -> Self {
        Self(self.0 * C64::from_polar(1.0, phase))
    }

    /// `P U P` for the permutation exchanging basis states `a` and `b`.
    pub fn conjugate_by_swap(&self, a: usize, b: usize) -> Self {
        let p = swap_matrix(a, b);
        Self(p * self.0 * p)
    }
}

impl Mul for Unitary3 {
    type Output = Unitary3;

    fn mul(self, rhs: Unitary3) -> Unitary3 {
        Unitary3(self.0 * rhs.0)
    }
}

impl Mul<&Unitary3> for &Unitary3 {
    type Output = Unitary3;

    fn mul(self, rhs: &Unitary3) -> Unitary3 {
        Unitary3(self.0 * rhs.0)
    }
}

/// Permutation matrix exchanging `|a>` and `|b>`.
pub fn swap_matrix(a: usize, b: usize) -> CMat3 {
    let mut p = CMat3::identity();
    p.swap_rows(a, b);
    p
}

/// A Hermitian, unit-trace, positive semidefinite 3x3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix3(CMat3);

impl DensityMatrix3 {
    pub fn new(m: CMat3) -> Result<Self> {
        let herm = hermiticity_error(&m);
        if !(herm <= DENSITY_TOL) {
            return Err(Error::InvalidDensity(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = m.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > DENSITY_TOL {
            return Err(Error::InvalidDensity(format!("trace {tr} != 1")));
        }
        let min = hermitian_eigenvalues(&m)[0];
        if min < -PSD_TOL {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:.3e}"
            )));
        }
        Ok(Self((m + m.adjoint()) * C64::new(0.5, 0.0)))
    }

    pub(crate) fn new_unchecked(m: CMat3) -> Self {
        Self((m + m.adjoint()) * C64::new(0.5, 0.0))
    }

    /// `|psi><psi|` for a normalized state.
    pub fn pure(psi: &CVec3) -> Result<Self> {
        let norm = psi.norm_squared();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "state is not normalized (|psi|^2 = {norm})"
            )));
        }
        Ok(Self(psi * psi.adjoint()))
    }

    pub fn basis_state(n: usize) -> Self {
        Self(projector(n))
    }

    pub fn maximally_mixed() -> Self {
        Self(CMat3::identity() / C64::new(3.0, 0.0))
    }

    pub fn matrix(&self) -> &CMat3 {
        &self.0
    }

    pub fn into_inner(self) -> CMat3 {
        self.0
    }

    pub fn eigenvalues(&self) -> Vector3<f64> {
        hermitian_eigenvalues(&self.0)
    }

    /// `U rho U†`
    pub fn evolve(&self, u: &Unitary3) -> Self {
        Self::new_unchecked(u.matrix() * self.0 * u.matrix().adjoint())
    }

    /// Convex combination `p * self + (1 - p) * other`.
    pub fn blend(&self, other: &Self, p: f64) -> Self {
        Self::new_unchecked(self.0 * C64::new(p, 0.0) + other.0 * C64::new(1.0 - p, 0.0))
    }

    /// Population of basis state `|n>`.
    pub fn population(&self, n: usize) -> f64 {
        self.0[(n, n)].re
    }
}

/// `exp(-i H t)` for Hermitian `H` (units where hbar = 1), by exact
/// eigen-decomposition.
pub fn expm_coupling(h: &CMat3, t: f64) -> Result<Unitary3> {
    let scale = max_abs(h).max(1.0);
    let deviation = hermiticity_error(h);
    if !(deviation <= 1e-12 * scale) || !t.is_finite() {
        return Err(Error::NotHermitian { deviation });
    }
    let (vals, vecs) = hermitian_eigen(h);
    let d = CMat3::from_diagonal(&vals.map(|l| C64::from_polar(1.0, -l * t)));
    Ok(Unitary3(vecs * d * vecs.adjoint()))
}

/// State fidelity `<n| G† rho G |n>` against the ideal gate output.
pub fn fidelity(rho: &DensityMatrix3, gate: &Unitary3, n: usize) -> f64 {
    let out = gate.apply(&basis(n));
    (out.adjoint() * rho.matrix() * out)[(0, 0)].re
}

/// Fidelity with an arbitrary Hermitian matrix (used for purified states that
/// may leave the physical set).
pub fn fidelity_with(m: &CMat3, gate: &Unitary3, n: usize) -> f64 {
    let out = gate.apply(&basis(n));
    (out.adjoint() * m * out)[(0, 0)].re
}

/// `Tr(rho^2)`
pub fn purity(rho: &DensityMatrix3) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Result of the nearest-pure-state rescaling.
#[derive(Clone, Copy, Debug)]
pub struct Purified {
    pub matrix: CMat3,
    pub min_eigenvalue: f64,
    /// Set when the rescaled matrix has an eigenvalue below `-1e-6`.
    pub non_physical: bool,
}

/// `(rho - 1/3) / P(rho) + 1/3`. Never rejects; flags non-physical output.
pub fn purify(rho: &DensityMatrix3) -> Purified {
    let third = CMat3::identity() / C64::new(3.0, 0.0);
    let p = purity(rho);
    let matrix = (rho.matrix() - third) / C64::new(p, 0.0) + third;
    let min_eigenvalue = hermitian_eigenvalues(&matrix)[0];
    Purified {
        matrix,
        min_eigenvalue,
        non_physical: min_eigenvalue < -1e-6,
    }
}

/// The eight Gell-Mann matrices, normalized to `Tr(l_i l_j) = 2 delta_ij`.
pub fn gell_mann() -> [CMat3; 8] {
    let o = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let s = c64(1.0 / 3f64.sqrt(), 0.0);
    [
        CMat3::new(o, one, o, one, o, o, o, o, o),
        CMat3::new(o, -i, o, i, o, o, o, o, o),
        CMat3::new(one, o, o, o, -one, o, o, o, o),
        CMat3::new(o, o, one, o, o, o, one, o, o),
        CMat3::new(o, o, -i, o, o, o, i, o, o),
        CMat3::new(o, o, o, o, o, one, o, one, o),
        CMat3::new(o, o, o, o, o, -i, o, i, o),
        CMat3::new(s, o, o, o, s, o, o, o, -s * 2.0),
    ]
}

/// `<l_k> = Tr(rho l_k)` for k = 1..8.
pub fn gell_mann_expectations(rho: &DensityMatrix3) -> [f64; 8] {
    let gm = gell_mann();
    let mut out = [0.0; 8];
    for (k, l) in gm.iter().enumerate() {
        out[k] = (rho.matrix() * l).trace().re;
    }
    out
}

/// `1/3 + (1/2) sum_k <l_k> l_k`
pub fn from_gell_mann(expectations: &[f64; 8]) -> CMat3 {
    gell_mann()
        .iter()
        .zip(expectations)
        .fold(CMat3::identity() / C64::new(3.0, 0.0), |acc, (l, &x)| {
            acc + l * C64::new(0.5 * x, 0.0)
        })
}

/// `min_theta max_ij |U - e^{i theta} V|_ij`.
///
/// Each entry contributes `|u|^2 + |v|^2 - 2 Re(u v* e^{-i theta})`, a shifted
/// sinusoid in theta. The minimax is attained at a minimum of one sinusoid or
/// at a crossing of two, so all such candidates are evaluated exactly.
pub fn distance_mod_phase(u: &Unitary3, v: &Unitary3) -> f64 {
    distance_mod_phase_raw(u.matrix(), v.matrix())
}

pub fn distance_mod_phase_raw(u: &CMat3, v: &CMat3) -> f64 {
    let terms: Vec<(f64, C64)> = u
        .iter()
        .zip(v.iter())
        .map(|(a, b)| (a.norm_sqr() + b.norm_sqr(), a * b.conj()))
        .collect();
    // Candidates are scored on the direct differences; the expanded form
    // loses precision near zero.
    let eval = |theta: f64| -> f64 {
        let rot = C64::from_polar(1.0, theta);
        u.iter()
            .zip(v.iter())
            .map(|(a, b)| (a - b * rot).norm())
            .fold(0.0, f64::max)
    };

    let mut candidates = vec![(v.adjoint() * u).trace().arg()];
    for (_, w) in &terms {
        candidates.push(w.arg());
    }
    for (k, (sk, wk)) in terms.iter().enumerate() {
        for (sl, wl) in &terms[k + 1..] {
            // 2 Re((wk - wl) e^{-i theta}) = sk - sl
            let d = (wk - wl) * 2.0;
            let r = d.norm();
            if r < 1e-300 {
                continue;
            }
            let ratio = (sk - sl) / r;
            if ratio.abs() <= 1.0 {
                let base = d.arg();
                let off = ratio.acos();
                candidates.push(base + off);
                candidates.push(base - off);
            }
        }
    }
    candidates
        .into_iter()
        .map(eval)
        .fold(f64::INFINITY, f64::min)
}

/// `(1/2) Tr|A - B|` for Hermitian arguments.
pub fn trace_distance(a: &CMat3, b: &CMat3) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b))
        .iter()
        .map(|x| x.abs())
        .sum::<f64>()
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-random unitary: QR of a complex Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R) -> Unitary3 {
    let g = CMat3::from_fn(|_, _| complex_gaussian(rng));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = CMat3::from_diagonal(&Vector3::from_fn(|k, _| {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        }
    }));
    Unitary3::new_unchecked(q * phases)
}

/// Haar-random element of SU(3).
pub fn haar_special_unitary<R: Rng + ?Sized>(rng: &mut R) -> Unitary3 {
    let u = haar_unitary(rng);
    let phase = u.determinant().arg() / 3.0;
    u.with_global_phase(-phase)
}

/// Uniformly random pure state.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R) -> CVec3 {
    let v = CVec3::from_fn(|_, _| complex_gaussian(rng));
    v / C64::new(v.norm(), 0.0)
}

/// Full-rank random density matrix `G G† / Tr(G G†)` from a Ginibre matrix.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R) -> DensityMatrix3 {
    let g = CMat3::from_fn(|_, _| complex_gaussian(rng));
    let m = g * g.adjoint();
    let tr = m.trace();
    DensityMatrix3::new_unchecked(m / tr)
}

/// Serializable row-major complex matrix (`[re, im]` pairs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub entries: Vec<[f64; 2]>,
}

impl From<&CMat3> for MatrixRecord {
    fn from(m: &CMat3) -> Self {
        Self {
            entries: to_pairs(m).to_vec(),
        }
    }
}

impl MatrixRecord {
    pub fn to_matrix(&self) -> Result<CMat3> {
        let arr: [[f64; 2]; 9] = self.entries.as_slice().try_into().map_err(|_| {
            Error::InvalidArgument(format!(
                "expected 9 complex entries, found {}",
                self.entries.len()
            ))
        })?;
        Ok(from_pairs(&arr))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Scaling-and-squaring Taylor series, independent of the eigen route.
    fn expm_taylor(a: &CMat3) -> CMat3 {
        let norm = max_abs(a) * 3.0;
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as i32
        } else {
            0
        };
        let scaled = a / C64::new(2f64.powi(squarings), 0.0);
        let mut term = CMat3::identity();
        let mut sum = CMat3::identity();
        for k in 1..30 {
            term = term * scaled / C64::new(k as f64, 0.0);
            sum += term;
        }
        for _ in 0..squarings {
            sum = sum * sum;
        }
        sum
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, scale: f64) -> CMat3 {
        let g = CMat3::from_fn(|_, _| complex_gaussian(rng));
        (g + g.adjoint()) * C64::new(0.5 * scale, 0.0)
    }

    fn fourier() -> CMat3 {
        let w = C64::from_polar(1.0, TAU / 3.0);
        let one = c64(1.0, 0.0);
        CMat3::new(one, one, one, one, w, w.conj(), one, w.conj(), w) / C64::new(3f64.sqrt(), 0.0)
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(-PI), PI);
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_phase(0.0), 0.0);
    }

    #[test]
    fn expm_zero_is_identity() {
        let u = expm_coupling(&CMat3::zeros(), 1.234).unwrap();
        assert!(max_abs(&(u.matrix() - CMat3::identity())) < 1e-15);
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let mut h = CMat3::zeros();
        h[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(
            expm_coupling(&h, 1.0),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn expm_matches_taylor_and_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let h = random_hermitian(&mut rng, 2.0);
            let t = rng.random_range(0.0..3.0);
            let u = expm_coupling(&h, t).unwrap();
            assert!(Unitary3::unitarity_error(u.matrix()) < 1e-12);
            let reference = expm_taylor(&(h * C64::new(0.0, -t)));
            assert!(max_abs(&(u.matrix() - reference)) < 1e-11);
        }
    }

    #[test]
    fn gell_mann_orthonormal() {
        let gm = gell_mann();
        for (i, a) in gm.iter().enumerate() {
            assert!(a.trace().norm() < 1e-15);
            assert!(hermiticity_error(a) < 1e-15);
            for (j, b) in gm.iter().enumerate() {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert!(((a * b).trace() - C64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gell_mann_of_ground_state() {
        let e = gell_mann_expectations(&DensityMatrix3::basis_state(0));
        assert!((e[2] - 1.0).abs() < 1e-15);
        assert!((e[7] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        for k in [0, 1, 3, 4, 5, 6] {
            assert!(e[k].abs() < 1e-15);
        }
        let mixed = gell_mann_expectations(&DensityMatrix3::maximally_mixed());
        assert!(mixed.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn gell_mann_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rho = random_density(&mut rng);
            let back = from_gell_mann(&gell_mann_expectations(&rho));
            assert!(max_abs(&(back - rho.matrix())) < 1e-12);
        }
    }

    #[test]
    fn fidelity_examples() {
        let f = Unitary3::new(fourier()).unwrap();
        let out = DensityMatrix3::basis_state(0).evolve(&f);
        assert!((fidelity(&out, &f, 0) - 1.0).abs() < 1e-14);
        let mixed = DensityMatrix3::maximally_mixed();
        for n in 0..3 {
            assert!((fidelity(&mixed, &f, n) - 1.0 / 3.0).abs() < 1e-15);
        }
        let noisy = out.blend(&mixed, 0.9);
        assert!((fidelity(&noisy, &f, 0) - (0.9 + 0.1 / 3.0)).abs() < 1e-14);
        assert!((fidelity(&noisy, &f, 0) - 0.933_333_333_333_333_3).abs() < 1e-14);
    }

    #[test]
    fn purity_examples() {
        let f = Unitary3::new(fourier()).unwrap();
        let pure = DensityMatrix3::basis_state(0).evolve(&f);
        assert!((purity(&pure) - 1.0).abs() < 1e-14);
        let mixed = DensityMatrix3::maximally_mixed();
        assert!((purity(&mixed) - 1.0 / 3.0).abs() < 1e-15);
        let noisy = pure.blend(&mixed, 0.9);
        // (2/3) p^2 + 1/3
        assert!((purity(&noisy) - 0.873_333_333_333_333_3).abs() < 1e-14);
    }

    #[test]
    fn purify_examples() {
        let f = Unitary3::new(fourier()).unwrap();
        let pure = DensityMatrix3::basis_state(0).evolve(&f);
        let p = purify(&pure);
        assert!(max_abs(&(p.matrix - pure.matrix())) < 1e-14);
        assert!(!p.non_physical);

        let mixed = DensityMatrix3::maximally_mixed();
        assert!(max_abs(&(purify(&mixed).matrix - mixed.matrix())) < 1e-15);

        let noisy = pure.blend(&mixed, 0.9);
        let p = purify(&noisy);
        let f_pure = fidelity_with(&p.matrix, &f, 0);
        let expected = 2.0 * 0.9 / (3.0 * 0.873_333_333_333_333_3) + 1.0 / 3.0;
        assert!((f_pure - expected).abs() < 1e-12);
        assert!((f_pure - 1.0204).abs() < 1e-4);
        assert!(p.non_physical);
        assert!((p.matrix.trace() - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn distance_mod_phase_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(&mut rng);
        assert!(distance_mod_phase(&u, &u) < 1e-15);
        assert!(distance_mod_phase(&u, &u.with_global_phase(PI / 6.0)) < 1e-12);

        let id = Unitary3::identity();
        let z = Unitary3::from_diagonal_phases([0.0, 0.0, PI]);
        let d = distance_mod_phase(&id, &z);
        let n = 1_000_000;
        let grid = (0..n)
            .map(|k| {
                let theta = TAU * k as f64 / n as f64;
                let e = C64::from_polar(1.0, theta);
                max_abs(&(id.matrix() - z.matrix() * e))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(d > 0.0);
        assert!((d - grid).abs() < 1e-6, "{d} vs grid {grid}");
    }

    #[test]
    fn distance_mod_phase_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let a = haar_unitary(&mut rng);
            let b = haar_unitary(&mut rng);
            let (ab, ba) = (distance_mod_phase(&a, &b), distance_mod_phase(&b, &a));
            assert!((ab - ba).abs() < 1e-12);
            assert!(ab > 1e-10);
        }
    }

    #[test]
    fn haar_unitaries_are_unitary_and_special() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let u = haar_special_unitary(&mut rng);
            assert!(Unitary3::unitarity_error(u.matrix()) < 1e-13);
            assert!((u.determinant() - C64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn density_validation() {
        assert!(DensityMatrix3::new(CMat3::identity()).is_err());
        let mut m = CMat3::zeros();
        m[(0, 0)] = c64(1.5, 0.0);
        m[(1, 1)] = c64(-0.5, 0.0);
        assert!(DensityMatrix3::new(m).is_err());
        assert!(DensityMatrix3::new(*DensityMatrix3::maximally_mixed().matrix()).is_ok());
    }
}
