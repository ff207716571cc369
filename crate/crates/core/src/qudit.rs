//! Double-precision linear algebra for single 4-level qudits and
//! carrier⊗ancilla composites.
//!
//! Composite states are 16-dimensional with the carrier index major and
//! the ancilla index minor: amplitude `(j, a)` lives at `4 * j + a`.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Qudit dimension.
pub const DIM: usize = 4;
/// Dimension of a carrier⊗ancilla composite.
pub const COMPOSITE_DIM: usize = DIM * DIM;
/// Tolerance for normalization and phase equality on exact constructions.
pub const STATE_TOL: f64 = 1e-12;
/// Tolerance for unitarity of supplied matrices.
pub const UNITARY_TOL: f64 = 1e-10;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

/// A digit in `{0, 1, 2, 3}`: message digits, license digits and
/// measurement records all use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Symbol(u8);

impl Symbol {
    pub const ALL: [Symbol; DIM] = [Symbol(0), Symbol(1), Symbol(2), Symbol(3)];

    pub fn new(value: u32) -> Result<Self> {
        if (value as usize) < DIM {
            Ok(Symbol(value as u8))
        } else {
            Err(Error::SymbolOutOfRange(value))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn random(rng: &mut RandomStream) -> Self {
        Symbol(rng.random_range(0..DIM as u8))
    }
}

impl TryFrom<u8> for Symbol {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        Symbol::new(u32::from(value))
    }
}

impl From<Symbol> for u8 {
    fn from(s: Symbol) -> u8 {
        s.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Single-qudit measurement basis.
///
/// `X` is the Fourier basis `|X_k⟩ = ½ Σ_j i^{jk} |j⟩`, mutually unbiased
/// with the computational basis `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    /// The `k`-th vector of this basis.
    pub fn state(self, k: Symbol) -> StateVec {
        match self {
            Basis::Z => make_z_state(k),
            Basis::X => make_x_state(k),
        }
    }

    /// Identity digits map to bases by parity: even → Z, odd → X.
    pub fn for_identity_digit(digit: Symbol) -> Self {
        if digit.value() % 2 == 0 {
            Basis::Z
        } else {
            Basis::X
        }
    }

    pub fn random(rng: &mut RandomStream) -> Self {
        if rng.random_bool(0.5) {
            Basis::X
        } else {
            Basis::Z
        }
    }

    pub fn other(self) -> Self {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }
}

/// A normalized pure state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateVec {
    amps: Vec<C64>,
}

impl StateVec {
    /// Validates finiteness and unit norm (within [`STATE_TOL`]).
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::ZeroVector);
        }
        check_finite(&amps)?;
        let n = norm_sqr(&amps);
        if n == 0.0 {
            return Err(Error::ZeroVector);
        }
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::NotNormalized(n));
        }
        Ok(Self { amps })
    }

    /// Rescales `amps` to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        check_finite(&amps)?;
        let n = norm_sqr(&amps).sqrt();
        if amps.is_empty() || n == 0.0 {
            return Err(Error::ZeroVector);
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / n).collect(),
        })
    }

    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        debug_assert!(amps.iter().all(|a| a.re.is_finite() && a.im.is_finite()));
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amps)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVec) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(inner(&self.amps, &other.amps))
    }

    /// `c · self`; `c` must have unit modulus to keep the state normalized.
    pub fn scaled(&self, c: C64) -> StateVec {
        StateVec::from_raw(self.amps.iter().map(|a| a * c).collect())
    }
}

fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

fn inner(bra: &[C64], ket: &[C64]) -> C64 {
    bra.iter().zip(ket).map(|(b, k)| b.conj() * k).sum()
}

fn check_finite(amps: &[C64]) -> Result<()> {
    if amps.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}

/// A square complex matrix that passed the unitarity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitaryOp {
    dim: usize,
    /// Row-major.
    entries: Vec<C64>,
}

impl UnitaryOp {
    /// Builds a matrix from row-major entries, rejecting anything whose
    /// `U†U` deviates from the identity by more than [`UNITARY_TOL`].
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        check_dim(dim * dim, entries.len())?;
        check_finite(&entries)?;
        let op = Self { dim, entries };
        let deviation = op.unitarity_deviation();
        if deviation > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(op)
    }

    /// Builds from rows.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let dim = rows.len();
        for row in &rows {
            check_dim(dim, row.len())?;
        }
        Self::new(dim, rows.into_iter().flatten().collect())
    }

    pub(crate) fn from_raw(dim: usize, entries: Vec<C64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![ZERO; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = ONE;
        }
        Self { dim, entries }
    }

    pub fn diagonal(diag: &[C64]) -> Result<Self> {
        let dim = diag.len();
        let mut entries = vec![ZERO; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = *d;
        }
        Self::new(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    /// Largest entrywise deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let product = self.adjoint().mul_raw(self);
        let id = UnitaryOp::identity(self.dim);
        product
            .entries
            .iter()
            .zip(&id.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn adjoint(&self) -> Self {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for c in 0..d {
                entries[c * d + r] = self.entries[r * d + c].conj();
            }
        }
        Self { dim: d, entries }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_deviation(&self.adjoint()) <= tol
    }

    /// Largest entrywise `|self - other|`; infinite on shape mismatch.
    pub fn max_deviation(&self, other: &UnitaryOp) -> f64 {
        if self.dim != other.dim {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Matrix product `self · rhs`.
    pub fn compose(&self, rhs: &UnitaryOp) -> Result<Self> {
        check_dim(self.dim, rhs.dim)?;
        Ok(self.mul_raw(rhs))
    }

    fn mul_raw(&self, rhs: &UnitaryOp) -> Self {
        let d = self.dim;
        let mut entries = vec![ZERO; d * d];
        for r in 0..d {
            for k in 0..d {
                let a = self.entries[r * d + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..d {
                    entries[r * d + c] += a * rhs.entries[k * d + c];
                }
            }
        }
        Self { dim: d, entries }
    }

    /// Kronecker product `self ⊗ rhs` (self's index major).
    pub fn kron(&self, rhs: &UnitaryOp) -> Self {
        let (a, b) = (self.dim, rhs.dim);
        let d = a * b;
        let mut entries = vec![ZERO; d * d];
        for r1 in 0..a {
            for c1 in 0..a {
                let x = self.entries[r1 * a + c1];
                if x == ZERO {
                    continue;
                }
                for r2 in 0..b {
                    for c2 in 0..b {
                        entries[(r1 * b + r2) * d + (c1 * b + c2)] = x * rhs.entries[r2 * b + c2];
                    }
                }
            }
        }
        Self { dim: d, entries }
    }
}

pub fn make_z_state(j: Symbol) -> StateVec {
    let mut amps = vec![ZERO; DIM];
    amps[j.index()] = ONE;
    StateVec::from_raw(amps)
}

/// `|X_k⟩ = ½ Σ_j i^{jk} |j⟩`.
pub fn make_x_state(k: Symbol) -> StateVec {
    let amps = (0..DIM)
        .map(|j| i_pow(j * k.index()) * 0.5)
        .collect();
    StateVec::from_raw(amps)
}

/// `i^n`, exact.
pub(crate) fn i_pow(n: usize) -> C64 {
    match n % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

/// `U ψ`.
pub fn apply(op: &UnitaryOp, psi: &StateVec) -> Result<StateVec> {
    check_dim(op.dim, psi.dim())?;
    let d = op.dim;
    let amps = (0..d)
        .map(|r| {
            op.entries[r * d..(r + 1) * d]
                .iter()
                .zip(&psi.amps)
                .map(|(u, a)| u * a)
                .sum()
        })
        .collect();
    Ok(StateVec::from_raw(amps))
}

/// `(U ⊗ I) Ψ`: applies a single-qudit operator to the carrier of a
/// composite.
pub fn apply_carrier(op: &UnitaryOp, joint: &StateVec) -> Result<StateVec> {
    check_dim(DIM, op.dim)?;
    check_dim(COMPOSITE_DIM, joint.dim())?;
    let mut amps = vec![ZERO; COMPOSITE_DIM];
    for j in 0..DIM {
        for k in 0..DIM {
            let u = op.entries[j * DIM + k];
            if u == ZERO {
                continue;
            }
            for a in 0..DIM {
                amps[j * DIM + a] += u * joint.amps[k * DIM + a];
            }
        }
    }
    Ok(StateVec::from_raw(amps))
}

/// Born probabilities `|⟨b_k|ψ⟩|²` for a single qudit.
pub fn born_probabilities(psi: &StateVec, basis: Basis) -> Result<[f64; DIM]> {
    check_dim(DIM, psi.dim())?;
    let mut p = [0.0; DIM];
    for k in Symbol::ALL {
        p[k.index()] = inner(basis.state(k).amps(), psi.amps()).norm_sqr();
    }
    Ok(p)
}

fn sample(probs: &[f64; DIM], rng: &mut RandomStream) -> Symbol {
    let u: f64 = rng.random();
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = k;
        }
        acc += p / total;
        if u < acc && p > 0.0 {
            return Symbol::ALL[k];
        }
    }
    // rounding left `acc` slightly below one
    Symbol::ALL[last_nonzero]
}

/// Projective measurement of a single qudit. Returns the outcome and the
/// collapsed basis vector.
pub fn measure(psi: &StateVec, basis: Basis, rng: &mut RandomStream) -> Result<(Symbol, StateVec)> {
    let probs = born_probabilities(psi, basis)?;
    let k = sample(&probs, rng);
    Ok((k, basis.state(k)))
}

/// Result of a global-phase comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseMatch {
    pub equal: bool,
    /// `c` with `ψ ≈ c·φ`; meaningful only when `equal`.
    pub phase: C64,
}

/// Tests `ψ = c·φ` for a unit-modulus `c`, taking `c` from the
/// largest-modulus entry of `φ`.
pub fn equal_up_to_global_phase(psi: &StateVec, phi: &StateVec, tol: f64) -> Result<PhaseMatch> {
    amplitudes_equal_up_to_phase(psi.amps(), phi.amps(), tol)
}

/// Slice form of [`equal_up_to_global_phase`]; accepts unnormalized input
/// and rejects zero vectors.
pub fn amplitudes_equal_up_to_phase(psi: &[C64], phi: &[C64], tol: f64) -> Result<PhaseMatch> {
    check_dim(phi.len(), psi.len())?;
    if norm_sqr(psi) == 0.0 || norm_sqr(phi) == 0.0 {
        return Err(Error::ZeroVector);
    }
    let pivot = phi
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
        .map(|(i, _)| i)
        .expect("nonempty");
    let phase = psi[pivot] / phi[pivot];
    let equal = (phase.norm() - 1.0).abs() <= tol
        && psi
            .iter()
            .zip(phi)
            .all(|(a, b)| (a - phase * b).norm() <= tol);
    Ok(PhaseMatch { equal, phase })
}

/// `|⟨φ|ψ⟩|²`.
pub fn fidelity(psi: &StateVec, phi: &StateVec) -> Result<f64> {
    Ok(phi.inner(psi)?.norm_sqr().min(1.0))
}

/// `ψ ⊗ χ` with the first factor's index major.
pub fn tensor(psi: &StateVec, chi: &StateVec) -> Result<StateVec> {
    check_dim(DIM, psi.dim())?;
    check_dim(DIM, chi.dim())?;
    let amps = psi
        .amps
        .iter()
        .flat_map(|a| chi.amps.iter().map(move |b| a * b))
        .collect();
    Ok(StateVec::from_raw(amps))
}

/// Unnormalized ancilla component of the carrier projection onto `|b_k⟩`.
fn carrier_branch(joint: &StateVec, basis: Basis, k: Symbol) -> Vec<C64> {
    let bk = basis.state(k);
    (0..DIM)
        .map(|a| {
            (0..DIM)
                .map(|j| bk.amps[j].conj() * joint.amps[j * DIM + a])
                .sum()
        })
        .collect()
}

/// Marginal outcome probabilities for measuring the carrier of a composite.
pub fn carrier_probabilities(joint: &StateVec, basis: Basis) -> Result<[f64; DIM]> {
    check_dim(COMPOSITE_DIM, joint.dim())?;
    let mut p = [0.0; DIM];
    for k in Symbol::ALL {
        p[k.index()] = norm_sqr(&carrier_branch(joint, basis, k));
    }
    Ok(p)
}

/// Projects the carrier onto `|b_k⟩` and returns the branch probability
/// with the renormalized ancilla.
pub fn project_carrier(joint: &StateVec, basis: Basis, k: Symbol) -> Result<(f64, StateVec)> {
    check_dim(COMPOSITE_DIM, joint.dim())?;
    let branch = carrier_branch(joint, basis, k);
    let p = norm_sqr(&branch);
    if p <= f64::EPSILON * f64::EPSILON {
        return Err(Error::ZeroProbabilityBranch);
    }
    let n = p.sqrt();
    Ok((p, StateVec::from_raw(branch.into_iter().map(|a| a / n).collect())))
}

/// Measures the carrier subsystem of a composite in `basis`, returning the
/// outcome and the post-measurement ancilla state.
pub fn measure_subsystem(
    joint: &StateVec,
    basis: Basis,
    rng: &mut RandomStream,
) -> Result<(Symbol, StateVec)> {
    let probs = carrier_probabilities(joint, basis)?;
    let k = sample(&probs, rng);
    let (_, ancilla) = project_carrier(joint, basis, k)?;
    Ok((k, ancilla))
}
