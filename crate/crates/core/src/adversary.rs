//! Eavesdropping strategies applied to a quantum leg.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{ChannelQudit, TransmissionFrame};
use crate::grover::{diffusion, initial_state, oracle, InitialStateId};
use crate::qudit::{
    apply, apply_carrier, carrier_probabilities, make_z_state, tensor, Basis, StateVec, Symbol,
    UnitaryOp, C64, COMPOSITE_DIM, DIM, ONE, ZERO,
};
use crate::rng::RandomStream;

/// Which quantum leg an attack sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Leg {
    /// Controller → sender.
    One,
    /// Sender → receiver.
    Two,
}

impl TryFrom<u8> for Leg {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Leg::One),
            2 => Ok(Leg::Two),
            other => Err(Error::Config(format!("leg must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Leg> for u8 {
    fn from(leg: Leg) -> u8 {
        match leg {
            Leg::One => 1,
            Leg::Two => 2,
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

/// How an intercepting adversary picks her measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisPolicy {
    #[default]
    Random,
    Z,
    X,
}

impl BasisPolicy {
    fn pick(self, rng: &mut RandomStream) -> Basis {
        match self {
            BasisPolicy::Random => Basis::random(rng),
            BasisPolicy::Z => Basis::Z,
            BasisPolicy::X => Basis::X,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AttackStrategy {
    None,
    InterceptResend { basis: BasisPolicy },
    /// Couples each slot to a fresh ancilla in `|0⟩` via a 16×16 unitary.
    EntangleMeasure { probe: UnitaryOp },
    /// Intercepts the leg and answers the detection round in place of the
    /// legitimate recipient, reporting her own measurement outcomes.
    Impersonate,
}

impl AttackStrategy {
    pub fn entangle(probe: UnitaryOp) -> Result<Self> {
        if probe.dim() != COMPOSITE_DIM {
            return Err(Error::DimensionMismatch {
                expected: COMPOSITE_DIM,
                actual: probe.dim(),
            });
        }
        Ok(AttackStrategy::EntangleMeasure { probe })
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackStrategy::None => "none",
            AttackStrategy::InterceptResend { .. } => "intercept_resend",
            AttackStrategy::EntangleMeasure { .. } => "entangle_measure",
            AttackStrategy::Impersonate => "impersonate",
        }
    }
}

/// One attacked slot.
#[derive(Debug, Clone, PartialEq)]
pub enum EveRecord {
    Measured {
        slot: usize,
        basis: Basis,
        outcome: Symbol,
    },
    /// The ancilla stays entangled with the forwarded slot.
    Entangled { slot: usize },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EveTranscript {
    pub records: Vec<EveRecord>,
}

impl EveTranscript {
    /// Eve's outcome for `slot`, if she measured it.
    pub fn outcome_at(&self, slot: usize) -> Option<Symbol> {
        self.records.iter().find_map(|r| match r {
            EveRecord::Measured { slot: s, outcome, .. } if *s == slot => Some(*outcome),
            _ => None,
        })
    }
}

/// Measures `slot` in a uniformly random basis and resends the collapsed
/// eigenstate.
pub fn intercept_resend(slot: &StateVec, rng: &mut RandomStream) -> Result<(StateVec, Symbol, Basis)> {
    let basis = Basis::random(rng);
    intercept_resend_in(slot, basis, rng)
}

pub fn intercept_resend_in(
    slot: &StateVec,
    basis: Basis,
    rng: &mut RandomStream,
) -> Result<(StateVec, Symbol, Basis)> {
    let q = ChannelQudit::bare(slot.clone())?;
    let outcome = q.measure(basis, rng)?;
    Ok((basis.state(outcome), outcome, basis))
}

/// `U_e (slot ⊗ |0⟩)`.
pub fn entangle_probe(slot: &StateVec, probe: &UnitaryOp) -> Result<StateVec> {
    if probe.dim() != COMPOSITE_DIM {
        return Err(Error::DimensionMismatch {
            expected: COMPOSITE_DIM,
            actual: probe.dim(),
        });
    }
    apply(probe, &tensor(slot, &make_z_state(Symbol::ALL[0]))?)
}

/// Runs `strategy` over every slot of `frame` in place.
pub fn attack_frame(
    strategy: &AttackStrategy,
    frame: &mut TransmissionFrame,
    rng: &mut RandomStream,
) -> Result<EveTranscript> {
    let mut records = Vec::new();
    for (i, slot) in frame.slots.iter_mut().enumerate() {
        match strategy {
            AttackStrategy::None => {}
            AttackStrategy::InterceptResend { basis } => {
                let b = basis.pick(rng);
                let outcome = slot.measure(b, rng)?;
                *slot = ChannelQudit::Bare(b.state(outcome));
                records.push(EveRecord::Measured {
                    slot: i,
                    basis: b,
                    outcome,
                });
            }
            AttackStrategy::Impersonate => {
                let b = Basis::random(rng);
                let outcome = slot.measure(b, rng)?;
                *slot = ChannelQudit::Bare(b.state(outcome));
                records.push(EveRecord::Measured {
                    slot: i,
                    basis: b,
                    outcome,
                });
            }
            AttackStrategy::EntangleMeasure { probe } => {
                let joint = match slot {
                    ChannelQudit::Bare(s) => entangle_probe(s, probe)?,
                    ChannelQudit::Probed(_) => return Err(Error::AlreadyProbed(i)),
                };
                *slot = ChannelQudit::probed(joint);
                records.push(EveRecord::Entangled { slot: i });
            }
        }
    }
    Ok(EveTranscript { records })
}

/// Probability that a legitimate measurement in `basis` of the carrier of
/// `U_e(|b_v⟩ ⊗ |0⟩)` differs from `v`, averaged over `v`.
fn probe_error_on(probe: &UnitaryOp, basis: Basis) -> Result<f64> {
    let mut total = 0.0;
    for v in Symbol::ALL {
        let joint = entangle_probe(&basis.state(v), probe)?;
        let p = carrier_probabilities(&joint, basis)?;
        total += 1.0 - p[v.index()];
    }
    Ok((total / DIM as f64).clamp(0.0, 1.0))
}

/// Exact decoy error rates `(Z, X)` induced by a probe, by projection.
pub fn decoy_qber_under_probe(probe: &UnitaryOp) -> Result<(f64, f64)> {
    Ok((probe_error_on(probe, Basis::Z)?, probe_error_on(probe, Basis::X)?))
}

/// Decoding fidelity under a leg-2 probe.
///
/// Builds `U_e((U_{w_A} U_{w_C} |S⟩) ⊗ |0⟩)`, applies the receiver's
/// `U_{w_C}` then `U_S` to the carrier only, and returns
/// `(F, 1 − F)` where `F` is the probability the carrier reads `w_A`.
pub fn probe_fidelity(
    probe: &UnitaryOp,
    id: InitialStateId,
    w_a: Symbol,
    w_c: Symbol,
) -> Result<(f64, f64)> {
    let carrier = apply(&oracle(w_a), &apply(&oracle(w_c), &initial_state(id))?)?;
    let mut joint = entangle_probe(&carrier, probe)?;
    joint = apply_carrier(&oracle(w_c), &joint)?;
    joint = apply_carrier(&diffusion(id), &joint)?;
    let f = carrier_probabilities(&joint, Basis::Z)?[w_a.index()].clamp(0.0, 1.0);
    Ok((f, 1.0 - f))
}

/// Mean decode error `1 − F` over all 256 `(id, w_A, w_C)` triples, i.e.
/// the per-digit error of a session with uniform carriers, keys and
/// message digits.
pub fn mean_probe_error(probe: &UnitaryOp) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for id in InitialStateId::all() {
        for w_a in Symbol::ALL {
            for w_c in Symbol::ALL {
                total += probe_fidelity(probe, id, w_a, w_c)?.1;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// `|j⟩|a⟩ → |j⟩|a + j mod 4⟩`.
pub fn controlled_shift() -> UnitaryOp {
    let mut entries = vec![ZERO; COMPOSITE_DIM * COMPOSITE_DIM];
    for j in 0..DIM {
        for a in 0..DIM {
            let col = j * DIM + a;
            let row = j * DIM + (a + j) % DIM;
            entries[row * COMPOSITE_DIM + col] = ONE;
        }
    }
    UnitaryOp::new(COMPOSITE_DIM, entries).expect("permutation matrix")
}

/// Probe unitary as written in a configuration document: a built-in name
/// or a 16×16 matrix of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbeSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl ProbeSpec {
    pub fn resolve(&self) -> Result<UnitaryOp> {
        match self {
            ProbeSpec::Named(name) => match name.as_str() {
                "identity" => Ok(UnitaryOp::identity(COMPOSITE_DIM)),
                "controlled_shift" => Ok(controlled_shift()),
                other => Err(Error::Config(format!("unknown probe '{other}'"))),
            },
            ProbeSpec::Matrix(rows) => {
                if rows.len() != COMPOSITE_DIM {
                    return Err(Error::DimensionMismatch {
                        expected: COMPOSITE_DIM,
                        actual: rows.len(),
                    });
                }
                let rows = rows
                    .iter()
                    .map(|r| r.iter().map(|[re, im]| C64::new(*re, *im)).collect())
                    .collect();
                UnitaryOp::from_rows(rows)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    #[default]
    None,
    InterceptResend,
    EntangleMeasure,
    Impersonate,
}

impl std::str::FromStr for AttackKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttackKind::None),
            "intercept_resend" | "intercept-resend" => Ok(AttackKind::InterceptResend),
            "entangle_measure" | "entangle-measure" => Ok(AttackKind::EntangleMeasure),
            "impersonate" | "mitm" => Ok(AttackKind::Impersonate),
            other => Err(Error::Config(format!("unknown attack kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeSpec>,
}

/// The `attack` record of a protocol configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default = "default_leg")]
    pub leg: Leg,
    #[serde(default)]
    pub kind: AttackKind,
    #[serde(default)]
    pub params: AttackParams,
}

fn default_leg() -> Leg {
    Leg::Two
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            leg: default_leg(),
            kind: AttackKind::None,
            params: AttackParams::default(),
        }
    }
}

impl AttackConfig {
    pub fn resolve(&self) -> Result<(Leg, AttackStrategy)> {
        let strategy = match self.kind {
            AttackKind::None => AttackStrategy::None,
            AttackKind::InterceptResend => AttackStrategy::InterceptResend {
                basis: self.params.basis.unwrap_or_default(),
            },
            AttackKind::EntangleMeasure => {
                let spec = self
                    .params
                    .probe
                    .clone()
                    .unwrap_or_else(|| ProbeSpec::Named("controlled_shift".into()));
                AttackStrategy::entangle(spec.resolve()?)?
            }
            AttackKind::Impersonate => AttackStrategy::Impersonate,
        };
        Ok((self.leg, strategy))
    }
}

/// Result of an impersonation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpersonationEstimate {
    pub leg: Leg,
    pub trials: u64,
    /// Empirical probability that one decoy answer matches.
    pub per_decoy_pass: f64,
    pub k: u32,
    /// `1 − pass^k` using the empirical pass rate.
    pub detection_physical: f64,
    /// `1 − (1/2)^k`.
    pub detection_paper: f64,
}

/// Simulates an impersonator answering a detection round without knowing
/// the decoy bases: she guesses a basis per decoy, measures, and reports
/// her outcome.
///
/// On leg 1 the decoy bases follow a pre-shared identity sequence she does
/// not hold (drawn fresh per trial); on leg 2 they are uniformly random.
pub fn impersonate_detection(leg: Leg, trials: u64, k: u32, rng: &mut RandomStream) -> ImpersonationEstimate {
    let mut passes = 0u64;
    for _ in 0..trials {
        let basis = match leg {
            Leg::One => Basis::for_identity_digit(Symbol::random(rng)),
            Leg::Two => Basis::random(rng),
        };
        let value = Symbol::random(rng);
        let slot = ChannelQudit::Bare(basis.state(value));
        let guess = Basis::random(rng);
        let answer = slot.measure(guess, rng).expect("4-dim slot");
        if answer == value {
            passes += 1;
        }
    }
    let pass = if trials == 0 {
        1.0
    } else {
        passes as f64 / trials as f64
    };
    ImpersonationEstimate {
        leg,
        trials,
        per_decoy_pass: pass,
        k,
        detection_physical: 1.0 - pass.powi(k as i32),
        detection_paper: 1.0 - 0.5f64.powi(k as i32),
    }
}

/// A random 16×16 unitary (QR of a complex Gaussian matrix by
/// Gram–Schmidt). Test and experiment helper.
pub fn random_probe(rng: &mut RandomStream) -> UnitaryOp {
    let n = COMPOSITE_DIM;
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        for c in &cols {
            let proj: C64 = c.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (x, y) in v.iter_mut().zip(c) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        cols.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut entries = vec![ZERO; n * n];
    for (c, col) in cols.iter().enumerate() {
        for (r, x) in col.iter().enumerate() {
            entries[r * n + c] = *x;
        }
    }
    UnitaryOp::new(n, entries).expect("orthonormal columns")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qudit::{make_x_state, UNITARY_TOL};

    fn sym(v: u32) -> Symbol {
        Symbol::new(v).unwrap()
    }

    #[test]
    fn correct_basis_is_invisible() {
        let mut rng = RandomStream::from_seed(4);
        for _ in 0..200 {
            let (resent, outcome, _) = intercept_resend_in(&make_z_state(sym(2)), Basis::Z, &mut rng).unwrap();
            assert_eq!(outcome, sym(2));
            assert_eq!(resent, make_z_state(sym(2)));
        }
    }

    #[test]
    fn wrong_basis_resends_fourier_state() {
        let mut rng = RandomStream::from_seed(4);
        let (resent, outcome, b) = intercept_resend_in(&make_z_state(sym(2)), Basis::X, &mut rng).unwrap();
        assert_eq!(b, Basis::X);
        assert_eq!(resent, make_x_state(outcome));
        let p = crate::qudit::born_probabilities(&resent, Basis::Z).unwrap();
        assert!((1.0 - p[2] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn controlled_shift_is_a_permutation() {
        let cs = controlled_shift();
        assert_eq!(cs.unitarity_deviation(), 0.0);
        // |1⟩|0⟩ → |1⟩|1⟩
        assert_eq!(cs.get(5, 4), ONE);
    }

    #[test]
    fn identity_probe_is_silent() {
        let id = UnitaryOp::identity(16);
        assert_eq!(decoy_qber_under_probe(&id).unwrap(), (0.0, 0.0));
        let joint = entangle_probe(&make_x_state(sym(3)), &id).unwrap();
        assert_eq!(joint, tensor(&make_x_state(sym(3)), &make_z_state(sym(0))).unwrap());
    }

    #[test]
    fn controlled_shift_qber() {
        let (z, x) = decoy_qber_under_probe(&controlled_shift()).unwrap();
        assert!(z.abs() < 1e-15);
        assert!((x - 0.75).abs() < 1e-15);
    }

    #[test]
    fn product_probe_qber_depends_on_carrier_factor_only() {
        let w = UnitaryOp::diagonal(&[ONE, C64::new(0.0, 1.0), -ONE, ONE]).unwrap();
        let v = oracle(sym(1));
        let ancilla_only = UnitaryOp::identity(4).kron(&w);
        assert_eq!(decoy_qber_under_probe(&ancilla_only).unwrap(), (0.0, 0.0));
        let both = v.kron(&w);
        let carrier_only = v.kron(&UnitaryOp::identity(4));
        let a = decoy_qber_under_probe(&both).unwrap();
        let b = decoy_qber_under_probe(&carrier_only).unwrap();
        assert!((a.0 - b.0).abs() < 1e-14 && (a.1 - b.1).abs() < 1e-14);
        assert!(a.1 > 0.0);
    }

    #[test]
    fn ancilla_only_probe_keeps_fidelity() {
        let w = UnitaryOp::diagonal(&[ONE, C64::new(0.0, 1.0), -ONE, ONE]).unwrap();
        let probe = UnitaryOp::identity(4).kron(&w);
        for id in InitialStateId::all() {
            let (f, e) = probe_fidelity(&probe, id, sym(1), sym(3)).unwrap();
            assert!((f - 1.0).abs() < 1e-12 && e.abs() < 1e-12);
        }
    }

    #[test]
    fn probe_spec_parsing() {
        let named: ProbeSpec = serde_json::from_str("\"controlled_shift\"").unwrap();
        assert_eq!(named.resolve().unwrap(), controlled_shift());
        let bad: ProbeSpec = serde_json::from_str("\"nope\"").unwrap();
        assert!(bad.resolve().is_err());
        let mut rows = vec![vec![[0.0, 0.0]; 16]; 16];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = [1.0, 0.0];
        }
        let m = ProbeSpec::Matrix(rows.clone());
        assert_eq!(m.resolve().unwrap(), UnitaryOp::identity(16));
        rows[0][1] = [1.0, 0.0];
        assert!(matches!(ProbeSpec::Matrix(rows).resolve(), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn random_probe_is_unitary() {
        let mut rng = RandomStream::from_seed(8);
        let u = random_probe(&mut rng);
        assert!(u.unitarity_deviation() < UNITARY_TOL);
    }

    #[test]
    fn impersonation_without_decoys() {
        let mut rng = RandomStream::from_seed(1);
        let est = impersonate_detection(Leg::One, 1000, 0, &mut rng);
        assert_eq!(est.detection_physical, 0.0);
        assert_eq!(est.detection_paper, 0.0);
        let est = impersonate_detection(Leg::One, 10, 10, &mut rng);
        assert!((est.detection_paper - 0.9990234375).abs() < 1e-12);
    }

    #[test]
    fn attack_frame_records_every_slot() {
        let mut rng = RandomStream::from_seed(1);
        let mut frame = TransmissionFrame::from_states(
            Symbol::ALL.iter().map(|&s| make_x_state(s)).collect(),
        )
        .unwrap();
        let t = attack_frame(&AttackStrategy::entangle(controlled_shift()).unwrap(), &mut frame, &mut rng).unwrap();
        assert_eq!(t.records.len(), 4);
        assert!(frame.slots.iter().all(|s| s.is_probed()));
        assert_eq!(
            attack_frame(&AttackStrategy::entangle(controlled_shift()).unwrap(), &mut frame, &mut rng),
            Err(Error::AlreadyProbed(0))
        );
    }
}
