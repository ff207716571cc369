//! Symmetric carrier states, oracle and diffusion reflections, and the
//! exhaustive check that one oracle/diffusion round decodes deterministically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qudit::{
    apply, equal_up_to_global_phase, make_z_state, StateVec, Symbol, UnitaryOp, C64, DIM, I, ONE,
    STATE_TOL, ZERO,
};

/// Number of symmetric carrier states.
pub const INITIAL_STATE_COUNT: usize = 16;

/// Index of one of the sixteen symmetric carrier states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct InitialStateId(u8);

impl InitialStateId {
    pub fn new(id: u32) -> Result<Self> {
        if (id as usize) < INITIAL_STATE_COUNT {
            Ok(Self(id as u8))
        } else {
            Err(Error::InitialStateOutOfRange(id))
        }
    }

    pub fn all() -> impl Iterator<Item = InitialStateId> {
        (0..INITIAL_STATE_COUNT as u8).map(InitialStateId)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn random(rng: &mut crate::RandomStream) -> Self {
        use rand::Rng;
        Self(rng.random_range(0..INITIAL_STATE_COUNT as u8))
    }
}

impl TryFrom<u8> for InitialStateId {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(u32::from(v))
    }
}

impl From<InitialStateId> for u8 {
    fn from(id: InitialStateId) -> u8 {
        id.0
    }
}

/// Phase pattern of each carrier state: row `m`, column `j` is twice the
/// amplitude of `|j⟩` in `S^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    rows: [[C64; DIM]; INITIAL_STATE_COUNT],
}

const P: C64 = ONE;
const M: C64 = C64::new(-1.0, 0.0);
const PI: C64 = I;
const MI: C64 = C64::new(0.0, -1.0);

const SYMMETRIC_STATES: [[C64; DIM]; INITIAL_STATE_COUNT] = [
    [P, P, P, P],
    [P, M, P, M],
    [P, PI, P, PI],
    [P, MI, P, MI],
    [P, P, M, M],
    [P, M, M, P],
    [P, PI, M, MI],
    [P, MI, M, PI],
    [P, P, PI, PI],
    [P, M, PI, MI],
    [P, PI, PI, M],
    [P, MI, PI, P],
    [P, P, MI, MI],
    [P, M, MI, PI],
    [P, PI, MI, P],
    [P, MI, MI, M],
];

impl Default for PhaseTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl PhaseTable {
    /// The sixteen symmetric carrier states used by the protocol.
    pub fn standard() -> Self {
        Self {
            rows: SYMMETRIC_STATES,
        }
    }

    /// An arbitrary table. Used for negative controls; rows need not be
    /// unit modulus.
    pub fn custom(rows: [[C64; DIM]; INITIAL_STATE_COUNT]) -> Self {
        Self { rows }
    }

    pub fn row(&self, id: InitialStateId) -> &[C64; DIM] {
        &self.rows[id.index()]
    }

    pub fn state(&self, id: InitialStateId) -> Result<StateVec> {
        StateVec::normalized(self.rows[id.index()].iter().map(|p| p * 0.5).collect())
    }
}

pub fn initial_state(id: InitialStateId) -> StateVec {
    PhaseTable::standard()
        .state(id)
        .expect("standard table rows are unit modulus")
}

/// `I − 2|w⟩⟨w|`.
pub fn oracle(w: Symbol) -> UnitaryOp {
    let mut diag = [ONE; DIM];
    diag[w.index()] = -ONE;
    let mut entries = vec![ZERO; DIM * DIM];
    for (i, d) in diag.iter().enumerate() {
        entries[i * DIM + i] = *d;
    }
    UnitaryOp::from_raw(DIM, entries)
}

/// `2|S⟩⟨S| − I` for an arbitrary state `S`.
pub fn reflection_about(s: &StateVec) -> UnitaryOp {
    let d = s.dim();
    let a = s.amps();
    let mut entries = vec![ZERO; d * d];
    for r in 0..d {
        for c in 0..d {
            entries[r * d + c] = 2.0 * a[r] * a[c].conj();
        }
        entries[r * d + r] -= ONE;
    }
    UnitaryOp::from_raw(d, entries)
}

pub fn diffusion(id: InitialStateId) -> UnitaryOp {
    reflection_about(&initial_state(id))
}

/// `U_S · U_{w_C} · U_{w_A} · U_{w_C} |S⟩` for an arbitrary carrier state.
pub fn decode_sequence_for(s: &StateVec, w_a: Symbol, w_c: Symbol) -> Result<StateVec> {
    let mut psi = apply(&oracle(w_c), s)?;
    psi = apply(&oracle(w_a), &psi)?;
    psi = apply(&oracle(w_c), &psi)?;
    apply(&reflection_about(s), &psi)
}

pub fn decode_sequence(id: InitialStateId, w_a: Symbol, w_c: Symbol) -> StateVec {
    decode_sequence_for(&initial_state(id), w_a, w_c).expect("dimensions are fixed")
}

/// The four admissible global phases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GlobalPhase {
    #[serde(rename = "+1")]
    PlusOne,
    #[serde(rename = "-1")]
    MinusOne,
    #[serde(rename = "+i")]
    PlusI,
    #[serde(rename = "-i")]
    MinusI,
}

impl GlobalPhase {
    pub const ALL: [GlobalPhase; 4] = [
        GlobalPhase::PlusOne,
        GlobalPhase::MinusOne,
        GlobalPhase::PlusI,
        GlobalPhase::MinusI,
    ];

    pub fn value(self) -> C64 {
        match self {
            GlobalPhase::PlusOne => ONE,
            GlobalPhase::MinusOne => -ONE,
            GlobalPhase::PlusI => I,
            GlobalPhase::MinusI => -I,
        }
    }

    /// Snaps `c` onto a fourth root of unity within `tol`.
    pub fn classify(c: C64, tol: f64) -> Option<Self> {
        Self::ALL.into_iter().find(|p| (p.value() - c).norm() <= tol)
    }

    pub fn label(self) -> &'static str {
        match self {
            GlobalPhase::PlusOne => "+1",
            GlobalPhase::MinusOne => "-1",
            GlobalPhase::PlusI => "+i",
            GlobalPhase::MinusI => "-i",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripleResult {
    pub id: u8,
    pub w_a: u8,
    pub w_c: u8,
    pub passed: bool,
    /// Observed phase when it is a fourth root of unity.
    pub phase: Option<GlobalPhase>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremReport {
    pub total: usize,
    pub passed: usize,
    pub failures: Vec<TripleResult>,
    pub phase_histogram: BTreeMap<&'static str, usize>,
    pub results: Vec<TripleResult>,
}

impl TheoremReport {
    pub fn all_passed(&self) -> bool {
        self.total == self.passed && self.failures.is_empty()
    }
}

pub fn verify_theorem_exhaustive() -> TheoremReport {
    verify_theorem_with(&PhaseTable::standard())
}

/// Runs every `(id, w_A, w_C)` triple against `table`. A triple passes
/// when the decoded state equals `|w_A⟩` up to a phase in `{±1, ±i}`.
pub fn verify_theorem_with(table: &PhaseTable) -> TheoremReport {
    let mut results = Vec::with_capacity(INITIAL_STATE_COUNT * DIM * DIM);
    for id in InitialStateId::all() {
        for w_a in Symbol::ALL {
            for w_c in Symbol::ALL {
                results.push(check_triple(table, id, w_a, w_c));
            }
        }
    }
    let mut phase_histogram: BTreeMap<&'static str, usize> =
        GlobalPhase::ALL.iter().map(|p| (p.label(), 0)).collect();
    for r in &results {
        if let (true, Some(p)) = (r.passed, r.phase) {
            *phase_histogram.entry(p.label()).or_default() += 1;
        }
    }
    let failures: Vec<_> = results.iter().filter(|r| !r.passed).cloned().collect();
    TheoremReport {
        total: results.len(),
        passed: results.len() - failures.len(),
        failures,
        phase_histogram,
        results,
    }
}

fn check_triple(table: &PhaseTable, id: InitialStateId, w_a: Symbol, w_c: Symbol) -> TripleResult {
    let outcome = table
        .state(id)
        .and_then(|s| decode_sequence_for(&s, w_a, w_c))
        .and_then(|out| equal_up_to_global_phase(&out, &make_z_state(w_a), STATE_TOL));
    let (passed, phase) = match outcome {
        Ok(m) => {
            let phase = GlobalPhase::classify(m.phase, STATE_TOL);
            (m.equal && phase.is_some(), phase)
        }
        Err(_) => (false, None),
    };
    TripleResult {
        id: id.0,
        w_a: w_a.value(),
        w_c: w_c.value(),
        passed,
        phase,
    }
}

/// Checks `U_{w_C} U_{w_A} U_{w_C} = U_{w_A}` exactly for all sixteen pairs.
pub fn verify_corollary() -> bool {
    Symbol::ALL.iter().all(|&w_a| {
        Symbol::ALL.iter().all(|&w_c| {
            let lhs = oracle(w_c)
                .compose(&oracle(w_a))
                .and_then(|m| m.compose(&oracle(w_c)))
                .expect("4x4");
            lhs == oracle(w_a)
        })
    })
}
