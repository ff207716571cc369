//! What travels on a quantum leg: an ordered run of qudits, some of which
//! may have been coupled to an eavesdropper's ancilla.

use rand::seq::index;

use crate::error::{Error, Result};
use crate::qudit::{
    apply, apply_carrier, born_probabilities, carrier_probabilities, measure, measure_subsystem,
    Basis, StateVec, Symbol, UnitaryOp, COMPOSITE_DIM, DIM,
};
use crate::rng::RandomStream;

/// One photon slot as seen on the channel.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelQudit {
    /// A single 4-level state.
    Bare(StateVec),
    /// Carrier entangled with a 4-level ancilla held by the adversary;
    /// 16 amplitudes, carrier index major.
    Probed(StateVec),
}

impl ChannelQudit {
    pub fn bare(state: StateVec) -> Result<Self> {
        if state.dim() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                actual: state.dim(),
            });
        }
        Ok(ChannelQudit::Bare(state))
    }

    /// Applies a single-qudit operator to the carrier.
    pub fn apply_local(&mut self, op: &UnitaryOp) -> Result<()> {
        *self = match self {
            ChannelQudit::Bare(s) => ChannelQudit::Bare(apply(op, s)?),
            ChannelQudit::Probed(j) => ChannelQudit::Probed(apply_carrier(op, j)?),
        };
        Ok(())
    }

    /// Carrier outcome distribution in `basis`.
    pub fn probabilities(&self, basis: Basis) -> Result<[f64; DIM]> {
        match self {
            ChannelQudit::Bare(s) => born_probabilities(s, basis),
            ChannelQudit::Probed(j) => carrier_probabilities(j, basis),
        }
    }

    /// Measures the carrier; the slot is consumed.
    pub fn measure(&self, basis: Basis, rng: &mut RandomStream) -> Result<Symbol> {
        match self {
            ChannelQudit::Bare(s) => measure(s, basis, rng).map(|(k, _)| k),
            ChannelQudit::Probed(j) => measure_subsystem(j, basis, rng).map(|(k, _)| k),
        }
    }

    pub fn is_probed(&self) -> bool {
        matches!(self, ChannelQudit::Probed(_))
    }

    pub fn state(&self) -> &StateVec {
        match self {
            ChannelQudit::Bare(s) | ChannelQudit::Probed(s) => s,
        }
    }

    pub(crate) fn probed(joint: StateVec) -> Self {
        debug_assert_eq!(joint.dim(), COMPOSITE_DIM);
        ChannelQudit::Probed(joint)
    }
}

/// Ordered photon slots. Carries no role information.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransmissionFrame {
    pub slots: Vec<ChannelQudit>,
}

impl TransmissionFrame {
    pub fn from_states(states: Vec<StateVec>) -> Result<Self> {
        Ok(Self {
            slots: states.into_iter().map(ChannelQudit::bare).collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// Sender-private record of one decoy photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoyRecord {
    pub position: usize,
    pub basis: Basis,
    pub value: Symbol,
}

impl DecoyRecord {
    pub fn state(&self) -> StateVec {
        self.basis.state(self.value)
    }
}

/// Interleaves `decoys` (basis, value) among `carriers` at uniformly random
/// positions. Carrier order is preserved.
pub fn interleave(
    carriers: TransmissionFrame,
    decoys: &[(Basis, Symbol)],
    rng: &mut RandomStream,
) -> (TransmissionFrame, Vec<DecoyRecord>) {
    let total = carriers.len() + decoys.len();
    let mut positions = index::sample(rng, total, decoys.len()).into_vec();
    positions.sort_unstable();

    let mut records = Vec::with_capacity(decoys.len());
    let mut slots = Vec::with_capacity(total);
    let mut carrier_iter = carriers.slots.into_iter();
    let mut next_decoy = 0;
    for pos in 0..total {
        if next_decoy < positions.len() && positions[next_decoy] == pos {
            let (basis, value) = decoys[next_decoy];
            records.push(DecoyRecord {
                position: pos,
                basis,
                value,
            });
            slots.push(ChannelQudit::Bare(basis.state(value)));
            next_decoy += 1;
        } else {
            slots.push(carrier_iter.next().expect("slot count matches"));
        }
    }
    (TransmissionFrame { slots }, records)
}

/// Splits a frame into its decoy slots (in `decoys` order) and the carrier
/// frame in original order.
pub fn split_decoys(
    frame: TransmissionFrame,
    decoys: &[DecoyRecord],
) -> Result<(Vec<ChannelQudit>, TransmissionFrame)> {
    let len = frame.len();
    let mut is_decoy = vec![None; len];
    for (i, d) in decoys.iter().enumerate() {
        if d.position >= len || is_decoy[d.position].is_some() {
            return Err(Error::Config(format!(
                "decoy position {} invalid for frame of {len}",
                d.position
            )));
        }
        is_decoy[d.position] = Some(i);
    }
    let mut decoy_slots: Vec<Option<ChannelQudit>> = vec![None; decoys.len()];
    let mut carriers = Vec::with_capacity(len - decoys.len());
    for (slot, tag) in frame.slots.into_iter().zip(is_decoy) {
        match tag {
            Some(i) => decoy_slots[i] = Some(slot),
            None => carriers.push(slot),
        }
    }
    Ok((
        decoy_slots.into_iter().map(|s| s.expect("filled")).collect(),
        TransmissionFrame { slots: carriers },
    ))
}
