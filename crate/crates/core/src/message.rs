//! Digit sequences exchanged by the parties and their byte packing.
//!
//! A byte packs four digits, most-significant bit pair first:
//! `0xB4 = 0b10_11_01_00 → [2, 3, 1, 0]`.

use std::fmt;

use crate::error::{Error, Result};
use crate::qudit::{Basis, Symbol};
use crate::rng::RandomStream;

/// A message `{w_A^j}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message(Vec<Symbol>);

impl Message {
    pub fn new(digits: Vec<Symbol>) -> Self {
        Self(digits)
    }

    pub fn random(len: usize, rng: &mut RandomStream) -> Self {
        Self((0..len).map(|_| Symbol::random(rng)).collect())
    }

    pub fn from_bytes(bytes: &[u8]) -> Self {
        let digits = bytes
            .iter()
            .flat_map(|b| (0..4).rev().map(move |pair| Symbol::ALL[((b >> (2 * pair)) & 0b11) as usize]))
            .collect();
        Self(digits)
    }

    pub fn from_hex(hex_str: &str) -> Result<Self> {
        let bytes = hex::decode(hex_str.trim()).map_err(|e| Error::Message(e.to_string()))?;
        Ok(Self::from_bytes(&bytes))
    }

    /// Packs digits into bytes; a trailing partial byte is zero-filled in
    /// its low-order pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(4)
            .map(|chunk| {
                chunk
                    .iter()
                    .chain(std::iter::repeat(&Symbol::ALL[0]))
                    .take(4)
                    .fold(0u8, |acc, s| (acc << 2) | s.value())
            })
            .collect()
    }

    pub fn to_hex(&self) -> String {
        hex::encode_upper(self.to_bytes())
    }

    pub fn digits(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of positions where `self` and `other` differ.
    pub fn digit_errors(&self, other: &Message) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.0.len().abs_diff(other.0.len())
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.0 {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Controller license `K_C = {w_C^j}`, one digit per carrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LicenseKey(Vec<Symbol>);

impl LicenseKey {
    pub fn new(digits: Vec<Symbol>) -> Self {
        Self(digits)
    }

    pub fn random(len: usize, rng: &mut RandomStream) -> Self {
        Self((0..len).map(|_| Symbol::random(rng)).collect())
    }

    pub fn digits(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Pre-shared identity sequence (`ID_C`, `ID_B`). Entry `i mod len`
/// selects the basis of the `i`-th decoy by parity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentitySequence(Vec<Symbol>);

impl IdentitySequence {
    pub fn new(entries: Vec<Symbol>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("identity sequence must be nonempty".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_values(values: &[u8]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Symbol::try_from(v)).collect::<Result<_>>()?)
    }

    pub fn random(len: usize, rng: &mut RandomStream) -> Result<Self> {
        Self::new((0..len).map(|_| Symbol::random(rng)).collect())
    }

    pub fn entries(&self) -> &[Symbol] {
        &self.0
    }

    pub fn basis_for(&self, decoy_index: usize) -> Basis {
        Basis::for_identity_digit(self.0[decoy_index % self.0.len()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn packing_is_msb_first() {
        let m = Message::from_hex("B4").unwrap();
        let d: Vec<u8> = m.digits().iter().map(|s| s.value()).collect();
        assert_eq!(d, vec![2, 3, 1, 0]);
        assert_eq!(Message::from_hex("dead").unwrap().to_hex(), "DEAD");
    }

    #[test]
    fn partial_byte_is_zero_filled() {
        let m = Message::new(vec![Symbol::ALL[3], Symbol::ALL[1]]);
        assert_eq!(m.to_hex(), "D0");
    }

    #[test]
    fn bad_hex() {
        assert!(matches!(Message::from_hex("XYZ"), Err(Error::Message(_))));
    }

    #[test]
    fn identity_cycles_by_parity() {
        let id = IdentitySequence::from_values(&[0, 1, 2, 3]).unwrap();
        let bases: Vec<Basis> = (0..6).map(|i| id.basis_for(i)).collect();
        assert_eq!(bases, vec![Basis::Z, Basis::X, Basis::Z, Basis::X, Basis::Z, Basis::X]);
        assert!(IdentitySequence::new(vec![]).is_err());
        assert!(IdentitySequence::from_values(&[4]).is_err());
    }

    proptest! {
        #[test]
        fn bytes_roundtrip(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let m = Message::from_bytes(&bytes);
            prop_assert_eq!(m.len(), bytes.len() * 4);
            prop_assert_eq!(m.to_bytes(), bytes);
        }
    }
}
