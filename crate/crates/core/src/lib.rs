//! Simulator for controlled quantum secure direct communication over
//! 4-level qudits.
//!
//! A controller prepares carriers from sixteen symmetric states and locks
//! them with oracle reflections keyed by a license; the sender adds her
//! message as further oracle reflections; the receiver, once the license is
//! released, undoes the lock and applies one diffusion step, after which a
//! computational-basis measurement returns the message digit with
//! certainty. Decoy photons on both legs expose eavesdroppers.

pub mod adversary;
pub mod analysis;
pub mod error;
pub mod frame;
pub mod grover;
pub mod message;
pub mod protocol;
pub mod qudit;
pub mod rng;

pub use error::{Error, Result};
pub use rng::RandomStream;
