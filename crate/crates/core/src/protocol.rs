//! The six-step controlled direct-communication session between a
//! controller (Charlie), a sender (Alice) and a receiver (Bob).
//!
//! 1. Charlie draws carriers from the symmetric set, applies his license
//!    oracle to each, and interleaves identity-bound decoys.
//! 2. Charlie and Alice check the leg-1 decoys; abort above threshold.
//! 3. Alice applies her message oracles and interleaves random decoys.
//! 4. Alice and Bob check the leg-2 decoys; abort above threshold.
//! 5. Charlie releases the license; Bob reapplies the license oracles.
//! 6. Bob applies each carrier's diffusion and reads the message in Z.

use serde::{Deserialize, Serialize};

use crate::adversary::{attack_frame, AttackConfig, AttackStrategy, EveTranscript, Leg};
use crate::error::{Error, Result};
use crate::frame::{interleave, split_decoys, DecoyRecord, TransmissionFrame};
use crate::grover::{diffusion, initial_state, oracle, InitialStateId};
use crate::message::{IdentitySequence, LicenseKey, Message};
use crate::qudit::{apply, Basis, StateVec, Symbol};
use crate::rng::RandomStream;

pub const DEFAULT_QBER_THRESHOLD: f64 = 0.05;

/// What the controller keeps to himself after step 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSecrets {
    pub initial_ids: Vec<InitialStateId>,
    pub license: LicenseKey,
    pub decoys: Vec<DecoyRecord>,
}

/// Carrier states `U_{w_C^j} |S^j⟩`.
pub fn encode_carriers(ids: &[InitialStateId], license: &LicenseKey) -> Result<Vec<StateVec>> {
    check_len(ids.len(), license.len())?;
    ids.iter()
        .zip(license.digits())
        .map(|(&id, &w)| apply(&oracle(w), &initial_state(id)))
        .collect()
}

/// Step 1. Draws `n` carriers and license digits, prepares `k` decoys
/// whose bases follow `id_c`, and interleaves them at random positions.
pub fn charlie_prepare(
    n: usize,
    k: usize,
    id_c: &IdentitySequence,
    rng: &mut RandomStream,
) -> Result<(TransmissionFrame, SessionSecrets)> {
    if n == 0 {
        return Err(Error::Config("carrier count must be at least 1".into()));
    }
    let initial_ids: Vec<_> = (0..n).map(|_| InitialStateId::random(rng)).collect();
    let license = LicenseKey::random(n, rng);
    let carriers = TransmissionFrame::from_states(encode_carriers(&initial_ids, &license)?)?;
    let (frame, decoys) = insert_identity_decoys(carriers, k, id_c, rng);
    Ok((
        frame,
        SessionSecrets {
            initial_ids,
            license,
            decoys,
        },
    ))
}

/// Decoy `i` uses basis `id[i mod len]` (parity rule) and a uniform value.
pub fn insert_identity_decoys(
    carriers: TransmissionFrame,
    k: usize,
    id: &IdentitySequence,
    rng: &mut RandomStream,
) -> (TransmissionFrame, Vec<DecoyRecord>) {
    let decoys: Vec<_> = (0..k).map(|i| (id.basis_for(i), Symbol::random(rng))).collect();
    interleave(carriers, &decoys, rng)
}

/// Step 3 decoys: uniform basis and value, independent of any identity.
pub fn alice_insert_random_decoys(
    carriers: TransmissionFrame,
    k: usize,
    rng: &mut RandomStream,
) -> (TransmissionFrame, Vec<DecoyRecord>) {
    let decoys: Vec<_> = (0..k)
        .map(|_| (Basis::random(rng), Symbol::random(rng)))
        .collect();
    interleave(carriers, &decoys, rng)
}

/// Outcome of a decoy comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub mismatches: usize,
    pub checked: usize,
    /// Carriers in original order.
    pub stripped: TransmissionFrame,
}

impl DetectionOutcome {
    /// `mismatches / checked`, zero with no decoys.
    pub fn qber(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.mismatches as f64 / self.checked as f64
        }
    }
}

/// Steps 2 and 4. Measures each decoy in its declared basis, records the
/// outcome as its digit, and counts disagreements with the preparation.
pub fn detection_round(
    frame: TransmissionFrame,
    decoys: &[DecoyRecord],
    rng: &mut RandomStream,
) -> Result<DetectionOutcome> {
    let (decoy_slots, stripped) = split_decoys(frame, decoys)?;
    let mut mismatches = 0;
    for (slot, rec) in decoy_slots.iter().zip(decoys) {
        if slot.measure(rec.basis, rng)? != rec.value {
            mismatches += 1;
        }
    }
    Ok(DetectionOutcome {
        mismatches,
        checked: decoys.len(),
        stripped,
    })
}

/// Detection round answered by an impersonator: the reported digit for
/// each decoy is whatever she measured at that slot.
pub fn detection_round_answered(
    frame: TransmissionFrame,
    decoys: &[DecoyRecord],
    transcript: &EveTranscript,
) -> Result<DetectionOutcome> {
    let (_, stripped) = split_decoys(frame, decoys)?;
    let mismatches = decoys
        .iter()
        .filter(|rec| transcript.outcome_at(rec.position) != Some(rec.value))
        .count();
    Ok(DetectionOutcome {
        mismatches,
        checked: decoys.len(),
        stripped,
    })
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

fn apply_oracles(mut carriers: TransmissionFrame, digits: &[Symbol]) -> Result<TransmissionFrame> {
    check_len(carriers.len(), digits.len())?;
    for (slot, &w) in carriers.slots.iter_mut().zip(digits) {
        slot.apply_local(&oracle(w))?;
    }
    Ok(carriers)
}

/// Step 3 encoding: `U_{w_A^j}` on carrier `j`.
pub fn alice_encode(carriers: TransmissionFrame, msg: &Message) -> Result<TransmissionFrame> {
    apply_oracles(carriers, msg.digits())
}

/// Step 5: `U_{w_C^j}` on carrier `j`.
pub fn bob_apply_authorization(carriers: TransmissionFrame, license: &LicenseKey) -> Result<TransmissionFrame> {
    apply_oracles(carriers, license.digits())
}

/// Step 6: diffusion about each carrier's initial state, then a Z
/// measurement per carrier.
pub fn bob_decode_measure(
    mut carriers: TransmissionFrame,
    initial_ids: &[InitialStateId],
    rng: &mut RandomStream,
) -> Result<Message> {
    check_len(carriers.len(), initial_ids.len())?;
    let mut digits = Vec::with_capacity(initial_ids.len());
    for (slot, &id) in carriers.slots.iter_mut().zip(initial_ids) {
        slot.apply_local(&diffusion(id))?;
        digits.push(slot.measure(Basis::Z, rng)?);
    }
    Ok(Message::new(digits))
}

/// Whether the controller releases the true license in step 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Authorization {
    #[default]
    Granted,
    /// The receiver proceeds with a uniformly random license.
    Withheld,
}

/// Session configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Carrier count. Derived from `message_hex` when absent.
    #[serde(rename = "N", alias = "n", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Leg-1 decoys; defaults to N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    /// Leg-2 decoys; defaults to N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<usize>,
    #[serde(default = "default_threshold")]
    pub qber_threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub attack: AttackConfig,
    /// Message bytes, four digits per byte. Random when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_hex: Option<String>,
    /// Controller identity digits; random (from the seed) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_c: Option<Vec<u8>>,
    /// Receiver identity digits, used only with `leg2_identity_binding`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_b: Option<Vec<u8>>,
    /// Bind leg-2 decoy bases to `id_b` instead of drawing them at random.
    #[serde(default)]
    pub leg2_identity_binding: bool,
    #[serde(default)]
    pub authorization: Authorization,
}

fn default_threshold() -> f64 {
    DEFAULT_QBER_THRESHOLD
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            n: None,
            k1: None,
            k2: None,
            qber_threshold: DEFAULT_QBER_THRESHOLD,
            seed: 0,
            attack: AttackConfig::default(),
            message_hex: None,
            id_c: None,
            id_b: None,
            leg2_identity_binding: false,
            authorization: Authorization::Granted,
        }
    }
}

impl ProtocolConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn with_carriers(n: usize) -> Self {
        Self {
            n: Some(n),
            ..Self::default()
        }
    }

    fn resolve(&self, root: &RandomStream) -> Result<ResolvedSession> {
        if !(0.0..=1.0).contains(&self.qber_threshold) {
            return Err(Error::Config(format!(
                "qber_threshold must lie in [0, 1], got {}",
                self.qber_threshold
            )));
        }
        let message = match (&self.message_hex, self.n) {
            (Some(hex), n) => {
                let m = Message::from_hex(hex)?;
                if let Some(n) = n {
                    if n != m.len() {
                        return Err(Error::Config(format!(
                            "N = {n} but message_hex encodes {} digits",
                            m.len()
                        )));
                    }
                }
                m
            }
            (None, Some(n)) => Message::random(n, &mut root.derive("message")),
            (None, None) => return Err(Error::Config("either N or message_hex is required".into())),
        };
        let n = message.len();
        if n == 0 {
            return Err(Error::Config("carrier count must be at least 1".into()));
        }
        let k1 = self.k1.unwrap_or(n);
        let k2 = self.k2.unwrap_or(n);
        let id_c = match &self.id_c {
            Some(v) => IdentitySequence::from_values(v)?,
            None => IdentitySequence::random(k1.max(1), &mut root.derive("id-c"))?,
        };
        let id_b = match (&self.id_b, self.leg2_identity_binding) {
            (Some(v), _) => Some(IdentitySequence::from_values(v)?),
            (None, true) => Some(IdentitySequence::random(k2.max(1), &mut root.derive("id-b"))?),
            (None, false) => None,
        };
        let (attack_leg, attack) = self.attack.resolve()?;
        Ok(ResolvedSession {
            n,
            k1,
            k2,
            threshold: self.qber_threshold,
            message,
            id_c,
            id_b: if self.leg2_identity_binding { id_b } else { None },
            attack_leg,
            attack,
            authorization: self.authorization,
        })
    }
}

struct ResolvedSession {
    n: usize,
    k1: usize,
    k2: usize,
    threshold: f64,
    message: Message,
    id_c: IdentitySequence,
    id_b: Option<IdentitySequence>,
    attack_leg: Leg,
    attack: AttackStrategy,
    authorization: Authorization,
}

/// Where a session stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbortStep {
    Step2,
    Step4,
}

/// Photon and bit tallies. `q_t` counts every transmitted photon, `b_s`
/// counts delivered secret bits (two per carrier).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub q_t: usize,
    pub b_s: usize,
    pub eta: f64,
}

impl Counters {
    pub fn new(q_t: usize, b_s: usize) -> Self {
        Self {
            q_t,
            b_s,
            eta: if q_t == 0 { 0.0 } else { b_s as f64 / q_t as f64 },
        }
    }
}

/// Result of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// `None` when the leg never ran.
    pub leg1_qber: Option<f64>,
    pub leg2_qber: Option<f64>,
    pub aborted_at: Option<AbortStep>,
    /// Present iff the session was not aborted.
    pub recovered: Option<Message>,
    pub counters: Counters,
    /// The message Alice encoded.
    pub sent: Message,
}

#[derive(Serialize)]
struct RunReportJson<'a> {
    leg1_qber: Option<f64>,
    leg2_qber: Option<f64>,
    aborted_at: Option<AbortStep>,
    recovered_hex: Option<String>,
    counters: &'a Counters,
}

impl RunReport {
    pub fn delivered(&self) -> bool {
        self.aborted_at.is_none()
    }

    /// Digit disagreements between the sent and recovered messages.
    pub fn digit_errors(&self) -> Option<usize> {
        self.recovered.as_ref().map(|r| r.digit_errors(&self.sent))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data")
    }
}

/// Wire form: `leg1_qber, leg2_qber, aborted_at, recovered_hex,
/// counters{q_t, b_s, eta}`.
impl Serialize for RunReport {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RunReportJson {
            leg1_qber: self.leg1_qber,
            leg2_qber: self.leg2_qber,
            aborted_at: self.aborted_at,
            recovered_hex: self.recovered.as_ref().map(Message::to_hex),
            counters: &self.counters,
        }
        .serialize(serializer)
    }
}

/// Session using the configuration's own seed.
pub fn run_session_seeded(config: &ProtocolConfig) -> Result<RunReport> {
    run_session(config, &RandomStream::from_seed(config.seed))
}

/// Runs all six steps. Attacks lead to aborts, never to errors; errors are
/// configuration problems only.
pub fn run_session(config: &ProtocolConfig, root: &RandomStream) -> Result<RunReport> {
    let s = config.resolve(root)?;
    let (n, k1, k2) = (s.n, s.k1, s.k2);

    // Step 1
    let (mut frame, secrets) = charlie_prepare(n, k1, &s.id_c, &mut root.derive("charlie"))?;

    // Step 2
    let leg1 = run_leg(Leg::One, &s, frame, &secrets.decoys, root)?;
    let leg1_qber = leg1.qber();
    if leg1_qber > s.threshold {
        return Ok(RunReport {
            leg1_qber: Some(leg1_qber),
            leg2_qber: None,
            aborted_at: Some(AbortStep::Step2),
            recovered: None,
            counters: Counters::new(n + k1, 0),
            sent: s.message,
        });
    }

    // Step 3
    let encoded = alice_encode(leg1.stripped, &s.message)?;
    let mut alice_rng = root.derive("alice-decoys");
    let (leg2_frame, leg2_decoys) = match &s.id_b {
        Some(id_b) => insert_identity_decoys(encoded, k2, id_b, &mut alice_rng),
        None => alice_insert_random_decoys(encoded, k2, &mut alice_rng),
    };
    frame = leg2_frame;

    // Step 4
    let leg2 = run_leg(Leg::Two, &s, frame, &leg2_decoys, root)?;
    let leg2_qber = leg2.qber();
    if leg2_qber > s.threshold {
        return Ok(RunReport {
            leg1_qber: Some(leg1_qber),
            leg2_qber: Some(leg2_qber),
            aborted_at: Some(AbortStep::Step4),
            recovered: None,
            counters: Counters::new(n + k1 + k2, 0),
            sent: s.message,
        });
    }

    // Step 5
    let license = match s.authorization {
        Authorization::Granted => secrets.license.clone(),
        Authorization::Withheld => LicenseKey::random(n, &mut root.derive("license-guess")),
    };
    let authorized = bob_apply_authorization(leg2.stripped, &license)?;

    // Step 6
    let recovered = bob_decode_measure(authorized, &secrets.initial_ids, &mut root.derive("bob-measure"))?;
    Ok(RunReport {
        leg1_qber: Some(leg1_qber),
        leg2_qber: Some(leg2_qber),
        aborted_at: None,
        recovered: Some(recovered),
        counters: Counters::new(n + k1 + k2, 2 * n),
        sent: s.message,
    })
}

fn run_leg(
    leg: Leg,
    s: &ResolvedSession,
    mut frame: TransmissionFrame,
    decoys: &[DecoyRecord],
    root: &RandomStream,
) -> Result<DetectionOutcome> {
    let tag = u8::from(leg);
    let mut transcript = EveTranscript::default();
    if s.attack_leg == leg {
        transcript = attack_frame(&s.attack, &mut frame, &mut root.derive(&format!("leg{tag}-attack")))?;
    }
    if s.attack_leg == leg && matches!(s.attack, AttackStrategy::Impersonate) {
        detection_round_answered(frame, decoys, &transcript)
    } else {
        detection_round(frame, decoys, &mut root.derive(&format!("leg{tag}-measure")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::AttackKind;
    use crate::qudit::{make_z_state, C64};

    fn sym(v: u32) -> Symbol {
        Symbol::new(v).unwrap()
    }

    fn id(v: u32) -> InitialStateId {
        InitialStateId::new(v).unwrap()
    }

    fn halves(s: &StateVec, want: [f64; 4]) -> bool {
        s.amps()
            .iter()
            .zip(want)
            .all(|(a, w)| (a - C64::new(w * 0.5, 0.0)).norm() < 1e-15)
    }

    #[test]
    fn license_encoding_examples() {
        let c = encode_carriers(&[id(0)], &LicenseKey::new(vec![sym(1)])).unwrap();
        assert!(halves(&c[0], [1.0, -1.0, 1.0, 1.0]));
        let c = encode_carriers(&[id(0)], &LicenseKey::new(vec![sym(0)])).unwrap();
        assert!(halves(&c[0], [-1.0, 1.0, 1.0, 1.0]));
    }

    #[test]
    fn alice_encode_examples() {
        let carriers = TransmissionFrame::from_states(
            encode_carriers(&[id(0)], &LicenseKey::new(vec![sym(0)])).unwrap(),
        )
        .unwrap();
        let out = alice_encode(carriers.clone(), &Message::new(vec![sym(0)])).unwrap();
        assert!(halves(out.slots[0].state(), [1.0, 1.0, 1.0, 1.0]));
        let out = alice_encode(carriers.clone(), &Message::new(vec![sym(2)])).unwrap();
        assert!(halves(out.slots[0].state(), [-1.0, 1.0, -1.0, 1.0]));
        assert_eq!(
            alice_encode(carriers, &Message::new(vec![sym(0), sym(1)])),
            Err(Error::LengthMismatch { expected: 1, actual: 2 })
        );
    }

    #[test]
    fn z_identity_decoy() {
        let mut rng = RandomStream::from_seed(3);
        let id0 = IdentitySequence::from_values(&[0]).unwrap();
        let (frame, secrets) = charlie_prepare(4, 8, &id0, &mut rng).unwrap();
        assert_eq!(frame.len(), 12);
        for d in &secrets.decoys {
            assert_eq!(d.basis, Basis::Z);
            assert_eq!(frame.slots[d.position].state(), &make_z_state(d.value));
        }
        assert!(charlie_prepare(0, 1, &id0, &mut rng).is_err());
    }

    #[test]
    fn untouched_detection_is_clean() {
        let mut rng = RandomStream::from_seed(3);
        let id_c = IdentitySequence::from_values(&[0, 1, 3]).unwrap();
        let (frame, secrets) = charlie_prepare(50, 50, &id_c, &mut rng).unwrap();
        let out = detection_round(frame, &secrets.decoys, &mut rng).unwrap();
        assert_eq!(out.qber(), 0.0);
        assert_eq!(out.checked, 50);
        assert_eq!(out.stripped.len(), 50);
    }

    #[test]
    fn random_z_replacement_gives_three_quarters() {
        let mut rng = RandomStream::from_seed(13);
        let id_c = IdentitySequence::from_values(&[0]).unwrap();
        let (mut frame, secrets) = charlie_prepare(10, 20_000, &id_c, &mut rng).unwrap();
        for slot in frame.slots.iter_mut() {
            *slot = crate::frame::ChannelQudit::Bare(make_z_state(Symbol::random(&mut rng)));
        }
        let q = detection_round(frame, &secrets.decoys, &mut rng).unwrap().qber();
        let sigma = (0.75f64 * 0.25 / 20_000.0).sqrt();
        assert!((q - 0.75).abs() < 4.0 * sigma, "{q}");
    }

    #[test]
    fn zero_decoys_leave_frame_unchanged() {
        let mut rng = RandomStream::from_seed(5);
        let carriers = TransmissionFrame::from_states(vec![make_z_state(sym(1))]).unwrap();
        let (frame, d) = alice_insert_random_decoys(carriers.clone(), 0, &mut rng);
        assert_eq!(frame, carriers);
        assert!(d.is_empty());
        let (frame, _) = alice_insert_random_decoys(carriers, 1, &mut rng);
        assert_eq!(frame.len(), 2);
    }

    #[test]
    fn honest_session_delivers() {
        let cfg = ProtocolConfig {
            message_hex: Some("DEAD".into()),
            ..ProtocolConfig::default()
        };
        let r = run_session_seeded(&cfg).unwrap();
        assert_eq!(r.recovered.as_ref().unwrap().to_hex(), "DEAD");
        assert_eq!(r.leg1_qber, Some(0.0));
        assert_eq!(r.leg2_qber, Some(0.0));
        assert_eq!(r.counters.q_t, 24);
        assert_eq!(r.counters.b_s, 16);
    }

    #[test]
    fn intercept_resend_on_leg1_aborts() {
        let mut cfg = ProtocolConfig::with_carriers(64);
        cfg.k1 = Some(64);
        cfg.attack = AttackConfig {
            leg: Leg::One,
            kind: AttackKind::InterceptResend,
            ..AttackConfig::default()
        };
        let r = run_session_seeded(&cfg).unwrap();
        assert_eq!(r.aborted_at, Some(AbortStep::Step2));
        assert!(r.recovered.is_none());
        assert!(r.to_json().contains("\"aborted_at\": \"step2\""));
    }

    #[test]
    fn withheld_license_breaks_decoding() {
        let mut cfg = ProtocolConfig::with_carriers(2000);
        cfg.authorization = Authorization::Withheld;
        let r = run_session_seeded(&cfg).unwrap();
        let errs = r.digit_errors().unwrap();
        assert!(errs > 0);
    }

    #[test]
    fn config_errors() {
        assert!(ProtocolConfig::from_json("{").is_err());
        assert!(ProtocolConfig::from_json(r#"{"N": 4, "bogus": 1}"#).is_err());
        let cfg = ProtocolConfig::from_json(r#"{"N": 3, "message_hex": "AB"}"#).unwrap();
        assert!(run_session_seeded(&cfg).is_err());
        let cfg = ProtocolConfig::from_json(r#"{"N": 3, "qber_threshold": 1.5}"#).unwrap();
        assert!(run_session_seeded(&cfg).is_err());
        let cfg = ProtocolConfig::from_json(r#"{}"#).unwrap();
        assert!(run_session_seeded(&cfg).is_err());
        let cfg = ProtocolConfig::from_json(r#"{"N": 0}"#).unwrap();
        assert!(run_session_seeded(&cfg).is_err());
    }

    #[test]
    fn config_json_shape() {
        let cfg = ProtocolConfig::from_json(
            r#"{"N": 8, "k1": 4, "k2": 2, "qber_threshold": 0.1, "seed": 9,
                "attack": {"leg": 2, "kind": "entangle_measure", "params": {"probe": "identity"}},
                "message_hex": "0F1E"}"#,
        )
        .unwrap();
        let r = run_session_seeded(&cfg).unwrap();
        assert_eq!(r.counters.q_t, 14);
        assert_eq!(r.recovered.unwrap().to_hex(), "0F1E");
    }
}
