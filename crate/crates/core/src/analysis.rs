//! Closed-form and Monte Carlo security and efficiency figures.

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{AttackConfig, AttackKind, AttackParams, AttackStrategy, BasisPolicy, Leg};
use crate::error::{Error, Result};
use crate::frame::ChannelQudit;
use crate::grover::{diffusion, initial_state, oracle, InitialStateId};
use crate::protocol::{run_session, ProtocolConfig};
use crate::qudit::{apply, Basis, Symbol};
use crate::rng::RandomStream;

/// Per-decoy pass probability of an intercept-resend adversary as claimed
/// for this protocol.
pub const PASS_PAPER: f64 = 0.5;
/// Per-decoy pass probability quoted for the two-dimensional comparison
/// protocols.
pub const PASS_REFERENCE: f64 = 0.75;
/// Born-rule pass probability for intercept-resend with two mutually
/// unbiased 4-level bases: `1/2 + 1/2 · 1/4`.
pub const PASS_PHYSICAL: f64 = 0.625;

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Trials per independently seeded batch. Fixed so results do not depend
/// on thread count.
const BATCH: u64 = 8192;

/// `1 − pass^k`.
pub fn detection_closed_form(k: u32, per_decoy_pass: f64) -> f64 {
    1.0 - per_decoy_pass.powi(k as i32)
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl McEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(successes, trials, Z_95);
        Self {
            successes,
            trials,
            estimate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }

    /// Binomial standard deviation of the estimate at probability `p`.
    pub fn sigma_at(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Counts `trials` Bernoulli draws of `trial`, split into fixed-size
/// batches with their own derived streams and run in parallel.
fn parallel_count<F>(trials: u64, rng: &RandomStream, label: &str, trial: F) -> u64
where
    F: Fn(&mut RandomStream) -> bool + Sync,
{
    let batches = trials.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut stream = rng.derive_indexed(label, b);
            let len = BATCH.min(trials - b * BATCH);
            (0..len).filter(|_| trial(&mut stream)).count() as u64
        })
        .sum()
}

/// Whether one `k`-decoy detection round under `strategy` shows at least
/// one mismatch. Decoys carry uniform bases and values.
fn detection_trial(strategy: &AttackStrategy, k: u32, rng: &mut RandomStream) -> bool {
    (0..k).any(|_| decoy_flagged(strategy, rng))
}

fn decoy_flagged(strategy: &AttackStrategy, rng: &mut RandomStream) -> bool {
    let basis = Basis::random(rng);
    let value = Symbol::random(rng);
    let prepared = basis.state(value);
    let answer = match strategy {
        AttackStrategy::None => value,
        AttackStrategy::InterceptResend { basis: policy } => {
            let eve = match policy {
                BasisPolicy::Random => Basis::random(rng),
                BasisPolicy::Z => Basis::Z,
                BasisPolicy::X => Basis::X,
            };
            let (k, _) = crate::qudit::measure(&prepared, eve, rng).expect("4-dim");
            let (k2, _) = crate::qudit::measure(&eve.state(k), basis, rng).expect("4-dim");
            k2
        }
        AttackStrategy::Impersonate => {
            let eve = Basis::random(rng);
            crate::qudit::measure(&prepared, eve, rng).expect("4-dim").0
        }
        AttackStrategy::EntangleMeasure { probe } => {
            let joint = crate::adversary::entangle_probe(&prepared, probe).expect("validated probe");
            ChannelQudit::Probed(joint).measure(basis, rng).expect("16-dim")
        }
    };
    answer != value
}

/// Fraction of `trials` independent `k`-decoy rounds that detect the
/// adversary, with a Wilson 95% interval.
pub fn monte_carlo_detection(
    strategy: &AttackStrategy,
    k: u32,
    trials: u64,
    rng: &RandomStream,
) -> McEstimate {
    let hits = parallel_count(trials, rng, "detection", |s| detection_trial(strategy, k, s));
    McEstimate::from_counts(hits, trials)
}

/// Monte Carlo error rate on decoys of a single basis under `strategy`.
pub fn monte_carlo_decoy_error(
    strategy: &AttackStrategy,
    basis: Basis,
    trials: u64,
    rng: &RandomStream,
) -> McEstimate {
    let hits = parallel_count(trials, rng, "decoy-error", |s| {
        let value = Symbol::random(s);
        let slot = match strategy {
            AttackStrategy::EntangleMeasure { probe } => ChannelQudit::Probed(
                crate::adversary::entangle_probe(&basis.state(value), probe).expect("validated probe"),
            ),
            _ => {
                let mut frame = crate::frame::TransmissionFrame::from_states(vec![basis.state(value)])
                    .expect("4-dim");
                crate::adversary::attack_frame(strategy, &mut frame, s).expect("bare slot");
                frame.slots.pop().expect("one slot")
            }
        };
        slot.measure(basis, s).expect("valid slot") != value
    });
    McEstimate::from_counts(hits, trials)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionRow {
    pub k: u32,
    pub p_paper: f64,
    pub p_ref: f64,
    pub p_physical: f64,
    pub p_mc: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
}

/// Detection probability against decoy count.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionCurve {
    pub rows: Vec<DetectionRow>,
}

impl DetectionCurve {
    /// CSV with header `k,p_paper,p_ref,p_physical,p_mc,ci_low,ci_high,trials`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("ascii")
    }
}

/// Sweeps `k = 1..=k_max` for a random-basis intercept-resend adversary.
/// Each `k` gets its own derived stream.
pub fn sweep_detection(k_max: u32, trials: u64, rng: &RandomStream) -> Result<DetectionCurve> {
    if k_max < 1 {
        return Err(Error::Config("k_max must be at least 1".into()));
    }
    if trials < 1 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let strategy = AttackStrategy::InterceptResend {
        basis: BasisPolicy::Random,
    };
    let rows = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let mc = monte_carlo_detection(&strategy, k, trials, &rng.derive_indexed("sweep-k", u64::from(k)));
            DetectionRow {
                k,
                p_paper: detection_closed_form(k, PASS_PAPER),
                p_ref: detection_closed_form(k, PASS_REFERENCE),
                p_physical: detection_closed_form(k, PASS_PHYSICAL),
                p_mc: mc.estimate,
                ci_low: mc.ci_low,
                ci_high: mc.ci_high,
                trials,
            }
        })
        .collect();
    Ok(DetectionCurve { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub q_t: usize,
    pub b_s: usize,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// `η = b_s / q_t` with `q_t = N + k1 + k2` photons and `b_s = 2N` secret
/// bits (two per 4-level carrier).
pub fn qudit_efficiency(n: usize, k1: usize, k2: usize) -> Result<EfficiencyReport> {
    if n < 1 {
        return Err(Error::Config("N must be at least 1".into()));
    }
    let q_t = n + k1 + k2;
    let b_s = 2 * n;
    let eta = b_s as f64 / q_t as f64;
    let note = (eta > 1.0).then(|| {
        "eta exceeds 1: b_s counts classical bits while q_t counts photons, so without decoys the ratio is 2".to_string()
    });
    Ok(EfficiencyReport { n, q_t, b_s, eta, note })
}

/// A controller strategy: given the carrier id and license digit he
/// prepared, produce a guess for the message digit.
pub trait ControllerGuesser: Sync {
    fn guess(&self, id: InitialStateId, w_c: Symbol, rng: &mut RandomStream) -> Symbol;
}

/// The controller replays the receiver's decoding on a fresh copy of the
/// carrier he prepared (he never sees the sender's encoding) and measures.
pub struct ReplayDecoding;

impl ControllerGuesser for ReplayDecoding {
    fn guess(&self, id: InitialStateId, w_c: Symbol, rng: &mut RandomStream) -> Symbol {
        let prepared = apply(&oracle(w_c), &initial_state(id)).expect("4-dim");
        let unlocked = apply(&oracle(w_c), &prepared).expect("4-dim");
        let out = apply(&diffusion(id), &unlocked).expect("4-dim");
        crate::qudit::measure(&out, Basis::Z, rng).expect("4-dim").0
    }
}

/// Always answers the same digit.
pub struct FixedGuess(pub Symbol);

impl ControllerGuesser for FixedGuess {
    fn guess(&self, _: InitialStateId, _: Symbol, _: &mut RandomStream) -> Symbol {
        self.0
    }
}

/// Success rate of a dishonest controller who holds `K_C` and the carrier
/// ids but not the encoded carriers, against uniform message digits.
pub fn controller_guess_scenario(trials: u64, rng: &RandomStream) -> Result<McEstimate> {
    controller_guess_with(&ReplayDecoding, trials, rng)
}

pub fn controller_guess_with(
    guesser: &dyn ControllerGuesser,
    trials: u64,
    rng: &RandomStream,
) -> Result<McEstimate> {
    if trials < 1 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let hits = parallel_count(trials, rng, "controller", |s| {
        let id = InitialStateId::random(s);
        let w_c = Symbol::random(s);
        let w_a = Symbol::random(s);
        guesser.guess(id, w_c, s) == w_a
    });
    Ok(McEstimate::from_counts(hits, trials))
}

/// Digit error rate measured over complete sessions with an entangling
/// probe on leg 2 and detection disabled (threshold 1), so every session
/// reaches decoding.
pub fn session_digit_error_rate(
    probe: &crate::adversary::ProbeSpec,
    sessions: u64,
    carriers_per_session: usize,
    rng: &RandomStream,
) -> Result<McEstimate> {
    let config = ProtocolConfig {
        n: Some(carriers_per_session),
        k1: Some(0),
        k2: Some(0),
        qber_threshold: 1.0,
        attack: AttackConfig {
            leg: Leg::Two,
            kind: AttackKind::EntangleMeasure,
            params: AttackParams {
                basis: None,
                probe: Some(probe.clone()),
            },
        },
        ..ProtocolConfig::default()
    };
    let results: Result<Vec<u64>> = (0..sessions)
        .into_par_iter()
        .map(|i| {
            let report = run_session(&config, &rng.derive_indexed("session", i))?;
            Ok(report.digit_errors().unwrap_or(carriers_per_session) as u64)
        })
        .collect();
    let errors: u64 = results?.into_iter().sum();
    Ok(McEstimate::from_counts(errors, sessions * carriers_per_session as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BasisPair<T> {
    pub z: T,
    pub x: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionSummary {
    pub k: u32,
    /// `1 − (1/2)^k`.
    pub paper: f64,
    /// `1 − (3/4)^k`.
    pub reference: f64,
    /// `1 − pass^k` with this attack's per-decoy pass probability.
    pub physical: f64,
    pub monte_carlo: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FidelitySummary {
    pub mean: f64,
    pub min: f64,
    pub mean_error: f64,
}

/// Everything the `attack` experiment reports for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackReport {
    pub kind: &'static str,
    pub leg: Leg,
    pub trials: u64,
    pub decoy_error: BasisPair<McEstimate>,
    /// Exact per-basis decoy error, for entangling probes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_decoy_qber: Option<BasisPair<f64>>,
    /// Probability that one decoy with a uniform basis passes.
    pub per_decoy_pass: f64,
    pub detection: DetectionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelitySummary>,
    pub session: crate::protocol::RunReport,
}

/// Runs `strategy` through decoy-level Monte Carlo, closed forms, the
/// probe fidelity scan (for entangling probes) and one full session with
/// `session_carriers` carriers and `k` decoys per leg.
pub fn attack_experiment(
    attack: &AttackConfig,
    k: u32,
    trials: u64,
    session_carriers: usize,
    rng: &RandomStream,
) -> Result<AttackReport> {
    if trials < 1 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let (leg, strategy) = attack.resolve()?;
    let decoy_error = BasisPair {
        z: monte_carlo_decoy_error(&strategy, Basis::Z, trials, &rng.derive("decoy-z")),
        x: monte_carlo_decoy_error(&strategy, Basis::X, trials, &rng.derive("decoy-x")),
    };
    let (exact_decoy_qber, fidelity) = match &strategy {
        AttackStrategy::EntangleMeasure { probe } => {
            let (z, x) = crate::adversary::decoy_qber_under_probe(probe)?;
            let mut fs = Vec::with_capacity(256);
            for id in InitialStateId::all() {
                for w_a in Symbol::ALL {
                    for w_c in Symbol::ALL {
                        fs.push(crate::adversary::probe_fidelity(probe, id, w_a, w_c)?.0);
                    }
                }
            }
            let mean = fs.iter().sum::<f64>() / fs.len() as f64;
            let min = fs.iter().cloned().fold(f64::INFINITY, f64::min);
            (
                Some(BasisPair { z, x }),
                Some(FidelitySummary {
                    mean,
                    min,
                    mean_error: 1.0 - mean,
                }),
            )
        }
        _ => (None, None),
    };
    let per_decoy_pass = match (&strategy, exact_decoy_qber) {
        (_, Some(q)) => 1.0 - 0.5 * (q.z + q.x),
        (AttackStrategy::Impersonate, _) => {
            crate::adversary::impersonate_detection(leg, trials, k, &mut rng.derive("impersonate"))
                .per_decoy_pass
        }
        _ => 1.0 - 0.5 * (decoy_error.z.estimate + decoy_error.x.estimate),
    };
    let detection = DetectionSummary {
        k,
        paper: detection_closed_form(k, PASS_PAPER),
        reference: detection_closed_form(k, PASS_REFERENCE),
        physical: detection_closed_form(k, per_decoy_pass),
        monte_carlo: monte_carlo_detection(&strategy, k, trials, &rng.derive("detection")),
    };
    let config = ProtocolConfig {
        n: Some(session_carriers),
        k1: Some(k as usize),
        k2: Some(k as usize),
        attack: attack.clone(),
        ..ProtocolConfig::default()
    };
    let session = run_session(&config, &rng.derive("session"))?;
    Ok(AttackReport {
        kind: strategy.name(),
        leg,
        trials,
        decoy_error,
        exact_decoy_qber,
        per_decoy_pass,
        detection,
        fidelity,
        session,
    })
}
