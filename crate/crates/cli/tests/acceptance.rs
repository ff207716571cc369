//! Acceptance criteria. Runs as a plain binary so every criterion prints a
//! PASS/FAIL line regardless of output capture.

use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cqsdc::adversary::{
    controlled_shift, decoy_qber_under_probe, mean_probe_error, probe_fidelity, AttackStrategy,
    BasisPolicy, ProbeSpec,
};
use cqsdc::analysis::{
    controller_guess_scenario, monte_carlo_decoy_error,
    monte_carlo_detection, qudit_efficiency, session_digit_error_rate, sweep_detection,
};
use cqsdc::grover::{oracle, verify_corollary, verify_theorem_exhaustive, InitialStateId};
use cqsdc::protocol::{run_session, ProtocolConfig};
use cqsdc::qudit::{Basis, Symbol, UnitaryOp};
use cqsdc::RandomStream;

type Outcome = Result<String, String>;

const BIN: &str = env!("CARGO_BIN_EXE_cqsdc");

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_bin(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(BIN).args(args).output().expect("spawn cqsdc");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn ac1_theorem() -> Outcome {
    let start = Instant::now();
    let report = verify_theorem_exhaustive();
    let elapsed = start.elapsed();
    ensure(report.total == 256, format!("total {}", report.total))?;
    ensure(report.passed == 256, format!("passed {}/256", report.passed))?;
    let phased: usize = report.phase_histogram.values().sum();
    ensure(phased == 256, "a passing triple had a phase outside {±1, ±i}")?;
    ensure(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;

    let (code, stdout) = run_bin(&["verify"]);
    let v: serde_json::Value = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
    ensure(code == 0, format!("verify exited {code}"))?;
    ensure(v["passed"] == 256, "CLI did not report 256 passes")?;
    let (code, _) = run_bin(&["verify", "--corrupt-row", "7"]);
    ensure(code == 1, "corrupted table did not fail")?;
    Ok(format!("256/256 in {elapsed:?}, phases {:?}", report.phase_histogram))
}

fn ac2_corollary() -> Outcome {
    ensure(verify_corollary(), "library corollary check failed")?;
    for wa in Symbol::ALL {
        for wc in Symbol::ALL {
            let lhs = oracle(wc).compose(&oracle(wa)).unwrap().compose(&oracle(wc)).unwrap();
            ensure(lhs == oracle(wa), format!("w_A={wa} w_C={wc}"))?;
            ensure(
                lhs.entries().iter().all(|e| e.im == 0.0 && e.re.fract() == 0.0),
                "non-integer entry",
            )?;
        }
    }
    Ok("16/16 pairs exact".into())
}

fn ac3_honest() -> Outcome {
    let mut worst = Duration::ZERO;
    for seed in [0u64, 1, 42, 1234, u64::MAX] {
        let mut cfg = ProtocolConfig::with_carriers(1000);
        cfg.seed = seed;
        let start = Instant::now();
        let r = run_session(&cfg, &RandomStream::from_seed(seed)).map_err(|e| e.to_string())?;
        worst = worst.max(start.elapsed());
        ensure(r.recovered.as_ref() == Some(&r.sent), format!("seed {seed}: message mismatch"))?;
        ensure(r.leg1_qber == Some(0.0) && r.leg2_qber == Some(0.0), format!("seed {seed}: nonzero qber"))?;
        ensure(r.counters.q_t == 3000, "q_t")?;
    }
    ensure(worst < Duration::from_secs(5), format!("slowest {worst:?}"))?;
    Ok(format!("5 seeds bit-exact, slowest {worst:?}"))
}

fn ac4_figure() -> Outcome {
    let curve = sweep_detection(25, 10_000, &RandomStream::from_seed(0)).map_err(|e| e.to_string())?;
    ensure(curve.rows.len() == 25, "row count")?;
    for row in &curve.rows {
        let k = row.k as i32;
        ensure((row.p_paper - (1.0 - 0.5f64.powi(k))).abs() < 1e-15, format!("p_paper k={k}"))?;
        ensure((row.p_ref - (1.0 - 0.75f64.powi(k))).abs() < 1e-15, format!("p_ref k={k}"))?;
        ensure(row.p_paper > row.p_ref, format!("p_paper <= p_ref at k={k}"))?;
    }
    let p10 = curve.rows[9].p_paper;
    ensure((p10 - 0.9990).abs() <= 1e-4, format!("p_paper(10) = {p10}"))?;

    let (code, csv) = run_bin(&["sweep", "--k-max", "25", "--trials", "10000"]);
    ensure(code == 0, "sweep exit code")?;
    let csv = String::from_utf8(csv).map_err(|e| e.to_string())?;
    ensure(
        csv.lines().next() == Some("k,p_paper,p_ref,p_physical,p_mc,ci_low,ci_high,trials"),
        "CSV header",
    )?;
    ensure(csv.lines().count() == 26, "CSV rows")?;
    Ok(format!("25 rows, p_paper(10) = {p10:.6}"))
}

fn ac5_physical() -> Outcome {
    let ir = AttackStrategy::InterceptResend {
        basis: BasisPolicy::Random,
    };
    let root = RandomStream::from_seed(5);
    let single = monte_carlo_detection(&ir, 1, 1_000_000, &root.derive("k1"));
    ensure(
        (single.estimate - 0.375).abs() <= 0.005,
        format!("per-decoy rate {}", single.estimate),
    )?;
    let curve = sweep_detection(25, 100_000, &root.derive("sweep")).map_err(|e| e.to_string())?;
    for row in &curve.rows {
        ensure(
            row.ci_low <= row.p_physical && row.p_physical <= row.ci_high,
            format!(
                "k={}: 1-(5/8)^k = {} outside [{}, {}]",
                row.k, row.p_physical, row.ci_low, row.ci_high
            ),
        )?;
    }
    let gap = curve.rows[0].p_paper - curve.rows[0].p_physical;
    ensure(gap > 0.1, "p_paper and p_physical should differ at k=1")?;
    Ok(format!(
        "per-decoy {:.4} (p_paper assumes 0.5), 25/25 k within Wilson 95%",
        single.estimate
    ))
}

fn ac6_efficiency() -> Outcome {
    let mut etas = Vec::new();
    for n in [1usize, 50, 100] {
        let r = qudit_efficiency(n, n, n).map_err(|e| e.to_string())?;
        ensure((r.eta - 0.667).abs() <= 0.001, format!("N={n}: eta {}", r.eta))?;
        etas.push(r.eta);
    }
    Ok(format!("eta = {:.4} for N in {{1, 50, 100}}", etas[0]))
}

fn ac7_entangle() -> Outcome {
    let identity = UnitaryOp::identity(16);
    let (z, x) = decoy_qber_under_probe(&identity).map_err(|e| e.to_string())?;
    ensure(z.abs() <= 1e-10 && x.abs() <= 1e-10, "identity probe qber")?;
    for id in InitialStateId::all() {
        for wa in Symbol::ALL {
            for wc in Symbol::ALL {
                let (f, _) = probe_fidelity(&identity, id, wa, wc).map_err(|e| e.to_string())?;
                ensure((f - 1.0).abs() <= 1e-10, "identity probe F < 1")?;
            }
        }
    }

    let cs = controlled_shift();
    let (qz, qx) = decoy_qber_under_probe(&cs).map_err(|e| e.to_string())?;
    ensure(qz.abs() <= 1e-10 && (qx - 0.75).abs() <= 1e-10, format!("exact ({qz}, {qx})"))?;
    let strat = AttackStrategy::entangle(cs.clone()).map_err(|e| e.to_string())?;
    let root = RandomStream::from_seed(7);
    let mz = monte_carlo_decoy_error(&strat, Basis::Z, 100_000, &root.derive("z"));
    let mx = monte_carlo_decoy_error(&strat, Basis::X, 100_000, &root.derive("x"));
    ensure((mz.estimate - qz).abs() <= 4.0 * mz.sigma_at(qz), format!("MC z {}", mz.estimate))?;
    ensure((mx.estimate - qx).abs() <= 4.0 * mx.sigma_at(qx), format!("MC x {}", mx.estimate))?;

    let expected = mean_probe_error(&cs).map_err(|e| e.to_string())?;
    let session = session_digit_error_rate(
        &ProbeSpec::Named("controlled_shift".into()),
        100,
        1000,
        &root.derive("sessions"),
    )
    .map_err(|e| e.to_string())?;
    ensure(session.trials == 100_000, "digit count")?;
    let tol = 4.0 * session.sigma_at(expected);
    ensure(
        (session.estimate - expected).abs() <= tol,
        format!("session error {} vs 1-F {}", session.estimate, expected),
    )?;
    Ok(format!(
        "identity clean; controlled-shift exact (0, 0.75), MC ({:.4}, {:.4}); session digit error {:.4} vs 1-F {:.4}",
        mz.estimate, mx.estimate, session.estimate, expected
    ))
}

fn ac8_controller() -> Outcome {
    let est = controller_guess_scenario(100_000, &RandomStream::from_seed(8)).map_err(|e| e.to_string())?;
    ensure((est.estimate - 0.25).abs() <= 0.005, format!("rate {}", est.estimate))?;
    Ok(format!("success rate {:.4}", est.estimate))
}

fn ac9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("session.json");
    std::fs::write(&config, r#"{"N": 200, "seed": 17, "attack": {"leg": 2, "kind": "entangle_measure", "params": {"probe": "identity"}}}"#)
        .map_err(|e| e.to_string())?;
    let config = config.to_str().unwrap().to_string();
    let invocations: Vec<Vec<&str>> = vec![
        vec!["verify", "--seed", "3"],
        vec!["run", "--config", &config, "--seed", "3"],
        vec!["sweep", "--k-max", "12", "--trials", "2000", "--seed", "3"],
        vec!["efficiency", "--n", "100", "--seed", "3"],
        vec!["attack", "--kind", "intercept_resend", "--leg", "1", "--trials", "5000", "--seed", "3"],
    ];
    for args in &invocations {
        let first = run_bin(args);
        for _ in 0..2 {
            let again = run_bin(args);
            ensure(again == first, format!("{} output changed between runs", args[0]))?;
        }
    }
    // --out writes the same bytes as stdout
    let out = dir.path().join("sweep.csv");
    let out_s = out.to_str().unwrap();
    let (_, stdout) = run_bin(&["sweep", "--k-max", "5", "--trials", "100", "--seed", "9"]);
    run_bin(&["sweep", "--k-max", "5", "--trials", "100", "--seed", "9", "--out", out_s]);
    ensure(std::fs::read(Path::new(out_s)).map_err(|e| e.to_string())? == stdout, "--out differs")?;
    Ok(format!("{} commands x 3 runs byte-identical", invocations.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("AC1 theorem reproduction", ac1_theorem),
        ("AC2 corollary reproduction", ac2_corollary),
        ("AC3 honest end-to-end", ac3_honest),
        ("AC4 detection curves", ac4_figure),
        ("AC5 physical intercept-resend model", ac5_physical),
        ("AC6 qudit efficiency", ac6_efficiency),
        ("AC7 entangle-and-measure", ac7_entangle),
        ("AC8 controller guess bound", ac8_controller),
        ("AC9 determinism", ac9_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
