use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use cqsdc::adversary::{AttackConfig, AttackKind, AttackParams, Leg, ProbeSpec};
use cqsdc::analysis::{attack_experiment, qudit_efficiency, sweep_detection, PASS_PAPER, PASS_PHYSICAL};
use cqsdc::grover::{verify_corollary, verify_theorem_with, PhaseTable, TheoremReport};
use cqsdc::protocol::{run_session, ProtocolConfig};
use cqsdc::qudit::C64;
use cqsdc::RandomStream;
use serde_json::json;

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_ABORT: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "cqsdc", version, about = "Controlled direct communication over 4-level qudits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Root seed; every random draw derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path, `-` for stdout.
    #[arg(long, global = true, default_value = "-")]
    out: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the decoding identity for all 256 (state, message, license) triples.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Negative control: zero one amplitude of the given carrier state.
        #[arg(long, hide = true)]
        corrupt_row: Option<usize>,
    },
    /// Run one session from a JSON configuration.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate one attack strategy on one leg.
    Attack {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 2)]
        leg: u8,
        /// Built-in probe name or a JSON file holding a 16x16 [re, im] matrix.
        #[arg(long)]
        probe: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        /// Decoys per detection round.
        #[arg(long, default_value_t = 10)]
        k: u32,
        /// Carriers in the illustrative session.
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
    /// Detection probability against decoy count, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        k_max: u32,
        #[arg(long)]
        trials: u64,
    },
    /// Qudit efficiency accounting.
    Efficiency {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: usize,
        /// Leg-1 decoys (defaults to N).
        #[arg(long)]
        k1: Option<usize>,
        /// Leg-2 decoys (defaults to N).
        #[arg(long)]
        k2: Option<usize>,
    },
}

fn write_output(out: &str, body: &str) -> anyhow::Result<()> {
    let mut text = body.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    if out == "-" {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        fs::write(out, text).with_context(|| format!("writing {out}"))?;
    }
    Ok(())
}

fn corrupted_table(row: usize) -> anyhow::Result<PhaseTable> {
    if row >= 16 {
        bail!("corrupt-row must be < 16");
    }
    let base = PhaseTable::standard();
    let mut rows = [[C64::new(0.0, 0.0); 4]; 16];
    for id in cqsdc::grover::InitialStateId::all() {
        rows[id.index()] = *base.row(id);
    }
    rows[row][3] = C64::new(0.0, 0.0);
    Ok(PhaseTable::custom(rows))
}

fn cmd_verify(common: &Common, corrupt_row: Option<usize>) -> anyhow::Result<u8> {
    let table = match corrupt_row {
        Some(r) => corrupted_table(r)?,
        None => PhaseTable::standard(),
    };
    let report: TheoremReport = verify_theorem_with(&table);
    let corollary = verify_corollary();
    let mut value = serde_json::to_value(&report)?;
    value["corollary_holds"] = json!(corollary);
    write_output(&common.out, &serde_json::to_string_pretty(&value)?)?;
    if report.all_passed() && corollary {
        Ok(EXIT_OK)
    } else {
        for f in &report.failures {
            eprintln!("failed: S^{} w_A={} w_C={}", f.id, f.w_a, f.w_c);
        }
        Ok(EXIT_FAILURE)
    }
}

fn cmd_run(common: &Common, path: &Path) -> anyhow::Result<u8> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = ProtocolConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    let seed = common.seed.unwrap_or(config.seed);
    let report = run_session(&config, &RandomStream::from_seed(seed))?;
    write_output(&common.out, &report.to_json())?;
    Ok(if report.delivered() { EXIT_OK } else { EXIT_ABORT })
}

fn load_probe(arg: &str) -> anyhow::Result<ProbeSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        let spec: ProbeSpec = serde_json::from_str(&text).with_context(|| format!("parsing {arg}"))?;
        Ok(spec)
    } else {
        Ok(ProbeSpec::Named(arg.to_string()))
    }
}

fn cmd_attack(
    common: &Common,
    kind: &str,
    leg: u8,
    probe: Option<&str>,
    trials: u64,
    k: u32,
    n: usize,
) -> anyhow::Result<u8> {
    let kind: AttackKind = kind.parse()?;
    let leg = Leg::try_from(leg)?;
    let probe = probe.map(load_probe).transpose()?;
    if probe.is_some() && kind != AttackKind::EntangleMeasure {
        bail!("--probe only applies to entangle_measure");
    }
    let attack = AttackConfig {
        leg,
        kind,
        params: AttackParams { basis: None, probe },
    };
    let rng = RandomStream::from_seed(common.seed.unwrap_or(0));
    let report = attack_experiment(&attack, k, trials, n, &rng)?;
    write_output(&common.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(common: &Common, k_max: u32, trials: u64) -> anyhow::Result<u8> {
    let rng = RandomStream::from_seed(common.seed.unwrap_or(0));
    let curve = sweep_detection(k_max, trials, &rng)?;
    write_output(&common.out, &curve.to_csv())?;
    eprintln!(
        "note: p_paper assumes per-decoy pass {PASS_PAPER}; Born-rule intercept-resend passes {PASS_PHYSICAL} (p_physical, p_mc)"
    );
    Ok(EXIT_OK)
}

fn cmd_efficiency(common: &Common, n: usize, k1: Option<usize>, k2: Option<usize>) -> anyhow::Result<u8> {
    let report = qudit_efficiency(n, k1.unwrap_or(n), k2.unwrap_or(n))?;
    if let Some(note) = &report.note {
        eprintln!("warning: {note}");
    }
    write_output(&common.out, &serde_json::to_string_pretty(&report)?)?;
    Ok(EXIT_OK)
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Verify { common, corrupt_row } => cmd_verify(&common, corrupt_row),
        Command::Run { common, config } => cmd_run(&common, &config),
        Command::Attack {
            common,
            kind,
            leg,
            probe,
            trials,
            k,
            n,
        } => cmd_attack(&common, &kind, leg, probe.as_deref(), trials, k, n),
        Command::Sweep { common, k_max, trials } => cmd_sweep(&common, k_max, trials),
        Command::Efficiency { common, n, k1, k2 } => cmd_efficiency(&common, n, k1, k2),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
