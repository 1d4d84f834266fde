//! `qot`: command-line front end of the oblivious transfer simulator.
//!
//! Every subcommand prints one document (JSON by default) and exits with status
//! 0 exactly when all of its verdicts pass. Configuration errors exit with 2.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qot_core::adversary::{trace_with_adversary, Strategy};
use qot_core::commitment::CheatModel;
use qot_core::harness::experiment::{ChoiceMode, ExperimentConfig, InputMode};
use qot_core::harness::report::write_document;
use qot_core::harness::sweep::{channel_statistics, channel_verdicts, dominance_sweep, enumeration_sweep};
use qot_core::harness::{
    check_bounds, emit_report, enumerate_event_probability, exact_failure_oracle, privacy_independence_test,
    run_experiment, to_document, FailureEvent, FamilyRule, OutputFormat, Relation, Verdict,
};
use qot_core::params::{
    correctness_epsilon, privacy_epsilon, smallest_valid_n, BoundReport, Deviation, ProtocolParams, RateCase,
};
use qot_core::protocol::{ChoiceVector, InputBits, RemovalCheck, TrialRng};

#[derive(Parser)]
#[command(name = "qot", version, about = "Quantum m-out-of-n oblivious transfer simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derived quantities and security bounds for (n, m[, N]).
    Bounds(BoundsArgs),
    /// Honest Monte Carlo run with oracle and bound verdicts.
    Run(RunArgs),
    /// Monte Carlo run against a dishonest strategy.
    Attack(AttackArgs),
    /// Chi-square test that Alice's view is independent of Bob's choices.
    PrivacyTest(PrivacyArgs),
    /// Exact probability of a failure or privacy event.
    Oracle(OracleArgs),
    /// Oracle against brute-force enumeration for every admissible set up to N.
    Enumerate(EnumerateArgs),
    /// Exact probabilities against both bound forms over a parameter grid.
    Dominance(DominanceArgs),
    /// Photon measurement statistics.
    Channel(ChannelArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the document here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "N")]
    slots: Option<usize>,
    /// Per-commitment forgery success probability.
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct TrialArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "N", conflicts_with = "auto_n")]
    slots: Option<usize>,
    /// Use the least admissible N at or above this floor.
    #[arg(long = "auto-N")]
    auto_n: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, env = "QOT_SEED", default_value_t = 0)]
    seed: u64,
    /// Fixed input bits, e.g. 0,1,1.
    #[arg(long, conflicts_with = "random_bits")]
    bits: Option<String>,
    #[arg(long)]
    random_bits: bool,
    /// Fixed 1-based choices, e.g. 2.
    #[arg(long, conflicts_with = "random_choices")]
    choices: Option<String>,
    #[arg(long)]
    random_choices: bool,
    /// Write the transcript of trial 0 here as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    trial: TrialArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Honest,
    Greedy,
    DishonestRemoval,
    Postpone,
    CommitCheat,
    CuriousAlice,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long, value_enum)]
    strategy: StrategyArg,
    /// Forgery success probability for commit-cheat.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Alice also rejects removed slots whose bases differ.
    #[arg(long)]
    strict_alice: bool,
    #[command(flatten)]
    trial: TrialArgs,
}

#[derive(Args)]
struct PrivacyArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "N")]
    slots: usize,
    #[arg(long, default_value_t = 20_000)]
    trials_per_choice: u64,
    #[arg(long, env = "QOT_SEED", default_value_t = 0)]
    seed: u64,
    /// Use the leaky positive-control Bob; passes when the leak is detected.
    #[arg(long)]
    leaky: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Clone, Copy, ValueEnum)]
enum EventArg {
    Correctness,
    Privacy,
    DishonestRemoval,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long = "N")]
    slots: usize,
    #[arg(long, value_enum)]
    event: EventArg,
    /// Also enumerate all 2^N match patterns (N <= 24).
    #[arg(long)]
    verify_enumeration: bool,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long = "max-N", default_value_t = 20)]
    max_slots: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct DominanceArgs {
    #[arg(long = "max-n", default_value_t = 6)]
    max_bits: usize,
    #[arg(long = "max-N", default_value_t = 300)]
    max_slots: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct ChannelArgs {
    #[arg(long, default_value_t = 100_000)]
    photons: u64,
    #[arg(long, env = "QOT_SEED", default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Returns whether every verdict passed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Bounds(a) => bounds(a),
        Command::Run(a) => experiment(Strategy::HonestBob, a.trial),
        Command::Attack(a) => {
            let strategy = match a.strategy {
                StrategyArg::Honest => Strategy::HonestBob,
                StrategyArg::Greedy => Strategy::GreedyBob,
                StrategyArg::DishonestRemoval => Strategy::DishonestRemovalBob {
                    check: if a.strict_alice {
                        RemovalCheck::Strict
                    } else {
                        RemovalCheck::Literal
                    },
                },
                StrategyArg::Postpone => Strategy::PostponeBob,
                StrategyArg::CommitCheat => Strategy::CommitCheatBob {
                    cheat: CheatModel::new(a.p)?,
                },
                StrategyArg::CuriousAlice => Strategy::CuriousAlice,
            };
            experiment(strategy, a.trial)
        }
        Command::PrivacyTest(a) => privacy(a),
        Command::Oracle(a) => oracle(a),
        Command::Enumerate(a) => enumerate(a),
        Command::Dominance(a) => dominance(a),
        Command::Channel(a) => channel(a),
    }
}

fn emit(output: &Output, text: &str) -> Result<()> {
    match &output.out {
        Some(path) => write_document(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn verdict_lines(verdicts: &[Verdict]) -> String {
    qot_core::harness::report::verdict_table(verdicts)
}

/// A document plus its verdicts, in the requested format.
fn finish(output: &Output, body: Value, verdicts: &[Verdict], table: impl FnOnce() -> String) -> Result<bool> {
    let pass = verdicts.iter().all(|v| v.pass);
    let text = match output.format {
        Format::Json => {
            let mut doc = body;
            doc["version"] = json!(env!("CARGO_PKG_VERSION"));
            doc["verdicts"] = serde_json::to_value(verdicts)?;
            doc["pass"] = json!(pass);
            to_document(&doc)
        }
        Format::Table => format!("{}{}", table(), verdict_lines(verdicts)),
    };
    emit(output, &text)?;
    Ok(pass)
}

fn section(dev: &Deviation) -> Value {
    json!({
        "deviation": dev,
        "delta": dev.delta(),
        "form": dev.bound_form(),
        "exponent_per_slot": dev.exponent_per_slot().to_string(),
        "min_n": dev.min_slot_count(),
    })
}

fn bounds(a: BoundsArgs) -> Result<bool> {
    if let Some(p) = a.p {
        CheatModel::new(p)?;
    }
    let body = match a.slots {
        Some(slots) => {
            let params = ProtocolParams::new(a.n, a.m, slots)?;
            serde_json::to_value(BoundReport::new(&params, a.p))?
        }
        None => {
            let correctness = correctness_epsilon(a.n, a.m)?;
            let privacy = privacy_epsilon(a.n, a.m)?;
            json!({
                "n": a.n,
                "m": a.m,
                "target_rate": qot_core::params::target_rate(a.n, a.m)?.to_string(),
                "case": qot_core::params::rate_case(a.n, a.m)?,
                "smallest_admissible_n": smallest_valid_n(a.n, a.m, 1)?,
                "correctness": section(&correctness),
                "privacy": section(&privacy),
            })
        }
    };
    let table_body = body.clone();
    finish(&a.output, body, &[], move || bounds_table(&table_body))
}

fn bounds_table(doc: &Value) -> String {
    let mut out = String::new();
    for key in ["n", "m", "N", "target_rate", "case", "x", "subset_size", "smallest_admissible_n"] {
        if let Some(v) = doc.get(key) {
            out.push_str(&format!("{key:<24} {v}\n"));
        }
    }
    for part in ["correctness", "privacy"] {
        let s = &doc[part];
        out.push_str(&format!(
            "{part:<12} delta {}  bound {}  min N {}",
            s["delta"], s["form"], s["min_n"]
        ));
        if let Some(h) = s.get("hoeffding_bound") {
            out.push_str(&format!("  value {h}  epsilon^N {}", s["epsilon_pow_n"]));
        }
        out.push('\n');
    }
    if let Some(c) = doc.get("commitment").filter(|c| !c.is_null()) {
        out.push_str(&format!(
            "commitment   p^s {}  epsilon^N {}  holds {}\n",
            c["bound"], c["epsilon_pow"], c["holds"]
        ));
    }
    out
}

fn resolve_params(t: &TrialArgs) -> Result<ProtocolParams> {
    let slots = match (t.slots, t.auto_n) {
        (Some(s), _) => s,
        (None, Some(floor)) => smallest_valid_n(t.n, t.m, floor)?,
        (None, None) => bail!("one of --N or --auto-N is required"),
    };
    Ok(ProtocolParams::new(t.n, t.m, slots)?)
}

fn parse_csv<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| s.trim().parse::<T>().ok().with_context(|| format!("bad {what} entry {s:?}")))
        .collect()
}

fn experiment(strategy: Strategy, t: TrialArgs) -> Result<bool> {
    let params = resolve_params(&t)?;
    let inputs = match &t.bits {
        Some(raw) if !t.random_bits => InputMode::Fixed(
            parse_csv::<u8>(raw, "bit")?
                .into_iter()
                .map(|b| match b {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => bail!("input bits must be 0 or 1, got {other}"),
                })
                .collect::<Result<_>>()?,
        ),
        _ => InputMode::Random,
    };
    let choices = match &t.choices {
        Some(raw) if !t.random_choices => ChoiceMode::Fixed(parse_csv(raw, "choice")?),
        _ => ChoiceMode::Random,
    };
    if matches!(strategy, Strategy::DishonestRemovalBob { .. }) && params.case() != RateCase::Low {
        bail!("dishonest-removal needs the low-rate case (2m+1 < n)");
    }
    let config = ExperimentConfig::new(params.clone(), t.trials, t.seed)
        .with_strategy(strategy)
        .with_inputs(inputs)
        .with_choices(choices);
    let stats = run_experiment(&config)?;
    let verdicts = check_bounds(&stats, &params);
    if let Some(path) = &t.transcript {
        write_sample(&config, path)?;
    }
    let format = match t.output.format {
        Format::Json => OutputFormat::Structured,
        Format::Table => OutputFormat::Table,
    };
    emit(&t.output, &emit_report(&stats, &verdicts, format))?;
    Ok(verdicts.iter().all(|v| v.pass))
}

/// Trial 0's transcript as JSON lines, and its outcome next to it.
fn write_sample(config: &ExperimentConfig, path: &std::path::Path) -> Result<()> {
    let mut rngs = TrialRng::new(config.seed, 0);
    let inputs = match &config.inputs {
        InputMode::Fixed(b) => InputBits::new(b.clone(), &config.params)?,
        InputMode::Random => InputBits::random(&config.params, &mut rngs.inputs),
    };
    let choices = match &config.choices {
        ChoiceMode::Fixed(c) => ChoiceVector::new(c.clone(), &config.params)?,
        ChoiceMode::Random => ChoiceVector::random(&config.params, &mut rngs.inputs),
    };
    let (outcome, transcript) = trace_with_adversary(&config.strategy, &config.params, &inputs, &choices, rngs)?;
    write_document(path, &transcript.map(|t| t.to_jsonl()).unwrap_or_default())?;
    let mut side = path.as_os_str().to_owned();
    side.push(".outcome.json");
    write_document(std::path::Path::new(&side), &to_document(&outcome))?;
    Ok(())
}

fn privacy(a: PrivacyArgs) -> Result<bool> {
    let params = ProtocolParams::new(a.n, a.m, a.slots)?;
    let rule = if a.leaky {
        FamilyRule::Lexicographic
    } else {
        FamilyRule::Uniform
    };
    let report = privacy_independence_test(&params, a.trials_per_choice, a.seed, rule)?;
    let verdict = if a.leaky {
        Verdict::new("leaky_control_detected", report.min_p_value, 1e-6, Relation::AtMost, 0.0)
    } else {
        Verdict::new(
            "all_pairwise_tests_pass",
            report.min_p_value,
            report.corrected_alpha,
            Relation::Above,
            0.0,
        )
    };
    let table_report = report.clone();
    finish(&a.output, json!({ "report": report }), &[verdict], move || {
        let mut out = format!(
            "privacy test n={} m={} N={} rule {:?} trials/choice {} corrected alpha {}\n",
            table_report.n,
            table_report.m,
            table_report.slots,
            table_report.rule,
            table_report.trials_per_choice,
            table_report.corrected_alpha
        );
        for t in &table_report.tests {
            out.push_str(&format!(
                "{:?} vs {:?} {:<18} chi2 {:.6} dof {} p {:.6e} tv {:.6}\n",
                t.choices_a, t.choices_b, t.feature, t.statistic, t.dof, t.p_value, t.total_variation
            ));
        }
        out
    })
}

fn oracle(a: OracleArgs) -> Result<bool> {
    let params = ProtocolParams::new(a.n, a.m, a.slots)?;
    let (event, dev) = match a.event {
        EventArg::Correctness => (FailureEvent::Correctness, Some(correctness_epsilon(a.n, a.m)?)),
        EventArg::Privacy => (FailureEvent::PrivacyExtraBit, Some(privacy_epsilon(a.n, a.m)?)),
        EventArg::DishonestRemoval => (FailureEvent::DishonestRemoval, None),
    };
    let exact = exact_failure_oracle(&params, event)?;
    let mut verdicts = Vec::new();
    let mut body = json!({
        "n": a.n,
        "m": a.m,
        "N": a.slots,
        "event": event,
        "probability": exact,
    });
    if let Some(dev) = dev {
        let slots = params.slot_count();
        body["hoeffding_bound"] = json!(dev.hoeffding_bound(slots));
        body["epsilon_pow_n"] = json!(dev.epsilon_pow(slots));
        body["min_n"] = json!(dev.min_slot_count());
        if slots >= dev.min_slot_count() {
            verdicts.push(Verdict::at_most("exact_le_hoeffding", exact.to_f64(), dev.hoeffding_bound(slots)));
            verdicts.push(Verdict::at_most("exact_le_epsilon_pow_n", exact.to_f64(), dev.epsilon_pow(slots)));
        }
    }
    if a.verify_enumeration {
        let enumerated = enumerate_event_probability(&params, event)?;
        let equal = enumerated == exact;
        body["enumeration"] = serde_json::to_value(&enumerated)?;
        verdicts.push(Verdict::new(
            "oracle_equals_enumeration",
            if equal { 1.0 } else { 0.0 },
            1.0,
            Relation::Within,
            0.0,
        ));
    }
    let table_body = body.clone();
    finish(&a.output, body, &verdicts, move || {
        format!(
            "event {} at n={} m={} N={}: {}/{} = {}\n",
            table_body["event"],
            a.n,
            a.m,
            a.slots,
            table_body["probability"]["numerator"].as_str().unwrap_or_default(),
            table_body["probability"]["denominator"].as_str().unwrap_or_default(),
            table_body["probability"]["value"]
        )
    })
}

fn enumerate(a: EnumerateArgs) -> Result<bool> {
    let rows = enumeration_sweep(a.max_slots)?;
    let mismatched = rows.iter().filter(|r| !r.equal).count();
    let sets: std::collections::BTreeSet<_> = rows.iter().map(|r| (r.n, r.m, r.slots)).collect();
    let verdicts = [Verdict::at_most("oracle_enumeration_mismatches", mismatched as f64, 0.0)];
    let summary = format!(
        "{} parameter sets, {} event checks, {} mismatches\n",
        sets.len(),
        rows.len(),
        mismatched
    );
    finish(
        &a.output,
        json!({ "max_N": a.max_slots, "parameter_sets": sets.len(), "rows": rows }),
        &verdicts,
        move || summary,
    )
}

fn dominance(a: DominanceArgs) -> Result<bool> {
    let rows = dominance_sweep(a.max_bits, a.max_slots)?;
    let violations = rows.iter().filter(|r| !r.holds).count();
    let verdicts = [
        Verdict::at_most("bound_violations", violations as f64, 0.0),
        Verdict::new("rows_checked", rows.len() as f64, 0.0, Relation::Above, 0.0),
    ];
    let summary = format!("{} (n, m, N, event) rows, {} violations\n", rows.len(), violations);
    finish(
        &a.output,
        json!({ "max_n": a.max_bits, "max_N": a.max_slots, "rows": rows }),
        &verdicts,
        move || summary,
    )
}

fn channel(a: ChannelArgs) -> Result<bool> {
    let stats = channel_statistics(a.photons, a.seed);
    let verdicts = channel_verdicts(&stats);
    let summary = format!(
        "photons {}  matching {} agree {}  mismatched {} agree {} ({})\n",
        stats.photons, stats.matching, stats.matching_agree, stats.mismatched, stats.mismatched_agree, stats.mismatched_rate
    );
    finish(&a.output, json!({ "channel": stats }), &verdicts, move || summary)
}
