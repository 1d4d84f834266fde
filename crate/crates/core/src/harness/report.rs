//! Report documents.
//!
//! Structured output is JSON with keys in sorted order and every non-integer
//! number rounded to 12 significant digits, so equal inputs give equal bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::experiment::{AggregateStats, RateEstimate};
use super::verdict::Verdict;
use super::HarnessError;

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Structured,
    Table,
}

/// `v` rounded to 12 significant digits.
pub fn round_significant(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().expect("formatted float parses")
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_significant(n.as_f64().expect("f64 number"));
            *v = serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with rounded numbers and a trailing newline.
pub fn to_document<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report types serialize");
    round_value(&mut v);
    let mut out = serde_json::to_string_pretty(&v).expect("values serialize");
    out.push('\n');
    out
}

#[derive(Debug, Serialize)]
struct Report<'a> {
    version: &'static str,
    seed: u64,
    config: &'a super::experiment::ConfigEcho,
    stats: &'a AggregateStats,
    verdicts: &'a [Verdict],
    pass: bool,
}

/// The full experiment report in the requested format.
pub fn emit_report(stats: &AggregateStats, verdicts: &[Verdict], format: OutputFormat) -> String {
    match format {
        OutputFormat::Structured => to_document(&Report {
            version: env!("CARGO_PKG_VERSION"),
            seed: stats.config.seed,
            config: &stats.config,
            stats,
            verdicts,
            pass: verdicts.iter().all(|v| v.pass),
        }),
        OutputFormat::Table => render_table(stats, verdicts),
    }
}

fn fmt_num(v: f64) -> String {
    format!("{}", round_significant(v))
}

fn rate_row(out: &mut String, name: &str, r: &RateEstimate) {
    let predicted = r.predicted.map_or("-".to_string(), fmt_num);
    let _ = writeln!(
        out,
        "{name:<22} {:>9} {:>16} [{}, {}]  exact {predicted}",
        r.count,
        fmt_num(r.rate),
        fmt_num(r.ci_low),
        fmt_num(r.ci_high)
    );
}

fn render_table(stats: &AggregateStats, verdicts: &[Verdict]) -> String {
    let c = &stats.config;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "strategy {}  n={} m={} N={} x={} |I|={}  trials={} seed={}",
        c.strategy, c.n, c.m, c.slots, c.x, c.subset_size, c.trials, c.seed
    );
    let _ = writeln!(
        out,
        "completed {}  aborts: insufficient_matches {} cheat_detected {} invalid_message {}",
        stats.completed, stats.aborts.insufficient_matches, stats.aborts.cheat_detected, stats.aborts.invalid_message
    );
    let _ = writeln!(out, "{:<22} {:>9} {:>16}  99% interval", "rate", "count", "value");
    let r = &stats.rates;
    rate_row(&mut out, "abort", &r.abort);
    rate_row(&mut out, "correctness_failure", &r.correctness_failure);
    rate_row(&mut out, "adversary_success", &r.adversary_success);
    rate_row(&mut out, "caught", &r.caught);
    if let Some(g) = &r.choice_guess {
        rate_row(&mut out, "choice_guess", g);
    }
    if let Some(g) = &r.blind_guess {
        rate_row(&mut out, "blind_guess", g);
    }
    out.push_str(&verdict_table(verdicts));
    out
}

/// One line per verdict.
pub fn verdict_table(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    for v in verdicts {
        let rel = match v.relation {
            super::verdict::Relation::AtMost => "<=".to_string(),
            super::verdict::Relation::Within => format!("~ (+/-{})", fmt_num(v.tolerance)),
            super::verdict::Relation::Above => ">".to_string(),
        };
        let _ = writeln!(
            out,
            "{} {}: {} {rel} {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.criterion,
            fmt_num(v.empirical),
            fmt_num(v.reference)
        );
    }
    out
}

/// Writes `text` to `path`.
pub fn write_document(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::{run_experiment, ExperimentConfig};
    use crate::harness::verdict::check_bounds;
    use crate::params::ProtocolParams;

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_significant(0.735_758_882_342_884_7), 0.735_758_882_343);
        assert_eq!(round_significant(1.0 / 3.0), 0.333_333_333_333);
        assert_eq!(round_significant(123_456_789_012_345.0), 123_456_789_012_000.0);
        assert_eq!(round_significant(0.0), 0.0);
    }

    #[test]
    fn structured_report_round_trips() {
        let p = ProtocolParams::new(3, 1, 6).unwrap();
        let stats = run_experiment(&ExperimentConfig::new(p.clone(), 500, 4)).unwrap();
        let verdicts = check_bounds(&stats, &p);
        let doc = emit_report(&stats, &verdicts, OutputFormat::Structured);
        let parsed: Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(parsed["seed"], 4);
        assert_eq!(parsed["stats"]["trials"], 500);
        let back: Vec<Verdict> = serde_json::from_value(parsed["verdicts"].clone()).unwrap();
        assert_eq!(back.len(), verdicts.len());
        for (a, b) in back.iter().zip(&verdicts) {
            assert_eq!(a.criterion, b.criterion);
            assert_eq!(a.pass, b.pass);
            assert_eq!(a.empirical, round_significant(b.empirical));
        }
        assert_eq!(doc, emit_report(&stats, &verdicts, OutputFormat::Structured));
    }

    #[test]
    fn table_lists_every_verdict() {
        let p = ProtocolParams::new(3, 1, 6).unwrap();
        let stats = run_experiment(&ExperimentConfig::new(p.clone(), 200, 4)).unwrap();
        let verdicts = check_bounds(&stats, &p);
        let table = emit_report(&stats, &verdicts, OutputFormat::Table);
        for v in &verdicts {
            assert!(table.contains(&v.criterion));
        }
    }

    #[test]
    fn write_failure_names_the_path() {
        let err = write_document(Path::new("/nonexistent-dir/report.json"), "{}").unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/report.json"));
    }
}
