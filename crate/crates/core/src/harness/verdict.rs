//! Pass/fail comparisons of experiment results against oracles and bounds.

use serde::{Deserialize, Serialize};

use super::experiment::{AggregateStats, RateEstimate};
use super::oracle::{exact_failure_oracle, FailureEvent};
use super::stats::{binomial_sigma, two_proportion_z_test};
use crate::params::{commitment_attack_bound, correctness_epsilon, privacy_epsilon, Deviation, ProtocolParams};

/// Significance level of every hypothesis test.
pub const ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `empirical <= reference`.
    AtMost,
    /// `|empirical - reference| <= tolerance`.
    Within,
    /// `empirical > reference`, for p-values against a significance level.
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: String,
    pub empirical: f64,
    pub reference: f64,
    pub relation: Relation,
    pub tolerance: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(criterion: impl Into<String>, empirical: f64, reference: f64, relation: Relation, tolerance: f64) -> Self {
        let mut v = Self {
            criterion: criterion.into(),
            empirical,
            reference,
            relation,
            tolerance,
            pass: false,
        };
        v.pass = v.evaluate();
        v
    }

    pub fn at_most(criterion: impl Into<String>, empirical: f64, reference: f64) -> Self {
        Self::new(criterion, empirical, reference, Relation::AtMost, 0.0)
    }

    /// Within three standard errors of `reference` at `trials` draws.
    pub fn within_3_sigma(criterion: impl Into<String>, empirical: f64, reference: f64, trials: u64) -> Self {
        Self::new(criterion, empirical, reference, Relation::Within, 3.0 * binomial_sigma(reference, trials))
    }

    /// Recomputes the pass flag from the other fields.
    pub fn evaluate(&self) -> bool {
        match self.relation {
            Relation::AtMost => self.empirical <= self.reference,
            Relation::Within => (self.empirical - self.reference).abs() <= self.tolerance,
            Relation::Above => self.empirical > self.reference,
        }
    }
}

fn oracle_check(name: &str, rate: &RateEstimate, trials: u64, out: &mut Vec<Verdict>) {
    if let Some(p) = rate.predicted {
        out.push(Verdict::within_3_sigma(format!("{name}_vs_exact"), rate.rate, p, trials));
    }
}

fn bound_checks(name: &str, empirical: f64, oracle: f64, dev: &Deviation, slots: usize, out: &mut Vec<Verdict>) {
    if slots < dev.min_slot_count() {
        return;
    }
    let raw = dev.hoeffding_bound(slots);
    let simplified = dev.epsilon_pow(slots);
    out.push(Verdict::at_most(format!("{name}_exact_le_hoeffding"), oracle, raw));
    out.push(Verdict::at_most(format!("{name}_exact_le_epsilon_pow_n"), oracle, simplified));
    out.push(Verdict::at_most(format!("{name}_empirical_le_epsilon_pow_n"), empirical, simplified));
}

/// Every verdict that applies to `stats`: empirical rates against exact values
/// within three standard errors, and exact and empirical rates against the
/// concentration bounds once `N` reaches the bound's minimum.
pub fn check_bounds(stats: &AggregateStats, params: &ProtocolParams) -> Vec<Verdict> {
    let mut out = Vec::new();
    let trials = stats.trials;
    let slots = params.slot_count();
    let (n, m) = (params.bit_count(), params.choice_count());
    let rates = &stats.rates;
    let strategy = stats.config.strategy.as_str();

    oracle_check("correctness_failure_rate", &rates.correctness_failure, trials, &mut out);
    oracle_check("adversary_success_rate", &rates.adversary_success, trials, &mut out);
    oracle_check("caught_rate", &rates.caught, trials, &mut out);

    if strategy != "commit-cheat" {
        out.push(Verdict::at_most("completed_runs_decode_errors", stats.decode_errors as f64, 0.0));
    }
    match strategy {
        "honest" | "curious-alice" => {
            let dev = correctness_epsilon(n, m).expect("validated params");
            let oracle = exact_failure_oracle(params, FailureEvent::Correctness).expect("supported event").to_f64();
            bound_checks("correctness", rates.correctness_failure.rate, oracle, &dev, slots, &mut out);
        }
        "greedy" => {
            let dev = privacy_epsilon(n, m).expect("validated params");
            let oracle = exact_failure_oracle(params, FailureEvent::PrivacyExtraBit).expect("supported event").to_f64();
            bound_checks("privacy", rates.adversary_success.rate, oracle, &dev, slots, &mut out);
        }
        "commit-cheat" => {
            if let Some(p) = stats.config.cheat_probability {
                let b = commitment_attack_bound(p, params);
                out.push(Verdict::new("commitment_bound_lt_epsilon_pow_n", b.bound, b.epsilon_pow, Relation::AtMost, 0.0));
                out.push(Verdict::at_most("commitment_empirical_le_epsilon_pow_n", rates.adversary_success.rate, b.epsilon_pow));
            }
        }
        _ => {}
    }
    if let (Some(guess), Some(blind)) = (&rates.choice_guess, &rates.blind_guess) {
        let p = two_proportion_z_test(guess.count, trials, blind.count, trials);
        out.push(Verdict::new("choice_guess_indistinguishable_from_blind", p, ALPHA, Relation::Above, 0.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Strategy;
    use crate::harness::experiment::{run_experiment, ExperimentConfig};

    #[test]
    fn pass_flag_is_recomputable() {
        let v = Verdict::within_3_sigma("x", 0.11, 7.0 / 64.0, 100_000);
        assert_eq!(v.pass, v.evaluate());
        assert!((v.tolerance - 3.0 * (7.0 / 64.0 * 57.0 / 64.0 / 1e5f64).sqrt()).abs() < 1e-15);
        let mut flipped = v.clone();
        flipped.empirical = 0.2;
        assert!(!flipped.evaluate());
        assert!(Verdict::at_most("y", 0.1, 0.1).pass);
        assert!(!Verdict::new("z", 0.001, ALPHA, Relation::Above, 0.0).pass);
    }

    #[test]
    fn bound_checks_appear_only_past_min_n() {
        let small = ProtocolParams::new(2, 1, 6).unwrap();
        let stats = run_experiment(&ExperimentConfig::new(small.clone(), 500, 1).with_strategy(Strategy::GreedyBob)).unwrap();
        assert!(!check_bounds(&stats, &small).iter().any(|v| v.criterion.starts_with("privacy_")));
        let big = ProtocolParams::new(2, 1, 30).unwrap();
        let stats = run_experiment(&ExperimentConfig::new(big.clone(), 500, 1).with_strategy(Strategy::GreedyBob)).unwrap();
        let verdicts = check_bounds(&stats, &big);
        assert_eq!(verdicts.iter().filter(|v| v.criterion.starts_with("privacy_")).count(), 3);
        assert!(verdicts.iter().all(|v| v.pass), "{verdicts:?}");
    }
}
