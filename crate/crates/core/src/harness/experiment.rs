//! Monte Carlo runner.
//!
//! Trial `t` draws every random value from streams keyed by `(seed, t)`, and the
//! per-trial tallies are summed, so the aggregate does not depend on the order
//! or the thread in which trials run.

use std::ops::Add;

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::{exact_failure_oracle, postpone_survival, FailureEvent};
use super::stats::{wilson_interval, Z_99};
use super::HarnessError;
use crate::adversary::{run_with_adversary, Strategy};
use crate::channel::RandomSource;
use crate::params::{ProtocolParams, RateCase};
use crate::protocol::{ChoiceVector, InputBits, RemovalCheck, TrialRng, TrialStatus};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    Fixed(Vec<bool>),
    Random,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChoiceMode {
    Fixed(Vec<usize>),
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ProtocolParams,
    pub trials: u64,
    pub seed: u64,
    pub strategy: Strategy,
    pub inputs: InputMode,
    pub choices: ChoiceMode,
}

impl ExperimentConfig {
    /// Honest Bob, random inputs and choices.
    pub fn new(params: ProtocolParams, trials: u64, seed: u64) -> Self {
        Self {
            params,
            trials,
            seed,
            strategy: Strategy::HonestBob,
            inputs: InputMode::Random,
            choices: ChoiceMode::Random,
        }
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_inputs(mut self, inputs: InputMode) -> Self {
        self.inputs = inputs;
        self
    }

    pub fn with_choices(mut self, choices: ChoiceMode) -> Self {
        self.choices = choices;
        self
    }

    fn fixed_values(&self) -> Result<(Option<InputBits>, Option<ChoiceVector>), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if matches!(self.strategy, Strategy::DishonestRemovalBob { .. }) && self.params.case() != RateCase::Low {
            return Err(HarnessError::Config(
                "dishonest removal applies to the low-rate case only (2m+1 < n)".into(),
            ));
        }
        let inputs = match &self.inputs {
            InputMode::Fixed(bits) => Some(InputBits::new(bits.clone(), &self.params)?),
            InputMode::Random => None,
        };
        let choices = match &self.choices {
            ChoiceMode::Fixed(c) => Some(ChoiceVector::new(c.clone(), &self.params)?),
            ChoiceMode::Random => None,
        };
        Ok((inputs, choices))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.fixed_values().map(|_| ())
    }
}

/// The configuration as echoed into reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub slots: usize,
    pub x: usize,
    pub subset_size: usize,
    pub trials: u64,
    pub seed: u64,
    pub strategy: String,
    pub removal_check: Option<RemovalCheck>,
    pub cheat_probability: Option<f64>,
    pub inputs: String,
    pub choices: String,
}

impl ConfigEcho {
    fn new(c: &ExperimentConfig) -> Self {
        let csv = |v: Vec<String>| v.join(",");
        Self {
            n: c.params.bit_count(),
            m: c.params.choice_count(),
            slots: c.params.slot_count(),
            x: c.params.removal_count(),
            subset_size: c.params.subset_size(),
            trials: c.trials,
            seed: c.seed,
            strategy: c.strategy.tag().to_string(),
            removal_check: match c.strategy {
                Strategy::DishonestRemovalBob { check } => Some(check),
                _ => None,
            },
            cheat_probability: match c.strategy {
                Strategy::CommitCheatBob { cheat } => Some(cheat.p()),
                _ => None,
            },
            inputs: match &c.inputs {
                InputMode::Fixed(b) => csv(b.iter().map(|&b| u8::from(b).to_string()).collect()),
                InputMode::Random => "random".into(),
            },
            choices: match &c.choices {
                ChoiceMode::Fixed(v) => csv(v.iter().map(ToString::to_string).collect()),
                ChoiceMode::Random => "random".into(),
            },
        }
    }
}

/// Additive per-trial counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    trials: u64,
    completed: u64,
    insufficient: u64,
    cheat: u64,
    invalid: u64,
    decode_errors: u64,
    successes: u64,
    caught: u64,
    bits_learned: u64,
    guess_hits: u64,
    blind_hits: u64,
}

impl Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            completed: self.completed + o.completed,
            insufficient: self.insufficient + o.insufficient,
            cheat: self.cheat + o.cheat,
            invalid: self.invalid + o.invalid,
            decode_errors: self.decode_errors + o.decode_errors,
            successes: self.successes + o.successes,
            caught: self.caught + o.caught,
            bits_learned: self.bits_learned + o.bits_learned,
            guess_hits: self.guess_hits + o.guess_hits,
            blind_hits: self.blind_hits + o.blind_hits,
        }
    }
}

fn run_trial(
    config: &ExperimentConfig,
    inputs: Option<&InputBits>,
    choices: Option<&ChoiceVector>,
    trial: u64,
) -> Result<Tally, HarnessError> {
    let mut rngs = TrialRng::new(config.seed, trial);
    let inputs = inputs
        .cloned()
        .unwrap_or_else(|| InputBits::random(&config.params, &mut rngs.inputs));
    let choices = choices
        .cloned()
        .unwrap_or_else(|| ChoiceVector::random(&config.params, &mut rngs.inputs));
    let o = run_with_adversary(&config.strategy, &config.params, &inputs, &choices, rngs)?;
    let blind = if config.strategy == Strategy::CuriousAlice {
        let mut rng = RandomSource::for_trial(config.seed, "blind", trial);
        ChoiceVector::random(&config.params, &mut rng) == choices
    } else {
        false
    };
    Ok(Tally {
        trials: 1,
        completed: u64::from(o.status == TrialStatus::Completed),
        insufficient: u64::from(o.status == TrialStatus::AbortInsufficientMatches),
        cheat: u64::from(o.status == TrialStatus::AbortCheatDetected),
        invalid: u64::from(o.status == TrialStatus::AbortInvalidMessage),
        decode_errors: u64::from(o.status == TrialStatus::Completed && !o.correct_output),
        successes: u64::from(o.target_exceeded),
        caught: u64::from(o.caught),
        bits_learned: o.bits_learned as u64,
        guess_hits: u64::from(o.guess_correct == Some(true)),
        blind_hits: u64::from(blind),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbortCounts {
    pub insufficient_matches: u64,
    pub cheat_detected: u64,
    pub invalid_message: u64,
}

impl AbortCounts {
    pub fn total(&self) -> u64 {
        self.insufficient_matches + self.cheat_detected + self.invalid_message
    }
}

/// Empirical rate with its 99% Wilson interval and, where one exists, the
/// exact predicted value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub count: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub predicted: Option<f64>,
}

impl RateEstimate {
    fn new(count: u64, trials: u64, predicted: Option<f64>) -> Self {
        let (ci_low, ci_high) = wilson_interval(count, trials, Z_99);
        Self {
            count,
            rate: count as f64 / trials as f64,
            ci_low,
            ci_high,
            predicted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub abort: RateEstimate,
    /// Aborts plus completed runs with a wrong chosen bit.
    pub correctness_failure: RateEstimate,
    /// Runs where Bob learned more than `m` bits with certainty.
    pub adversary_success: RateEstimate,
    pub caught: RateEstimate,
    pub choice_guess: Option<RateEstimate>,
    pub blind_guess: Option<RateEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub config: ConfigEcho,
    pub trials: u64,
    pub completed: u64,
    pub aborts: AbortCounts,
    pub correctness_failures: u64,
    pub decode_errors: u64,
    pub adversary_successes: u64,
    pub caught: u64,
    pub mean_bits_learned: f64,
    pub rates: Rates,
}

/// Exact rates an experiment should reproduce, keyed like [`Rates`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Predictions {
    pub correctness_failure: Option<f64>,
    pub adversary_success: Option<f64>,
    pub caught: Option<f64>,
    pub choice_guess: Option<f64>,
}

pub fn predictions(config: &ExperimentConfig) -> Result<Predictions, HarnessError> {
    let p = &config.params;
    let slots = p.slot_count();
    let all_match = 0.5f64.powi(slots as i32);
    let mut out = Predictions::default();
    match config.strategy {
        Strategy::HonestBob | Strategy::CuriousAlice => {
            out.correctness_failure = Some(exact_failure_oracle(p, FailureEvent::Correctness)?.to_f64());
            out.adversary_success = Some(0.0);
            out.caught = Some(0.0);
            if config.strategy == Strategy::CuriousAlice {
                out.choice_guess = Some(1.0 / binomial(p.bit_count(), p.choice_count()));
            }
        }
        Strategy::GreedyBob => {
            out.adversary_success = Some(exact_failure_oracle(p, FailureEvent::PrivacyExtraBit)?.to_f64());
            out.caught = Some(0.0);
        }
        Strategy::DishonestRemovalBob { check } => match check {
            RemovalCheck::Literal => {
                out.adversary_success = Some(exact_failure_oracle(p, FailureEvent::DishonestRemoval)?.to_f64());
                out.caught = Some(0.0);
            }
            RemovalCheck::Strict => {
                // only the all-matching pattern leaves nothing mismatched to remove
                out.adversary_success = Some(all_match);
                out.caught = Some(1.0 - all_match);
            }
        },
        Strategy::PostponeBob => {
            out.caught = Some(1.0 - postpone_survival(slots).to_f64().expect("finite"));
        }
        Strategy::CommitCheatBob { cheat } => {
            let success = cheat.p().powi(p.subset_size() as i32);
            out.adversary_success = Some(success);
            out.caught = Some(1.0 - success);
        }
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Runs `config.trials` independent trials and aggregates them.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateStats, HarnessError> {
    let (inputs, choices) = config.fixed_values()?;
    let predicted = predictions(config)?;
    let tally = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, inputs.as_ref(), choices.as_ref(), t))
        .try_reduce(Tally::default, |a, b| Ok(a + b))?;

    let trials = tally.trials;
    let aborts = AbortCounts {
        insufficient_matches: tally.insufficient,
        cheat_detected: tally.cheat,
        invalid_message: tally.invalid,
    };
    let failures = aborts.total() + tally.decode_errors;
    let curious = config.strategy == Strategy::CuriousAlice;
    Ok(AggregateStats {
        config: ConfigEcho::new(config),
        trials,
        completed: tally.completed,
        aborts,
        correctness_failures: failures,
        decode_errors: tally.decode_errors,
        adversary_successes: tally.successes,
        caught: tally.caught,
        mean_bits_learned: tally.bits_learned as f64 / trials as f64,
        rates: Rates {
            abort: RateEstimate::new(aborts.total(), trials, None),
            correctness_failure: RateEstimate::new(failures, trials, predicted.correctness_failure),
            adversary_success: RateEstimate::new(tally.successes, trials, predicted.adversary_success),
            caught: RateEstimate::new(tally.caught, trials, predicted.caught),
            choice_guess: curious.then(|| RateEstimate::new(tally.guess_hits, trials, predicted.choice_guess)),
            blind_guess: curious.then(|| RateEstimate::new(tally.blind_hits, trials, predicted.choice_guess)),
        },
    })
}
