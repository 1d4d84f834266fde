//! Whole-grid checks: channel calibration, oracle against enumeration, and
//! exact probabilities against the concentration bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::{admissible_parameter_sets, enumerate_event_probability, exact_failure_oracle, ExactProbability, FailureEvent};
use super::verdict::Verdict;
use super::HarnessError;
use crate::channel::{encode, measure, Basis, RandomSource};
use crate::params::{correctness_epsilon, privacy_epsilon, ProtocolParams, RateCase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub photons: u64,
    pub seed: u64,
    pub matching: u64,
    pub matching_agree: u64,
    pub matching_rate: f64,
    pub mismatched: u64,
    pub mismatched_agree: u64,
    pub mismatched_rate: f64,
}

/// Sends `photons` random BB84 photons and measures each in a random basis.
pub fn channel_statistics(photons: u64, seed: u64) -> ChannelStats {
    let mut alice = RandomSource::stream(seed, "alice");
    let mut bob = RandomSource::stream(seed, "bob");
    let mut line = RandomSource::stream(seed, "channel");
    let (mut matching, mut matching_agree, mut mismatched, mut mismatched_agree) = (0, 0, 0, 0);
    for _ in 0..photons {
        let bit = alice.random_bit();
        let basis = Basis::random(&mut alice);
        let guess = Basis::random(&mut bob);
        let mut photon = encode(bit, basis);
        let agree = measure(&mut photon, guess, &mut line).expect("fresh photon") == bit;
        if guess == basis {
            matching += 1;
            matching_agree += u64::from(agree);
        } else {
            mismatched += 1;
            mismatched_agree += u64::from(agree);
        }
    }
    let rate = |a: u64, n: u64| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    ChannelStats {
        photons,
        seed,
        matching,
        matching_agree,
        matching_rate: rate(matching_agree, matching),
        mismatched,
        mismatched_agree,
        mismatched_rate: rate(mismatched_agree, mismatched),
    }
}

pub fn channel_verdicts(stats: &ChannelStats) -> Vec<Verdict> {
    vec![
        Verdict::new("matching_basis_agreement", stats.matching_rate, 1.0, super::Relation::Within, 0.0),
        Verdict::new("mismatched_basis_agreement", stats.mismatched_rate, 0.5, super::Relation::Within, 0.01),
    ]
}

fn events_for(params: &ProtocolParams) -> Vec<FailureEvent> {
    let mut events = vec![FailureEvent::Correctness, FailureEvent::PrivacyExtraBit];
    if params.case() == RateCase::Low {
        events.push(FailureEvent::DishonestRemoval);
    }
    events
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub slots: usize,
    pub event: FailureEvent,
    pub oracle: ExactProbability,
    pub enumeration: ExactProbability,
    pub equal: bool,
}

/// Oracle against full enumeration for every admissible set with `N <= max_slots`.
pub fn enumeration_sweep(max_slots: usize) -> Result<Vec<EquivalenceRow>, HarnessError> {
    let mut rows = Vec::new();
    for p in admissible_parameter_sets(max_slots) {
        for event in events_for(&p) {
            let oracle = exact_failure_oracle(&p, event)?;
            let enumeration = enumerate_event_probability(&p, event)?;
            rows.push(EquivalenceRow {
                n: p.bit_count(),
                m: p.choice_count(),
                slots: p.slot_count(),
                event,
                equal: oracle == enumeration,
                oracle,
                enumeration,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub slots: usize,
    pub event: FailureEvent,
    pub exact: f64,
    pub hoeffding_bound: f64,
    pub epsilon_pow_n: f64,
    pub holds: bool,
}

/// Exact correctness and privacy probabilities against both bound forms, for
/// every admissible `(n, m, N)` with `n <= max_bits`, `N <= max_slots` and `N`
/// at least the bound's minimum.
pub fn dominance_sweep(max_bits: usize, max_slots: usize) -> Result<Vec<DominanceRow>, HarnessError> {
    let mut grid = Vec::new();
    for n in 2..=max_bits {
        for m in 1..n {
            for slots in 1..=max_slots {
                if let Ok(p) = ProtocolParams::new(n, m, slots) {
                    grid.push(p);
                }
            }
        }
    }
    let rows: Vec<Vec<DominanceRow>> = grid
        .par_iter()
        .map(|p| {
            let mut out = Vec::new();
            let (n, m) = (p.bit_count(), p.choice_count());
            let checks = [
                (FailureEvent::Correctness, correctness_epsilon(n, m).expect("valid")),
                (FailureEvent::PrivacyExtraBit, privacy_epsilon(n, m).expect("valid")),
            ];
            for (event, dev) in checks {
                if p.slot_count() < dev.min_slot_count() {
                    continue;
                }
                let exact = exact_failure_oracle(p, event)?.to_f64();
                let hoeffding_bound = dev.hoeffding_bound(p.slot_count());
                let epsilon_pow_n = dev.epsilon_pow(p.slot_count());
                out.push(DominanceRow {
                    n,
                    m,
                    slots: p.slot_count(),
                    event,
                    exact,
                    hoeffding_bound,
                    epsilon_pow_n,
                    holds: exact <= hoeffding_bound && exact <= epsilon_pow_n,
                });
            }
            Ok(out)
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_calibration() {
        let s = channel_statistics(20_000, 1);
        assert_eq!(s.matching + s.mismatched, 20_000);
        assert_eq!(s.matching_agree, s.matching);
        assert!(channel_verdicts(&s)[0].pass);
    }

    #[test]
    fn dominance_on_a_small_grid() {
        let rows = dominance_sweep(4, 120).unwrap();
        assert!(!rows.is_empty());
        assert!(rows.iter().all(|r| r.holds), "{:?}", rows.iter().find(|r| !r.holds));
        // (2,1) privacy starts at N = 25, the first admissible N is 27 there
        assert!(rows.iter().any(|r| (r.n, r.m, r.slots) == (2, 1, 27) && r.event == FailureEvent::PrivacyExtraBit));
        assert!(!rows.iter().any(|r| (r.n, r.m) == (2, 1) && r.slots < 25));
    }
}
