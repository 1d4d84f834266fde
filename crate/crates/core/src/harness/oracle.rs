//! Exact probabilities of the honest-coin events, by binomial summation and by
//! brute-force enumeration of every basis-match pattern.
//!
//! Under honest basis choices each surviving slot matches independently with
//! probability 1/2, so every event below is a function of the match pattern
//! over the `N` slots and has probability `count / 2^N`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::params::{ProtocolParams, RateCase};

/// Largest `N` accepted by [`enumerate_event_probability`].
pub const MAX_ENUMERATION_SLOTS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureEvent {
    /// Honest Bob cannot finish with his `m` bits.
    Correctness,
    /// A greedy Bob following the removal rule ends with `m+1` all-matching subsets.
    PrivacyExtraBit,
    /// A Bob removing mismatched slots first ends with `m+1` all-matching subsets.
    DishonestRemoval,
}

/// `favourable / 2^N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactProbability {
    pub favourable: BigUint,
    pub slots: usize,
}

impl ExactProbability {
    pub fn ratio(&self) -> BigRational {
        BigRational::new(
            BigInt::from(self.favourable.clone()),
            BigInt::from(BigUint::one() << self.slots),
        )
    }

    pub fn to_f64(&self) -> f64 {
        self.ratio().to_f64().expect("probability is finite")
    }
}

impl Serialize for ExactProbability {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let r = self.ratio();
        let mut st = s.serialize_struct("ExactProbability", 3)?;
        st.serialize_field("numerator", &r.numer().to_string())?;
        st.serialize_field("denominator", &r.denom().to_string())?;
        st.serialize_field("value", &self.to_f64())?;
        st.end()
    }
}

fn check_event(params: &ProtocolParams, event: FailureEvent) -> Result<(), HarnessError> {
    if event == FailureEvent::DishonestRemoval && params.case() != RateCase::Low {
        return Err(HarnessError::Config(
            "dishonest removal applies to the low-rate case only".into(),
        ));
    }
    Ok(())
}

/// Whether `event` happens when `matches` of the `N` slots match.
pub fn event_occurs(params: &ProtocolParams, event: FailureEvent, matches: usize) -> bool {
    let slots = params.slot_count();
    let x = params.removal_count();
    let s = params.subset_size();
    let m = params.choice_count();
    let mismatches = slots - matches;
    match (event, params.case()) {
        (FailureEvent::Correctness, RateCase::Low) => matches < x + m * s,
        (FailureEvent::Correctness, RateCase::High) => matches < m * s || mismatches < x,
        (FailureEvent::PrivacyExtraBit, RateCase::Low) => matches >= x + (m + 1) * s,
        (FailureEvent::PrivacyExtraBit, RateCase::High) => matches >= (m + 1) * s && mismatches >= x,
        (FailureEvent::DishonestRemoval, _) => matches >= (m + 1) * s,
    }
}

/// Exact probability of `event` by summing `C(N, M)` over the match counts `M`
/// at which it occurs.
pub fn exact_failure_oracle(params: &ProtocolParams, event: FailureEvent) -> Result<ExactProbability, HarnessError> {
    check_event(params, event)?;
    let slots = params.slot_count();
    let mut favourable = BigUint::zero();
    let mut binom = BigUint::one();
    for matches in 0..=slots {
        if event_occurs(params, event, matches) {
            favourable += &binom;
        }
        binom = binom * BigUint::from(slots - matches) / BigUint::from(matches + 1);
    }
    Ok(ExactProbability { favourable, slots })
}

/// Exact probability of `event` by playing the removal and subset steps out on
/// each of the `2^N` match patterns.
pub fn enumerate_event_probability(params: &ProtocolParams, event: FailureEvent) -> Result<ExactProbability, HarnessError> {
    check_event(params, event)?;
    let slots = params.slot_count();
    if slots > MAX_ENUMERATION_SLOTS {
        return Err(HarnessError::Config(format!(
            "enumeration is limited to N <= {MAX_ENUMERATION_SLOTS}, got {slots}"
        )));
    }
    let count = (0u64..(1u64 << slots))
        .into_par_iter()
        .map_init(
            || vec![false; slots],
            |removed, pattern| {
                let matched = |j: usize| pattern >> j & 1 == 1;
                u64::from(play_out(params, event, &matched, removed))
            },
        )
        .sum::<u64>();
    Ok(ExactProbability {
        favourable: BigUint::from(count),
        slots,
    })
}

fn play_out(params: &ProtocolParams, event: FailureEvent, matched: &dyn Fn(usize) -> bool, removed: &mut [bool]) -> bool {
    let x = params.removal_count();
    let s = params.subset_size();
    let m = params.choice_count();
    removed.fill(false);

    // step 4: remove the first x eligible slots
    let mut order: Vec<usize> = match (event, params.case()) {
        (FailureEvent::DishonestRemoval, _) => (0..removed.len())
            .filter(|&j| !matched(j))
            .chain((0..removed.len()).filter(|&j| matched(j)))
            .collect(),
        (_, RateCase::Low) => (0..removed.len()).filter(|&j| matched(j)).collect(),
        (_, RateCase::High) => (0..removed.len()).filter(|&j| !matched(j)).collect(),
    };
    if order.len() < x {
        return event == FailureEvent::Correctness;
    }
    order.truncate(x);
    for j in order {
        removed[j] = true;
    }

    // step 5: fill subsets with surviving matched slots, one at a time
    let mut complete = 0usize;
    let mut current = 0usize;
    for (j, &gone) in removed.iter().enumerate() {
        if !gone && matched(j) {
            current += 1;
            if current == s {
                complete += 1;
                current = 0;
            }
        }
    }
    let complete = complete.min(params.bit_count());
    match event {
        FailureEvent::Correctness => complete < m,
        FailureEvent::PrivacyExtraBit | FailureEvent::DishonestRemoval => complete > m,
    }
}

/// Probability that a Bob committing to unmeasured guesses survives all `N`
/// challenges: each catches him with probability 1/4.
pub fn postpone_survival(slots: usize) -> BigRational {
    BigRational::new(BigInt::from(3u32).pow(slots as u32), BigInt::from(4u32).pow(slots as u32))
}

/// Every admissible `(n, m, N)` with `N <= max_slots`.
pub fn admissible_parameter_sets(max_slots: usize) -> Vec<ProtocolParams> {
    let mut out = Vec::new();
    for slots in 1..=max_slots {
        for n in 2..=slots {
            for m in 1..n {
                if let Ok(p) = ProtocolParams::new(n, m, slots) {
                    out.push(p);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, m: usize, slots: usize) -> ProtocolParams {
        ProtocolParams::new(n, m, slots).unwrap()
    }

    fn ratio(num: u64, den: u64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn correctness_three_one_six() {
        let p = exact_failure_oracle(&params(3, 1, 6), FailureEvent::Correctness).unwrap();
        assert_eq!(p.ratio(), ratio(7, 64));
    }

    #[test]
    fn correctness_four_one_forty() {
        let p = exact_failure_oracle(&params(4, 1, 40), FailureEvent::Correctness).unwrap();
        assert_eq!(p.ratio(), ratio(21_146_349_707, 274_877_906_944));
        assert!((p.to_f64() - 0.076_929_972_081_416_05).abs() < 1e-15);
    }

    #[test]
    fn privacy_two_one_six() {
        let p = exact_failure_oracle(&params(2, 1, 6), FailureEvent::PrivacyExtraBit).unwrap();
        assert_eq!(p.ratio(), ratio(15, 64));
        let e = enumerate_event_probability(&params(2, 1, 6), FailureEvent::PrivacyExtraBit).unwrap();
        assert_eq!(e, p);
    }

    #[test]
    fn dishonest_removal_beats_compliant_removal() {
        let p = params(4, 1, 40);
        let compliant = exact_failure_oracle(&p, FailureEvent::PrivacyExtraBit).unwrap().to_f64();
        let dishonest = exact_failure_oracle(&p, FailureEvent::DishonestRemoval).unwrap().to_f64();
        assert!((compliant - 0.134_093_625_527_384_57).abs() < 1e-15);
        assert!((dishonest - 0.923_070_027_918_584).abs() < 1e-15);
        assert!(exact_failure_oracle(&params(2, 1, 6), FailureEvent::DishonestRemoval).is_err());
    }

    #[test]
    fn small_enumerations_agree() {
        for p in admissible_parameter_sets(12) {
            for event in [FailureEvent::Correctness, FailureEvent::PrivacyExtraBit, FailureEvent::DishonestRemoval] {
                if event == FailureEvent::DishonestRemoval && p.case() != RateCase::Low {
                    continue;
                }
                assert_eq!(
                    exact_failure_oracle(&p, event).unwrap(),
                    enumerate_event_probability(&p, event).unwrap(),
                    "{p} {event:?}"
                );
            }
        }
    }

    #[test]
    fn postpone_survival_six() {
        let v = postpone_survival(6);
        assert_eq!(v, ratio(729, 4096));
        assert_eq!(v.to_f64().unwrap(), 0.177_978_515_625);
    }

    #[test]
    fn admissible_count_up_to_twenty() {
        assert_eq!(admissible_parameter_sets(20).len(), 126);
    }
}
