//! Protocol parameters and security bounds.
//!
//! Admissibility decisions (target rate, removal count, subset size) use exact
//! integer and rational arithmetic. Deviations are exact rationals; only the final
//! exponentials are evaluated in `f64`.
//!
//! Terminology: `bit_count` is Alice's number of input bits, `choice_count` the
//! number Bob selects, `slot_count` the number of indices surviving the
//! challenge phase, and `removal_count` the number Bob discards so that the
//! surviving match rate hits the target rate `(2m+1)/(2n)`.

use std::fmt;

use num_rational::Ratio;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamError {
    #[error("choice count must satisfy 1 <= m < n (got n={bits}, m={choices})")]
    InvalidChoiceCount { bits: usize, choices: usize },
    #[error("N={slots} is not admissible for n={bits}, m={choices}: {reason}")]
    InvalidN {
        bits: usize,
        choices: usize,
        slots: usize,
        reason: String,
    },
    #[error("invalid Hoeffding query: {0}")]
    InvalidQuery(&'static str),
}

/// Every constraint a parameter triple violates.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid protocol parameters: {}", render_violations(.0))]
pub struct InvalidParams(pub Vec<ParamError>);

fn render_violations(v: &[ParamError]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl InvalidParams {
    pub fn has_invalid_n(&self) -> bool {
        self.0.iter().any(|e| matches!(e, ParamError::InvalidN { .. }))
    }

    pub fn has_invalid_choice_count(&self) -> bool {
        self.0
            .iter()
            .any(|e| matches!(e, ParamError::InvalidChoiceCount { .. }))
    }
}

/// Whether the target rate lies below one half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCase {
    /// `(2m+1)/(2n) < 1/2`: too many matches, Bob removes matching indices.
    Low,
    /// `(2m+1)/(2n) >= 1/2`: too few matches, Bob removes mismatching indices.
    High,
}

fn check_choice_count(bits: usize, choices: usize) -> Result<(), ParamError> {
    if choices >= 1 && choices < bits {
        Ok(())
    } else {
        Err(ParamError::InvalidChoiceCount { bits, choices })
    }
}

/// `(2m+1)/(2n)`.
pub fn target_rate(bits: usize, choices: usize) -> Result<Rational, ParamError> {
    check_choice_count(bits, choices)?;
    Ok(Rational::new(2 * choices as i64 + 1, 2 * bits as i64))
}

pub fn rate_case(bits: usize, choices: usize) -> Result<RateCase, ParamError> {
    check_choice_count(bits, choices)?;
    Ok(if 2 * choices + 1 < bits {
        RateCase::Low
    } else {
        RateCase::High
    })
}

/// Number of indices Bob must discard.
///
/// Low case: `x = (n-(2m+1)) N / (2n-(2m+1))`. High case: `x = ((2m+1)-n) N / (2m+1)`.
/// Fails when `x` is not an integer.
pub fn removal_count(bits: usize, choices: usize, slots: usize) -> Result<usize, ParamError> {
    let case = rate_case(bits, choices)?;
    let (n, m, big_n) = (bits as u128, choices as u128, slots as u128);
    let (num, den) = match case {
        RateCase::Low => ((n - (2 * m + 1)) * big_n, 2 * n - (2 * m + 1)),
        RateCase::High => (((2 * m + 1) - n) * big_n, 2 * m + 1),
    };
    if num % den != 0 {
        return Err(ParamError::InvalidN {
            bits,
            choices,
            slots,
            reason: format!("removal count x = {num}/{den} is not an integer"),
        });
    }
    Ok((num / den) as usize)
}

/// The admissibility condition as originally stated for `N`:
/// `(2n-(2m+1))(2m+1) | ((2m+1)-n) N`.
///
/// Kept for comparison only; [`validate_params`] decides admissibility with the
/// two constraints the protocol actually needs.
pub fn stated_divisibility_condition(bits: usize, choices: usize, slots: usize) -> bool {
    let (n, m, big_n) = (bits as i128, choices as i128, slots as i128);
    let divisor = (2 * n - (2 * m + 1)) * (2 * m + 1);
    let dividend = ((2 * m + 1) - n) * big_n;
    divisor != 0 && dividend % divisor == 0
}

/// A validated `(n, m, N)` triple with its derived quantities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    bit_count: usize,
    choice_count: usize,
    slot_count: usize,
    case: RateCase,
    removal_count: usize,
    subset_size: usize,
    #[serde(with = "rational_string")]
    target_rate: Rational,
}

impl ProtocolParams {
    pub fn new(bits: usize, choices: usize, slots: usize) -> Result<Self, InvalidParams> {
        validate_params(bits, choices, slots)
    }

    /// `n`.
    pub fn bit_count(&self) -> usize {
        self.bit_count
    }

    /// `m`.
    pub fn choice_count(&self) -> usize {
        self.choice_count
    }

    /// `N`.
    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    /// Total photons sent, `2N`.
    pub fn photon_count(&self) -> usize {
        2 * self.slot_count
    }

    pub fn case(&self) -> RateCase {
        self.case
    }

    /// `x`.
    pub fn removal_count(&self) -> usize {
        self.removal_count
    }

    /// `(N-x)/n`.
    pub fn subset_size(&self) -> usize {
        self.subset_size
    }

    pub fn target_rate(&self) -> Rational {
        self.target_rate
    }
}

impl fmt::Display for ProtocolParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} m={} N={} (x={}, |I|={})",
            self.bit_count, self.choice_count, self.slot_count, self.removal_count, self.subset_size
        )
    }
}

/// Validates `(n, m, N)`, reporting every violated constraint.
pub fn validate_params(bits: usize, choices: usize, slots: usize) -> Result<ProtocolParams, InvalidParams> {
    let mut violations = Vec::new();
    if let Err(e) = check_choice_count(bits, choices) {
        violations.push(e);
    }
    if slots == 0 {
        violations.push(ParamError::InvalidN {
            bits,
            choices,
            slots,
            reason: "N must be at least 1".into(),
        });
    }
    if !violations.is_empty() {
        return Err(InvalidParams(violations));
    }

    let removal = match removal_count(bits, choices, slots) {
        Ok(x) => x,
        Err(e) => return Err(InvalidParams(vec![e])),
    };
    let survivors = slots - removal;
    if !survivors.is_multiple_of(bits) {
        return Err(InvalidParams(vec![ParamError::InvalidN {
            bits,
            choices,
            slots,
            reason: format!("N - x = {survivors} is not divisible by n = {bits}"),
        }]));
    }
    Ok(ProtocolParams {
        bit_count: bits,
        choice_count: choices,
        slot_count: slots,
        case: rate_case(bits, choices).expect("checked above"),
        removal_count: removal,
        subset_size: survivors / bits,
        target_rate: target_rate(bits, choices).expect("checked above"),
    })
}

/// Least admissible `N >= floor`.
pub fn smallest_valid_n(bits: usize, choices: usize, floor: usize) -> Result<usize, ParamError> {
    check_choice_count(bits, choices)?;
    // Admissibility is periodic in N with period dividing n(2n-(2m+1))(2m+1),
    // so the scan below always terminates.
    let mut slots = floor.max(1);
    loop {
        if validate_params(bits, choices, slots).is_ok() {
            return Ok(slots);
        }
        slots += 1;
    }
}

/// Inputs to the concentration bound `Pr[|Y - mu| >= delta] <= 2 exp(-2 N delta^2 / (b - a))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingQuery {
    pub trials: u64,
    pub deviation: f64,
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
}

impl HoeffdingQuery {
    /// Average of `trials` fair coins: range `[0, 1]`, mean one half.
    pub fn fair_coin(trials: u64, deviation: f64) -> Self {
        Self {
            trials,
            deviation,
            lower: 0.0,
            upper: 1.0,
            mean: 0.5,
        }
    }
}

/// Two-sided concentration bound. The value may exceed 1, in which case it is
/// vacuous; callers clamp for display.
pub fn hoeffding_bound(q: &HoeffdingQuery) -> Result<f64, ParamError> {
    if q.deviation.is_nan() || q.deviation <= 0.0 {
        return Err(ParamError::InvalidQuery("deviation must be positive"));
    }
    if q.lower.is_nan() || q.upper.is_nan() || q.lower >= q.upper {
        return Err(ParamError::InvalidQuery("range must satisfy a < b"));
    }
    let exponent = -2.0 * q.trials as f64 * q.deviation * q.deviation / (q.upper - q.lower);
    Ok(2.0 * exponent.exp())
}

/// A deviation from one half, together with the per-index epsilon it induces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// Value of the deviation expression exactly as stated in the analysis.
    #[serde(with = "rational_string")]
    pub stated: Rational,
    /// `|stated|`; this is what every bound uses.
    #[serde(with = "rational_string")]
    pub magnitude: Rational,
    /// `exp(-delta^2)`.
    pub epsilon: f64,
    /// True when the stated expression is not positive although the analysis
    /// asserts it is.
    pub sign_anomaly: bool,
}

impl Deviation {
    fn from_stated(stated: Rational) -> Self {
        let magnitude = stated.abs();
        let epsilon = (-ratio_f64(magnitude * magnitude)).exp();
        Self {
            stated,
            magnitude,
            epsilon,
            sign_anomaly: stated <= Rational::zero(),
        }
    }

    pub fn delta(&self) -> f64 {
        ratio_f64(self.magnitude)
    }

    /// Exponent coefficient `2 delta^2`, so that the raw bound reads `2 exp(-k N)`.
    pub fn exponent_per_slot(&self) -> Rational {
        Rational::from_integer(2) * self.magnitude * self.magnitude
    }

    /// Raw two-sided bound `2 exp(-2 N delta^2)`.
    pub fn hoeffding_bound(&self, slots: usize) -> f64 {
        2.0 * (-ratio_f64(self.exponent_per_slot()) * slots as f64).exp()
    }

    /// Simplified form `epsilon^N = exp(-N delta^2)`, valid once `N > ln 2 / delta^2`.
    pub fn epsilon_pow(&self, slots: usize) -> f64 {
        (-ratio_f64(self.magnitude * self.magnitude) * slots as f64).exp()
    }

    pub fn min_slot_count(&self) -> usize {
        min_n(self.magnitude)
    }

    /// Human-readable form of the raw bound, e.g. `2*exp(-N/18)`.
    pub fn bound_form(&self) -> String {
        let k = self.exponent_per_slot();
        match (*k.numer(), *k.denom()) {
            (1, 1) => "2*exp(-N)".to_string(),
            (1, d) => format!("2*exp(-N/{d})"),
            (num, 1) => format!("2*exp(-{num}N)"),
            (num, d) => format!("2*exp(-{num}N/{d})"),
        }
    }
}

fn ratio_f64(r: Rational) -> f64 {
    r.to_f64().expect("small rationals convert")
}

fn half() -> Rational {
    Rational::new(1, 2)
}

/// Deviation governing honest failure (Bob cannot form his subsets).
///
/// Low case: `(n-m)/(2n-(2m+1)) - 1/2`. High case: `1/2 - m/(2m+1)`.
pub fn correctness_epsilon(bits: usize, choices: usize) -> Result<Deviation, ParamError> {
    let (n, m) = (bits as i64, choices as i64);
    let stated = match rate_case(bits, choices)? {
        RateCase::Low => Rational::new(n - m, 2 * n - (2 * m + 1)) - half(),
        RateCase::High => half() - Rational::new(m, 2 * m + 1),
    };
    Ok(Deviation::from_stated(stated))
}

/// Deviation governing a Bob who decodes `m+1` bits.
///
/// Low case: `1/2 - (n-m)/(2n-(2m+1))`, which is negative as stated; the bound uses
/// its magnitude and the returned value carries `sign_anomaly`. High case:
/// `(m+1)/(2m+1) - 1/2`.
pub fn privacy_epsilon(bits: usize, choices: usize) -> Result<Deviation, ParamError> {
    let (n, m) = (bits as i64, choices as i64);
    let stated = match rate_case(bits, choices)? {
        RateCase::Low => half() - Rational::new(n - m, 2 * n - (2 * m + 1)),
        RateCase::High => Rational::new(m + 1, 2 * m + 1) - half(),
    };
    Ok(Deviation::from_stated(stated))
}

/// Least integer strictly greater than `ln 2 / delta^2`.
pub fn min_n(delta: Rational) -> usize {
    let d = ratio_f64(delta.abs());
    let threshold = std::f64::consts::LN_2 / (d * d);
    threshold.floor() as usize + 1
}

/// Binding attack on the weak commitment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitmentAttackBound {
    pub p: f64,
    /// Probability of one extra bit, `p^((N-x)/n)`.
    pub bound: f64,
    /// `p^(1/(2n))`.
    pub epsilon: f64,
    /// `epsilon^N`.
    pub epsilon_pow: f64,
    /// `bound < epsilon^N`.
    pub holds: bool,
}

pub fn commitment_attack_bound(p: f64, params: &ProtocolParams) -> CommitmentAttackBound {
    let forgeries = params.subset_size() as f64;
    let bound = p.powf(forgeries);
    let epsilon = p.powf(1.0 / (2.0 * params.bit_count() as f64));
    let epsilon_pow = epsilon.powf(params.slot_count() as f64);
    CommitmentAttackBound {
        p,
        bound,
        epsilon,
        epsilon_pow,
        holds: bound < epsilon_pow,
    }
}

/// Every derived quantity and bound for one parameter choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "N")]
    pub slots: usize,
    #[serde(with = "rational_string")]
    pub target_rate: Rational,
    pub case: RateCase,
    pub x: usize,
    pub subset_size: usize,
    pub stated_divisibility_condition: bool,
    pub correctness: BoundSection,
    pub privacy: BoundSection,
    pub commitment: Option<CommitmentAttackBound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSection {
    pub deviation: Deviation,
    pub delta: f64,
    pub form: String,
    #[serde(with = "rational_string")]
    pub exponent_per_slot: Rational,
    pub hoeffding_bound: f64,
    pub epsilon_pow_n: f64,
    pub min_n: usize,
    pub n_exceeds_min: bool,
}

impl BoundSection {
    fn new(deviation: Deviation, slots: usize) -> Self {
        Self {
            deviation,
            delta: deviation.delta(),
            form: deviation.bound_form(),
            exponent_per_slot: deviation.exponent_per_slot(),
            hoeffding_bound: deviation.hoeffding_bound(slots),
            epsilon_pow_n: deviation.epsilon_pow(slots),
            min_n: deviation.min_slot_count(),
            n_exceeds_min: slots >= deviation.min_slot_count(),
        }
    }
}

impl BoundReport {
    pub fn new(params: &ProtocolParams, p: Option<f64>) -> Self {
        let (n, m, slots) = (params.bit_count(), params.choice_count(), params.slot_count());
        let correctness = correctness_epsilon(n, m).expect("validated params");
        let privacy = privacy_epsilon(n, m).expect("validated params");
        Self {
            n,
            m,
            slots,
            target_rate: params.target_rate(),
            case: params.case(),
            x: params.removal_count(),
            subset_size: params.subset_size(),
            stated_divisibility_condition: stated_divisibility_condition(n, m, slots),
            correctness: BoundSection::new(correctness, slots),
            privacy: BoundSection::new(privacy, slots),
            commitment: p.map(|p| commitment_attack_bound(p, params)),
        }
    }
}

pub(crate) mod rational_string {
    use super::Rational;
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(r)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(|_| de::Error::custom(format!("bad rational {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn target_rate_examples() {
        assert_eq!(target_rate(2, 1), Ok(r(3, 4)));
        assert_eq!(target_rate(3, 1), Ok(r(1, 2)));
        assert_eq!(target_rate(4, 1), Ok(r(3, 8)));
        assert!(matches!(target_rate(2, 2), Err(ParamError::InvalidChoiceCount { .. })));
        assert!(target_rate(3, 0).is_err());
    }

    #[test]
    fn removal_count_examples() {
        assert_eq!(rate_case(4, 1), Ok(RateCase::Low));
        assert_eq!(removal_count(4, 1, 40), Ok(8));
        assert_eq!(rate_case(2, 1), Ok(RateCase::High));
        assert_eq!(removal_count(2, 1, 6), Ok(2));
        assert_eq!(rate_case(3, 1), Ok(RateCase::High));
        assert_eq!(removal_count(3, 1, 6), Ok(0));
        assert!(matches!(removal_count(4, 1, 41), Err(ParamError::InvalidN { .. })));
    }

    #[test]
    fn validate_examples() {
        let p = validate_params(4, 1, 40).unwrap();
        assert_eq!(p.removal_count(), 8);
        assert_eq!(p.subset_size(), 8);
        assert_eq!(p.case(), RateCase::Low);

        let err = validate_params(4, 1, 41).unwrap_err();
        assert!(err.has_invalid_n());
        assert!(err.to_string().contains("41/5"), "{err}");

        let err = validate_params(2, 2, 10).unwrap_err();
        assert!(err.has_invalid_choice_count());

        let err = validate_params(2, 2, 0).unwrap_err();
        assert!(err.has_invalid_choice_count() && err.has_invalid_n());
        assert_eq!(err.0.len(), 2);

        // x integral but survivors not divisible by n
        let err = validate_params(3, 1, 7).unwrap_err();
        assert!(err.to_string().contains("not divisible"), "{err}");
    }

    #[test]
    fn smallest_valid_n_examples() {
        assert_eq!(smallest_valid_n(4, 1, 37), Ok(40));
        assert_eq!(smallest_valid_n(3, 1, 1), Ok(3));
        assert_eq!(smallest_valid_n(2, 1, 6), Ok(6));
        assert_eq!(smallest_valid_n(2, 1, 7), Ok(9));
        assert!(smallest_valid_n(2, 3, 1).is_err());
    }

    #[test]
    fn stated_condition_versus_ours() {
        // agrees for 1-out-of-2: both reduce to 3 | N
        for slots in 1..60 {
            assert_eq!(stated_divisibility_condition(2, 1, slots), validate_params(2, 1, slots).is_ok());
        }
        // x = 0 boundary: the stated condition is vacuous, ours still needs n | N
        assert!(stated_divisibility_condition(3, 1, 7));
        assert!(validate_params(3, 1, 7).is_err());
        // Low case: 15 does not divide -40, yet x = 8 and (N-x)/n = 8 are integral
        assert!(!stated_divisibility_condition(4, 1, 40));
        assert!(validate_params(4, 1, 40).is_ok());
    }

    #[test]
    fn hoeffding_examples() {
        let b = hoeffding_bound(&HoeffdingQuery::fair_coin(18, 1.0 / 6.0)).unwrap();
        assert!((b - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        let b = hoeffding_bound(&HoeffdingQuery::fair_coin(36, 1.0 / 6.0)).unwrap();
        assert!((b - 0.270_670_566_473_225_4).abs() < 1e-12);
        let vacuous = hoeffding_bound(&HoeffdingQuery::fair_coin(1, 0.1)).unwrap();
        assert!(vacuous > 1.0);
        assert!(hoeffding_bound(&HoeffdingQuery::fair_coin(1, 0.0)).is_err());
        let bad_range = HoeffdingQuery {
            lower: 1.0,
            upper: 0.0,
            ..HoeffdingQuery::fair_coin(1, 0.1)
        };
        assert!(hoeffding_bound(&bad_range).is_err());
    }

    #[test]
    fn correctness_examples() {
        let d = correctness_epsilon(2, 1).unwrap();
        assert_eq!(d.stated, r(1, 6));
        assert!((d.epsilon - 0.972_604_477_116_348_3).abs() < 1e-12);
        let d = correctness_epsilon(4, 1).unwrap();
        assert_eq!(d.stated, r(1, 10));
        assert!((d.epsilon - 0.990_049_833_749_168_1).abs() < 1e-12);
        assert_eq!(correctness_epsilon(3, 1).unwrap().stated, r(1, 6));
        assert!(!d.sign_anomaly);
    }

    #[test]
    fn privacy_examples() {
        let d = privacy_epsilon(2, 1).unwrap();
        assert_eq!(d.stated, r(1, 6));
        assert_eq!(d.exponent_per_slot(), r(1, 18));
        assert_eq!(d.bound_form(), "2*exp(-N/18)");

        let d = privacy_epsilon(4, 1).unwrap();
        assert_eq!(d.stated, r(-1, 10));
        assert_eq!(d.magnitude, r(1, 10));
        assert!(d.sign_anomaly);

        let d = privacy_epsilon(5, 2).unwrap();
        assert_eq!(d.stated, r(1, 10));
        assert!((d.epsilon - (-0.01f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn min_n_examples() {
        assert_eq!(min_n(r(1, 6)), 25);
        assert_eq!(min_n(r(1, 10)), 70);
        assert_eq!(min_n(r(1, 1)), 1);
    }

    #[test]
    fn commitment_attack_examples() {
        let p = validate_params(4, 1, 40).unwrap();
        let b = commitment_attack_bound(0.5, &p);
        assert!((b.bound - 0.003_906_25).abs() < 1e-15);
        assert!((b.epsilon - 0.917_004_043_204_671_2).abs() < 1e-12);
        assert!(b.holds);

        let p = validate_params(2, 1, 6).unwrap();
        assert_eq!(commitment_attack_bound(0.5, &p).bound, 0.25);
        assert!(commitment_attack_bound(0.999_999, &p).bound > 0.99);
    }

    #[test]
    fn one_out_of_two_special_form() {
        let d = privacy_epsilon(2, 1).unwrap();
        for slots in 1..=10_000usize {
            let expected = 2.0 * (-(slots as f64) / 18.0).exp();
            let got = d.hoeffding_bound(slots);
            assert!(((got - expected) / expected).abs() <= 1e-12, "N={slots}");
        }
    }

    #[test]
    fn report_serializes_rationals_as_strings() {
        let p = validate_params(2, 1, 18).unwrap();
        let report = BoundReport::new(&p, Some(0.5));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["target_rate"], "3/4");
        assert_eq!(json["privacy"]["exponent_per_slot"], "1/18");
        assert_eq!(json["N"], 18);
        let back: BoundReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }
}
