use proptest::prelude::*;

use qot_core::channel::{encode, measure, Basis, RandomSource};
use qot_core::commitment::{CheatModel, CommitmentLedger, Verdict};
use qot_core::params::{
    correctness_epsilon, privacy_epsilon, rate_case, removal_count, target_rate, validate_params, ProtocolParams,
    RateCase, Rational,
};
use qot_core::protocol::{run_protocol, ChoiceVector, InputBits, SubsetFamily, TrialStatus};

fn admissible() -> impl Strategy<Value = ProtocolParams> {
    (2usize..8, 1usize..7, 1usize..120).prop_filter_map("inadmissible", |(n, m, slots)| {
        ProtocolParams::new(n, m.min(n - 1), slots).ok()
    })
}

fn small_admissible() -> impl Strategy<Value = ProtocolParams> {
    (2usize..6, 1usize..5, 1usize..48).prop_filter_map("inadmissible", |(n, m, slots)| {
        ProtocolParams::new(n, m.min(n - 1), slots).ok()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn surviving_slots_split_exactly(p in admissible()) {
        let (n, m, slots) = (p.bit_count(), p.choice_count(), p.slot_count());
        let x = p.removal_count();
        prop_assert!(x <= slots);
        prop_assert_eq!(p.subset_size() * n, slots - x);
        prop_assert!(p.subset_size() >= 1);
        prop_assert_eq!(Some(x), removal_count(n, m, slots).ok());
        prop_assert_eq!(p.target_rate(), Rational::new(2 * m as i64 + 1, 2 * n as i64));
        prop_assert_eq!(validate_params(n, m, slots).ok(), Some(p.clone()));
    }

    #[test]
    fn case_matches_target_rate(n in 2usize..40, m in 1usize..40) {
        prop_assume!(m < n);
        let rate = target_rate(n, m).unwrap();
        let case = rate_case(n, m).unwrap();
        prop_assert_eq!(case == RateCase::Low, rate < Rational::new(1, 2));
        for dev in [correctness_epsilon(n, m).unwrap(), privacy_epsilon(n, m).unwrap()] {
            prop_assert!(dev.magnitude > Rational::new(0, 1));
            prop_assert!(dev.epsilon > 0.0 && dev.epsilon < 1.0);
            let min = dev.min_slot_count();
            prop_assert!(dev.hoeffding_bound(min) <= dev.epsilon_pow(min));
            if min > 1 {
                prop_assert!(dev.hoeffding_bound(min - 1) >= dev.epsilon_pow(min - 1));
            }
        }
        prop_assert_eq!(privacy_epsilon(n, m).unwrap().sign_anomaly, case == RateCase::Low);
    }

    #[test]
    fn matching_basis_measurement_is_faithful(bit: bool, basis_bit: bool, seed: u64) {
        let basis = Basis::from_bit(basis_bit);
        let mut rng = RandomSource::new(seed);
        let mut photon = encode(bit, basis);
        prop_assert_eq!(measure(&mut photon, basis, &mut rng).unwrap(), bit);
        prop_assert!(photon.is_consumed());
        prop_assert!(measure(&mut photon, basis, &mut rng).is_err());
    }

    #[test]
    fn commitments_open_to_their_value(values in proptest::collection::vec(any::<bool>(), 1..40)) {
        let mut ledger = CommitmentLedger::new();
        let handles: Vec<_> = values.iter().map(|&v| ledger.commit(v)).collect();
        for (h, &v) in handles.iter().zip(&values).rev() {
            let opening = ledger.unveil(*h).unwrap();
            prop_assert_eq!(opening.value, v);
            prop_assert_eq!(opening.verdict, Verdict::Accepted);
            prop_assert!(ledger.unveil(*h).is_err());
        }
    }

    #[test]
    fn forgeries_need_a_different_value(value: bool, seed: u64) {
        let mut ledger = CommitmentLedger::new();
        let cheat = CheatModel::new(0.5).unwrap();
        let mut rng = RandomSource::new(seed);
        let h = ledger.commit(value);
        prop_assert!(ledger.cheat_unveil(h, value, cheat, &mut rng).is_err());
        prop_assert!(!ledger.is_opened(h));
        let opening = ledger.cheat_unveil(h, !value, cheat, &mut rng).unwrap();
        prop_assert_eq!(opening.value, !value);
        prop_assert!(ledger.is_opened(h));
    }

    #[test]
    fn completed_runs_recover_the_chosen_bits(p in small_admissible(), seed: u64) {
        let mut rng = RandomSource::new(seed);
        let inputs = InputBits::random(&p, &mut rng);
        let choices = ChoiceVector::random(&p, &mut rng);
        let outcome = run_protocol(&p, &inputs, &choices, seed).unwrap();
        match outcome.status {
            TrialStatus::Completed => {
                prop_assert_eq!(outcome.recovered.len(), p.choice_count());
                for (&label, &bit) in &outcome.recovered {
                    prop_assert!(choices.contains(label));
                    prop_assert_eq!(bit, inputs.get(label));
                }
            }
            TrialStatus::AbortInsufficientMatches => prop_assert!(outcome.recovered.is_empty()),
            other => prop_assert!(false, "honest run ended with {:?}", other),
        }
    }

    #[test]
    fn runs_replay_identically(p in small_admissible(), seed: u64) {
        let mut rng = RandomSource::new(seed);
        let inputs = InputBits::random(&p, &mut rng);
        let choices = ChoiceVector::random(&p, &mut rng);
        let a = run_protocol(&p, &inputs, &choices, seed).unwrap();
        let b = run_protocol(&p, &inputs, &choices, seed).unwrap();
        prop_assert_eq!(a.transcript.to_jsonl(), b.transcript.to_jsonl());
        prop_assert_eq!(a.recovered, b.recovered);
    }

    #[test]
    fn overlapping_families_are_rejected(p in small_admissible(), a in 0usize..64, b in 0usize..64) {
        let (n, s) = (p.bit_count(), p.subset_size());
        let survivors: Vec<usize> = (0..n * s).collect();
        let mut subsets: Vec<Vec<usize>> = survivors.chunks(s).map(<[usize]>::to_vec).collect();
        let removed = {
            let mut r = vec![false; p.slot_count()];
            for flag in r.iter_mut().skip(n * s) {
                *flag = true;
            }
            r
        };
        prop_assert!(SubsetFamily::new(subsets.clone()).check_legal(&p, &removed).is_ok());
        let (i, j) = (a % n, b % n);
        prop_assume!(i != j);
        subsets[i][0] = subsets[j][0];
        prop_assert!(SubsetFamily::new(subsets).check_legal(&p, &removed).is_err());
    }
}
