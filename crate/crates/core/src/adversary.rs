//! Dishonest-party strategies plugged into the honest protocol session.
//!
//! Every Bob variant implements [`BobStrategy`] and runs against an unmodified
//! Alice, so her checks apply in full. Information gain is measured from ground
//! truth: a bit counts as learned only when Bob's output for it is certain.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{self, Basis, ChannelError, Photon, RandomSource};
use crate::commitment::{CheatModel, CommitmentLedger, Verdict};
use crate::params::{ProtocolParams, RateCase};
use crate::protocol::{
    fill_unlabelled, pick, select_subsets, AbortReason, BobSide, BobStrategy, BobView, ChoiceVector, Execution,
    HonestBob, InputBits, Message, Party, ProtocolError, RemovalCheck, Session, SessionConfig, SubsetFamily,
    Transcript, TrialRng, TrialStatus,
};

/// Which party deviates, and how.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    HonestBob,
    /// Announces as many all-matching subsets as it can and decodes all of them.
    GreedyBob,
    /// Removes mismatched slots in the low-rate case, then behaves greedily.
    DishonestRemovalBob { check: RemovalCheck },
    /// Keeps photons unmeasured and commits to guesses.
    PostponeBob,
    /// Forges unveils against the weak commitment.
    CommitCheatBob { cheat: CheatModel },
    /// Honest Bob; Alice tries to infer his choices from her view.
    CuriousAlice,
}

impl Strategy {
    pub fn tag(&self) -> &'static str {
        match self {
            Strategy::HonestBob => "honest",
            Strategy::GreedyBob => "greedy",
            Strategy::DishonestRemovalBob { .. } => "dishonest-removal",
            Strategy::PostponeBob => "postpone",
            Strategy::CommitCheatBob { .. } => "commit-cheat",
            Strategy::CuriousAlice => "curious-alice",
        }
    }

    fn removal_check(&self) -> RemovalCheck {
        match self {
            Strategy::DishonestRemovalBob { check } => *check,
            _ => RemovalCheck::Literal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialOutcome {
    pub strategy: String,
    pub status: TrialStatus,
    /// An Alice check fired.
    pub caught: bool,
    /// Alice's bits Bob output correctly and with certainty.
    pub bits_learned: usize,
    /// `bits_learned > m`.
    pub target_exceeded: bool,
    /// Completed and every chosen bit recovered correctly.
    pub correct_output: bool,
    /// CuriousAlice's inferred choices.
    pub choice_guess: Option<Vec<usize>>,
    pub guess_correct: Option<bool>,
}

impl AdversarialOutcome {
    fn new(strategy: &Strategy, status: TrialStatus, bits_learned: usize, m: usize) -> Self {
        Self {
            strategy: strategy.tag().to_string(),
            status,
            caught: status == TrialStatus::AbortCheatDetected,
            bits_learned,
            target_exceeded: bits_learned > m,
            correct_output: false,
            choice_guess: None,
            guess_correct: None,
        }
    }
}

/// Runs one trial with the given party replaced by `strategy`.
pub fn run_with_adversary(
    strategy: &Strategy,
    params: &ProtocolParams,
    inputs: &InputBits,
    choices: &ChoiceVector,
    rngs: TrialRng,
) -> Result<AdversarialOutcome, ProtocolError> {
    trace_with_adversary(strategy, params, inputs, choices, rngs).map(|(o, _)| o)
}

/// [`run_with_adversary`], also returning the session transcript. The
/// commitment attack runs outside a session and has none.
pub fn trace_with_adversary(
    strategy: &Strategy,
    params: &ProtocolParams,
    inputs: &InputBits,
    choices: &ChoiceVector,
    mut rngs: TrialRng,
) -> Result<(AdversarialOutcome, Option<Transcript>), ProtocolError> {
    let bob: &dyn BobStrategy = match strategy {
        Strategy::HonestBob | Strategy::CuriousAlice => &HonestBob,
        Strategy::GreedyBob => &GreedyBob,
        Strategy::DishonestRemovalBob { .. } => {
            if params.case() != RateCase::Low {
                return Err(ProtocolError::InvalidChoices(
                    "dishonest removal applies to the low-rate case only".into(),
                ));
            }
            &DishonestRemovalBob
        }
        Strategy::PostponeBob => &PostponeBob,
        Strategy::CommitCheatBob { cheat } => return Ok((commit_cheat_bob(params, *cheat, &mut rngs.bob), None)),
    };
    let config = SessionConfig {
        removal_check: strategy.removal_check(),
        ..SessionConfig::default()
    };
    let exec = Session::new(params, inputs, choices, bob)
        .with_config(config)
        .run(rngs.clone())?;
    let status = exec.outcome.status;
    let mut outcome = AdversarialOutcome::new(strategy, status, certain_bits(&exec, inputs), params.choice_count());
    outcome.correct_output = status == TrialStatus::Completed
        && choices
            .as_slice()
            .iter()
            .all(|&c| exec.outcome.recovered.get(&c) == Some(&inputs.get(c)));
    if let Strategy::CuriousAlice = strategy {
        let guess = curious_alice_guess(&exec, params, &mut rngs.inputs);
        outcome.guess_correct = Some(choices.same_set(&guess));
        outcome.choice_guess = Some(guess);
    }
    Ok((outcome, Some(exec.outcome.transcript)))
}

/// Labels Bob unmasked whose subsets he knows in full, and whose output is right.
fn certain_bits(exec: &Execution, inputs: &InputBits) -> usize {
    let Some(family) = &exec.family else { return 0 };
    exec.bob_outputs
        .iter()
        .filter(|(&label, &bit)| {
            family.subset(label).iter().all(|&s| exec.records[s].bob_knows_bit()) && bit == inputs.get(label)
        })
        .count()
}

/// Decodes every subset it can; the chosen ones come first.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyBob;

impl BobStrategy for GreedyBob {
    fn choose_family(
        &self,
        view: &BobView<'_>,
        params: &ProtocolParams,
        choices: &ChoiceVector,
        rng: &mut RandomSource,
    ) -> Result<SubsetFamily, AbortReason> {
        match greedy_bob_subsets(view, params, choices, rng) {
            Some(family) => Ok(family),
            None => select_subsets(view, params, choices, rng),
        }
    }

    fn decode_targets(&self, view: &BobView<'_>, family: &SubsetFamily, _: &ChoiceVector) -> Vec<usize> {
        fully_known(view, family)
    }
}

fn fully_known(view: &BobView<'_>, family: &SubsetFamily) -> Vec<usize> {
    (1..=family.len())
        .filter(|&label| family.subset(label).iter().all(|&s| view.knows(s)))
        .collect()
}

/// A legal-looking family with as many all-known subsets as possible, at least
/// `m+1`. The chosen labels are always among them. `None` when fewer than
/// `m+1` subsets can be filled.
pub fn greedy_bob_subsets(
    view: &BobView<'_>,
    params: &ProtocolParams,
    choices: &ChoiceVector,
    rng: &mut RandomSource,
) -> Option<SubsetFamily> {
    let n = params.bit_count();
    let size = params.subset_size();
    let (mut known, unknown): (Vec<usize>, Vec<usize>) = view.survivors().partition(|&s| view.knows(s));
    let filled = (known.len() / size).min(n);
    if filled <= choices.len() {
        return None;
    }
    let mut others: Vec<usize> = (1..=n).filter(|&k| !choices.contains(k)).collect();
    others.shuffle(rng);
    let labels: Vec<usize> = choices
        .as_slice()
        .iter()
        .copied()
        .chain(others.into_iter().take(filled - choices.len()))
        .collect();
    known.shuffle(rng);
    let mut subsets = vec![Vec::new(); n];
    for (i, &label) in labels.iter().enumerate() {
        subsets[label - 1] = known[i * size..(i + 1) * size].to_vec();
    }
    let mut rest: Vec<usize> = known[filled * size..].iter().copied().chain(unknown).collect();
    rest.shuffle(rng);
    fill_unlabelled(&mut subsets, &rest, size);
    Some(SubsetFamily::new(subsets))
}

/// Keeps matches by discarding mismatched slots in the low-rate case.
#[derive(Debug, Clone, Copy, Default)]
pub struct DishonestRemovalBob;

impl BobStrategy for DishonestRemovalBob {
    fn choose_removals(&self, view: &BobView<'_>, params: &ProtocolParams, rng: &mut RandomSource) -> Result<Vec<usize>, AbortReason> {
        Ok(dishonest_removal(view, params, rng))
    }

    fn choose_family(
        &self,
        view: &BobView<'_>,
        params: &ProtocolParams,
        choices: &ChoiceVector,
        rng: &mut RandomSource,
    ) -> Result<SubsetFamily, AbortReason> {
        GreedyBob.choose_family(view, params, choices, rng)
    }

    fn decode_targets(&self, view: &BobView<'_>, family: &SubsetFamily, choices: &ChoiceVector) -> Vec<usize> {
        GreedyBob.decode_targets(view, family, choices)
    }
}

/// `x` slots, mismatched ones first, topped up with random matched ones.
pub fn dishonest_removal(view: &BobView<'_>, params: &ProtocolParams, rng: &mut RandomSource) -> Vec<usize> {
    let x = params.removal_count();
    let (matched, mut mismatched): (Vec<usize>, Vec<usize>) = view.survivors().partition(|&s| view.claims_match(s));
    mismatched.shuffle(rng);
    let mut chosen: Vec<usize> = mismatched.into_iter().take(x).collect();
    let short = x - chosen.len();
    if short > 0 {
        chosen.extend(pick(&matched, short.min(matched.len()), rng).unwrap_or_default());
    }
    chosen.sort_unstable();
    chosen
}

/// Commits to random guesses and measures only after the bases are announced.
#[derive(Debug, Clone, Copy, Default)]
pub struct PostponeBob;

impl BobStrategy for PostponeBob {
    fn receive(&self, photon: Photon, bob_rng: &mut RandomSource, _: &mut RandomSource) -> Result<BobSide, ChannelError> {
        Ok(BobSide {
            bit: bob_rng.random_bit(),
            basis: Some(Basis::random(bob_rng)),
            measured: false,
            stored: Some(photon),
            ..BobSide::default()
        })
    }

    fn after_bases(&self, bob: &mut BobSide, announced: Basis, channel_rng: &mut RandomSource) -> Result<(), ChannelError> {
        if let Some(mut photon) = bob.stored.take() {
            let bit = channel::measure(&mut photon, announced, channel_rng)?;
            bob.learned = Some((bit, announced));
        }
        Ok(())
    }

    /// Only slots whose opened guesses will pass Alice's check.
    fn choose_removals(&self, view: &BobView<'_>, params: &ProtocolParams, rng: &mut RandomSource) -> Result<Vec<usize>, AbortReason> {
        let eligible: Vec<usize> = view
            .survivors()
            .filter(|&s| match params.case() {
                RateCase::Low => view.claims_match(s) && view.bob(s).learned.map(|(b, _)| b) == Some(view.bob(s).bit),
                RateCase::High => !view.claims_match(s),
            })
            .collect();
        pick(&eligible, params.removal_count(), rng).ok_or(AbortReason::InsufficientMatches)
    }

    fn decode_targets(&self, view: &BobView<'_>, family: &SubsetFamily, _: &ChoiceVector) -> Vec<usize> {
        fully_known(view, family)
    }
}

/// PostponeBob against random inputs and choices drawn from the trial's input stream.
pub fn postpone_bob(params: &ProtocolParams, mut rngs: TrialRng) -> Result<AdversarialOutcome, ProtocolError> {
    let inputs = InputBits::random(params, &mut rngs.inputs);
    let choices = ChoiceVector::random(params, &mut rngs.inputs);
    run_with_adversary(&Strategy::PostponeBob, params, &inputs, &choices, rngs)
}

/// Tries to flip `(N-x)/n` committed bits so that one more subset decodes.
/// Succeeds only if every forged unveil is accepted.
pub fn commit_cheat_bob(params: &ProtocolParams, cheat: CheatModel, rng: &mut RandomSource) -> AdversarialOutcome {
    let strategy = Strategy::CommitCheatBob { cheat };
    let m = params.choice_count();
    let mut ledger = CommitmentLedger::new();
    let mut success = true;
    for _ in 0..params.subset_size() {
        let committed = rng.random_bit();
        let handle = ledger.commit(committed);
        let opening = ledger
            .cheat_unveil(handle, !committed, cheat, rng)
            .expect("fresh handle with a differing value");
        if opening.verdict == Verdict::Rejected {
            success = false;
            break;
        }
    }
    let status = if success {
        TrialStatus::Completed
    } else {
        TrialStatus::AbortCheatDetected
    };
    let mut outcome = AdversarialOutcome::new(&strategy, status, m + usize::from(success), m);
    outcome.correct_output = success;
    outcome
}

/// Alice's guess at Bob's choices from her own view: the labels of the subsets
/// holding the lowest-numbered surviving slots. Random when the run aborted
/// before the family was announced.
pub fn curious_alice_guess(exec: &Execution, params: &ProtocolParams, rng: &mut RandomSource) -> Vec<usize> {
    let family = exec.outcome.transcript.view_of(Party::Alice).find_map(|r| match &r.message {
        Message::Subsets { subsets } => Some(SubsetFamily::new(subsets.clone())),
        _ => None,
    });
    let Some(family) = family else {
        return ChoiceVector::random(params, rng).as_slice().to_vec();
    };
    let mut guess = Vec::new();
    for slot in 0..params.slot_count() {
        if let Some(label) = family.label_of(slot) {
            if !guess.contains(&label) {
                guess.push(label);
            }
        }
        if guess.len() == params.choice_count() {
            break;
        }
    }
    guess.sort_unstable();
    guess
}

/// Positive control: packs the chosen subsets with the lowest-numbered known
/// slots, which leaks the choice through the announced family.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicographicBob;

impl BobStrategy for LexicographicBob {
    fn choose_family(
        &self,
        view: &BobView<'_>,
        params: &ProtocolParams,
        choices: &ChoiceVector,
        rng: &mut RandomSource,
    ) -> Result<SubsetFamily, AbortReason> {
        let size = params.subset_size();
        let known: Vec<usize> = view.survivors().filter(|&s| view.knows(s)).collect();
        let needed = choices.len() * size;
        if known.len() < needed {
            return Err(AbortReason::InsufficientMatches);
        }
        let mut subsets = vec![Vec::new(); params.bit_count()];
        for (i, &label) in choices.as_slice().iter().enumerate() {
            subsets[label - 1] = known[i * size..(i + 1) * size].to_vec();
        }
        let mut rest: Vec<usize> = view.survivors().filter(|s| !known[..needed].contains(s)).collect();
        rest.shuffle(rng);
        fill_unlabelled(&mut subsets, &rest, size);
        Ok(SubsetFamily::new(subsets))
    }
}
