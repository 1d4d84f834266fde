//! The m-out-of-n oblivious transfer protocol over the BB84 channel.
//!
//! A [`Session`] drives both parties through the seven steps:
//!
//! 1. Alice sends `2N` photons with random bits and bases; Bob measures each in a
//!    random basis.
//! 2. For each pair `(i, N+i)` Bob commits to both measured bits and bases, Alice
//!    flips a challenge coin, Bob opens one of the two and Alice checks that a
//!    basis match implies a bit match. The unopened index survives in slot `i`.
//! 3. Alice announces her bases for the `N` surviving slots.
//! 4. Bob discards `x` slots (matching ones in the low-rate case, mismatching
//!    ones otherwise) and opens them for Alice to check.
//! 5. Bob announces `n` disjoint subsets of size `(N-x)/n`, every chosen one
//!    consisting of matching slots only.
//! 6. Alice masks each input bit with the parity of her bits over its subset.
//! 7. Bob unmasks the chosen bits with his own measured bits.
//!
//! Bob's decisions go through [`BobStrategy`], so dishonest variants in
//! [`crate::adversary`] reuse the same session with Alice's checks intact. Slot
//! indices are 0-based; subset labels and choices are 1-based.

pub mod transcript;

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, Basis, Channel, ChannelError, Photon, RandomSource};
use crate::commitment::{CommitmentError, CommitmentHandle, CommitmentLedger, Verdict};
use crate::params::{ProtocolParams, RateCase};

pub use transcript::{CommitTarget, Message, Party, Record, Transcript};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("out-of-order {kind} message at step {step}: {detail}")]
    OutOfOrder {
        step: u8,
        kind: &'static str,
        detail: &'static str,
    },
    #[error("malformed transcript line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("invalid choice vector: {0}")]
    InvalidChoices(String),
    #[error("expected {expected} input bits, got {found}")]
    InvalidInputs { expected: usize, found: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Commitment(#[from] CommitmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    InsufficientMatches,
    CheatDetected,
    InvalidMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    AbortInsufficientMatches,
    AbortCheatDetected,
    AbortInvalidMessage,
}

impl From<AbortReason> for TrialStatus {
    fn from(r: AbortReason) -> Self {
        match r {
            AbortReason::InsufficientMatches => TrialStatus::AbortInsufficientMatches,
            AbortReason::CheatDetected => TrialStatus::AbortCheatDetected,
            AbortReason::InvalidMessage => TrialStatus::AbortInvalidMessage,
        }
    }
}

/// Why a phase stopped: a protocol abort, or a simulator fault.
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseError {
    Abort(AbortReason),
    Fault(ProtocolError),
}

impl From<ProtocolError> for PhaseError {
    fn from(e: ProtocolError) -> Self {
        match e {
            ProtocolError::OutOfOrder { .. } => PhaseError::Abort(AbortReason::InvalidMessage),
            other => PhaseError::Fault(other),
        }
    }
}

impl From<CommitmentError> for PhaseError {
    fn from(e: CommitmentError) -> Self {
        PhaseError::Fault(e.into())
    }
}

impl From<ChannelError> for PhaseError {
    fn from(e: ChannelError) -> Self {
        PhaseError::Fault(e.into())
    }
}

/// Bob's `m` distinct choices, each in `1..=n`, kept in the order given.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChoiceVector(Vec<usize>);

impl ChoiceVector {
    pub fn new(choices: Vec<usize>, params: &ProtocolParams) -> Result<Self, ProtocolError> {
        let n = params.bit_count();
        if choices.len() != params.choice_count() {
            return Err(ProtocolError::InvalidChoices(format!(
                "expected {} choices, got {}",
                params.choice_count(),
                choices.len()
            )));
        }
        if let Some(c) = choices.iter().find(|&&c| c == 0 || c > n) {
            return Err(ProtocolError::InvalidChoices(format!("choice {c} outside 1..={n}")));
        }
        let mut sorted = choices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != choices.len() {
            return Err(ProtocolError::InvalidChoices("choices must be distinct".into()));
        }
        Ok(Self(choices))
    }

    /// Uniform `m`-subset of `1..=n`, ascending.
    pub fn random(params: &ProtocolParams, rng: &mut RandomSource) -> Self {
        let mut picked: Vec<usize> = index::sample(rng, params.bit_count(), params.choice_count())
            .into_iter()
            .map(|i| i + 1)
            .collect();
        picked.sort_unstable();
        Self(picked)
    }

    /// Every ascending `m`-subset of `1..=n`, in lexicographic order.
    pub fn all(params: &ProtocolParams) -> Vec<Self> {
        fn rec(start: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<ChoiceVector>) {
            if left == 0 {
                out.push(ChoiceVector(cur.clone()));
                return;
            }
            for c in start..=n {
                cur.push(c);
                rec(c + 1, n, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(1, params.bit_count(), params.choice_count(), &mut Vec::new(), &mut out);
        out
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, label: usize) -> bool {
        self.0.contains(&label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Same choices regardless of order.
    pub fn same_set(&self, other: &[usize]) -> bool {
        let mut a = self.0.clone();
        let mut b = other.to_vec();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}

/// Alice's `n` input bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputBits(Vec<bool>);

impl InputBits {
    pub fn new(bits: Vec<bool>, params: &ProtocolParams) -> Result<Self, ProtocolError> {
        if bits.len() != params.bit_count() {
            return Err(ProtocolError::InvalidInputs {
                expected: params.bit_count(),
                found: bits.len(),
            });
        }
        Ok(Self(bits))
    }

    pub fn random(params: &ProtocolParams, rng: &mut RandomSource) -> Self {
        Self((0..params.bit_count()).map(|_| rng.random_bit()).collect())
    }

    /// Bit `b_label`, 1-based.
    pub fn get(&self, label: usize) -> bool {
        self.0[label - 1]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliceSide {
    pub bit: bool,
    pub basis: Basis,
}

/// Bob's private state for one index. `bit`/`basis` are the values he commits to.
#[derive(Debug, Default)]
pub struct BobSide {
    pub bit: bool,
    pub basis: Option<Basis>,
    /// Whether `bit` came from measuring the photon in `basis`.
    pub measured: bool,
    /// A photon kept unmeasured.
    pub stored: Option<Photon>,
    /// Bit obtained later by measuring a stored photon, with the basis used.
    pub learned: Option<(bool, Basis)>,
    pub bit_commitment: Option<CommitmentHandle>,
    pub basis_commitment: Option<CommitmentHandle>,
}

impl BobSide {
    pub fn committed_basis(&self) -> Basis {
        self.basis.expect("basis is set on arrival")
    }

    /// The bit Bob will use for unmasking.
    pub fn working_bit(&self) -> bool {
        self.learned.map_or(self.bit, |(b, _)| b)
    }
}

/// One photon index, joined across both parties. This is the simulator's ground
/// truth; each party only ever reads its own side.
#[derive(Debug)]
pub struct IndexRecord {
    /// Original photon index in `0..2N`.
    pub index: usize,
    pub alice: AliceSide,
    pub bob: BobSide,
    pub removed: bool,
}

impl IndexRecord {
    /// Alice's basis equals the basis Bob committed to.
    pub fn is_match(&self) -> bool {
        self.bob.basis == Some(self.alice.basis)
    }

    /// Whether Bob's working bit is guaranteed to equal Alice's bit.
    pub fn bob_knows_bit(&self) -> bool {
        match self.bob.learned {
            Some((_, basis)) => basis == self.alice.basis,
            None => self.bob.measured && self.is_match(),
        }
    }
}

/// What Bob can see after the bases are announced.
pub struct BobView<'a> {
    records: &'a [IndexRecord],
    announced: &'a [Basis],
}

impl<'a> BobView<'a> {
    pub fn new(records: &'a [IndexRecord], announced: &'a [Basis]) -> Self {
        assert_eq!(records.len(), announced.len());
        Self { records, announced }
    }

    pub fn slot_count(&self) -> usize {
        self.records.len()
    }

    pub fn bob(&self, slot: usize) -> &BobSide {
        &self.records[slot].bob
    }

    pub fn announced(&self, slot: usize) -> Basis {
        self.announced[slot]
    }

    /// Bob's committed basis equals Alice's announced one.
    pub fn claims_match(&self, slot: usize) -> bool {
        self.records[slot].bob.basis == Some(self.announced[slot])
    }

    /// Bob holds Alice's bit for this slot with certainty.
    pub fn knows(&self, slot: usize) -> bool {
        let bob = &self.records[slot].bob;
        match bob.learned {
            Some((_, basis)) => basis == self.announced[slot],
            None => bob.measured && self.claims_match(slot),
        }
    }

    pub fn is_removed(&self, slot: usize) -> bool {
        self.records[slot].removed
    }

    pub fn survivors(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.records.len()).filter(|&s| !self.records[s].removed)
    }
}

/// `I_1..I_n`, each a sorted list of slots.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubsetFamily(Vec<Vec<usize>>);

impl SubsetFamily {
    pub fn new(mut subsets: Vec<Vec<usize>>) -> Self {
        for s in &mut subsets {
            s.sort_unstable();
        }
        Self(subsets)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `I_label`, 1-based.
    pub fn subset(&self, label: usize) -> &[usize] {
        &self.0[label - 1]
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.0
    }

    /// Label of the subset holding `slot`.
    pub fn label_of(&self, slot: usize) -> Option<usize> {
        self.0.iter().position(|s| s.contains(&slot)).map(|i| i + 1)
    }

    /// Structural legality: `n` pairwise disjoint subsets of the required size
    /// that exactly cover the non-removed slots.
    pub fn check_legal(&self, params: &ProtocolParams, removed: &[bool]) -> Result<(), String> {
        if self.0.len() != params.bit_count() {
            return Err(format!("expected {} subsets, got {}", params.bit_count(), self.0.len()));
        }
        let mut seen = vec![false; removed.len()];
        for (k, subset) in self.0.iter().enumerate() {
            if subset.len() != params.subset_size() {
                return Err(format!(
                    "subset {} has {} slots, expected {}",
                    k + 1,
                    subset.len(),
                    params.subset_size()
                ));
            }
            for &slot in subset {
                if slot >= removed.len() {
                    return Err(format!("slot {slot} out of range"));
                }
                if removed[slot] {
                    return Err(format!("slot {slot} was removed"));
                }
                if std::mem::replace(&mut seen[slot], true) {
                    return Err(format!("slot {slot} appears twice"));
                }
            }
        }
        if let Some(slot) = (0..removed.len()).find(|&s| !removed[s] && !seen[s]) {
            return Err(format!("surviving slot {slot} is not covered"));
        }
        Ok(())
    }

    /// Every slot of `I_label` is a true basis match.
    pub fn is_all_matching(&self, label: usize, records: &[IndexRecord]) -> bool {
        self.subset(label).iter().all(|&s| records[s].is_match())
    }
}

/// `b̂_1..b̂_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaskedBits(Vec<bool>);

impl MaskedBits {
    pub fn get(&self, label: usize) -> bool {
        self.0[label - 1]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// Alice's rule for checking removal unveils in the low-rate case.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalCheck {
    /// Only the implication "bases match ⇒ bits match".
    #[default]
    Literal,
    /// Additionally reject removed slots whose bases do not match.
    Strict,
}

/// Per-trial random streams, one per role.
#[derive(Debug, Clone)]
pub struct TrialRng {
    pub alice: RandomSource,
    pub bob: RandomSource,
    pub channel: RandomSource,
    pub inputs: RandomSource,
}

impl TrialRng {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self {
            alice: RandomSource::for_trial(seed, "alice", trial),
            bob: RandomSource::for_trial(seed, "bob", trial),
            channel: RandomSource::for_trial(seed, "channel", trial),
            inputs: RandomSource::for_trial(seed, "inputs", trial),
        }
    }
}

/// Bob's decision points. The defaults are the honest protocol.
pub trait BobStrategy: Sync {
    /// Step 1: handle an arriving photon.
    fn receive(&self, photon: Photon, bob_rng: &mut RandomSource, channel_rng: &mut RandomSource) -> Result<BobSide, ChannelError> {
        honest_receive(photon, bob_rng, channel_rng)
    }

    /// Called once per surviving slot after step 3.
    fn after_bases(&self, _bob: &mut BobSide, _announced: Basis, _channel_rng: &mut RandomSource) -> Result<(), ChannelError> {
        Ok(())
    }

    /// Step 4.
    fn choose_removals(&self, view: &BobView<'_>, params: &ProtocolParams, rng: &mut RandomSource) -> Result<Vec<usize>, AbortReason> {
        removal_phase(view, params, rng)
    }

    /// Step 5.
    fn choose_family(
        &self,
        view: &BobView<'_>,
        params: &ProtocolParams,
        choices: &ChoiceVector,
        rng: &mut RandomSource,
    ) -> Result<SubsetFamily, AbortReason> {
        select_subsets(view, params, choices, rng)
    }

    /// Step 7: which masked bits to unmask.
    fn decode_targets(&self, _view: &BobView<'_>, _family: &SubsetFamily, choices: &ChoiceVector) -> Vec<usize> {
        choices.as_slice().to_vec()
    }
}

/// Bob following the protocol.
#[derive(Debug, Clone, Copy, Default)]
pub struct HonestBob;

impl BobStrategy for HonestBob {}

/// Measure in a fresh random basis.
pub fn honest_receive(mut photon: Photon, bob_rng: &mut RandomSource, channel_rng: &mut RandomSource) -> Result<BobSide, ChannelError> {
    let basis = Basis::random(bob_rng);
    let bit = channel::measure(&mut photon, basis, channel_rng)?;
    Ok(BobSide {
        bit,
        basis: Some(basis),
        measured: true,
        ..BobSide::default()
    })
}

/// Step 1: `2N` photons from Alice, each handled by Bob's strategy.
pub fn phase1_transmit(
    params: &ProtocolParams,
    bob: &dyn BobStrategy,
    line: &Channel,
    rngs: &mut TrialRng,
    transcript: &mut Transcript,
) -> Result<Vec<IndexRecord>, PhaseError> {
    let mut records = Vec::with_capacity(params.photon_count());
    for index in 0..params.photon_count() {
        let alice = AliceSide {
            bit: rngs.alice.random_bit(),
            basis: Basis::random(&mut rngs.alice),
        };
        let photon = line.transmit(channel::encode(alice.bit, alice.basis), &mut rngs.channel);
        transcript.send(Party::Alice, 1, Message::Photon { index })?;
        let bob_side = bob.receive(photon, &mut rngs.bob, &mut rngs.channel)?;
        records.push(IndexRecord {
            index,
            alice,
            bob: bob_side,
            removed: false,
        });
    }
    Ok(records)
}

fn commit_record(
    record: &mut IndexRecord,
    ledger: &mut CommitmentLedger,
    transcript: &mut Transcript,
) -> Result<(), PhaseError> {
    let bit = ledger.commit(record.bob.bit);
    let basis = ledger.commit(record.bob.committed_basis().bit());
    record.bob.bit_commitment = Some(bit);
    record.bob.basis_commitment = Some(basis);
    for (id, target) in [(bit, CommitTarget::Bit), (basis, CommitTarget::Basis)] {
        transcript.send(
            Party::Bob,
            2,
            Message::Commit {
                id,
                index: record.index,
                target,
            },
        )?;
    }
    Ok(())
}

/// Bob opens both commitments of `record`; returns the accepted `(bit, basis)`.
fn open_record(
    record: &IndexRecord,
    step: u8,
    ledger: &mut CommitmentLedger,
    transcript: &mut Transcript,
) -> Result<Option<(bool, Basis)>, PhaseError> {
    let mut values = [false; 2];
    let mut accepted = true;
    let handles = [
        (record.bob.bit_commitment, CommitTarget::Bit),
        (record.bob.basis_commitment, CommitTarget::Basis),
    ];
    for (slot, (handle, target)) in handles.into_iter().enumerate() {
        let id = handle.ok_or(PhaseError::Abort(AbortReason::InvalidMessage))?;
        let opening = ledger.unveil(id)?;
        transcript.send(
            Party::Bob,
            step,
            Message::Unveil {
                id,
                index: record.index,
                target,
                value: u8::from(opening.value),
                verdict: opening.verdict,
            },
        )?;
        values[slot] = opening.value;
        accepted &= opening.verdict == Verdict::Accepted;
    }
    Ok(accepted.then(|| (values[0], Basis::from_bit(values[1]))))
}

fn abort(transcript: &mut Transcript, from: Party, step: u8, reason: AbortReason) -> PhaseError {
    // The log may already be closed if the fault came from the log itself.
    let _ = transcript.send(from, step, Message::Abort { reason });
    PhaseError::Abort(reason)
}

/// Step 2: commit, challenge, open and check each pair; keeps the unopened
/// index of every pair, so `records` shrinks from `2N` to `N`.
///
/// Slot `i` ends up holding original index `i` when the coin is 1 and `N+i`
/// when it is 0.
pub fn phase2_challenge(
    records: &mut Vec<IndexRecord>,
    ledger: &mut CommitmentLedger,
    transcript: &mut Transcript,
    alice_rng: &mut RandomSource,
) -> Result<(), PhaseError> {
    let pairs = records.len() / 2;
    let mut pool: Vec<Option<IndexRecord>> = records.drain(..).map(Some).collect();
    let mut survivors = Vec::with_capacity(pairs);
    for slot in 0..pairs {
        for idx in [slot, pairs + slot] {
            commit_record(pool[idx].as_mut().expect("unused"), ledger, transcript)?;
        }
        let d = alice_rng.random_bit();
        transcript.send(Party::Alice, 2, Message::Challenge { slot, d: u8::from(d) })?;
        let opened = if d { pairs + slot } else { slot };
        let kept = if d { slot } else { pairs + slot };
        let challenged = pool[opened].take().expect("unused");
        match open_record(&challenged, 2, ledger, transcript)? {
            None => return Err(abort(transcript, Party::Alice, 2, AbortReason::CheatDetected)),
            Some((bit, basis)) => {
                if basis == challenged.alice.basis && bit != challenged.alice.bit {
                    return Err(abort(transcript, Party::Alice, 2, AbortReason::CheatDetected));
                }
            }
        }
        survivors.push(pool[kept].take().expect("unused"));
    }
    *records = survivors;
    Ok(())
}

/// Step 3.
pub fn announce_bases(records: &[IndexRecord], transcript: &mut Transcript) -> Result<Vec<Basis>, PhaseError> {
    let bases: Vec<Basis> = records.iter().map(|r| r.alice.basis).collect();
    transcript.send(Party::Alice, 3, Message::bases(&bases))?;
    Ok(bases)
}

/// Honest step-4 choice: `x` slots drawn uniformly from the eligible ones
/// (matching in the low-rate case, mismatching otherwise).
pub fn removal_phase(view: &BobView<'_>, params: &ProtocolParams, rng: &mut RandomSource) -> Result<Vec<usize>, AbortReason> {
    let want_match = params.case() == RateCase::Low;
    let eligible: Vec<usize> = view
        .survivors()
        .filter(|&s| view.claims_match(s) == want_match)
        .collect();
    pick(&eligible, params.removal_count(), rng).ok_or(AbortReason::InsufficientMatches)
}

/// `count` distinct elements of `pool`, uniformly, sorted.
pub(crate) fn pick(pool: &[usize], count: usize, rng: &mut RandomSource) -> Option<Vec<usize>> {
    if pool.len() < count {
        return None;
    }
    let mut chosen: Vec<usize> = index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|i| pool[i])
        .collect();
    chosen.sort_unstable();
    Some(chosen)
}

/// Step 4 as a whole: Bob's choice, the unveils, and Alice's checks.
#[allow(clippy::too_many_arguments)]
pub fn phase4_removal(
    records: &mut [IndexRecord],
    announced: &[Basis],
    params: &ProtocolParams,
    bob: &dyn BobStrategy,
    check: RemovalCheck,
    ledger: &mut CommitmentLedger,
    transcript: &mut Transcript,
    bob_rng: &mut RandomSource,
) -> Result<Vec<usize>, PhaseError> {
    let x = params.removal_count();
    if x == 0 {
        return Ok(Vec::new());
    }
    let chosen = bob
        .choose_removals(&BobView::new(records, announced), params, bob_rng)
        .map_err(|reason| abort(transcript, Party::Bob, 4, reason))?;

    for &slot in &chosen {
        transcript.send(Party::Bob, 4, Message::Removal { index: slot })?;
        if slot >= records.len() || records[slot].removed {
            return Err(abort(transcript, Party::Alice, 4, AbortReason::InvalidMessage));
        }
        let Some((bit, basis)) = open_record(&records[slot], 4, ledger, transcript)? else {
            return Err(abort(transcript, Party::Alice, 4, AbortReason::CheatDetected));
        };
        let alice = records[slot].alice;
        let ok = match params.case() {
            RateCase::Low => {
                let implication = basis != alice.basis || bit == alice.bit;
                match check {
                    RemovalCheck::Literal => implication,
                    RemovalCheck::Strict => implication && basis == alice.basis,
                }
            }
            RateCase::High => basis != alice.basis,
        };
        if !ok {
            return Err(abort(transcript, Party::Alice, 4, AbortReason::CheatDetected));
        }
        records[slot].removed = true;
    }
    if chosen.len() != x {
        return Err(abort(transcript, Party::Alice, 4, AbortReason::InvalidMessage));
    }
    Ok(chosen)
}

/// Honest step-5 choice: a uniformly random legal family. The chosen subsets are
/// filled from a shuffle of the known slots; everything left is shuffled into
/// the remaining subsets.
pub fn select_subsets(
    view: &BobView<'_>,
    params: &ProtocolParams,
    choices: &ChoiceVector,
    rng: &mut RandomSource,
) -> Result<SubsetFamily, AbortReason> {
    let size = params.subset_size();
    let (mut known, unknown): (Vec<usize>, Vec<usize>) = view.survivors().partition(|&s| view.knows(s));
    let needed = choices.len() * size;
    if known.len() < needed {
        return Err(AbortReason::InsufficientMatches);
    }
    known.shuffle(rng);
    let mut subsets = vec![Vec::new(); params.bit_count()];
    for (i, &label) in choices.as_slice().iter().enumerate() {
        subsets[label - 1] = known[i * size..(i + 1) * size].to_vec();
    }
    let mut rest: Vec<usize> = known[needed..].iter().copied().chain(unknown).collect();
    rest.shuffle(rng);
    fill_unlabelled(&mut subsets, &rest, size);
    Ok(SubsetFamily::new(subsets))
}

/// Distributes `rest` in order over the still-empty subsets, by ascending label.
pub(crate) fn fill_unlabelled(subsets: &mut [Vec<usize>], rest: &[usize], size: usize) {
    let mut chunks = rest.chunks(size);
    for subset in subsets.iter_mut().filter(|s| s.is_empty()) {
        *subset = chunks.next().map(<[usize]>::to_vec).unwrap_or_default();
    }
}

/// Step 6: `b̂_k = b_k ⊕ (⊕_{j ∈ J_k} r_j)` using Alice's bits.
pub fn mask_bits(inputs: &InputBits, family: &SubsetFamily, records: &[IndexRecord]) -> MaskedBits {
    MaskedBits(
        family
            .subsets()
            .iter()
            .zip(inputs.as_slice())
            .map(|(subset, &b)| subset.iter().fold(b, |acc, &j| acc ^ records[j].alice.bit))
            .collect(),
    )
}

/// Step 7: `b_k = b̂_k ⊕ (⊕_{j ∈ J_k} r'_j)` for each requested label, using Bob's bits.
pub fn decode(masked: &MaskedBits, family: &SubsetFamily, records: &[IndexRecord], labels: &[usize]) -> BTreeMap<usize, bool> {
    labels
        .iter()
        .map(|&label| {
            let bit = family
                .subset(label)
                .iter()
                .fold(masked.get(label), |acc, &j| acc ^ records[j].bob.working_bit());
            (label, bit)
        })
        .collect()
}

/// Result of one run as the parties see it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub status: TrialStatus,
    /// Bob's outputs for his choices; empty unless completed.
    pub recovered: BTreeMap<usize, bool>,
    pub transcript: Transcript,
}

/// Everything a session produced, including the simulator's ground truth.
#[derive(Debug)]
pub struct Execution {
    pub outcome: TrialOutcome,
    /// `N` slot records, or the original `2N` if the challenge phase aborted.
    pub records: Vec<IndexRecord>,
    pub announced: Vec<Basis>,
    pub removed: Vec<usize>,
    pub family: Option<SubsetFamily>,
    pub masked: Option<MaskedBits>,
    /// Every bit Bob unmasked, by label.
    pub bob_outputs: BTreeMap<usize, bool>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub removal_check: RemovalCheck,
    pub channel: Channel,
}

/// One protocol run between Alice and a Bob strategy.
pub struct Session<'a> {
    params: &'a ProtocolParams,
    inputs: &'a InputBits,
    choices: &'a ChoiceVector,
    bob: &'a dyn BobStrategy,
    config: SessionConfig,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a ProtocolParams, inputs: &'a InputBits, choices: &'a ChoiceVector, bob: &'a dyn BobStrategy) -> Self {
        Self {
            params,
            inputs,
            choices,
            bob,
            config: SessionConfig::default(),
        }
    }

    pub fn with_config(mut self, config: SessionConfig) -> Self {
        self.config = config;
        self
    }

    pub fn run(&self, mut rngs: TrialRng) -> Result<Execution, ProtocolError> {
        let mut exec = Execution {
            outcome: TrialOutcome {
                status: TrialStatus::Completed,
                recovered: BTreeMap::new(),
                transcript: Transcript::new(),
            },
            records: Vec::new(),
            announced: Vec::new(),
            removed: Vec::new(),
            family: None,
            masked: None,
            bob_outputs: BTreeMap::new(),
        };
        let mut ledger = CommitmentLedger::new();
        match self.steps(&mut exec, &mut ledger, &mut rngs) {
            Ok(()) => Ok(exec),
            Err(PhaseError::Abort(reason)) => {
                exec.outcome.status = reason.into();
                exec.outcome.recovered.clear();
                exec.bob_outputs.clear();
                Ok(exec)
            }
            Err(PhaseError::Fault(e)) => Err(e),
        }
    }

    fn steps(&self, exec: &mut Execution, ledger: &mut CommitmentLedger, rngs: &mut TrialRng) -> Result<(), PhaseError> {
        let transcript = &mut exec.outcome.transcript;
        exec.records = phase1_transmit(self.params, self.bob, &self.config.channel, rngs, transcript)?;
        phase2_challenge(&mut exec.records, ledger, transcript, &mut rngs.alice)?;
        exec.announced = announce_bases(&exec.records, transcript)?;
        for (record, &basis) in exec.records.iter_mut().zip(&exec.announced) {
            self.bob.after_bases(&mut record.bob, basis, &mut rngs.channel)?;
        }
        exec.removed = phase4_removal(
            &mut exec.records,
            &exec.announced,
            self.params,
            self.bob,
            self.config.removal_check,
            ledger,
            transcript,
            &mut rngs.bob,
        )?;

        let view = BobView::new(&exec.records, &exec.announced);
        let family = self
            .bob
            .choose_family(&view, self.params, self.choices, &mut rngs.bob)
            .map_err(|reason| abort(transcript, Party::Bob, 5, reason))?;
        transcript.send(
            Party::Bob,
            5,
            Message::Subsets {
                subsets: family.subsets().to_vec(),
            },
        )?;
        let removed: Vec<bool> = exec.records.iter().map(|r| r.removed).collect();
        if family.check_legal(self.params, &removed).is_err() {
            return Err(abort(transcript, Party::Alice, 5, AbortReason::InvalidMessage));
        }

        let masked = mask_bits(self.inputs, &family, &exec.records);
        transcript.send(
            Party::Alice,
            6,
            Message::Masked {
                bits: masked.as_slice().iter().map(|&b| u8::from(b)).collect(),
            },
        )?;

        let targets = self.bob.decode_targets(&view, &family, self.choices);
        exec.bob_outputs = decode(&masked, &family, &exec.records, &targets);
        exec.outcome.recovered = self
            .choices
            .as_slice()
            .iter()
            .filter_map(|&c| exec.bob_outputs.get(&c).map(|&b| (c, b)))
            .collect();
        exec.family = Some(family);
        exec.masked = Some(masked);
        Ok(())
    }
}

/// Honest end-to-end run for trial 0 of `seed`.
pub fn run_protocol(
    params: &ProtocolParams,
    inputs: &InputBits,
    choices: &ChoiceVector,
    seed: u64,
) -> Result<TrialOutcome, ProtocolError> {
    Session::new(params, inputs, choices, &HonestBob)
        .run(TrialRng::new(seed, 0))
        .map(|e| e.outcome)
}

impl Serialize for Transcript {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.records().serialize(s)
    }
}
