//! Weak bit commitment as an ideal functionality.
//!
//! The ledger plays the trusted third party: it stores committed values and
//! answers unveils. Honest unveils always succeed. Binding weakness is injected only
//! through [`CheatModel`], where a forged unveil slips through with probability `p`.
//! The committer in the protocol is Bob.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::RandomSource;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommitmentError {
    #[error("commitment {0} was already opened")]
    AlreadyOpened(u64),
    #[error("unknown commitment {0}")]
    UnknownHandle(u64),
    #[error("forged value equals the committed value of commitment {0}; use an honest unveil")]
    NotAForgery(u64),
    #[error("cheat probability must lie strictly between 0 and 1, got {0}")]
    InvalidCheatProbability(f64),
}

/// Identifier of a lodged commitment. This is all the receiver ever sees before
/// the unveil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitmentHandle(u64);

impl CommitmentHandle {
    pub fn id(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Result of opening a commitment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Opening {
    pub value: bool,
    pub verdict: Verdict,
}

/// Probability that a forged unveil goes undetected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheatModel {
    p: f64,
}

impl CheatModel {
    pub fn new(p: f64) -> Result<Self, CommitmentError> {
        if p > 0.0 && p < 1.0 {
            Ok(Self { p })
        } else {
            Err(CommitmentError::InvalidCheatProbability(p))
        }
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: bool,
    opened: bool,
}

/// One session's commitment ledger. Single writer.
#[derive(Debug, Clone, Default)]
pub struct CommitmentLedger {
    entries: Vec<Entry>,
}

impl CommitmentLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn commit(&mut self, value: bool) -> CommitmentHandle {
        let id = self.entries.len() as u64;
        self.entries.push(Entry { value, opened: false });
        CommitmentHandle(id)
    }

    /// Honest unveil of the committed value.
    pub fn unveil(&mut self, handle: CommitmentHandle) -> Result<Opening, CommitmentError> {
        let entry = self.open(handle)?;
        Ok(Opening {
            value: entry.value,
            verdict: Verdict::Accepted,
        })
    }

    /// Unveil claiming `forged` instead of the committed value. Accepted with
    /// probability `cheat.p()`; the commitment is spent either way.
    pub fn cheat_unveil(
        &mut self,
        handle: CommitmentHandle,
        forged: bool,
        cheat: CheatModel,
        rng: &mut RandomSource,
    ) -> Result<Opening, CommitmentError> {
        let entry = self.entry(handle)?;
        if entry.opened {
            return Err(CommitmentError::AlreadyOpened(handle.0));
        }
        if entry.value == forged {
            return Err(CommitmentError::NotAForgery(handle.0));
        }
        self.open(handle)?;
        let verdict = if rng.bernoulli(cheat.p()) {
            Verdict::Accepted
        } else {
            Verdict::Rejected
        };
        Ok(Opening { value: forged, verdict })
    }

    pub fn is_opened(&self, handle: CommitmentHandle) -> bool {
        self.entry(handle).map(|e| e.opened).unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn entry(&self, handle: CommitmentHandle) -> Result<&Entry, CommitmentError> {
        self.entries
            .get(handle.0 as usize)
            .ok_or(CommitmentError::UnknownHandle(handle.0))
    }

    fn open(&mut self, handle: CommitmentHandle) -> Result<Entry, CommitmentError> {
        let entry = self
            .entries
            .get_mut(handle.0 as usize)
            .ok_or(CommitmentError::UnknownHandle(handle.0))?;
        if entry.opened {
            return Err(CommitmentError::AlreadyOpened(handle.0));
        }
        entry.opened = true;
        Ok(entry.clone())
    }
}
