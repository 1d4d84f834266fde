//! Ordered message log of one protocol session.
//!
//! Serialized as line-delimited JSON, one record per message:
//! `{"seq":..,"step":..,"from":"A"|"B","kind":..,"payload":{..}}`. Payload keys
//! are fixed per kind. The log doubles as the message-ordering state machine:
//! a record that arrives out of protocol order is refused.

use serde::{Deserialize, Serialize};

use crate::channel::Basis;
use crate::commitment::{CommitmentHandle, Verdict};

use super::{AbortReason, ProtocolError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "A")]
    Alice,
    #[serde(rename = "B")]
    Bob,
}

impl Party {
    pub fn other(self) -> Self {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

/// Which of Bob's per-index values a commitment covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommitTarget {
    Bit,
    Basis,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Message {
    /// A photon on the quantum line. Carries no classical content.
    Photon { index: usize },
    /// A sealed commitment: only its identity is visible.
    Commit {
        id: CommitmentHandle,
        index: usize,
        target: CommitTarget,
    },
    /// Alice's challenge coin for pair `slot`.
    Challenge { slot: usize, d: u8 },
    Unveil {
        id: CommitmentHandle,
        index: usize,
        target: CommitTarget,
        value: u8,
        verdict: Verdict,
    },
    CheatUnveil {
        id: CommitmentHandle,
        index: usize,
        target: CommitTarget,
        value: u8,
        verdict: Verdict,
    },
    /// Alice's emission bases for the surviving slots, 0 = rectilinear.
    Bases { bases: Vec<u8> },
    /// Bob discards slot `index`; its unveils follow.
    Removal { index: usize },
    /// `I_1..I_n` as slot lists.
    Subsets { subsets: Vec<Vec<usize>> },
    Masked { bits: Vec<u8> },
    Abort { reason: AbortReason },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Photon { .. } => "photon",
            Message::Commit { .. } => "commit",
            Message::Challenge { .. } => "challenge",
            Message::Unveil { .. } => "unveil",
            Message::CheatUnveil { .. } => "cheat_unveil",
            Message::Bases { .. } => "bases",
            Message::Removal { .. } => "removal",
            Message::Subsets { .. } => "subsets",
            Message::Masked { .. } => "masked",
            Message::Abort { .. } => "abort",
        }
    }

    pub fn bases(bases: &[Basis]) -> Self {
        Message::Bases {
            bases: bases.iter().map(|b| u8::from(b.bit())).collect(),
        }
    }

    /// Which (step, sender) combinations may carry this message.
    fn allowed(&self, step: u8, from: Party) -> bool {
        use Party::*;
        matches!(
            (self, step, from),
            (Message::Abort { .. }, 1..=7, _)
                | (Message::Photon { .. }, 1, Alice)
                | (Message::Commit { .. }, 2, Bob)
                | (Message::Challenge { .. }, 2, Alice)
                | (Message::Unveil { .. } | Message::CheatUnveil { .. }, 2 | 4, Bob)
                | (Message::Bases { .. }, 3, Alice)
                | (Message::Removal { .. }, 4, Bob)
                | (Message::Subsets { .. }, 5, Bob)
                | (Message::Masked { .. }, 6, Alice)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub seq: u64,
    pub step: u8,
    pub from: Party,
    #[serde(flatten)]
    pub message: Message,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    records: Vec<Record>,
    closed: bool,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a message, refusing anything that breaks protocol order.
    pub fn send(&mut self, from: Party, step: u8, message: Message) -> Result<(), ProtocolError> {
        let current = self.records.last().map_or(1, |r| r.step);
        if self.closed {
            return Err(ProtocolError::OutOfOrder {
                step,
                kind: message.kind(),
                detail: "session already aborted",
            });
        }
        if step < current {
            return Err(ProtocolError::OutOfOrder {
                step,
                kind: message.kind(),
                detail: "step precedes the current step",
            });
        }
        if !message.allowed(step, from) {
            return Err(ProtocolError::OutOfOrder {
                step,
                kind: message.kind(),
                detail: "message kind not permitted at this step from this party",
            });
        }
        if matches!(message, Message::Abort { .. }) {
            self.closed = true;
        }
        self.records.push(Record {
            seq: self.records.len() as u64,
            step,
            from,
            message,
        });
        Ok(())
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Messages delivered to `party`, i.e. everything the other side sent.
    pub fn view_of(&self, party: Party) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.from == party.other())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses a JSONL transcript, replaying the ordering checks.
    pub fn from_jsonl(text: &str) -> Result<Self, ProtocolError> {
        let mut t = Transcript::new();
        for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let record: Record = serde_json::from_str(line).map_err(|e| ProtocolError::Malformed {
                line: line_no + 1,
                detail: e.to_string(),
            })?;
            if record.seq != t.records.len() as u64 {
                return Err(ProtocolError::Malformed {
                    line: line_no + 1,
                    detail: format!("expected seq {}, found {}", t.records.len(), record.seq),
                });
            }
            t.send(record.from, record.step, record.message)?;
        }
        Ok(t)
    }
}
