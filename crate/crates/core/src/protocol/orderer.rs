//! In-order commitment of endorsed frames.

use std::collections::{BTreeMap, BTreeSet};

use super::endorser::Endorsement;

/// Endorser ids assigned to a frame: consecutive blocks of `per_frame` ids from the pool
/// `1..=pool`, so neighbouring frames go to disjoint subsets.
pub fn assign_endorsers(frame_index: u64, pool: usize, per_frame: usize) -> Vec<u64> {
    let pool = pool.max(1) as u64;
    let per = per_frame.clamp(1, pool as usize) as u64;
    (0..per)
        .map(|k| 1 + (frame_index * per + k) % pool)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameStatus {
    Accepted,
    Rejected,
    Conflict,
}

/// Collects endorsements and releases frames strictly in index order once every assigned
/// endorser agrees they are valid.
#[derive(Debug, Clone)]
pub struct OrderingBuffer {
    quorum: usize,
    next: u64,
    votes: BTreeMap<u64, Vec<Endorsement>>,
    decided: BTreeMap<u64, FrameStatus>,
    conflicts: BTreeSet<u64>,
    halted_at: Option<u64>,
}

impl OrderingBuffer {
    pub fn new(quorum: usize) -> Self {
        OrderingBuffer {
            quorum: quorum.max(1),
            next: 0,
            votes: BTreeMap::new(),
            decided: BTreeMap::new(),
            conflicts: BTreeSet::new(),
            halted_at: None,
        }
    }

    /// Next frame index the chain expects.
    pub fn next_index(&self) -> u64 {
        self.next
    }

    /// Frame whose rejection stopped the chain, if any.
    pub fn halted_at(&self) -> Option<u64> {
        self.halted_at
    }

    pub fn conflicts(&self) -> &BTreeSet<u64> {
        &self.conflicts
    }

    pub fn status(&self, frame_index: u64) -> Option<FrameStatus> {
        self.decided.get(&frame_index).copied()
    }

    /// Frames that were accepted but are still waiting for a predecessor.
    pub fn buffered(&self) -> Vec<u64> {
        self.decided
            .range(self.next..)
            .filter(|(_, s)| **s == FrameStatus::Accepted)
            .map(|(k, _)| *k)
            .collect()
    }

    /// Records one endorsement and returns the frames that can now be committed, in order.
    pub fn submit(&mut self, e: Endorsement) -> Vec<u64> {
        let idx = e.frame_index;
        if idx < self.next || self.decided.contains_key(&idx) {
            return Vec::new();
        }
        let votes = self.votes.entry(idx).or_default();
        votes.push(e);
        if votes.len() >= self.quorum {
            let votes = self.votes.remove(&idx).expect("present");
            let valid = votes.iter().filter(|v| v.verdict.is_valid()).count();
            let status = if valid == votes.len() {
                FrameStatus::Accepted
            } else if valid == 0 {
                FrameStatus::Rejected
            } else {
                self.conflicts.insert(idx);
                FrameStatus::Conflict
            };
            self.decided.insert(idx, status);
        }
        self.drain()
    }

    /// Rejects a frame outright (for checks the orderer performs itself).
    pub fn reject(&mut self, frame_index: u64) {
        self.decided.insert(frame_index, FrameStatus::Rejected);
        self.drain();
    }

    fn drain(&mut self) -> Vec<u64> {
        let mut out = Vec::new();
        if self.halted_at.is_some() {
            return out;
        }
        while let Some(status) = self.decided.get(&self.next) {
            match status {
                FrameStatus::Accepted => {
                    out.push(self.next);
                    self.next += 1;
                }
                FrameStatus::Rejected | FrameStatus::Conflict => {
                    self.halted_at = Some(self.next);
                    break;
                }
            }
        }
        out
    }
}
