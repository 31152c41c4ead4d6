//! Deterministic, lossless message delivery.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::cost::CostLedger;

pub type NodeId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MessageKind {
    FrameReport,
    EndorsementMsg,
    InvalidationNotice,
    RefinementChunkMsg,
    CommitNotice,
}

/// A message in flight. `body` is whatever the receiving role needs.
#[derive(Debug, Clone)]
pub struct Envelope<B> {
    pub from: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
    pub payload_bits: u64,
    pub send_step: u64,
    pub seq: u64,
    pub body: B,
}

/// One line of the delivery trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Delivery {
    pub send_step: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub kind: MessageKind,
    pub payload_bits: u64,
}

/// Messages are delivered in `(send step, sender, sender sequence)` order, which is FIFO for
/// every sender-receiver pair. Every bit is booked on the sender and again on the receiver.
#[derive(Debug)]
pub struct Network<B> {
    meta_bits: u64,
    client: NodeId,
    queue: BTreeMap<(u64, NodeId, u64), Envelope<B>>,
    next_seq: BTreeMap<NodeId, u64>,
    trace: Vec<Delivery>,
}

impl<B> Network<B> {
    /// `client` marks the node whose outgoing reports are tallied as client uploads.
    pub fn new(meta_bits: u64, client: NodeId) -> Self {
        Network {
            meta_bits,
            client,
            queue: BTreeMap::new(),
            next_seq: BTreeMap::new(),
            trace: Vec::new(),
        }
    }

    pub fn meta_bits(&self) -> u64 {
        self.meta_bits
    }

    #[allow(clippy::too_many_arguments)]
    pub fn send(
        &mut self,
        costs: &mut CostLedger,
        step: u64,
        from: NodeId,
        to: NodeId,
        kind: MessageKind,
        payload_bits: u64,
        body: B,
    ) {
        let seq = self.next_seq.entry(from).or_insert(0);
        let env = Envelope {
            from,
            to,
            kind,
            payload_bits,
            send_step: step,
            seq: *seq,
            body,
        };
        *seq += 1;
        let report = from == self.client
            && matches!(
                kind,
                MessageKind::FrameReport | MessageKind::RefinementChunkMsg
            );
        costs.record_send(payload_bits, self.meta_bits, report);
        self.queue.insert((step, from, env.seq), env);
    }

    /// Removes and returns the next message in delivery order.
    pub fn deliver(&mut self, costs: &mut CostLedger) -> Option<Envelope<B>> {
        let (_, env) = self.queue.pop_first()?;
        costs.record_receive(env.payload_bits, self.meta_bits);
        self.trace.push(Delivery {
            send_step: env.send_step,
            from: env.from,
            to: env.to,
            kind: env.kind,
            payload_bits: env.payload_bits,
        });
        Some(env)
    }

    pub fn is_idle(&self) -> bool {
        self.queue.is_empty()
    }

    pub fn trace(&self) -> &[Delivery] {
        &self.trace
    }

    pub fn into_trace(self) -> Vec<Delivery> {
        self.trace
    }
}
