//! Per-drop ledger of decode outcomes and the throughput, PER, MER and
//! latency estimators built on it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::sched::StreamKind;

fn idx(kind: StreamKind) -> usize {
    match kind {
        StreamKind::Common => 0,
        StreamKind::Private => 1,
    }
}

/// Terminated-packet counts of one stream type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketTally {
    pub terminated: u64,
    pub dropped: u64,
}

impl PacketTally {
    pub fn rate(&self) -> Option<f64> {
        (self.terminated > 0).then(|| self.dropped as f64 / self.terminated as f64)
    }

    pub fn merge(&mut self, o: &PacketTally) {
        self.terminated += o.terminated;
        self.dropped += o.dropped;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
enum PartState {
    #[default]
    Absent,
    Pending,
    Decoded,
    Dropped,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct MessageRecord {
    parts: [PartState; 2],
}

impl MessageRecord {
    fn terminated(&self) -> bool {
        self.parts.iter().any(|&p| p != PartState::Absent)
            && self.parts.iter().all(|&p| p != PartState::Pending)
    }

    fn failed(&self) -> bool {
        self.parts.contains(&PartState::Dropped)
    }
}

/// Everything one drop produced.
#[derive(Clone, Debug)]
pub struct BlockLedger {
    num_users: usize,
    block_length: usize,
    /// `rewards[n][k] = [common bits, private bits]` decoded in block `n`.
    rewards: Vec<Vec<[u64; 2]>>,
    /// `Σ T·B` and `Σ B` per stream type.
    delay_weighted: [u64; 2],
    delay_bits: [u64; 2],
    packets: [PacketTally; 2],
    messages: BTreeMap<(usize, usize), MessageRecord>,
    /// New information bits put on the air.
    scheduled_bits: u64,
    /// Bits of out-of-band control signalling (not charged to throughput).
    control_bits: u64,
}

impl BlockLedger {
    pub fn new(num_users: usize, block_length: usize) -> Self {
        BlockLedger {
            num_users,
            block_length,
            rewards: Vec::new(),
            delay_weighted: [0; 2],
            delay_bits: [0; 2],
            packets: [PacketTally::default(); 2],
            messages: BTreeMap::new(),
            scheduled_bits: 0,
            control_bits: 0,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    fn block_row(&mut self, block: usize) -> &mut Vec<[u64; 2]> {
        if self.rewards.len() <= block {
            self.rewards.resize(block + 1, vec![[0; 2]; self.num_users]);
        }
        &mut self.rewards[block]
    }

    /// `bits` of `user`'s data born in `birth` were decoded in `block`.
    pub fn record_decoded(&mut self, user: usize, kind: StreamKind, bits: u64, birth: usize, block: usize) {
        debug_assert!(block >= birth);
        self.block_row(block)[user][idx(kind)] += bits;
        let delay = (block - birth + 1) as u64;
        self.delay_weighted[idx(kind)] += delay * bits;
        self.delay_bits[idx(kind)] += bits;
    }

    /// A packet finished its HARQ cycle, decoded or dropped.
    pub fn record_packet(&mut self, kind: StreamKind, decoded: bool) {
        let t = &mut self.packets[idx(kind)];
        t.terminated += 1;
        if !decoded {
            t.dropped += 1;
        }
    }

    /// Declares that `user`'s message born in `birth` has a part on `kind`.
    pub fn open_message_part(&mut self, user: usize, birth: usize, kind: StreamKind) {
        self.messages.entry((user, birth)).or_default().parts[idx(kind)] = PartState::Pending;
    }

    pub fn close_message_part(&mut self, user: usize, birth: usize, kind: StreamKind, decoded: bool) {
        if let Some(m) = self.messages.get_mut(&(user, birth)) {
            m.parts[idx(kind)] = if decoded {
                PartState::Decoded
            } else {
                PartState::Dropped
            };
        }
    }

    pub fn record_scheduled(&mut self, bits: u64) {
        self.scheduled_bits += bits;
    }

    pub fn record_control(&mut self, bits: u64) {
        self.control_bits += bits;
    }

    pub fn reward_bits(&self, block: usize, user: usize) -> [u64; 2] {
        self.rewards
            .get(block)
            .map(|r| r[user])
            .unwrap_or([0; 2])
    }

    pub fn total_reward_bits(&self) -> u64 {
        self.rewards.iter().flatten().map(|r| r[0] + r[1]).sum()
    }

    pub fn scheduled_bits(&self) -> u64 {
        self.scheduled_bits
    }

    pub fn control_bits(&self) -> u64 {
        self.control_bits
    }

    pub fn packets(&self, kind: StreamKind) -> PacketTally {
        self.packets[idx(kind)]
    }

    pub fn summarize(&self, num_blocks: usize) -> DropMetrics {
        let mut messages_terminated = 0;
        let mut messages_failed = 0;
        for m in self.messages.values() {
            if m.terminated() {
                messages_terminated += 1;
                if m.failed() {
                    messages_failed += 1;
                }
            }
        }
        DropMetrics {
            reward_bits: self
                .rewards
                .iter()
                .take(num_blocks)
                .flatten()
                .map(|r| r[0] + r[1])
                .sum(),
            symbols: (num_blocks * self.block_length) as u64,
            delay_weighted: self.delay_weighted.iter().sum(),
            delay_bits: self.delay_bits.iter().sum(),
            packets: self.packets,
            messages_terminated,
            messages_failed,
            scheduled_bits: self.scheduled_bits,
            control_bits: self.control_bits,
        }
    }
}

/// Additive per-drop totals; sums over drops by [`DropMetrics::merge`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropMetrics {
    pub reward_bits: u64,
    /// `N · N_s`.
    pub symbols: u64,
    pub delay_weighted: u64,
    pub delay_bits: u64,
    /// `[common, private]`.
    pub packets: [PacketTally; 2],
    pub messages_terminated: u64,
    pub messages_failed: u64,
    pub scheduled_bits: u64,
    pub control_bits: u64,
}

impl DropMetrics {
    pub fn merge(&mut self, o: &DropMetrics) {
        self.reward_bits += o.reward_bits;
        self.symbols += o.symbols;
        self.delay_weighted += o.delay_weighted;
        self.delay_bits += o.delay_bits;
        for (a, b) in self.packets.iter_mut().zip(&o.packets) {
            a.merge(b);
        }
        self.messages_terminated += o.messages_terminated;
        self.messages_failed += o.messages_failed;
        self.scheduled_bits += o.scheduled_bits;
        self.control_bits += o.control_bits;
    }

    pub fn throughput(&self) -> f64 {
        if self.symbols == 0 {
            0.0
        } else {
            self.reward_bits as f64 / self.symbols as f64
        }
    }

    pub fn latency(&self) -> Option<f64> {
        (self.delay_bits > 0).then(|| self.delay_weighted as f64 / self.delay_bits as f64)
    }

    pub fn mer(&self) -> Option<f64> {
        (self.messages_terminated > 0)
            .then(|| self.messages_failed as f64 / self.messages_terminated as f64)
    }
}

/// `(1/N) Σ_n Σ_k (C_k[n] + R_k[n]) / N_s` in bits/symbol.
pub fn throughput(ledger: &BlockLedger, num_blocks: usize, block_length: usize) -> f64 {
    if num_blocks == 0 || block_length == 0 {
        return 0.0;
    }
    let bits: u64 = (0..num_blocks)
        .flat_map(|n| (0..ledger.num_users).map(move |k| (n, k)))
        .map(|(n, k)| {
            let r = ledger.reward_bits(n, k);
            r[0] + r[1]
        })
        .sum();
    bits as f64 / (num_blocks * block_length) as f64
}

/// `Σ T·B / Σ B` over both stream types; `None` without decoded bits.
pub fn average_latency_per_bit(ledger: &BlockLedger) -> Option<f64> {
    let bits: u64 = ledger.delay_bits.iter().sum();
    (bits > 0).then(|| ledger.delay_weighted.iter().sum::<u64>() as f64 / bits as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorRates {
    pub per_common: Option<f64>,
    pub per_private: Option<f64>,
    pub mer: Option<f64>,
}

pub fn per_and_mer(ledger: &BlockLedger) -> ErrorRates {
    let s = ledger.summarize(0);
    ErrorRates {
        per_common: s.packets[0].rate(),
        per_private: s.packets[1].rate(),
        mer: s.mer(),
    }
}
