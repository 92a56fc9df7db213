//! RSMA with AMC and no retransmissions. Bits of a failed packet go back
//! to the user's queue with their original birth block and are sent again
//! in later packets ahead of new data.

use std::collections::VecDeque;

use crate::error::Result;
use crate::harqmath::ir_per_unchecked;
use crate::metrics::BlockLedger;
use crate::phy::apportion_bits;

use super::{
    check_input, Ack, AuditCounters, BlockInput, DecodeEvent, DecodeKind, DecodeSampler, Feedback,
    PacketCensus, Protocol, ProtocolConfig, StreamKind, StreamTag,
};

/// FIFO of `(birth, bits)` chunks, oldest first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BitQueue {
    chunks: VecDeque<(usize, u64)>,
}

impl BitQueue {
    pub fn len_bits(&self) -> u64 {
        self.chunks.iter().map(|c| c.1).sum()
    }

    /// Takes up to `bits` from the front, then tops up with new bits born
    /// in `block`.
    pub fn fill(&mut self, bits: u64, block: usize) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        let mut need = bits;
        while need > 0 {
            let Some(front) = self.chunks.front_mut() else { break };
            let take = need.min(front.1);
            out.push((front.0, take));
            front.1 -= take;
            need -= take;
            if front.1 == 0 {
                self.chunks.pop_front();
            }
        }
        if need > 0 {
            out.push((block, need));
        }
        out
    }

    /// Puts failed chunks back in birth order.
    pub fn requeue(&mut self, chunks: &[(usize, u64)]) {
        for &(birth, bits) in chunks {
            if bits == 0 {
                continue;
            }
            let pos = self.chunks.partition_point(|c| c.0 <= birth);
            if pos > 0 && self.chunks[pos - 1].0 == birth {
                self.chunks[pos - 1].1 += bits;
            } else {
                self.chunks.insert(pos, (birth, bits));
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct NoHarqScheduler {
    cfg: ProtocolConfig,
    common_queues: Vec<BitQueue>,
    private_queues: Vec<BitQueue>,
    census: [PacketCensus; 2],
}

impl NoHarqScheduler {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(NoHarqScheduler {
            cfg,
            common_queues: vec![BitQueue::default(); cfg.num_users],
            private_queues: vec![BitQueue::default(); cfg.num_users],
            census: Default::default(),
        })
    }

    pub fn queued_bits(&self, user: usize) -> [u64; 2] {
        [
            self.common_queues[user].len_bits(),
            self.private_queues[user].len_bits(),
        ]
    }
}

fn reward(ledger: &mut BlockLedger, user: usize, kind: StreamKind, chunks: &[(usize, u64)], block: usize) {
    for &(birth, bits) in chunks {
        ledger.record_decoded(user, kind, bits, birth, block);
    }
}

impl Protocol for NoHarqScheduler {
    fn step(
        &mut self,
        input: &BlockInput<'_>,
        sampler: &mut dyn DecodeSampler,
        ledger: &mut BlockLedger,
    ) -> Result<Vec<Feedback>> {
        check_input(&self.cfg, input)?;
        let n = input.block;
        let ns = self.cfg.block_length;
        let k_users = self.cfg.num_users;
        let common_bits = input.rates.common_bits(ns);
        let owner = apportion_bits(common_bits, &input.rates.common_portions);
        ledger.record_scheduled(u64::from(common_bits));
        let common_chunks: Vec<_> = (0..k_users)
            .map(|k| self.common_queues[k].fill(u64::from(owner[k]), n))
            .collect();
        self.census[0].opened += k_users as u64;

        let mut feedback = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let per_c = ir_per_unchecked(&[input.sinrs.common[k]], input.rates.common_rate, ns);
            let common_ok = sampler.decode(
                &DecodeEvent {
                    block: n,
                    user: k,
                    kind: DecodeKind::Common,
                },
                per_c,
            );
            let private_bits = input.rates.private_bits(k, ns);
            ledger.record_scheduled(u64::from(private_bits));
            let private_chunks = self.private_queues[k].fill(u64::from(private_bits), n);
            self.census[1].opened += 1;
            let private_ok = common_ok && {
                let per_p =
                    ir_per_unchecked(&[input.sinrs.private[k]], input.rates.private_rates[k], ns);
                sampler.decode(
                    &DecodeEvent {
                        block: n,
                        user: k,
                        kind: DecodeKind::Private,
                    },
                    per_p,
                )
            };

            if owner[k] > 0 {
                ledger.open_message_part(k, n, StreamKind::Common);
                ledger.close_message_part(k, n, StreamKind::Common, common_ok);
            }
            ledger.open_message_part(k, n, StreamKind::Private);
            ledger.close_message_part(k, n, StreamKind::Private, private_ok);
            ledger.record_packet(StreamKind::Common, common_ok);
            ledger.record_packet(StreamKind::Private, private_ok);

            if common_ok {
                reward(ledger, k, StreamKind::Common, &common_chunks[k], n);
                self.census[0].decoded += 1;
            } else {
                self.common_queues[k].requeue(&common_chunks[k]);
                self.census[0].dropped += 1;
            }
            if private_ok {
                reward(ledger, k, StreamKind::Private, &private_chunks, n);
                self.census[1].decoded += 1;
            } else {
                self.private_queues[k].requeue(&private_chunks);
                self.census[1].dropped += 1;
            }
            feedback.push(Feedback::compress(
                vec![StreamTag::common(n), StreamTag::private(n)],
                &[Ack::from_success(common_ok), Ack::from_success(private_ok)],
            )?);
        }
        Ok(feedback)
    }

    fn census(&self) -> [PacketCensus; 2] {
        self.census
    }

    fn audit(&self) -> AuditCounters {
        AuditCounters::default()
    }
}
