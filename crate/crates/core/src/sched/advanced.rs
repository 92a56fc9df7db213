//! Layered RSMA-HARQ. Retransmission bits of pending packets ride in the
//! common stream of later blocks (spilling into a user's own private stream
//! when the common payload is full) and the receivers recover old packets by
//! backtrack decoding at a rate reduced by the extracted bits.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::harqmath::{backtrack_per_at, ir_per_unchecked, reduced_rate, EmpiricalCdf};
use crate::metrics::BlockLedger;
use crate::phy::apportion_bits;

use super::baseline::ExpectedRewards;
use super::{
    check_input, Ack, AuditCounters, BlockInput, DecodeEvent, DecodeKind, DecodeSampler, Feedback,
    PacketCensus, Protocol, ProtocolConfig, RetxSizer, SizingReceiver, SizingRequest, StreamKind,
    StreamTag,
};

/// One pending common packet in an expected-reward evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommonBacktrackTerm {
    /// `C_k` of the old packet, bits/symbol.
    pub portion: f64,
    /// Backtrack PER after this block's credits.
    pub per: f64,
}

/// One pending private packet in an expected-reward evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivateBacktrackTerm {
    pub rate: f64,
    /// Backtrack PER with only the common-carried credits.
    pub per_a: f64,
    /// Backtrack PER with common- and private-carried credits.
    pub per_b: f64,
}

fn ok(p: f64) -> f64 {
    1.0 - p.clamp(0.0, 1.0)
}

/// Expected per-block rewards of one user under the layered scheme.
///
/// Common: `[Σ_b C^(b)(1 − PER^(b)) + C^(1)](1 − PER_c)`.
/// Private: `[Σ_b R^(b)(PER_p(1 − PER_A^(b)) + (1 − PER_p)(1 − PER_B^(b)))
/// + R^(1)(1 − PER_p)](1 − PER_c)`.
pub fn advanced_expected_rewards(
    per_common: f64,
    common_portion: f64,
    per_private: f64,
    private_rate: f64,
    common_terms: &[CommonBacktrackTerm],
    private_terms: &[PrivateBacktrackTerm],
) -> ExpectedRewards {
    let gate = ok(per_common);
    let per_p = per_private.clamp(0.0, 1.0);
    let old_common: f64 = common_terms.iter().map(|t| t.portion * ok(t.per)).sum();
    let old_private: f64 = private_terms
        .iter()
        .map(|t| t.rate * (per_p * ok(t.per_a) + (1.0 - per_p) * ok(t.per_b)))
        .sum();
    ExpectedRewards {
        common: (old_common + common_portion) * gate,
        private: (old_private + private_rate * (1.0 - per_p)) * gate,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketStatus {
    Pending,
    Decoded,
    Dropped,
}

#[derive(Clone, Debug)]
pub struct CommonPacket {
    pub birth: usize,
    pub rate: f64,
    pub bits: u32,
    /// New information bits of each user.
    pub new_bits: Vec<u32>,
    pub first_sinr: Vec<f64>,
    pub status: Vec<PacketStatus>,
    /// Bits extracted by each receiver, one entry per crediting block.
    pub credits: Vec<Vec<u32>>,
    cdfs: Option<Vec<EmpiricalCdf<f64>>>,
}

#[derive(Clone, Debug)]
pub struct PrivatePacket {
    pub user: usize,
    pub birth: usize,
    pub rate: f64,
    pub bits: u32,
    /// Payload minus the jointly encoded retransmission remainder.
    pub new_bits: u32,
    pub first_sinr: f64,
    pub status: PacketStatus,
    pub credits: Vec<u32>,
    cdf: Option<EmpiricalCdf<f64>>,
}

/// Retransmission of one common packet to every receiver still missing it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupRetx {
    pub birth: usize,
    pub round: usize,
    /// Sizer output before truncation to the common payload.
    pub planned: u32,
    pub bits: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrivateRetx {
    pub user: usize,
    pub birth: usize,
    pub round: usize,
    pub planned: u32,
    pub in_common: u32,
    pub in_private: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitRecord {
    pub user: usize,
    pub birth: usize,
    pub round: usize,
    pub bits_in_common: u32,
    pub bits_in_private: u32,
}

/// How one block's payloads are filled.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RetransmissionPlan {
    pub block: usize,
    pub common_payload: u32,
    /// Oldest packet first.
    pub common_retx_bits_per_group: Vec<GroupRetx>,
    /// In packing order: descending round, then ascending user.
    pub private_retx: Vec<PrivateRetx>,
    pub split_records: Vec<SplitRecord>,
    /// `D_c`, the concatenated common-group retransmission bits.
    pub common_supermessage_bits: u32,
    pub new_common_bits_per_user: Vec<u32>,
    pub private_payload: Vec<u32>,
    pub private_remainder: Vec<u32>,
    pub new_private_bits: Vec<u32>,
}

impl RetransmissionPlan {
    /// `(round, total bits)` of each retransmission for `user`'s private
    /// packets.
    pub fn private_retx_bits(&self, user: usize) -> Vec<(usize, u32)> {
        self.private_retx
            .iter()
            .filter(|r| r.user == user)
            .map(|r| (r.round, r.in_common + r.in_private))
            .collect()
    }

    pub fn common_packed_bits(&self) -> u32 {
        self.common_supermessage_bits
            + self.private_retx.iter().map(|r| r.in_common).sum::<u32>()
            + self.new_common_bits_per_user.iter().sum::<u32>()
    }

    pub fn is_exact(&self) -> bool {
        self.common_packed_bits() == self.common_payload
            && self
                .private_payload
                .iter()
                .zip(&self.private_remainder)
                .zip(&self.new_private_bits)
                .all(|((&p, &r), &d)| r + d == p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdvancedReport {
    pub plan: RetransmissionPlan,
    pub feedback: Vec<Feedback>,
    /// Decode attempts each receiver was prepared to make.
    pub workload: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct AdvancedScheduler {
    cfg: ProtocolConfig,
    sizer: RetxSizer,
    common: BTreeMap<usize, CommonPacket>,
    private: Vec<BTreeMap<usize, PrivatePacket>>,
    /// Receiver-side record of decoded common packets.
    rx_commons: Vec<BTreeSet<usize>>,
    census: [PacketCensus; 2],
    audit: AuditCounters,
}

impl AdvancedScheduler {
    pub fn new(cfg: ProtocolConfig, sizer: RetxSizer) -> Result<Self> {
        cfg.validate()?;
        Ok(AdvancedScheduler {
            cfg,
            sizer,
            common: BTreeMap::new(),
            private: vec![BTreeMap::new(); cfg.num_users],
            rx_commons: vec![BTreeSet::new(); cfg.num_users],
            census: Default::default(),
            audit: Default::default(),
        })
    }

    pub fn sizer(&self) -> RetxSizer {
        self.sizer
    }

    pub fn common_packet(&self, birth: usize) -> Option<&CommonPacket> {
        self.common.get(&birth)
    }

    pub fn private_packet(&self, user: usize, birth: usize) -> Option<&PrivatePacket> {
        self.private[user].get(&birth)
    }

    /// Decode attempts `user` faces in `block`: the two current packets plus
    /// every pending packet still inside its retransmission window.
    pub fn decoding_workload(&self, user: usize, block: usize) -> usize {
        let in_window = |birth: usize, max: usize| birth < block && block - birth < max;
        let common = self
            .common
            .values()
            .filter(|p| p.status[user] == PacketStatus::Pending)
            .filter(|p| in_window(p.birth, self.cfg.max_rounds_common))
            .count();
        let private = self.private[user]
            .values()
            .filter(|p| p.status == PacketStatus::Pending)
            .filter(|p| in_window(p.birth, self.cfg.max_rounds_private))
            .count();
        2 + common + private
    }

    fn plan(&mut self, input: &BlockInput<'_>) -> RetransmissionPlan {
        let n = input.block;
        let ns = self.cfg.block_length;
        let k_users = self.cfg.num_users;
        let common_payload = input.rates.common_bits(ns);
        let mut cap = common_payload;
        let mut carries = vec![false; k_users];

        let mut groups = Vec::new();
        for (&b, pkt) in &self.common {
            let round = n - b + 1;
            let pending: Vec<usize> = (0..k_users)
                .filter(|&k| pkt.status[k] == PacketStatus::Pending)
                .collect();
            if pending.is_empty() {
                continue;
            }
            if round > self.cfg.max_rounds_common {
                self.audit.round_overflow += 1;
                continue;
            }
            let receivers: Vec<SizingReceiver<'_>> = pending
                .iter()
                .map(|&k| SizingReceiver {
                    user: k,
                    prior_credits: &pkt.credits[k],
                    cdf: pkt.cdfs.as_ref().map(|c| &c[k]),
                })
                .collect();
            let planned = self.sizer.size(&SizingRequest {
                kind: StreamKind::Common,
                round,
                original_bits: pkt.bits,
                original_rate: pkt.rate,
                block_length: ns,
                receivers: &receivers,
            });
            let bits = planned.min(cap);
            cap -= bits;
            if bits > 0 {
                for &k in &pending {
                    carries[k] = true;
                }
            }
            groups.push(GroupRetx {
                birth: b,
                round,
                planned,
                bits,
            });
        }
        let supermessage: u32 = groups.iter().map(|g| g.bits).sum();

        let mut order: Vec<(usize, usize, usize)> = Vec::new();
        for (k, packets) in self.private.iter().enumerate() {
            for (&b, pkt) in packets {
                if pkt.status == PacketStatus::Pending {
                    order.push((n - b + 1, k, b));
                }
            }
        }
        order.sort_by_key(|&(round, k, b)| (Reverse(round), k, b));

        let private_payload: Vec<u32> = (0..k_users).map(|k| input.rates.private_bits(k, ns)).collect();
        let mut room = private_payload.clone();
        let mut split_done = false;
        let mut private_retx = Vec::new();
        let mut split_records = Vec::new();
        for (round, k, b) in order {
            if round > self.cfg.max_rounds_private {
                self.audit.round_overflow += 1;
                continue;
            }
            let pkt = &self.private[k][&b];
            let receiver = [SizingReceiver {
                user: k,
                prior_credits: &pkt.credits,
                cdf: pkt.cdf.as_ref(),
            }];
            let planned = self.sizer.size(&SizingRequest {
                kind: StreamKind::Private,
                round,
                original_bits: pkt.bits,
                original_rate: pkt.rate,
                block_length: ns,
                receivers: &receiver,
            });
            let (in_common, in_private) = if split_done || cap == 0 {
                (0, planned.min(room[k]))
            } else if planned <= cap {
                (planned, 0)
            } else {
                split_done = true;
                let in_private = (planned - cap).min(room[k]);
                split_records.push(SplitRecord {
                    user: k,
                    birth: b,
                    round,
                    bits_in_common: cap,
                    bits_in_private: in_private,
                });
                (cap, in_private)
            };
            if in_common + in_private < planned {
                log::warn!(
                    "private retransmission of user {k} cut from {planned} to {} bits by payload limits",
                    in_common + in_private
                );
            }
            cap -= in_common;
            room[k] -= in_private;
            if in_common > 0 {
                carries[k] = true;
            }
            private_retx.push(PrivateRetx {
                user: k,
                birth: b,
                round,
                planned,
                in_common,
                in_private,
            });
        }

        let any_retx = carries.iter().any(|&c| c);
        let weights: Vec<f64> = if !any_retx {
            input.rates.common_portions.clone()
        } else if carries.iter().all(|&c| c) {
            vec![1.0; k_users]
        } else {
            carries.iter().map(|&c| if c { 0.0 } else { 1.0 }).collect()
        };
        let new_common = apportion_bits(cap, &weights);
        let remainder: Vec<u32> = private_payload.iter().zip(&room).map(|(p, r)| p - r).collect();

        RetransmissionPlan {
            block: n,
            common_payload,
            common_retx_bits_per_group: groups,
            private_retx,
            split_records,
            common_supermessage_bits: supermessage,
            new_common_bits_per_user: new_common,
            private_payload,
            private_remainder: remainder,
            new_private_bits: room,
        }
    }

    fn open_packets(&mut self, input: &BlockInput<'_>, plan: &RetransmissionPlan, ledger: &mut BlockLedger) {
        let n = input.block;
        let k_users = self.cfg.num_users;
        let keep_cdfs = self.sizer.needs_cdfs();
        for k in 0..k_users {
            if plan.new_common_bits_per_user[k] > 0 {
                ledger.open_message_part(k, n, StreamKind::Common);
            }
            if plan.new_private_bits[k] > 0 {
                ledger.open_message_part(k, n, StreamKind::Private);
            }
        }
        let new_bits: u32 = plan.new_common_bits_per_user.iter().sum::<u32>()
            + plan.new_private_bits.iter().sum::<u32>();
        ledger.record_scheduled(u64::from(new_bits));
        let segments = plan.common_retx_bits_per_group.len()
            + plan.private_retx.len()
            + plan.split_records.len();
        let index_bits = u64::from(u32::BITS - plan.common_payload.max(1).leading_zeros());
        ledger.record_control(2 * index_bits * segments as u64);

        self.common.insert(
            n,
            CommonPacket {
                birth: n,
                rate: input.rates.common_rate,
                bits: plan.common_payload,
                new_bits: plan.new_common_bits_per_user.clone(),
                first_sinr: input.sinrs.common.clone(),
                status: vec![PacketStatus::Pending; k_users],
                credits: vec![Vec::new(); k_users],
                cdfs: input.cdfs.filter(|_| keep_cdfs).map(|c| c.common.clone()),
            },
        );
        self.census[0].opened += k_users as u64;
        for k in 0..k_users {
            self.private[k].insert(
                n,
                PrivatePacket {
                    user: k,
                    birth: n,
                    rate: input.rates.private_rates[k],
                    bits: plan.private_payload[k],
                    new_bits: plan.new_private_bits[k],
                    first_sinr: input.sinrs.private[k],
                    status: PacketStatus::Pending,
                    credits: Vec::new(),
                    cdf: input.cdfs.filter(|_| keep_cdfs).map(|c| c.private[k].clone()),
                },
            );
        }
        self.census[1].opened += k_users as u64;
    }

    fn receive(
        &mut self,
        k: usize,
        input: &BlockInput<'_>,
        plan: &RetransmissionPlan,
        sampler: &mut dyn DecodeSampler,
    ) -> Result<Feedback> {
        let n = input.block;
        let ns = self.cfg.block_length;
        let mut tags = Vec::new();
        let mut acks = Vec::new();
        let mut newly_decoded = BTreeSet::new();
        let event = |kind| DecodeEvent { block: n, user: k, kind };

        let current = &self.common[&n];
        let per = ir_per_unchecked(&[input.sinrs.common[k]], current.rate, ns);
        let common_ok = sampler.decode(&event(DecodeKind::Common), per);
        if common_ok {
            newly_decoded.insert(n);
        }
        tags.push(StreamTag::common(n));
        acks.push(Ack::from_success(common_ok));

        for g in &plan.common_retx_bits_per_group {
            let pkt = self.common.get_mut(&g.birth).ok_or_else(|| {
                Error::Protocol(format!("plan names common packet {} that no longer exists", g.birth))
            })?;
            if pkt.status[k] != PacketStatus::Pending {
                continue;
            }
            let decoded = if common_ok && g.bits > 0 {
                if n <= g.birth {
                    self.audit.credit_causality += 1;
                }
                pkt.credits[k].push(g.bits);
                let total: u64 = pkt.credits[k].iter().map(|&c| u64::from(c)).sum();
                let r_hat = reduced_rate(pkt.rate, total, ns);
                let per = backtrack_per_at(pkt.first_sinr[k], r_hat, ns);
                sampler.decode(&event(DecodeKind::CommonBacktrack { birth: g.birth }), per)
            } else {
                false
            };
            if decoded {
                newly_decoded.insert(g.birth);
            }
            tags.push(StreamTag::common(g.birth));
            acks.push(Ack::from_success(decoded));
        }
        self.rx_commons[k].extend(newly_decoded.iter().copied());

        let current = &self.private[k][&n];
        let private_ok = common_ok && {
            let per = ir_per_unchecked(&[input.sinrs.private[k]], current.rate, ns);
            sampler.decode(&event(DecodeKind::Private), per)
        };
        tags.push(StreamTag::private(n));
        acks.push(Ack::from_success(private_ok));

        for r in plan.private_retx.iter().filter(|r| r.user == k) {
            let sic = self.rx_commons[k].contains(&r.birth);
            let sic_new = newly_decoded.contains(&r.birth);
            let pkt = self.private[k].get_mut(&r.birth).ok_or_else(|| {
                Error::Protocol(format!(
                    "plan names private packet {} of user {k} that no longer exists",
                    r.birth
                ))
            })?;
            let mut credit = 0;
            if common_ok {
                credit += r.in_common;
            }
            if private_ok {
                credit += r.in_private;
            }
            if credit > 0 {
                if n <= r.birth {
                    self.audit.credit_causality += 1;
                }
                pkt.credits.push(credit);
            }
            let decoded = sic && (credit > 0 || sic_new) && {
                let total: u64 = pkt.credits.iter().map(|&c| u64::from(c)).sum();
                let r_hat = reduced_rate(pkt.rate, total, ns);
                let per = backtrack_per_at(pkt.first_sinr, r_hat, ns);
                sampler.decode(&event(DecodeKind::PrivateBacktrack { birth: r.birth }), per)
            };
            tags.push(StreamTag::private(r.birth));
            acks.push(Ack::from_success(decoded));
        }
        Feedback::compress(tags, &acks)
    }

    fn apply_feedback(&mut self, k: usize, fb: &Feedback, n: usize, ledger: &mut BlockLedger) -> Result<()> {
        for (tag, ack) in fb.expand()? {
            if !ack.is_ack() {
                continue;
            }
            match tag.kind {
                StreamKind::Common => {
                    let pkt = self.common.get_mut(&tag.birth).ok_or_else(|| {
                        Error::Protocol(format!("ACK for unknown common packet {}", tag.birth))
                    })?;
                    if pkt.status[k] != PacketStatus::Pending {
                        continue;
                    }
                    pkt.status[k] = PacketStatus::Decoded;
                    let bits = pkt.new_bits[k];
                    ledger.record_decoded(k, StreamKind::Common, u64::from(bits), tag.birth, n);
                    ledger.record_packet(StreamKind::Common, true);
                    if bits > 0 {
                        ledger.close_message_part(k, tag.birth, StreamKind::Common, true);
                    }
                    self.census[0].decoded += 1;
                }
                StreamKind::Private => {
                    let pkt = self.private[k].get_mut(&tag.birth).ok_or_else(|| {
                        Error::Protocol(format!(
                            "ACK for unknown private packet {} of user {k}",
                            tag.birth
                        ))
                    })?;
                    if pkt.status != PacketStatus::Pending {
                        continue;
                    }
                    pkt.status = PacketStatus::Decoded;
                    ledger.record_decoded(k, StreamKind::Private, u64::from(pkt.new_bits), tag.birth, n);
                    ledger.record_packet(StreamKind::Private, true);
                    if pkt.new_bits > 0 {
                        ledger.close_message_part(k, tag.birth, StreamKind::Private, true);
                    }
                    self.census[1].decoded += 1;
                }
            }
        }
        Ok(())
    }

    fn expire(&mut self, n: usize, ledger: &mut BlockLedger) {
        let max_c = self.cfg.max_rounds_common;
        for pkt in self.common.values_mut() {
            if n + 1 - pkt.birth < max_c {
                continue;
            }
            for k in 0..self.cfg.num_users {
                if pkt.status[k] == PacketStatus::Pending {
                    pkt.status[k] = PacketStatus::Dropped;
                    ledger.record_packet(StreamKind::Common, false);
                    if pkt.new_bits[k] > 0 {
                        ledger.close_message_part(k, pkt.birth, StreamKind::Common, false);
                    }
                    self.census[0].dropped += 1;
                }
            }
        }
        self.common
            .retain(|_, p| p.status.contains(&PacketStatus::Pending));

        let max_p = self.cfg.max_rounds_private;
        for (k, packets) in self.private.iter_mut().enumerate() {
            for pkt in packets.values_mut() {
                if pkt.status == PacketStatus::Pending && n + 1 - pkt.birth >= max_p {
                    pkt.status = PacketStatus::Dropped;
                    ledger.record_packet(StreamKind::Private, false);
                    if pkt.new_bits > 0 {
                        ledger.close_message_part(k, pkt.birth, StreamKind::Private, false);
                    }
                    self.census[1].dropped += 1;
                }
            }
            packets.retain(|_, p| p.status == PacketStatus::Pending);
        }

        let horizon = self.cfg.max_rounds_common + self.cfg.max_rounds_private;
        for set in &mut self.rx_commons {
            set.retain(|&b| b + horizon > n);
        }
    }

    pub fn run_block(
        &mut self,
        input: &BlockInput<'_>,
        sampler: &mut dyn DecodeSampler,
        ledger: &mut BlockLedger,
    ) -> Result<AdvancedReport> {
        check_input(&self.cfg, input)?;
        let n = input.block;
        if self.common.keys().next_back().is_some_and(|&b| b >= n) {
            return Err(Error::Protocol(format!("block {n} is not after the last block")));
        }
        let k_users = self.cfg.num_users;
        let bound = self.cfg.max_rounds_common + self.cfg.max_rounds_private;
        let workload: Vec<usize> = (0..k_users).map(|k| self.decoding_workload(k, n)).collect();
        self.audit.workload_bound += workload.iter().filter(|&&w| w > bound).count() as u64;

        let plan = self.plan(input);
        if !plan.is_exact() {
            self.audit.payload_mismatch += 1;
        }
        self.open_packets(input, &plan, ledger);

        let mut feedback = Vec::with_capacity(k_users);
        for k in 0..k_users {
            feedback.push(self.receive(k, input, &plan, sampler)?);
        }
        for (k, fb) in feedback.iter().enumerate() {
            self.apply_feedback(k, fb, n, ledger)?;
        }
        self.expire(n, ledger);
        Ok(AdvancedReport {
            plan,
            feedback,
            workload,
        })
    }
}

impl Protocol for AdvancedScheduler {
    fn step(
        &mut self,
        input: &BlockInput<'_>,
        sampler: &mut dyn DecodeSampler,
        ledger: &mut BlockLedger,
    ) -> Result<Vec<Feedback>> {
        Ok(self.run_block(input, sampler, ledger)?.feedback)
    }

    fn census(&self) -> [PacketCensus; 2] {
        let mut c = self.census;
        c[0].in_flight = self
            .common
            .values()
            .map(|p| p.status.iter().filter(|&&s| s == PacketStatus::Pending).count() as u64)
            .sum();
        c[1].in_flight = self
            .private
            .iter()
            .map(|m| m.values().filter(|p| p.status == PacketStatus::Pending).count() as u64)
            .sum();
        c
    }

    fn audit(&self) -> AuditCounters {
        self.audit
    }

    fn needs_cdfs(&self) -> bool {
        self.sizer.needs_cdfs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{RateAllocation, SinrReport};
    use crate::sched::{ScriptedSampler, ThresholdSampler};

    fn cfg(k: usize, rounds: usize) -> ProtocolConfig {
        ProtocolConfig {
            num_users: k,
            block_length: 256,
            max_rounds_common: rounds,
            max_rounds_private: rounds,
        }
    }

    fn rates(k: usize) -> RateAllocation<f64> {
        RateAllocation {
            common_rate: 2.0,
            common_portions: vec![2.0 / k as f64; k],
            private_rates: vec![1.0; k],
        }
    }

    fn sinrs(k: usize) -> SinrReport<f64> {
        SinrReport {
            common: vec![10.0; k],
            private: vec![3.0; k],
        }
    }

    fn run(
        s: &mut AdvancedScheduler,
        sampler: &mut dyn DecodeSampler,
        l: &mut BlockLedger,
        blocks: std::ops::Range<usize>,
    ) -> Vec<AdvancedReport> {
        let (r, g) = (rates(s.cfg.num_users), sinrs(s.cfg.num_users));
        blocks
            .map(|n| {
                let input = BlockInput {
                    block: n,
                    rates: &r,
                    sinrs: &g,
                    cdfs: None,
                };
                s.run_block(&input, sampler, l).unwrap()
            })
            .collect()
    }

    #[test]
    fn expected_reward_cases() {
        let r = advanced_expected_rewards(0.0, 0.5, 0.0, 2.0, &[], &[]);
        assert_eq!((r.common, r.private), (0.5, 2.0));
        let t = [PrivateBacktrackTerm {
            rate: 1.5,
            per_a: 0.0,
            per_b: 0.0,
        }];
        let c = [CommonBacktrackTerm {
            portion: 0.25,
            per: 0.0,
        }];
        let r = advanced_expected_rewards(1.0, 0.5, 0.0, 2.0, &c, &t);
        assert_eq!((r.common, r.private), (0.0, 0.0));
        let r = advanced_expected_rewards(0.0, 0.5, 0.5, 2.0, &c, &t);
        assert_eq!(r.private, 1.5 + 1.0);
        assert_eq!(r.common, 0.75);
    }

    #[test]
    fn no_retx_means_all_new_common_bits() {
        let mut s = AdvancedScheduler::new(cfg(2, 2), RetxSizer::default()).unwrap();
        let mut l = BlockLedger::new(2, 256);
        let reps = run(&mut s, &mut ThresholdSampler, &mut l, 0..3);
        for rep in &reps {
            assert_eq!(rep.plan.common_supermessage_bits, 0);
            assert_eq!(rep.plan.new_common_bits_per_user, vec![256, 256]);
            assert!(rep.plan.is_exact());
            assert_eq!(rep.workload, vec![2, 2]);
            assert!(rep.feedback.iter().all(|f| f.single() == Some(Ack::Ack)));
        }
        assert_eq!(l.total_reward_bits(), 3 * 1024);
    }

    #[test]
    fn common_failure_is_single_nack() {
        let mut s = AdvancedScheduler::new(cfg(1, 2), RetxSizer::default()).unwrap();
        let mut l = BlockLedger::new(1, 256);
        let mut sampler = ScriptedSampler::new(false);
        let reps = run(&mut s, &mut sampler, &mut l, 0..3);
        for rep in &reps {
            assert_eq!(rep.feedback[0].single(), Some(Ack::Nack));
        }
        // No credits arrive, so no backtrack is ever sampled.
        assert!(sampler.attempted.iter().all(|e| e.kind == DecodeKind::Common));
        let c = s.census();
        assert!(c[0].balanced() && c[1].balanced());
        assert_eq!(l.packets(StreamKind::Common).dropped, 2);
    }

    #[test]
    fn small_retx_fits_in_common() {
        let mut s = AdvancedScheduler::new(cfg(2, 2), RetxSizer::default()).unwrap();
        let mut l = BlockLedger::new(2, 256);
        let mut sampler = ScriptedSampler::new(true);
        sampler.set(0, 0, DecodeKind::Private, false);
        let reps = run(&mut s, &mut sampler, &mut l, 0..2);
        let plan = &reps[1].plan;
        assert_eq!(plan.private_retx.len(), 1);
        let r = plan.private_retx[0];
        assert_eq!((r.in_common, r.in_private), (39, 0));
        assert!(plan.split_records.is_empty());
        assert_eq!(plan.new_private_bits, vec![256, 256]);
        // User 1 is prioritized for the leftover common capacity.
        assert_eq!(plan.new_common_bits_per_user, vec![0, 512 - 39]);
        assert_eq!(reps[1].workload, vec![3, 2]);
        assert!(plan.is_exact());
    }

    #[test]
    fn workload_reaches_bound_with_full_buffers() {
        let mut s = AdvancedScheduler::new(cfg(1, 3), RetxSizer::default()).unwrap();
        let mut l = BlockLedger::new(1, 256);
        let mut sampler = ScriptedSampler::new(false);
        let reps = run(&mut s, &mut sampler, &mut l, 0..5);
        let w: Vec<usize> = reps.iter().map(|r| r.workload[0]).collect();
        assert_eq!(w, vec![2, 4, 6, 6, 6]);
        assert_eq!(s.audit().total(), 0);
    }
}
