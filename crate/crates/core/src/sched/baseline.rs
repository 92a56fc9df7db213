//! Baseline RSMA-HARQ: every stream runs its own HARQ-IR process and a
//! retransmission resends the buffered packet on the stream it came from,
//! at its first-round rate.

use crate::error::{Error, Result};
use crate::harqmath::ir_per_unchecked;
use crate::metrics::BlockLedger;
use crate::phy::apportion_bits;

use super::{
    check_input, Ack, AuditCounters, BlockInput, DecodeEvent, DecodeKind, DecodeSampler, Feedback,
    PacketCensus, Protocol, ProtocolConfig, StreamKind, StreamTag,
};

/// Expected per-block rewards of one user, in bits/symbol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpectedRewards {
    pub common: f64,
    pub private: f64,
}

/// `C̄ = C_k(1 − PER_c)` and `R̄ = R_p(1 − PER_c)(1 − PER_p)`.
pub fn baseline_expected_rewards(
    per_common: f64,
    per_private: f64,
    common_portion: f64,
    private_rate: f64,
) -> ExpectedRewards {
    let ok_c = 1.0 - per_common.clamp(0.0, 1.0);
    let ok_p = 1.0 - per_private.clamp(0.0, 1.0);
    ExpectedRewards {
        common: common_portion * ok_c,
        private: private_rate * ok_c * ok_p,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommonProcess {
    pub birth: usize,
    pub round: usize,
    pub rate: f64,
    pub bits: u32,
    /// New bits of each user inside the packet; sums to `bits`.
    pub owner_bits: Vec<u32>,
    pub sinr_history: Vec<Vec<f64>>,
    pub decoded: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrivateProcess {
    pub birth: usize,
    pub round: usize,
    pub rate: f64,
    pub bits: u32,
    pub sinr_history: Vec<f64>,
    /// Birth of the common packet on air in each round; SIC needs all of
    /// them decoded.
    pub common_births: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TxAction {
    New { birth: usize },
    Retx { birth: usize, round: usize },
}

impl TxAction {
    pub fn birth(self) -> usize {
        match self {
            TxAction::New { birth } | TxAction::Retx { birth, .. } => birth,
        }
    }

    pub fn is_retx(self) -> bool {
        matches!(self, TxAction::Retx { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineReport {
    pub common: TxAction,
    pub private: Vec<TxAction>,
    pub feedback: Vec<Feedback>,
}

#[derive(Clone, Debug)]
pub struct BaselineScheduler {
    cfg: ProtocolConfig,
    common: Option<CommonProcess>,
    private: Vec<Option<PrivateProcess>>,
    /// Common births each receiver has decoded, newest last.
    decoded_commons: Vec<Vec<usize>>,
    census: [PacketCensus; 2],
    audit: AuditCounters,
}

impl BaselineScheduler {
    pub fn new(cfg: ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(BaselineScheduler {
            cfg,
            common: None,
            private: vec![None; cfg.num_users],
            decoded_commons: vec![Vec::new(); cfg.num_users],
            census: Default::default(),
            audit: Default::default(),
        })
    }

    pub fn common_process(&self) -> Option<&CommonProcess> {
        self.common.as_ref()
    }

    pub fn private_process(&self, user: usize) -> Option<&PrivateProcess> {
        self.private[user].as_ref()
    }

    fn has_decoded_common(&self, user: usize, birth: usize) -> bool {
        self.decoded_commons[user].contains(&birth)
    }

    fn remember_common(&mut self, user: usize, birth: usize) {
        let list = &mut self.decoded_commons[user];
        if !list.contains(&birth) {
            list.push(birth);
        }
        let keep = 2 * (self.cfg.max_rounds_common + self.cfg.max_rounds_private);
        if list.len() > keep {
            list.drain(..list.len() - keep);
        }
    }

    pub fn run_block(
        &mut self,
        input: &BlockInput<'_>,
        sampler: &mut dyn DecodeSampler,
        ledger: &mut BlockLedger,
    ) -> Result<BaselineReport> {
        check_input(&self.cfg, input)?;
        let n = input.block;
        let k_users = self.cfg.num_users;
        let ns = self.cfg.block_length;

        // Transmitter.
        let common_action = match &mut self.common {
            Some(p) => {
                p.round += 1;
                TxAction::Retx {
                    birth: p.birth,
                    round: p.round,
                }
            }
            None => {
                let bits = input.rates.common_bits(ns);
                let owner_bits = apportion_bits(bits, &input.rates.common_portions);
                for (k, &b) in owner_bits.iter().enumerate() {
                    if b > 0 {
                        ledger.open_message_part(k, n, StreamKind::Common);
                    }
                }
                ledger.record_scheduled(u64::from(bits));
                self.census[0].opened += k_users as u64;
                self.common = Some(CommonProcess {
                    birth: n,
                    round: 1,
                    rate: input.rates.common_rate,
                    bits,
                    owner_bits,
                    sinr_history: vec![Vec::new(); k_users],
                    decoded: vec![false; k_users],
                });
                TxAction::New { birth: n }
            }
        };
        let mut private_actions = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let action = match &mut self.private[k] {
                Some(p) => {
                    p.round += 1;
                    TxAction::Retx {
                        birth: p.birth,
                        round: p.round,
                    }
                }
                None => {
                    let bits = input.rates.private_bits(k, ns);
                    ledger.open_message_part(k, n, StreamKind::Private);
                    ledger.record_scheduled(u64::from(bits));
                    self.census[1].opened += 1;
                    self.private[k] = Some(PrivateProcess {
                        birth: n,
                        round: 1,
                        rate: input.rates.private_rates[k],
                        bits,
                        sinr_history: Vec::new(),
                        common_births: Vec::new(),
                    });
                    TxAction::New { birth: n }
                }
            };
            private_actions.push(action);
        }
        let common_birth = common_action.birth();
        if let TxAction::Retx { round, .. } = common_action {
            if round > self.cfg.max_rounds_common {
                self.audit.round_overflow += 1;
            }
        }
        for a in &private_actions {
            if let TxAction::Retx { round, .. } = *a {
                if round > self.cfg.max_rounds_private {
                    self.audit.round_overflow += 1;
                }
            }
        }

        // Receivers.
        let mut feedback = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let proc_c = self.common.as_mut().expect("common process open");
            let common_ok = if proc_c.decoded[k] {
                // Already decoded in an earlier round: subtracted directly.
                true
            } else {
                proc_c.sinr_history[k].push(input.sinrs.common[k]);
                let per = ir_per_unchecked(&proc_c.sinr_history[k], proc_c.rate, ns);
                sampler.decode(
                    &DecodeEvent {
                        block: n,
                        user: k,
                        kind: DecodeKind::Common,
                    },
                    per,
                )
            };
            if common_ok {
                self.remember_common(k, common_birth);
            }

            let proc_p = self.private[k].as_mut().expect("private process open");
            proc_p.sinr_history.push(input.sinrs.private[k]);
            proc_p.common_births.push(common_birth);
            let births = proc_p.common_births.clone();
            let sic_ok = births.iter().all(|&b| self.decoded_commons[k].contains(&b));
            let proc_p = self.private[k].as_ref().expect("private process open");
            let private_ok = if sic_ok {
                let per = ir_per_unchecked(&proc_p.sinr_history, proc_p.rate, ns);
                sampler.decode(
                    &DecodeEvent {
                        block: n,
                        user: k,
                        kind: DecodeKind::Private,
                    },
                    per,
                )
            } else {
                false
            };
            let tags = vec![
                StreamTag::common(common_birth),
                StreamTag::private(proc_p.birth),
            ];
            feedback.push(Feedback::compress(
                tags,
                &[Ack::from_success(common_ok), Ack::from_success(private_ok)],
            )?);
        }

        // Transmitter consumes the feedback.
        for (k, fb) in feedback.iter().enumerate() {
            for (tag, ack) in fb.expand()? {
                match tag.kind {
                    StreamKind::Common => self.apply_common(k, tag.birth, ack, n, ledger)?,
                    StreamKind::Private => self.apply_private(k, tag.birth, ack, n, ledger)?,
                }
            }
        }
        self.close_common(n, ledger);

        Ok(BaselineReport {
            common: common_action,
            private: private_actions,
            feedback,
        })
    }

    fn apply_common(&mut self, k: usize, birth: usize, ack: Ack, n: usize, ledger: &mut BlockLedger) -> Result<()> {
        let p = self.common.as_mut().expect("common process open");
        if p.birth != birth {
            return Err(Error::Protocol(format!(
                "feedback for common packet {birth}, transmitter holds {}",
                p.birth
            )));
        }
        if ack.is_ack() && !p.decoded[k] {
            p.decoded[k] = true;
            let bits = p.owner_bits[k];
            ledger.record_decoded(k, StreamKind::Common, u64::from(bits), birth, n);
            ledger.record_packet(StreamKind::Common, true);
            if bits > 0 {
                ledger.close_message_part(k, birth, StreamKind::Common, true);
            }
            self.census[0].decoded += 1;
        }
        Ok(())
    }

    fn apply_private(&mut self, k: usize, birth: usize, ack: Ack, n: usize, ledger: &mut BlockLedger) -> Result<()> {
        let slot = &mut self.private[k];
        let p = slot.as_ref().expect("private process open");
        if p.birth != birth {
            return Err(Error::Protocol(format!(
                "feedback for private packet {birth} of user {k}, transmitter holds {}",
                p.birth
            )));
        }
        if ack.is_ack() {
            ledger.record_decoded(k, StreamKind::Private, u64::from(p.bits), birth, n);
            ledger.record_packet(StreamKind::Private, true);
            ledger.close_message_part(k, birth, StreamKind::Private, true);
            self.census[1].decoded += 1;
            *slot = None;
        } else if p.round >= self.cfg.max_rounds_private {
            ledger.record_packet(StreamKind::Private, false);
            ledger.close_message_part(k, birth, StreamKind::Private, false);
            self.census[1].dropped += 1;
            *slot = None;
        }
        Ok(())
    }

    fn close_common(&mut self, _n: usize, ledger: &mut BlockLedger) {
        let Some(p) = &self.common else { return };
        if p.decoded.iter().all(|&d| d) {
            self.common = None;
        } else if p.round >= self.cfg.max_rounds_common {
            for k in 0..self.cfg.num_users {
                if !p.decoded[k] {
                    ledger.record_packet(StreamKind::Common, false);
                    if p.owner_bits[k] > 0 {
                        ledger.close_message_part(k, p.birth, StreamKind::Common, false);
                    }
                    self.census[0].dropped += 1;
                }
            }
            self.common = None;
        }
    }

    /// True while `user` still has the common packet born at `birth` in
    /// its decode buffer (used by tests).
    pub fn common_pending_for(&self, user: usize) -> bool {
        self.common.as_ref().is_some_and(|p| !p.decoded[user])
    }

    pub fn receiver_decoded_common(&self, user: usize, birth: usize) -> bool {
        self.has_decoded_common(user, birth)
    }
}

impl Protocol for BaselineScheduler {
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
            .as_ref()
            .map_or(0, |p| p.decoded.iter().filter(|&&d| !d).count() as u64);
        c[1].in_flight = self.private.iter().filter(|p| p.is_some()).count() as u64;
        c
    }

    fn audit(&self) -> AuditCounters {
        self.audit
    }
}
