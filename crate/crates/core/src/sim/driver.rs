use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amc::{select_rates, McsTable};
use crate::channel::{cscg, draw_realization, CsitModel};
use crate::error::{Error, Result};
use crate::harqmath::EmpiricalCdf;
use crate::linalg::CMatrix;
use crate::metrics::{BlockLedger, DropMetrics};
use crate::phy::{compute_sinrs, SplitRule};
use crate::precoder::{build_svd_mrt, effective_gains, gains_for_channel, PrecoderSet};
use crate::sched::{
    AdvancedScheduler, AuditCounters, BaselineScheduler, BernoulliSampler, BirthCdfs, BlockInput,
    NoHarqScheduler, Protocol, ProtocolConfig,
};

use super::config::{Scheme, SimConfig};

const TRACE_SLACK: f64 = 1e-9;
const PORTION_SLACK: f64 = 1e-9;

/// Independent random streams of one drop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    /// Shared by every scheme so they see the same channels.
    Channel,
    Decode(Scheme),
    ConditionalCdf(Scheme),
}

impl Purpose {
    fn stream(self) -> u64 {
        match self {
            Purpose::Channel => 0,
            Purpose::Decode(s) => 1 + SimConfig::scheme_stream(s),
            Purpose::ConditionalCdf(s) => 16 + SimConfig::scheme_stream(s),
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(master seed, SNR point, drop, purpose)`; independent of how
/// drops are scheduled on workers.
pub fn drop_rng(master_seed: u64, point: usize, drop: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut state = master_seed;
    let mut key = [0u8; 32];
    let words = [
        splitmix64(&mut state) ^ point as u64,
        splitmix64(&mut state) ^ (drop as u64).rotate_left(32),
        splitmix64(&mut state),
        splitmix64(&mut state),
    ];
    let mut mix = words[0] ^ words[1].rotate_left(17);
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        let v = splitmix64(&mut mix) ^ w;
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose.stream());
    rng
}

/// Invariant violations found while running drops.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditTotals {
    pub census: u64,
    pub payload: u64,
    pub credit_causality: u64,
    pub round_overflow: u64,
    pub workload: u64,
    pub portion_sum: u64,
    pub trace_power: u64,
}

impl AuditTotals {
    pub fn total(&self) -> u64 {
        self.census
            + self.payload
            + self.credit_causality
            + self.round_overflow
            + self.workload
            + self.portion_sum
            + self.trace_power
    }

    pub fn merge(&mut self, o: &AuditTotals) {
        self.census += o.census;
        self.payload += o.payload;
        self.credit_causality += o.credit_causality;
        self.round_overflow += o.round_overflow;
        self.workload += o.workload;
        self.portion_sum += o.portion_sum;
        self.trace_power += o.trace_power;
    }

    fn absorb(&mut self, a: &AuditCounters) {
        self.payload += a.payload_mismatch;
        self.credit_causality += a.credit_causality;
        self.round_overflow += a.round_overflow;
        self.workload += a.workload_bound;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropOutcome {
    pub metrics: DropMetrics,
    pub audit: AuditTotals,
    /// Mean AMC sum rate `R_c + Σ R_k` over the drop, bits/symbol.
    pub scheduled_rate: f64,
}

/// Everything that stays fixed across the drops of one sweep.
#[derive(Clone, Debug)]
pub struct SweepContext {
    pub config: SimConfig,
    pub table: McsTable,
}

impl SweepContext {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let table = match &config.mcs_table {
            Some(path) => McsTable::load(path, config.mcs_backoff_db)?,
            None => McsTable::standard().with_backoff_db(config.mcs_backoff_db)?,
        };
        Ok(SweepContext { config, table })
    }

    fn protocol_config(&self) -> ProtocolConfig {
        let c = &self.config;
        ProtocolConfig {
            num_users: c.num_users,
            block_length: c.block_length,
            max_rounds_common: 1 + c.max_retx_common,
            max_rounds_private: 1 + c.max_retx_private,
        }
    }

    fn protocol(&self, scheme: Scheme) -> Result<Box<dyn Protocol>> {
        let cfg = self.protocol_config();
        Ok(match scheme {
            Scheme::NoHarq => Box::new(NoHarqScheduler::new(cfg)?),
            Scheme::Baseline => Box::new(BaselineScheduler::new(cfg)?),
            Scheme::Advanced => Box::new(AdvancedScheduler::new(cfg, self.config.retx_sizer())?),
        })
    }
}

/// Empirical CDFs of the first-round SINRs given `Ĥ`, from fresh draws of
/// the CSIT error.
pub fn conditional_sinr_cdfs<R: rand::Rng + ?Sized>(
    estimated: &CMatrix<f64>,
    error_powers: &[f64],
    precoders: &PrecoderSet<f64>,
    noise: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<BirthCdfs> {
    let k = estimated.cols();
    let mut common = vec![Vec::with_capacity(samples); k];
    let mut private = vec![Vec::with_capacity(samples); k];
    for _ in 0..samples {
        let mut h = estimated.clone();
        for user in 0..k {
            for z in h.column_mut(user) {
                *z += cscg(rng, error_powers[user]);
            }
        }
        let s = compute_sinrs(&gains_for_channel(&h, precoders)?, noise)?;
        for user in 0..k {
            common[user].push(s.common[user]);
            private[user].push(s.private[user]);
        }
    }
    Ok(BirthCdfs {
        common: common.into_iter().map(EmpiricalCdf::new).collect::<Result<_>>()?,
        private: private.into_iter().map(EmpiricalCdf::new).collect::<Result<_>>()?,
    })
}

/// One independent protocol history at one SNR point.
pub fn run_drop(ctx: &SweepContext, scheme: Scheme, point: usize, drop: usize) -> Result<DropOutcome> {
    let c = &ctx.config;
    let snr_db = c.snr_grid_db[point];
    let p_t = 10f64.powf(snr_db / 10.0);
    let k = c.num_users;
    let noise = vec![1.0; k];
    let model = CsitModel::uniform(c.num_tx_antennas, k, c.csit_exponent)?
        .with_error_power_cap(c.error_power_cap)?;
    let error_powers = model.error_powers(p_t)?;
    let mut channel_rng = drop_rng(c.master_seed, point, drop, Purpose::Channel);
    let decode_rng = drop_rng(c.master_seed, point, drop, Purpose::Decode(scheme));
    let mut cdf_rng = drop_rng(c.master_seed, point, drop, Purpose::ConditionalCdf(scheme));
    let mut sampler = BernoulliSampler::new(decode_rng);
    let mut protocol = ctx.protocol(scheme)?;
    let mut ledger = BlockLedger::new(k, c.block_length);
    let mut audit = AuditTotals::default();
    let blocks = c.blocks_per_drop();
    let mut rate_sum = 0.0;

    for n in 0..blocks {
        let real = draw_realization(&model, p_t, n, &mut channel_rng)?;
        let precoders = build_svd_mrt(&real.estimated_channel, p_t, c.common_power_fraction)?;
        if precoders.trace_power() > p_t + TRACE_SLACK {
            audit.trace_power += 1;
        }
        let rates = select_rates(&real.estimated_channel, &precoders, &noise, &ctx.table, SplitRule::Equal)?;
        if rates.portion_residual().abs() > PORTION_SLACK {
            audit.portion_sum += 1;
        }
        rate_sum += rates.common_rate + rates.private_rates.iter().sum::<f64>();
        let sinrs = compute_sinrs(&effective_gains(&real, &precoders)?, &noise)?;
        let cdfs = if protocol.needs_cdfs() {
            Some(conditional_sinr_cdfs(
                &real.estimated_channel,
                &error_powers,
                &precoders,
                &noise,
                c.cdf_samples,
                &mut cdf_rng,
            )?)
        } else {
            None
        };
        let input = BlockInput {
            block: n,
            rates: &rates,
            sinrs: &sinrs,
            cdfs: cdfs.as_ref(),
        };
        protocol.step(&input, &mut sampler, &mut ledger)?;
        audit.census += protocol.census().iter().filter(|c| !c.balanced()).count() as u64;
    }
    audit.absorb(&protocol.audit());
    Ok(DropOutcome {
        metrics: ledger.summarize(blocks),
        audit,
        scheduled_rate: rate_sum / blocks as f64,
    })
}

/// One row of a sweep.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointResult {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub throughput: f64,
    pub throughput_se: f64,
    pub per_common: Option<f64>,
    pub per_private: Option<f64>,
    pub mer: Option<f64>,
    pub latency: Option<f64>,
    pub latency_se: Option<f64>,
    pub n_drops: usize,
    /// Mean AMC sum rate, an upper bound on the throughput.
    pub scheduled_rate: f64,
    pub totals: DropMetrics,
    pub audit: AuditTotals,
    pub wall_time_s: f64,
}

impl PartialEq for PointResult {
    /// Wall time is ignored.
    fn eq(&self, o: &Self) -> bool {
        self.snr_db.to_bits() == o.snr_db.to_bits()
            && self.scheme == o.scheme
            && self.throughput.to_bits() == o.throughput.to_bits()
            && self.throughput_se.to_bits() == o.throughput_se.to_bits()
            && bits(self.per_common) == bits(o.per_common)
            && bits(self.per_private) == bits(o.per_private)
            && bits(self.mer) == bits(o.mer)
            && bits(self.latency) == bits(o.latency)
            && bits(self.latency_se) == bits(o.latency_se)
            && self.n_drops == o.n_drops
            && self.scheduled_rate.to_bits() == o.scheduled_rate.to_bits()
            && self.totals == o.totals
            && self.audit == o.audit
    }
}

fn bits(x: Option<f64>) -> Option<u64> {
    x.map(f64::to_bits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SimConfig,
    /// Grouped by scheme, SNR ascending within a scheme.
    pub points: Vec<PointResult>,
}

impl SweepResult {
    pub fn point(&self, scheme: Scheme, snr_db: f64) -> Option<&PointResult> {
        self.points
            .iter()
            .find(|p| p.scheme == scheme && (p.snr_db - snr_db).abs() < 1e-9)
    }

    pub fn series(&self, scheme: Scheme) -> impl Iterator<Item = &PointResult> {
        self.points.iter().filter(move |p| p.scheme == scheme)
    }

    /// Appends `other`'s rows, keeping rows grouped by scheme.
    pub fn append(&mut self, other: SweepResult) {
        self.points.extend(other.points);
        self.points.sort_by_key(|p| p.scheme);
        for s in other.config.schemes {
            if !self.config.schemes.contains(&s) {
                self.config.schemes.push(s);
            }
        }
        self.config.schemes.sort();
    }

    pub fn audit_total(&self) -> AuditTotals {
        let mut t = AuditTotals::default();
        for p in &self.points {
            t.merge(&p.audit);
        }
        t
    }
}

/// Mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Ratio estimate `Σy / Σx` and its delta-method standard error.
pub fn ratio_and_se(y: &[f64], x: &[f64]) -> Option<(f64, f64)> {
    let n = y.len();
    let sx: f64 = x.iter().sum();
    if n == 0 || sx <= 0.0 {
        return None;
    }
    let r = y.iter().sum::<f64>() / sx;
    if n < 2 {
        return Some((r, 0.0));
    }
    let xbar = sx / n as f64;
    let s2 = y
        .iter()
        .zip(x)
        .map(|(yi, xi)| (yi - r * xi).powi(2))
        .sum::<f64>()
        / (n - 1) as f64;
    Some((r, (s2 / n as f64).sqrt() / xbar))
}

fn summarize_point(snr_db: f64, scheme: Scheme, outcomes: &[DropOutcome], wall: f64) -> PointResult {
    let mut totals = DropMetrics::default();
    let mut audit = AuditTotals::default();
    for o in outcomes {
        totals.merge(&o.metrics);
        audit.merge(&o.audit);
    }
    let tput: Vec<f64> = outcomes.iter().map(|o| o.metrics.throughput()).collect();
    let (throughput, throughput_se) = mean_and_se(&tput);
    let dw: Vec<f64> = outcomes.iter().map(|o| o.metrics.delay_weighted as f64).collect();
    let db: Vec<f64> = outcomes.iter().map(|o| o.metrics.delay_bits as f64).collect();
    let lat = ratio_and_se(&dw, &db);
    let rates: Vec<f64> = outcomes.iter().map(|o| o.scheduled_rate).collect();
    PointResult {
        snr_db,
        scheme,
        throughput,
        throughput_se,
        per_common: totals.packets[0].rate(),
        per_private: totals.packets[1].rate(),
        mer: totals.mer(),
        latency: lat.map(|l| l.0),
        latency_se: lat.map(|l| l.1),
        n_drops: outcomes.len(),
        scheduled_rate: mean_and_se(&rates).0,
        totals,
        audit,
        wall_time_s: wall,
    }
}

/// Runs one SNR point of one scheme.
pub fn run_point(ctx: &SweepContext, scheme: Scheme, point: usize) -> Result<PointResult> {
    let start = Instant::now();
    let outcomes: Vec<DropOutcome> = (0..ctx.config.num_realizations)
        .into_par_iter()
        .map(|d| run_drop(ctx, scheme, point, d))
        .collect::<Result<_>>()?;
    Ok(summarize_point(
        ctx.config.snr_grid_db[point],
        scheme,
        &outcomes,
        start.elapsed().as_secs_f64(),
    ))
}

/// Every configured scheme over the whole SNR grid. Results depend only on
/// the configuration, never on the worker count.
pub fn run_sweep(config: &SimConfig) -> Result<SweepResult> {
    let ctx = SweepContext::new(config.clone())?;
    let run = || -> Result<Vec<PointResult>> {
        let mut points = Vec::new();
        let mut schemes = ctx.config.schemes.clone();
        schemes.sort();
        schemes.dedup();
        for scheme in schemes {
            for point in 0..ctx.config.snr_grid_db.len() {
                let r = run_point(&ctx, scheme, point)?;
                log::info!(
                    "{scheme} {:>5.1} dB: throughput {:.4} ± {:.4}, {:.2}s",
                    r.snr_db,
                    r.throughput,
                    r.throughput_se,
                    r.wall_time_s
                );
                points.push(r);
            }
        }
        Ok(points)
    };
    let points = if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::invalid("workers", e.to_string()))?;
        pool.install(run)?
    } else {
        run()?
    };
    Ok(SweepResult {
        config: config.clone(),
        points,
    })
}
