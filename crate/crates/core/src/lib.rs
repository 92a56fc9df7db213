//! Link-level Monte Carlo simulator for downlink rate-splitting multiple
//! access with three link-layer protocols: AMC without retransmissions,
//! per-stream HARQ-IR, and layered HARQ with backtrack decoding.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases. Protocols and the sweep driver
//! run in `f64`.

pub mod amc;
pub mod channel;
pub mod error;
pub mod harqmath;
pub mod linalg;
pub mod metrics;
pub mod phy;
pub mod precoder;
pub mod scalar;
pub mod sched;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type CsitModel = channel::CsitModel<f64>;
pub type PrecoderSet = precoder::PrecoderSet<f64>;
pub type SinrReport = phy::SinrReport<f64>;
pub type RateAllocation = phy::RateAllocation<f64>;
pub type EmpiricalCdf = harqmath::EmpiricalCdf<f64>;
pub type DecodeAttempt = harqmath::DecodeAttempt<f64>;
pub type BacktrackAttempt = harqmath::BacktrackAttempt<f64>;

pub type ChannelRealizationF32 = channel::ChannelRealization<f32>;
pub type CsitModelF32 = channel::CsitModel<f32>;
pub type PrecoderSetF32 = precoder::PrecoderSet<f32>;
pub type SinrReportF32 = phy::SinrReport<f32>;
pub type RateAllocationF32 = phy::RateAllocation<f32>;
pub type EmpiricalCdfF32 = harqmath::EmpiricalCdf<f32>;
pub type DecodeAttemptF32 = harqmath::DecodeAttempt<f32>;
pub type BacktrackAttemptF32 = harqmath::BacktrackAttempt<f32>;
