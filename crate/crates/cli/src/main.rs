use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;

use rsma_harq::sim::{
    emit_plot_data, emit_results, parse_schemes, render, run_sweep, snr_grid, OutputFormat, SimConfig,
};

/// Monte Carlo sweep of RSMA link-layer protocols over an SNR grid.
///
/// Settings come from the built-in defaults, then `--config`, then the
/// flags given on the command line.
#[derive(Parser, Debug)]
#[command(name = "rsma-sim", version)]
struct Args {
    /// `key = value` file; keys are the SimConfig field names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `no_harq`, `baseline`, `advanced`, a comma list, or `all`.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    snr_min: Option<f64>,
    #[arg(long)]
    snr_max: Option<f64>,
    #[arg(long)]
    snr_step: Option<f64>,
    /// Drops per SNR point.
    #[arg(long)]
    drops: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Retransmissions for both stream types (1 or 2).
    #[arg(long)]
    max_retx: Option<usize>,
    #[arg(long)]
    max_retx_common: Option<usize>,
    #[arg(long)]
    max_retx_private: Option<usize>,
    /// Fixed retransmission length as a fraction of the original packet.
    #[arg(long)]
    retx_fraction: Option<f64>,
    /// Size retransmissions for this average backtrack PER instead.
    #[arg(long)]
    target_eps: Option<f64>,
    #[arg(long)]
    num_tx_antennas: Option<usize>,
    #[arg(long)]
    num_users: Option<usize>,
    #[arg(long)]
    block_length: Option<usize>,
    #[arg(long)]
    csit_exponent: Option<f64>,
    #[arg(long)]
    common_power_fraction: Option<f64>,
    #[arg(long)]
    error_power_cap: Option<f64>,
    /// MCS table file with `order code_rate` lines.
    #[arg(long)]
    mcs_table: Option<PathBuf>,
    #[arg(long)]
    mcs_backoff_db: Option<f64>,
    #[arg(long)]
    cdf_samples: Option<usize>,
    #[arg(long)]
    blocks_per_drop: Option<usize>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Result file; printed to stdout as CSV when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: String,
    /// Directory for per-figure CSVs (throughput, PER, MER, latency).
    #[arg(long)]
    emit_plot_data: Option<PathBuf>,
}

fn build_config(args: &Args) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => SimConfig::from_kv_file(path)?,
        None => SimConfig::default(),
    };
    if let Some(s) = &args.scheme {
        cfg.schemes = parse_schemes(s)?;
    }
    if args.snr_min.is_some() || args.snr_max.is_some() || args.snr_step.is_some() {
        let lo = args.snr_min.unwrap_or(cfg.snr_grid_db[0]);
        let hi = args.snr_max.unwrap_or(*cfg.snr_grid_db.last().unwrap_or(&lo));
        let step = args.snr_step.unwrap_or(5.0);
        cfg.snr_grid_db = snr_grid(lo, hi, step)?;
    }
    macro_rules! take {
        ($($arg:ident => $field:ident),* $(,)?) => {
            $(if let Some(v) = args.$arg.clone() { cfg.$field = v; })*
        };
    }
    take!(
        drops => num_realizations,
        seed => master_seed,
        max_retx => max_retx_common,
        max_retx => max_retx_private,
        max_retx_common => max_retx_common,
        max_retx_private => max_retx_private,
        retx_fraction => retx_fraction,
        num_tx_antennas => num_tx_antennas,
        num_users => num_users,
        block_length => block_length,
        csit_exponent => csit_exponent,
        common_power_fraction => common_power_fraction,
        error_power_cap => error_power_cap,
        mcs_backoff_db => mcs_backoff_db,
        cdf_samples => cdf_samples,
        workers => workers,
    );
    if args.target_eps.is_some() {
        cfg.target_eps = args.target_eps;
    }
    if args.mcs_table.is_some() {
        cfg.mcs_table = args.mcs_table.clone();
    }
    if args.blocks_per_drop.is_some() {
        cfg.blocks_per_drop = args.blocks_per_drop;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args = Args::parse();
    let cfg = build_config(&args)?;
    let format: OutputFormat = args.format.parse()?;
    let result = run_sweep(&cfg).context("sweep failed")?;
    let audit = result.audit_total();
    if audit.total() > 0 {
        log::warn!("invariant violations: {audit:?}");
    }
    match &args.out {
        Some(path) => {
            emit_results(&result, format, path)?;
            log::info!("wrote {}", path.display());
        }
        None => print!("{}", render(&result, format)?),
    }
    if let Some(dir) = &args.emit_plot_data {
        for p in emit_plot_data(&result, dir)? {
            log::info!("wrote {}", p.display());
        }
    }
    Ok(())
}
