//! End-to-end sweeps: determinism, output round trips and sanity bounds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rsma_harq::channel::{draw_realization, CsitModel};
use rsma_harq::harqmath::{harq_ir_per, DecodeAttempt};
use rsma_harq::phy::compute_sinrs;
use rsma_harq::precoder::{build_svd_mrt, effective_gains};
use rsma_harq::sim::{read_csv, read_json, run_sweep, Scheme, SimConfig, SweepResult};
use rsma_harq::sim::output::{write_csv, write_json};

fn small(drops: usize) -> SimConfig {
    SimConfig {
        num_realizations: drops,
        snr_grid_db: vec![0.0, 15.0, 30.0],
        ..SimConfig::default()
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let one = run_sweep(&SimConfig { workers: 1, ..small(40) }).unwrap();
    let many = run_sweep(&SimConfig { workers: 4, ..small(40) }).unwrap();
    assert_eq!(one.points, many.points);
    let again = run_sweep(&SimConfig { workers: 3, ..small(40) }).unwrap();
    assert_eq!(one.points, again.points);
}

#[test]
fn seed_changes_results() {
    let a = run_sweep(&small(20)).unwrap();
    let b = run_sweep(&SimConfig { master_seed: 2, ..small(20) }).unwrap();
    assert_ne!(a.points, b.points);
}

#[test]
fn csv_and_json_round_trip() {
    let r = run_sweep(&small(10)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    write_csv(&r, &csv).unwrap();
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), r.points.len());
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.abs().max(1.0),
        (None, None) => true,
        _ => false,
    };
    for (row, p) in rows.iter().zip(&r.points) {
        assert_eq!((row.scheme, row.n_drops), (p.scheme, p.n_drops));
        assert!(close(Some(row.snr_db), Some(p.snr_db)));
        assert!(close(Some(row.throughput), Some(p.throughput)));
        assert!(close(Some(row.throughput_se), Some(p.throughput_se)));
        assert!(close(row.per_common, p.per_common));
        assert!(close(row.per_private, p.per_private));
        assert!(close(row.mer, p.mer));
        assert!(close(row.latency, p.latency));
        assert!(close(row.latency_se, p.latency_se));
    }

    let json = dir.path().join("r.json");
    write_json(&r, &json).unwrap();
    assert_eq!(read_json(&json).unwrap(), r);
}

#[test]
fn appended_sweeps_stay_grouped_by_scheme() {
    let part = |s: Scheme| {
        run_sweep(&SimConfig {
            schemes: vec![s],
            ..small(5)
        })
        .unwrap()
    };
    let mut r: SweepResult = part(Scheme::Advanced);
    r.append(part(Scheme::NoHarq));
    r.append(part(Scheme::Baseline));
    let order: Vec<Scheme> = r.points.iter().map(|p| p.scheme).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
    assert_eq!(r.config.schemes, Scheme::ALL.to_vec());
    assert_eq!(r.series(Scheme::Baseline).count(), 3);
}

#[test]
fn throughput_never_exceeds_scheduled_rate() {
    let r = run_sweep(&small(30)).unwrap();
    for p in &r.points {
        assert!(p.throughput <= p.scheduled_rate + 1e-12, "{p:?}");
        assert_eq!(p.audit.total(), 0);
    }
}

#[test]
fn no_harq_with_margin_delivers_most_of_its_schedule() {
    let r = run_sweep(&SimConfig {
        schemes: vec![Scheme::NoHarq],
        snr_grid_db: vec![40.0],
        csit_exponent: 2.0,
        mcs_backoff_db: 3.0,
        num_realizations: 100,
        ..SimConfig::default()
    })
    .unwrap();
    let p = &r.points[0];
    // Residual losses come from blocks where some user's common capacity is
    // below the lowest MCS entry.
    assert!(p.throughput > 0.9 * p.scheduled_rate, "{p:?}");
    assert!(p.per_common.unwrap() < 0.05);
}

#[test]
fn single_and_double_precision_agree() {
    let m64 = CsitModel::<f64>::uniform(8, 4, 0.6).unwrap();
    let m32 = CsitModel::<f32>::uniform(8, 4, 0.6).unwrap();
    for block in 0..10 {
        let pt = 100.0;
        let r64 = draw_realization(&m64, pt, block, &mut ChaCha8Rng::seed_from_u64(block as u64)).unwrap();
        let r32 = draw_realization(&m32, pt as f32, block, &mut ChaCha8Rng::seed_from_u64(block as u64)).unwrap();
        let p64 = build_svd_mrt(&r64.estimated_channel, pt, 0.9).unwrap();
        let p32 = build_svd_mrt(&r32.estimated_channel, pt as f32, 0.9).unwrap();
        let s64 = compute_sinrs(&effective_gains(&r64, &p64).unwrap(), &[1.0; 4]).unwrap();
        let s32 = compute_sinrs(&effective_gains(&r32, &p32).unwrap(), &[1.0f32; 4]).unwrap();
        for k in 0..4 {
            for (a, b) in [(s64.common[k], s32.common[k]), (s64.private[k], s32.private[k])] {
                assert!((a - b as f64).abs() <= 1e-3 * a.max(1e-3), "{a} vs {b}");
            }
        }
        let per64 = harq_ir_per(&DecodeAttempt {
            sinr_history: vec![s64.private[0]],
            first_round_rate: 2.0,
            block_length: 256,
        })
        .unwrap();
        let per32 = harq_ir_per(&DecodeAttempt {
            sinr_history: vec![s32.private[0]],
            first_round_rate: 2.0f32,
            block_length: 256,
        })
        .unwrap();
        assert!((per64 - per32 as f64).abs() < 1e-3);
    }
}
