//! Reference implementations shared by the integration tests. None of this
//! calls into the library's numerics.
#![allow(dead_code)]

pub mod checks;

use std::f64::consts::PI;

/// `erfc` from a positive-term series below 2.5 and a backward-evaluated
/// continued fraction above.
pub fn erfc(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 2.5 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut n = 0.0;
        while term > sum * 1e-18 {
            n += 1.0;
            term *= 2.0 * x2 / (2.0 * n + 1.0);
            sum += term;
        }
        1.0 - 2.0 / PI.sqrt() * (-x2).exp() * sum
    } else {
        let mut t = x;
        for n in (1..=4000).rev() {
            t = x + (n as f64 / 2.0) / t;
        }
        (-x * x).exp() / (PI.sqrt() * t)
    }
}

pub fn q(x: f64) -> f64 {
    0.5 * erfc(x / 2f64.sqrt())
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// PER of an incremental-redundancy process after `history.len()` rounds.
pub fn ir_per(history: &[f64], rate: f64, ns: usize) -> f64 {
    let nsf = ns as f64;
    let t = history.len() as f64;
    let info: f64 = history.iter().map(|g| (1.0 + g).log2()).sum();
    let v: f64 = history.iter().map(|g| 1.0 - 1.0 / ((1.0 + g) * (1.0 + g))).sum();
    let arg = (info - rate + (t * nsf).log2() / (2.0 * nsf)) / ((v / nsf).sqrt() / 2f64.ln());
    q(arg)
}

pub fn reduced(rate: f64, credits: u64, ns: usize) -> f64 {
    let nsf = ns as f64;
    (rate - credits as f64 / nsf + nsf.log2() / (2.0 * nsf)).max(0.0)
}

pub fn backtrack_per(sinr: f64, r_hat: f64, ns: usize) -> f64 {
    let v = 1.0 - 1.0 / ((1.0 + sinr) * (1.0 + sinr));
    q((ns as f64).sqrt() * ((1.0 + sinr).log2() - r_hat) / (v.sqrt() / 2f64.ln()))
}
