use std::collections::BTreeMap;

use dial_core::metrics::FEATURE_LEN;
use dial_core::sim::{Configuration, Op};
use dial_core::tuner::TunerParams;

pub fn candidate_of(x: &[f64]) -> Configuration {
    Configuration::new(x[FEATURE_LEN - 2] as u32, x[FEATURE_LEN - 1] as u32)
}

/// Stub model answering from a table keyed by candidate.
pub fn table_model(table: BTreeMap<Configuration, f64>) -> impl Fn(&[f64]) -> f64 {
    move |x: &[f64]| table[&candidate_of(x)]
}

/// Independent enumeration of thresholding, MinMax scaling, scoring and the
/// larger-window, larger-in-flight tie rule.
pub fn brute_force(
    table: &BTreeMap<Configuration, f64>,
    current: Configuration,
    params: &TunerParams,
    op: Op,
) -> Configuration {
    let kept: Vec<(Configuration, f64)> = table.iter().filter(|(_, &p)| p > params.tau).map(|(c, &p)| (*c, p)).collect();
    if kept.is_empty() {
        return current;
    }
    let w: Vec<f64> = kept.iter().map(|(c, _)| c.rpc_window_pages as f64).collect();
    let r: Vec<f64> = kept.iter().map(|(c, _)| c.rpcs_in_flight as f64).collect();
    let norm = |v: f64, all: &[f64]| {
        let lo = all.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi == lo {
            0.0
        } else {
            (v - lo) / (hi - lo)
        }
    };
    let mut best: Option<(f64, u32, u32)> = None;
    for (c, p) in &kept {
        let nw = norm(c.rpc_window_pages as f64, &w);
        let nr = norm(c.rpcs_in_flight as f64, &r);
        let score = match op {
            Op::Write => p * (1.0 + params.beta * (nw + nr)),
            Op::Read => p * (1.0 + params.alpha * nw) + nr,
        };
        let key = (score, c.rpc_window_pages, c.rpcs_in_flight);
        let wins = match best {
            None => true,
            Some(b) => key.0 > b.0 || (key.0 == b.0 && (key.1, key.2) > (b.1, b.2)),
        };
        if wins {
            best = Some(key);
        }
    }
    let (_, w, r) = best.unwrap();
    Configuration::new(w, r)
}
