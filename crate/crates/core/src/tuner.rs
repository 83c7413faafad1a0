//! Conditional score greedy selection: keep candidates the model is
//! confident about, then favor large values of the two tunables.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;
use crate::metrics::{feature_vector, MetricSnapshot};
use crate::provenance::Provenance;
use crate::sim::{ConfigSpace, Configuration, Op};

/// Anything that maps a feature vector to an improvement probability.
pub trait ProbabilityModel {
    fn predict_proba(&self, features: &[f64]) -> Result<f64>;
}

impl ProbabilityModel for GbdtModel {
    fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        GbdtModel::predict_proba(self, features)
    }
}

impl<F: Fn(&[f64]) -> f64> ProbabilityModel for F {
    fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        Ok(self(features))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerParams {
    pub tau: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for TunerParams {
    fn default() -> Self {
        TunerParams {
            tau: 0.8,
            alpha: 0.5,
            beta: 0.5,
            epsilon: 0.15,
        }
    }
}

impl TunerParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::TunerParams(m.to_string()));
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must be in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must be in (0, 1)");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) || !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("alpha and beta must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub theta: Configuration,
    pub p: f64,
    pub theta_norm: [f64; 2],
    pub score: f64,
}

/// Operation whose model drives this interval; `None` when the OSC was idle.
pub fn select_op_type(snap: &MetricSnapshot) -> Option<Op> {
    let r = snap.read.data_transfer_volume;
    let w = snap.write.data_transfer_volume;
    if r == 0.0 && w == 0.0 {
        None
    } else if r > w {
        Some(Op::Read)
    } else {
        Some(Op::Write)
    }
}

/// Every configuration with `p > tau`, ascending window then in-flight.
pub fn candidate_set<M: ProbabilityModel + ?Sized>(
    model: &M,
    snap: &MetricSnapshot,
    space: &ConfigSpace,
    tau: f64,
    op: Op,
) -> Result<Vec<ScoredCandidate>> {
    let mut out = Vec::new();
    for theta in space.iter() {
        let p = model.predict_proba(&feature_vector(snap, theta, op)?)?;
        if p > tau {
            out.push(ScoredCandidate {
                theta,
                p,
                theta_norm: [0.0, 0.0],
                score: 0.0,
            });
        }
    }
    Ok(out)
}

/// Per-dimension MinMax scaling over the set; a constant dimension maps to 0.
pub fn minmax_normalize(set: &mut [ScoredCandidate]) {
    let dims: [fn(&Configuration) -> f64; 2] = [
        |c| c.rpc_window_pages as f64,
        |c| c.rpcs_in_flight as f64,
    ];
    for (d, get) in dims.iter().enumerate() {
        let lo = set.iter().map(|c| get(&c.theta)).fold(f64::INFINITY, f64::min);
        let hi = set.iter().map(|c| get(&c.theta)).fold(f64::NEG_INFINITY, f64::max);
        for c in set.iter_mut() {
            c.theta_norm[d] = if hi > lo { (get(&c.theta) - lo) / (hi - lo) } else { 0.0 };
        }
    }
}

pub fn write_score(c: &ScoredCandidate, beta: f64) -> f64 {
    c.p * (1.0 + beta * (c.theta_norm[0] + c.theta_norm[1]))
}

pub fn read_score(c: &ScoredCandidate, alpha: f64) -> f64 {
    c.p * (1.0 + alpha * c.theta_norm[0]) + c.theta_norm[1]
}

/// Outcome of one tuning decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub op: Op,
    pub chosen: Configuration,
    /// Scored candidate set, in space order.
    pub candidates: Vec<ScoredCandidate>,
}

impl Decision {
    pub fn chosen_candidate(&self) -> Option<&ScoredCandidate> {
        self.candidates.iter().find(|c| c.theta == self.chosen)
    }
}

fn better(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    a.score
        .total_cmp(&b.score)
        .then(a.theta.rpc_window_pages.cmp(&b.theta.rpc_window_pages))
        .then(a.theta.rpcs_in_flight.cmp(&b.theta.rpcs_in_flight))
        == Ordering::Greater
}

/// Full decision including the scored candidate set.
pub fn decide<M: ProbabilityModel + ?Sized>(
    model: &M,
    snap: &MetricSnapshot,
    space: &ConfigSpace,
    current: Configuration,
    params: &TunerParams,
    op: Op,
) -> Result<Decision> {
    let mut set = candidate_set(model, snap, space, params.tau, op)?;
    if set.is_empty() {
        return Ok(Decision {
            op,
            chosen: current,
            candidates: set,
        });
    }
    minmax_normalize(&mut set);
    for c in set.iter_mut() {
        c.score = match op {
            Op::Write => write_score(c, params.beta),
            Op::Read => read_score(c, params.alpha),
        };
    }
    let mut best = &set[0];
    for c in &set[1..] {
        if better(c, best) {
            best = c;
        }
    }
    Ok(Decision {
        op,
        chosen: best.theta,
        candidates: set,
    })
}

/// The configuration to apply next.
pub fn tune<M: ProbabilityModel + ?Sized>(
    model: &M,
    snap: &MetricSnapshot,
    space: &ConfigSpace,
    current: Configuration,
    params: &TunerParams,
    op: Op,
) -> Result<Configuration> {
    decide(model, snap, space, current, params, op).map(|d| d.chosen)
}

/// Dump a decision's candidate set as CSV.
pub fn write_explain_csv<W: Write>(mut out: W, decision: &Decision, provenance: &Provenance) -> Result<()> {
    out.write_all(provenance.comment_lines().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "op",
        "rpc_window_pages",
        "rpcs_in_flight",
        "p",
        "window_norm",
        "inflight_norm",
        "score",
        "selected",
    ])?;
    for c in &decision.candidates {
        w.write_record([
            decision.op.as_str().to_string(),
            c.theta.rpc_window_pages.to_string(),
            c.theta.rpcs_in_flight.to_string(),
            c.p.to_string(),
            c.theta_norm[0].to_string(),
            c.theta_norm[1].to_string(),
            c.score.to_string(),
            (c.theta == decision.chosen).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
