use thiserror::Error;

use crate::sim::{Configuration, Op};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown client {0}")]
    UnknownClient(usize),

    #[error("unknown OST {0}")]
    UnknownOst(usize),

    #[error("unknown file {0}")]
    UnknownFile(u32),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("configuration {0} is outside the configuration space")]
    ConfigOutOfSpace(Configuration),

    #[error("cannot advance to {until}: clock is already at {clock}")]
    TimeReversal { clock: f64, until: f64 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("malformed workload spec {name:?}: bad token {position} ({reason})")]
    WorkloadSpec {
        name: String,
        position: usize,
        reason: String,
    },

    #[error("invalid interval: {0}")]
    Interval(String),

    #[error("snapshot has no delta block (need two probes)")]
    MissingDeltas,

    #[error("feature schema mismatch: expected {expected} values, got {got}")]
    SchemaMismatch { expected: usize, got: usize },

    #[error("feature {index} is not finite")]
    NonFiniteFeature { index: usize },

    #[error("training data has no samples with label {missing}")]
    SingleClass { missing: u8 },

    #[error("training data mixes operation types ({0} and {1})")]
    MixedOps(Op, Op),

    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),

    #[error("invalid model at {path}: {reason}")]
    InvalidModel { path: String, reason: String },

    #[error("negative throughput ({0})")]
    NegativeThroughput(f64),

    #[error("invalid tuner parameters: {0}")]
    TunerParams(String),

    #[error("{0}")]
    Experiment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
