//! Per-OSC statistics: raw counters probed from an OSC and the derived
//! metric snapshot the models consume.
//!
//! Every derived metric is computed over the window between two probes. Each
//! formula sits in its own function so a definition can change without
//! touching the snapshot layout or the feature schema.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Configuration, Op, PAGE_SIZE};

/// Version of the feature layout produced by [`feature_vector`].
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

/// Version of the snapshot log line format.
pub const SNAPSHOT_SCHEMA_VERSION: u32 = 1;

/// Number of per-operation metrics in a snapshot.
pub const OP_METRICS: usize = 4;
/// Number of metrics shared by both operation types.
pub const SHARED_METRICS: usize = 2;
/// Length of the feature vector.
pub const FEATURE_LEN: usize = OP_METRICS + SHARED_METRICS + (OP_METRICS + SHARED_METRICS) + 4;

/// Slot names of the feature vector, in order.
pub const FEATURE_NAMES: [&str; FEATURE_LEN] = [
    "rpc_page_utilization",
    "rpc_channel_utilization",
    "unit_page_rpc_latency",
    "data_transfer_volume",
    "dirty_cache_utilization",
    "estimated_cache_update",
    "delta_rpc_page_utilization",
    "delta_rpc_channel_utilization",
    "delta_unit_page_rpc_latency",
    "delta_data_transfer_volume",
    "delta_dirty_cache_utilization",
    "delta_estimated_cache_update",
    "current_rpc_window_pages",
    "current_rpcs_in_flight",
    "candidate_rpc_window_pages",
    "candidate_rpcs_in_flight",
];

/// Monotone counters for one operation type on one OSC.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpCounters {
    pub rpc_count: u64,
    pub page_count: u64,
    /// Sum of dispatch-to-completion latencies, seconds.
    pub rpc_latency_sum: f64,
    /// Sum of the OSC's in-flight count sampled at each dispatch.
    pub inflight_sample_sum: u64,
    pub inflight_sample_count: u64,
    pub bytes_transferred: u64,
}

impl OpCounters {
    fn minus(&self, prev: &OpCounters) -> OpCounters {
        OpCounters {
            rpc_count: self.rpc_count - prev.rpc_count,
            page_count: self.page_count - prev.page_count,
            rpc_latency_sum: self.rpc_latency_sum - prev.rpc_latency_sum,
            inflight_sample_sum: self.inflight_sample_sum - prev.inflight_sample_sum,
            inflight_sample_count: self.inflight_sample_count - prev.inflight_sample_count,
            bytes_transferred: self.bytes_transferred - prev.bytes_transferred,
        }
    }

    fn is_behind(&self, other: &OpCounters) -> bool {
        self.rpc_count < other.rpc_count
            || self.page_count < other.page_count
            || self.inflight_sample_count < other.inflight_sample_count
            || self.bytes_transferred < other.bytes_transferred
    }
}

/// Point-in-time copy of an OSC's raw statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RawCounters {
    /// Simulated time of the probe.
    pub time: f64,
    pub read: OpCounters,
    pub write: OpCounters,
    pub dirty_pages_current: u64,
    pub dirty_pages_max: u64,
    pub cache_absorbed_bytes: u64,
    pub llite_bytes_written_total: u64,
}

impl RawCounters {
    pub fn op(&self, op: Op) -> &OpCounters {
        match op {
            Op::Read => &self.read,
            Op::Write => &self.write,
        }
    }

    pub fn op_mut(&mut self, op: Op) -> &mut OpCounters {
        match op {
            Op::Read => &mut self.read,
            Op::Write => &mut self.write,
        }
    }
}

/// Derived metrics for one operation type over one interval.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpMetrics {
    pub rpc_page_utilization: f64,
    pub rpc_channel_utilization: f64,
    /// seconds/page
    pub unit_page_rpc_latency: f64,
    /// bytes moved by completed RPCs
    pub data_transfer_volume: f64,
}

impl OpMetrics {
    fn to_array(self) -> [f64; OP_METRICS] {
        [
            self.rpc_page_utilization,
            self.rpc_channel_utilization,
            self.unit_page_rpc_latency,
            self.data_transfer_volume,
        ]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedMetrics {
    pub dirty_cache_utilization: f64,
    /// bytes
    pub estimated_cache_update: f64,
}

impl SharedMetrics {
    fn to_array(self) -> [f64; SHARED_METRICS] {
        [self.dirty_cache_utilization, self.estimated_cache_update]
    }
}

/// Differences from the previous snapshot, same layout as the metrics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaBlock {
    pub read: OpMetrics,
    pub write: OpMetrics,
    pub shared: SharedMetrics,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub time: f64,
    pub interval: f64,
    pub read: OpMetrics,
    pub write: OpMetrics,
    pub shared: SharedMetrics,
    /// Absent for the first snapshot of a run.
    pub deltas: Option<DeltaBlock>,
    pub config_at_sample: Configuration,
}

impl MetricSnapshot {
    pub fn op(&self, op: Op) -> &OpMetrics {
        match op {
            Op::Read => &self.read,
            Op::Write => &self.write,
        }
    }

    /// Bytes/second moved for `op` over the snapshot interval.
    pub fn throughput(&self, op: Op) -> f64 {
        self.op(op).data_transfer_volume / self.interval
    }

    /// Fill the delta block from the preceding snapshot.
    pub fn with_deltas(mut self, prev: &MetricSnapshot) -> MetricSnapshot {
        let d = |a: OpMetrics, b: OpMetrics| OpMetrics {
            rpc_page_utilization: a.rpc_page_utilization - b.rpc_page_utilization,
            rpc_channel_utilization: a.rpc_channel_utilization - b.rpc_channel_utilization,
            unit_page_rpc_latency: a.unit_page_rpc_latency - b.unit_page_rpc_latency,
            data_transfer_volume: a.data_transfer_volume - b.data_transfer_volume,
        };
        self.deltas = Some(DeltaBlock {
            read: d(self.read, prev.read),
            write: d(self.write, prev.write),
            shared: SharedMetrics {
                dirty_cache_utilization: self.shared.dirty_cache_utilization
                    - prev.shared.dirty_cache_utilization,
                estimated_cache_update: self.shared.estimated_cache_update
                    - prev.shared.estimated_cache_update,
            },
        });
        self
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Mean pages per RPC over the allowed window.
pub fn rpc_page_utilization(d: &OpCounters, config: &Configuration) -> f64 {
    let mean_pages = ratio(d.page_count as f64, d.rpc_count as f64);
    ratio(mean_pages, config.rpc_window_pages as f64).clamp(0.0, 1.0)
}

/// Mean sampled in-flight count over the allowed maximum.
pub fn rpc_channel_utilization(d: &OpCounters, config: &Configuration) -> f64 {
    ratio(mean_inflight(d), config.rpcs_in_flight as f64).clamp(0.0, 1.0)
}

fn mean_inflight(d: &OpCounters) -> f64 {
    ratio(d.inflight_sample_sum as f64, d.inflight_sample_count as f64)
}

/// Mean RPC latency per page, normalized by the parallelism it was achieved at.
pub fn unit_page_rpc_latency(d: &OpCounters) -> f64 {
    let mean_latency = ratio(d.rpc_latency_sum, d.rpc_count as f64);
    let mean_pages = ratio(d.page_count as f64, d.rpc_count as f64);
    ratio(mean_latency, mean_pages * (mean_inflight(d) + 1.0))
}

pub fn data_transfer_volume(d: &OpCounters) -> f64 {
    d.bytes_transferred as f64
}

pub fn dirty_cache_utilization(curr: &RawCounters) -> f64 {
    ratio(curr.dirty_pages_current as f64, curr.dirty_pages_max as f64).clamp(0.0, 1.0)
}

/// Bytes written into the cache that were absorbed instead of transferred.
pub fn estimated_cache_update(curr: &RawCounters, prev: &RawCounters) -> f64 {
    (curr.cache_absorbed_bytes - prev.cache_absorbed_bytes) as f64
}

fn op_metrics(d: &OpCounters, config: &Configuration) -> OpMetrics {
    OpMetrics {
        rpc_page_utilization: rpc_page_utilization(d, config),
        rpc_channel_utilization: rpc_channel_utilization(d, config),
        unit_page_rpc_latency: unit_page_rpc_latency(d),
        data_transfer_volume: data_transfer_volume(d),
    }
}

/// Derive the metric snapshot for the interval `(prev, curr]`.
///
/// The returned snapshot has no delta block; chain it with
/// [`MetricSnapshot::with_deltas`].
pub fn derive(
    curr: &RawCounters,
    prev: &RawCounters,
    config: Configuration,
    interval: f64,
) -> Result<MetricSnapshot> {
    if !(interval.is_finite() && interval > 0.0) {
        return Err(Error::Interval(format!("interval must be positive, got {interval}")));
    }
    if prev.time > curr.time
        || curr.read.is_behind(&prev.read)
        || curr.write.is_behind(&prev.write)
        || curr.cache_absorbed_bytes < prev.cache_absorbed_bytes
    {
        return Err(Error::Interval("previous probe is newer than the current one".into()));
    }
    let read = curr.read.minus(&prev.read);
    let write = curr.write.minus(&prev.write);
    Ok(MetricSnapshot {
        time: curr.time,
        interval,
        read: op_metrics(&read, &config),
        write: op_metrics(&write, &config),
        shared: SharedMetrics {
            dirty_cache_utilization: dirty_cache_utilization(curr),
            estimated_cache_update: estimated_cache_update(curr, prev),
        },
        deltas: None,
        config_at_sample: config,
    })
}

/// Model input for evaluating `candidate` against the state in `snap`.
///
/// Layout (see [`FEATURE_NAMES`]): op-specific metrics, shared metrics, the
/// delta block in the same order, current configuration, candidate.
pub fn feature_vector(snap: &MetricSnapshot, candidate: Configuration, op: Op) -> Result<Vec<f64>> {
    let deltas = snap.deltas.ok_or(Error::MissingDeltas)?;
    let delta_op = match op {
        Op::Read => deltas.read,
        Op::Write => deltas.write,
    };
    let mut v = Vec::with_capacity(FEATURE_LEN);
    v.extend_from_slice(&snap.op(op).to_array());
    v.extend_from_slice(&snap.shared.to_array());
    v.extend_from_slice(&delta_op.to_array());
    v.extend_from_slice(&deltas.shared.to_array());
    v.push(snap.config_at_sample.rpc_window_pages as f64);
    v.push(snap.config_at_sample.rpcs_in_flight as f64);
    v.push(candidate.rpc_window_pages as f64);
    v.push(candidate.rpcs_in_flight as f64);
    debug_assert_eq!(v.len(), FEATURE_LEN);
    Ok(v)
}

/// One line of the snapshot log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotLogLine {
    pub schema_version: u32,
    pub osc: String,
    pub snapshot: MetricSnapshot,
}

/// Page-rounded byte count for `pages`.
pub fn pages_to_bytes(pages: u64) -> u64 {
    pages * PAGE_SIZE
}
