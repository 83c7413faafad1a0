//! Benchmark-style I/O patterns: single- or five-stream, read or write,
//! sequential or random, at 8 KiB, 1 MiB or 16 MiB request sizes.
//!
//! Pattern names follow `<streams>_<op>_<access>_<size>`, e.g. `s_wr_sq_1m`
//! or `f_rd_rn_8k`. The access token `ip` selects the in-place update
//! pattern: sequential appends where most writes rewrite a recent offset.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{IoRequest, Op};

pub const KIB: u64 = 1024;
pub const MIB: u64 = 1024 * KIB;
pub const GIB: u64 = 1024 * MIB;

pub const DEFAULT_FILE_SIZE: u64 = 4 * GIB;
pub const DEFAULT_DURATION: f64 = 300.0;
/// Share of writes that rewrite a recent offset in the in-place pattern.
pub const IN_PLACE_OVERWRITE_FRACTION: f64 = 0.8;
/// Pacing of the in-place pattern, seconds between a completion and the next issue.
pub const IN_PLACE_THINK_TIME: f64 = 3e-3;
/// How many recent requests an overwrite may target.
pub const RECENT_WINDOW: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Access {
    Sequential,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub op: Op,
    pub access: Access,
    pub request_size: u64,
    pub streams: u32,
    pub file_size: u64,
    pub think_time: f64,
    pub duration: f64,
    pub overwrite_fraction: f64,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| {
            Err(Error::WorkloadSpec {
                name: self.name(),
                position: 0,
                reason: m.to_string(),
            })
        };
        if self.request_size == 0 || self.request_size > self.file_size {
            return bad("request size must be positive and at most the file size");
        }
        if self.streams == 0 {
            return bad("at least one stream is required");
        }
        if !(self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !(self.think_time >= 0.0) {
            return bad("think time must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.overwrite_fraction) {
            return bad("overwrite fraction must be in [0, 1]");
        }
        Ok(())
    }

    /// Canonical pattern name.
    pub fn name(&self) -> String {
        let streams = if self.streams == 1 { "s" } else { "f" };
        let op = match self.op {
            Op::Read => "rd",
            Op::Write => "wr",
        };
        let access = match self.access {
            Access::Sequential if self.overwrite_fraction > 0.0 => "ip",
            Access::Sequential => "sq",
            Access::Random => "rn",
        };
        let size = match self.request_size {
            s if s == 8 * KIB => "8k".to_string(),
            s if s == MIB => "1m".to_string(),
            s if s == 16 * MIB => "16m".to_string(),
            s => format!("{s}b"),
        };
        format!("{streams}_{op}_{access}_{size}")
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }
}

impl fmt::Display for WorkloadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Decode a pattern name. Token positions in errors are 1-based.
pub fn parse_spec(name: &str) -> Result<WorkloadSpec> {
    let err = |position: usize, reason: &str| Error::WorkloadSpec {
        name: name.to_string(),
        position,
        reason: reason.to_string(),
    };
    let tokens: Vec<&str> = name.split('_').collect();
    let streams = match tokens.first().copied() {
        Some("s") => 1,
        Some("f") => 5,
        _ => return Err(err(1, "expected stream type s or f")),
    };
    let op = match tokens.get(1).copied() {
        Some("rd") => Op::Read,
        Some("wr") => Op::Write,
        _ => return Err(err(2, "expected operation rd or wr")),
    };
    let (access, overwrite_fraction, think_time) = match tokens.get(2).copied() {
        Some("sq") => (Access::Sequential, 0.0, 0.0),
        Some("rn") => (Access::Random, 0.0, 0.0),
        Some("ip") if op == Op::Write => (
            Access::Sequential,
            IN_PLACE_OVERWRITE_FRACTION,
            IN_PLACE_THINK_TIME,
        ),
        _ => return Err(err(3, "expected access sq, rn or ip (ip is write-only)")),
    };
    let request_size = match tokens.get(3).copied() {
        Some("8k") => 8 * KIB,
        Some("1m") => MIB,
        Some("16m") => 16 * MIB,
        _ => return Err(err(4, "expected size 8k, 1m or 16m")),
    };
    if tokens.len() > 4 {
        return Err(err(5, "unexpected trailing token"));
    }
    let spec = WorkloadSpec {
        op,
        access,
        request_size,
        streams,
        file_size: DEFAULT_FILE_SIZE,
        think_time,
        duration: DEFAULT_DURATION,
        overwrite_fraction,
    };
    spec.validate()?;
    Ok(spec)
}

/// The twelve single-stream base patterns used for training data.
pub fn base_patterns() -> Vec<WorkloadSpec> {
    let mut out = Vec::new();
    for op in ["rd", "wr"] {
        for access in ["sq", "rn"] {
            for size in ["8k", "1m", "16m"] {
                out.push(parse_spec(&format!("s_{op}_{access}_{size}")).expect("valid base pattern"));
            }
        }
    }
    out
}

/// Per-stream generator state.
#[derive(Clone, Debug, Default)]
pub struct StreamCursor {
    next_offset: u64,
    recent: Vec<u64>,
    recent_pos: usize,
}

impl StreamCursor {
    pub fn next_request<R: Rng + ?Sized>(
        &mut self,
        spec: &WorkloadSpec,
        file_id: u32,
        rng: &mut R,
        now: f64,
    ) -> IoRequest {
        let slots = spec.file_size / spec.request_size;
        let overwrite = spec.op == Op::Write
            && spec.overwrite_fraction > 0.0
            && !self.recent.is_empty()
            && rng.gen::<f64>() < spec.overwrite_fraction;
        let offset = if overwrite {
            self.recent[rng.gen_range(0..self.recent.len())]
        } else {
            let off = match spec.access {
                Access::Sequential => {
                    let off = self.next_offset;
                    self.next_offset += spec.request_size;
                    if self.next_offset + spec.request_size > slots * spec.request_size {
                        self.next_offset = 0;
                    }
                    off
                }
                Access::Random => rng.gen_range(0..slots) * spec.request_size,
            };
            if spec.overwrite_fraction > 0.0 {
                if self.recent.len() < RECENT_WINDOW {
                    self.recent.push(off);
                } else {
                    self.recent[self.recent_pos] = off;
                    self.recent_pos = (self.recent_pos + 1) % RECENT_WINDOW;
                }
            }
            off
        };
        IoRequest {
            op: spec.op,
            file_id,
            offset,
            length: spec.request_size,
            submit_time: now,
        }
    }
}

/// Open-loop view of a workload: one request per stream per call.
#[derive(Clone, Debug)]
pub struct WorkloadGen {
    spec: WorkloadSpec,
    cursors: Vec<StreamCursor>,
}

impl WorkloadGen {
    pub fn new(spec: WorkloadSpec) -> Result<Self> {
        spec.validate()?;
        let cursors = vec![StreamCursor::default(); spec.streams as usize];
        Ok(WorkloadGen { spec, cursors })
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    /// Next request of every stream; stream `i` targets file `i`.
    pub fn next_requests<R: Rng + ?Sized>(&mut self, rng: &mut R, now: f64) -> Result<Vec<IoRequest>> {
        if now >= self.spec.duration {
            return Err(Error::InvalidRequest(format!(
                "time {now} is past the workload duration {}",
                self.spec.duration
            )));
        }
        let spec = &self.spec;
        Ok(self
            .cursors
            .iter_mut()
            .enumerate()
            .map(|(i, c)| c.next_request(spec, i as u32, rng, now))
            .collect())
    }
}

/// Ordered phases, each run for `switch_interval` seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSequence {
    pub phases: Vec<WorkloadSpec>,
    pub switch_interval: f64,
}

/// On-disk form of a sequence: pattern names plus the switch interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFile {
    pub phases: Vec<String>,
    pub switch_interval: f64,
}

impl WorkloadSequence {
    pub fn new(phases: Vec<WorkloadSpec>, switch_interval: f64) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Experiment("a sequence needs at least one phase".into()));
        }
        if !(switch_interval > 0.0) {
            return Err(Error::Experiment("switch interval must be positive".into()));
        }
        for p in &phases {
            p.validate()?;
        }
        Ok(WorkloadSequence {
            phases,
            switch_interval,
        })
    }

    pub fn single(spec: WorkloadSpec) -> Result<Self> {
        let d = spec.duration;
        Self::new(vec![spec], d)
    }

    pub fn from_names(names: &[&str], switch_interval: f64) -> Result<Self> {
        let phases = names
            .iter()
            .map(|n| parse_spec(n).map(|s| s.with_duration(switch_interval)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(phases, switch_interval)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: SequenceFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let names: Vec<&str> = file.phases.iter().map(String::as_str).collect();
        Self::from_names(&names, file.switch_interval)
    }

    pub fn total_duration(&self) -> f64 {
        self.switch_interval * self.phases.len() as f64
    }
}
