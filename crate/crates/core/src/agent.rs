//! Per-OSC closed loop: probe, derive, tune, apply. In collection mode the
//! agent instead applies random configurations and labels their outcome.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{GbdtModel, TrainingSample};
use crate::metrics::{derive, feature_vector, MetricSnapshot, RawCounters};
use crate::sim::{ConfigSpace, Configuration, Op, OscId, SimState};
use crate::tuner::{decide, select_op_type, TunerParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    Tune,
    CollectTraining,
    Passive,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelPaths {
    pub read: Option<PathBuf>,
    pub write: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub probe_interval: f64,
    pub warmup_intervals: u32,
    pub tuner: TunerParams,
    pub mode: AgentMode,
    pub model_paths: ModelPaths,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            probe_interval: 0.5,
            warmup_intervals: 2,
            tuner: TunerParams::default(),
            mode: AgentMode::Tune,
            model_paths: ModelPaths::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.probe_interval.is_finite() && self.probe_interval > 0.0) {
            return Err(Error::Interval(format!(
                "probe interval must be positive, got {}",
                self.probe_interval
            )));
        }
        if self.warmup_intervals == 0 {
            return Err(Error::Interval("warmup must be at least one interval".into()));
        }
        self.tuner.validate()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let c: AgentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        c.validate()?;
        Ok(c)
    }
}

/// Read and write models; either may be missing.
#[derive(Clone, Debug, Default)]
pub struct Models {
    pub read: Option<GbdtModel>,
    pub write: Option<GbdtModel>,
}

impl Models {
    pub fn get(&self, op: Op) -> Option<&GbdtModel> {
        match op {
            Op::Read => self.read.as_ref(),
            Op::Write => self.write.as_ref(),
        }
    }

    pub fn load(paths: &ModelPaths) -> Result<Self> {
        let load = |p: &Option<PathBuf>| p.as_deref().map(GbdtModel::load).transpose();
        Ok(Models {
            read: load(&paths.read)?,
            write: load(&paths.write)?,
        })
    }
}

/// Label a configuration change: 1 if throughput rose by more than `epsilon`.
/// `None` when the previous throughput is zero.
pub fn label(prev: f64, next: f64, epsilon: f64) -> Result<Option<u8>> {
    for v in [prev, next] {
        if v < 0.0 || v.is_nan() {
            return Err(Error::NegativeThroughput(v));
        }
    }
    if prev == 0.0 {
        return Ok(None);
    }
    Ok(Some((next / prev > 1.0 + epsilon) as u8))
}

/// Access to exactly one OSC: everything an agent may observe or change.
pub trait OscControl {
    fn id(&self) -> OscId;
    fn now(&self) -> f64;
    fn probe(&self) -> Result<RawCounters>;
    fn config(&self) -> Result<Configuration>;
    fn set_config(&mut self, config: Configuration) -> Result<Configuration>;
    fn space(&self) -> &ConfigSpace;
}

/// [`OscControl`] over one OSC of a simulator.
pub struct SimOscPort<'a> {
    sim: &'a mut SimState,
    id: OscId,
}

impl<'a> SimOscPort<'a> {
    pub fn new(sim: &'a mut SimState, id: OscId) -> Result<Self> {
        sim.osc(id)?;
        Ok(SimOscPort { sim, id })
    }
}

impl OscControl for SimOscPort<'_> {
    fn id(&self) -> OscId {
        self.id
    }

    fn now(&self) -> f64 {
        self.sim.clock()
    }

    fn probe(&self) -> Result<RawCounters> {
        self.sim.probe(self.id)
    }

    fn config(&self) -> Result<Configuration> {
        self.sim.config(self.id)
    }

    fn set_config(&mut self, config: Configuration) -> Result<Configuration> {
        self.sim.set_config(self.id, config)
    }

    fn space(&self) -> &ConfigSpace {
        self.sim.space()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub time: f64,
    pub osc_id: OscId,
    pub snapshot: Option<MetricSnapshot>,
    pub op: Option<Op>,
    pub idle: bool,
    pub warmup: bool,
    pub config_before: Configuration,
    pub chosen: Option<Configuration>,
    /// Model probability of the chosen configuration.
    pub chosen_p: Option<f64>,
    pub candidates: usize,
    pub applied: bool,
    /// Completed-RPC bytes/s by op over the interval that just ended.
    pub throughput_before: [f64; 2],
    /// Same, over the following interval; filled in by the driver.
    pub throughput_after: Option<[f64; 2]>,
}

/// Action taken at the previous interval, awaiting its label.
#[derive(Clone, Debug)]
struct PendingAction {
    features: Vec<f64>,
    op: Op,
    throughput_before: f64,
}

/// Agent state for one OSC; constant size regardless of run length.
#[derive(Clone, Debug)]
pub struct OscAgent {
    config: AgentConfig,
    /// The two most recent raw probes, oldest first.
    probes: [Option<RawCounters>; 2],
    prev_snapshot: Option<MetricSnapshot>,
    intervals: u64,
    pending: Option<PendingAction>,
}

impl OscAgent {
    pub fn new(config: AgentConfig) -> Result<Self> {
        config.validate()?;
        Ok(OscAgent {
            config,
            probes: [None, None],
            prev_snapshot: None,
            intervals: 0,
            pending: None,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    /// Raw probes currently held.
    pub fn held_probes(&self) -> usize {
        self.probes.iter().flatten().count()
    }

    /// Take the baseline probe.
    pub fn start(&mut self, osc: &dyn OscControl) -> Result<()> {
        self.probes = [None, Some(osc.probe()?)];
        self.prev_snapshot = None;
        self.intervals = 0;
        self.pending = None;
        Ok(())
    }

    fn observe(&mut self, osc: &dyn OscControl) -> Result<Option<MetricSnapshot>> {
        let curr = osc.probe()?;
        self.probes = [self.probes[1].take(), Some(curr)];
        let Some(prev) = self.probes[0].as_ref() else {
            return Ok(None);
        };
        let interval = curr.time - prev.time;
        let mut snap = derive(&curr, prev, osc.config()?, interval)?;
        if let Some(p) = &self.prev_snapshot {
            snap = snap.with_deltas(p);
        }
        self.prev_snapshot = Some(snap);
        self.intervals += 1;
        Ok(Some(snap))
    }

    fn blank_record(&self, osc: &dyn OscControl, snap: Option<MetricSnapshot>, config: Configuration) -> IntervalRecord {
        let throughput_before = snap
            .as_ref()
            .map_or([0.0; 2], |s| [s.throughput(Op::Read), s.throughput(Op::Write)]);
        IntervalRecord {
            time: osc.now(),
            osc_id: osc.id(),
            op: snap.as_ref().and_then(select_op_type),
            idle: false,
            warmup: false,
            config_before: config,
            chosen: None,
            chosen_p: None,
            candidates: 0,
            applied: false,
            throughput_before,
            throughput_after: None,
            snapshot: snap,
        }
    }

    /// One tuning interval: probe, derive, select op, tune, apply.
    pub fn run_interval(&mut self, osc: &mut dyn OscControl, models: &Models) -> Result<IntervalRecord> {
        let snap = self.observe(osc)?;
        let current = osc.config()?;
        let mut rec = self.blank_record(osc, snap, current);
        if self.intervals < self.config.warmup_intervals as u64 || rec.snapshot.as_ref().is_none_or(|s| s.deltas.is_none()) {
            rec.warmup = true;
            return Ok(rec);
        }
        let Some(op) = rec.op else {
            rec.idle = true;
            return Ok(rec);
        };
        if self.config.mode != AgentMode::Tune {
            return Ok(rec);
        }
        let Some(model) = models.get(op) else {
            return Ok(rec);
        };
        let snap = rec.snapshot.as_ref().expect("checked above");
        let decision = decide(model, snap, osc.space(), current, &self.config.tuner, op)?;
        rec.candidates = decision.candidates.len();
        rec.chosen = Some(decision.chosen);
        rec.chosen_p = decision.chosen_candidate().map(|c| c.p);
        if decision.chosen != current {
            osc.set_config(decision.chosen)?;
            rec.applied = true;
        }
        Ok(rec)
    }

    /// One collection interval: label the previous random action, then take a new one.
    pub fn collect_interval<R: Rng + ?Sized>(
        &mut self,
        osc: &mut dyn OscControl,
        rng: &mut R,
    ) -> Result<(IntervalRecord, Option<TrainingSample>)> {
        let snap = self.observe(osc)?;
        let current = osc.config()?;
        let mut rec = self.blank_record(osc, snap, current);
        // Drawn every interval so agents sharing a seed stay aligned.
        let space = osc.space();
        let theta = space.get(rng.gen_range(0..space.len())).expect("index in range");
        let mut sample = None;
        if let (Some(p), Some(s)) = (self.pending.take(), rec.snapshot.as_ref()) {
            let next = s.throughput(p.op);
            if let Some(label) = label(p.throughput_before, next, self.config.tuner.epsilon)? {
                sample = Some(TrainingSample::new(p.features, label, p.op));
            }
        }
        if self.intervals < self.config.warmup_intervals as u64 || rec.snapshot.as_ref().is_none_or(|s| s.deltas.is_none()) {
            rec.warmup = true;
            return Ok((rec, sample));
        }
        let Some(op) = rec.op else {
            rec.idle = true;
            return Ok((rec, sample));
        };
        let snap = rec.snapshot.as_ref().expect("checked above");
        self.pending = Some(PendingAction {
            features: feature_vector(snap, theta, op)?,
            op,
            throughput_before: snap.throughput(op),
        });
        rec.chosen = Some(theta);
        if theta != current {
            osc.set_config(theta)?;
            rec.applied = true;
        }
        Ok((rec, sample))
    }
}
