//! Experiment orchestration: training-data collection, model training,
//! fixed/default/tuned runs, exhaustive sweeps and summary reports.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentMode, IntervalRecord, Models, OscAgent, SimOscPort};
use crate::error::{Error, Result};
use crate::gbdt::{train, Confusion, GbdtModel, Hyperparams, TrainingSample};
use crate::provenance::Provenance;
use crate::sim::{mix_seed, Configuration, Op, OscId, Scenario, SimState};
use crate::workload::{base_patterns, parse_spec, WorkloadSequence, WorkloadSpec};

const EXPLORE_STREAM: u64 = 0x05ee_dc01_1ec7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Default,
    Tuned,
    Fixed(Configuration),
    Collect,
}

impl RunMode {
    pub fn label(&self) -> String {
        match self {
            RunMode::Default => "default".into(),
            RunMode::Tuned => "tuned".into(),
            RunMode::Fixed(c) => format!("fixed{}x{}", c.rpc_window_pages, c.rpcs_in_flight),
            RunMode::Collect => "collect".into(),
        }
    }
}

/// One simulation run: a workload sequence per client under one mode.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub scenario: Scenario,
    /// One sequence per client; all must share the switch interval.
    pub workloads: Vec<WorkloadSequence>,
    pub mode: RunMode,
    pub seed: u64,
    pub agent: AgentConfig,
}

impl RunPlan {
    pub fn standalone(scenario: Scenario, spec: WorkloadSpec, mode: RunMode, seed: u64) -> Result<Self> {
        Ok(RunPlan {
            scenario,
            workloads: vec![WorkloadSequence::single(spec)?],
            mode,
            seed,
            agent: AgentConfig::default(),
        })
    }

    pub fn duration(&self) -> f64 {
        self.workloads
            .iter()
            .map(WorkloadSequence::total_duration)
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<()> {
        if self.workloads.len() != self.scenario.clients {
            return Err(Error::Experiment(format!(
                "{} workloads given for {} clients",
                self.workloads.len(),
                self.scenario.clients
            )));
        }
        let dt = self.agent.probe_interval;
        for w in &self.workloads {
            let k = w.switch_interval / dt;
            if (k - k.round()).abs() > 1e-9 {
                return Err(Error::Experiment(
                    "switch interval must be a multiple of the probe interval".into(),
                ));
            }
        }
        self.agent.validate()
    }
}

/// Completed-RPC throughput of one OSC over one workload phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub workload: String,
    pub mode: String,
    pub seed: u64,
    pub client: usize,
    pub ost: usize,
    pub phase: usize,
    pub phase_workload: String,
    pub read_bps: f64,
    pub write_bps: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub seed: u64,
    pub mode: Option<RunMode>,
    pub duration: f64,
    pub probe_interval: f64,
    pub phases: Vec<PhaseRow>,
    /// Aggregate throughput per client per probe interval, bytes/s.
    pub series: Vec<Vec<f64>>,
    pub records: Vec<IntervalRecord>,
    pub samples: Vec<TrainingSample>,
    pub digest: u64,
    /// Application bytes completed per client.
    pub app_bytes: Vec<u64>,
}

impl RunResult {
    /// Mean completed-RPC throughput of one client over the whole run.
    pub fn client_mean(&self, client: usize) -> f64 {
        let s = &self.series[client];
        s.iter().sum::<f64>() / s.len().max(1) as f64
    }

    /// Sum of all clients' mean throughputs.
    pub fn aggregate_mean(&self) -> f64 {
        (0..self.series.len()).map(|c| self.client_mean(c)).sum()
    }

    /// Mean throughput of one client during one phase (all its OSCs, both ops).
    pub fn phase_mean(&self, client: usize, phase: usize) -> f64 {
        self.phases
            .iter()
            .filter(|r| r.client == client && r.phase == phase)
            .map(|r| r.read_bps + r.write_bps)
            .sum()
    }
}

fn osc_bytes(sim: &SimState, id: OscId) -> Result<[u64; 2]> {
    let c = sim.probe(id)?;
    Ok([c.read.bytes_transferred, c.write.bytes_transferred])
}

/// Execute one run to completion.
pub fn run(plan: &RunPlan, models: &Models) -> Result<RunResult> {
    plan.validate()?;
    let mut scenario = plan.scenario.clone();
    scenario.seed = plan.seed;
    if let RunMode::Fixed(c) = plan.mode {
        scenario.default_config = c;
    }
    let mut sim = SimState::new(scenario)?;
    let ids = sim.osc_ids();
    let dt = plan.agent.probe_interval;
    let duration = plan.duration();
    let steps = (duration / dt).round() as usize;
    let mut agent_cfg = plan.agent.clone();
    agent_cfg.mode = match plan.mode {
        RunMode::Tuned => AgentMode::Tune,
        RunMode::Collect => AgentMode::CollectTraining,
        _ => AgentMode::Passive,
    };
    let mut agents: Vec<OscAgent> = ids
        .iter()
        .map(|_| OscAgent::new(agent_cfg.clone()))
        .collect::<Result<_>>()?;
    // Agents on one client share an exploration seed, so they explore in lockstep.
    let mut rngs: Vec<ChaCha8Rng> = ids
        .iter()
        .map(|id| ChaCha8Rng::seed_from_u64(mix_seed(&[plan.seed, EXPLORE_STREAM, id.client as u64])))
        .collect();

    let mut phase = vec![0usize; plan.workloads.len()];
    for (c, seq) in plan.workloads.iter().enumerate() {
        sim.set_workload(c, seq.phases[0].clone().with_duration(seq.switch_interval))?;
    }
    for (a, &id) in agents.iter_mut().zip(&ids) {
        a.start(&SimOscPort::new(&mut sim, id)?)?;
    }

    let mut result = RunResult {
        seed: plan.seed,
        mode: Some(plan.mode),
        duration,
        probe_interval: dt,
        series: vec![Vec::with_capacity(steps); plan.workloads.len()],
        ..Default::default()
    };
    let mut last_bytes: Vec<[u64; 2]> = ids.iter().map(|&id| osc_bytes(&sim, id)).collect::<Result<_>>()?;
    let mut phase_start: Vec<[u64; 2]> = last_bytes.clone();
    let mut pending: Vec<Option<IntervalRecord>> = vec![None; ids.len()];
    let name = |seq: &WorkloadSequence| {
        seq.phases.iter().map(WorkloadSpec::name).collect::<Vec<_>>().join("+")
    };

    for step in 1..=steps {
        let t = step as f64 * dt;
        sim.advance(t)?;
        let mut client_bps = vec![0.0; plan.workloads.len()];
        for (k, &id) in ids.iter().enumerate() {
            let b = osc_bytes(&sim, id)?;
            client_bps[id.client] += ((b[0] - last_bytes[k][0]) + (b[1] - last_bytes[k][1])) as f64 / dt;
            last_bytes[k] = b;
        }
        for (c, v) in client_bps.into_iter().enumerate() {
            result.series[c].push(v);
        }
        for (k, &id) in ids.iter().enumerate() {
            let mut port = SimOscPort::new(&mut sim, id)?;
            let rec = match plan.mode {
                RunMode::Collect => {
                    let (rec, sample) = agents[k].collect_interval(&mut port, &mut rngs[k])?;
                    if let Some(mut s) = sample {
                        let w = &plan.workloads[id.client];
                        s.source = Some(format!("{}/seed={}/{}", w.phases[phase[id.client]].name(), plan.seed, id));
                        result.samples.push(s);
                    }
                    rec
                }
                _ => agents[k].run_interval(&mut port, models)?,
            };
            if let Some(mut prev) = pending[k].take() {
                prev.throughput_after = Some(rec.throughput_before);
                result.records.push(prev);
            }
            pending[k] = Some(rec);
        }
        for (c, seq) in plan.workloads.iter().enumerate() {
            let boundary = ((phase[c] + 1) as f64 * seq.switch_interval / dt).round() as usize;
            if step != boundary {
                continue;
            }
            for (k, &id) in ids.iter().enumerate().filter(|(_, id)| id.client == c) {
                let b = last_bytes[k];
                result.phases.push(PhaseRow {
                    workload: name(seq),
                    mode: plan.mode.label(),
                    seed: plan.seed,
                    client: c,
                    ost: id.ost,
                    phase: phase[c],
                    phase_workload: seq.phases[phase[c]].name(),
                    read_bps: (b[0] - phase_start[k][0]) as f64 / seq.switch_interval,
                    write_bps: (b[1] - phase_start[k][1]) as f64 / seq.switch_interval,
                });
                phase_start[k] = b;
            }
            phase[c] += 1;
            if phase[c] < seq.phases.len() {
                debug!("client {c} switches to {} at t={t}", seq.phases[phase[c]]);
                sim.set_workload(c, seq.phases[phase[c]].clone().with_duration(seq.switch_interval))?;
            } else {
                sim.stop_workload(c)?;
            }
        }
    }
    result.records.extend(pending.into_iter().flatten());
    result.digest = sim.digest();
    result.app_bytes = (0..plan.workloads.len())
        .map(|c| sim.client_totals(c).map(|t| t.read_bytes + t.write_bytes))
        .collect::<Result<_>>()?;
    Ok(result)
}

/// Protocol sizes for collection and evaluation runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Protocol {
    pub run_seconds: f64,
    pub repeats: u32,
}

impl Protocol {
    /// 60 s runs, 5 repeats.
    pub fn desk() -> Self {
        Protocol {
            run_seconds: 60.0,
            repeats: 5,
        }
    }

    /// 300 s runs, 30 repeats.
    pub fn paper() -> Self {
        Protocol {
            run_seconds: 300.0,
            repeats: 30,
        }
    }
}

/// Seeds used for `repeats` runs starting at `seed`.
pub fn repeat_seeds(seed: u64, repeats: u32) -> Vec<u64> {
    (0..repeats as u64).map(|r| seed.wrapping_add(r)).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectStats {
    pub runs: usize,
    pub samples: [usize; 2],
    pub positives: [usize; 2],
    /// Labelled intervals dropped because the previous throughput was zero.
    pub discarded: usize,
}

/// Collected samples split by op.
#[derive(Clone, Debug, Default)]
pub struct Collected {
    pub read: Vec<TrainingSample>,
    pub write: Vec<TrainingSample>,
    pub stats: CollectStats,
}

/// Run collection agents over `mixes` × `seeds`. Each mix lists one
/// workload per client; the scenario's client count is set to match.
pub fn collect(scenario: &Scenario, mixes: &[Vec<WorkloadSpec>], protocol: &Protocol, seed: u64, agent: &AgentConfig) -> Result<Collected> {
    let seeds = repeat_seeds(seed, protocol.repeats);
    let jobs: Vec<(usize, u64)> = (0..mixes.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    info!("collecting {} runs", jobs.len());
    let mut runs: Vec<(usize, u64, RunResult)> = jobs
        .par_iter()
        .map(|&(p, s)| {
            let mut scenario = scenario.clone();
            scenario.clients = mixes[p].len();
            let workloads = mixes[p]
                .iter()
                .map(|w| WorkloadSequence::single(w.clone().with_duration(protocol.run_seconds)))
                .collect::<Result<_>>()?;
            let plan = RunPlan {
                scenario,
                workloads,
                mode: RunMode::Collect,
                seed: s,
                agent: agent.clone(),
            };
            run(&plan, &Models::default()).map(|r| (p, s, r))
        })
        .collect::<Result<_>>()?;
    runs.sort_by_key(|(p, s, _)| (*p, *s));
    let mut out = Collected::default();
    for (_, _, r) in runs {
        out.stats.runs += 1;
        let labelled_slots = r
            .records
            .iter()
            .filter(|rec| rec.chosen.is_some() && rec.throughput_after.is_some())
            .count();
        out.stats.discarded += labelled_slots.saturating_sub(r.samples.len());
        for s in r.samples {
            let i = s.op.index();
            out.stats.samples[i] += 1;
            out.stats.positives[i] += s.label as usize;
            match s.op {
                Op::Read => out.read.push(s),
                Op::Write => out.write.push(s),
            }
        }
    }
    Ok(out)
}

/// Default training runs: each base pattern alone, plus the in-place update
/// writer, whose optimum runs against the large-window trend of the others.
pub fn training_mixes() -> Vec<Vec<WorkloadSpec>> {
    let mut out: Vec<Vec<WorkloadSpec>> = base_patterns().into_iter().map(|p| vec![p]).collect();
    out.push(vec![parse_spec("s_wr_ip_1m").expect("valid pattern")]);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub op: Op,
    pub schema_version: u32,
    pub train_samples: usize,
    pub test_samples: usize,
    pub class_counts: [usize; 2],
    pub confusion: Confusion,
    pub error_rate: f64,
}

/// Seeded 80:20 split, then train on the 80 and evaluate on the 20.
pub fn train_and_evaluate(samples: &[TrainingSample], hp: &Hyperparams, split_seed: u64) -> Result<(GbdtModel, TrainSummary)> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let cut = (samples.len() * 4).div_ceil(5);
    let train_set: Vec<TrainingSample> = idx[..cut].iter().map(|&i| samples[i].clone()).collect();
    let test_set: Vec<TrainingSample> = idx[cut..].iter().map(|&i| samples[i].clone()).collect();
    let model = train(&train_set, hp)?;
    let confusion = Confusion::evaluate(&model, &test_set)?;
    let mut class_counts = [0usize; 2];
    for s in samples {
        class_counts[s.label as usize] += 1;
    }
    let summary = TrainSummary {
        op: model.op,
        schema_version: model.schema_version,
        train_samples: train_set.len(),
        test_samples: test_set.len(),
        class_counts,
        error_rate: confusion.error_rate(),
        confusion,
    };
    Ok((model, summary))
}

/// One row of a sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rpc_window_pages: u32,
    pub rpcs_in_flight: u32,
    pub mean_bps: f64,
    pub per_seed_bps: Vec<f64>,
}

impl SweepRow {
    pub fn config(&self) -> Configuration {
        Configuration::new(self.rpc_window_pages, self.rpcs_in_flight)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub workload: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
    pub best: Configuration,
}

impl SweepResult {
    pub fn best_row(&self) -> &SweepRow {
        self.rows
            .iter()
            .find(|r| r.config() == self.best)
            .expect("best row present")
    }

    pub fn row(&self, c: Configuration) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.config() == c)
    }
}

/// Highest mean throughput; exact ties go to the larger window, then the
/// larger in-flight limit.
pub fn sweep_argmax(rows: &[SweepRow]) -> Option<Configuration> {
    rows.iter()
        .max_by(|a, b| {
            a.mean_bps
                .total_cmp(&b.mean_bps)
                .then(a.rpc_window_pages.cmp(&b.rpc_window_pages))
                .then(a.rpcs_in_flight.cmp(&b.rpcs_in_flight))
        })
        .map(SweepRow::config)
}

/// Run every configuration of the space as a fixed run for each seed.
///
/// `make_plan` builds the plan for a seed; its mode is overridden.
pub fn sweep<F>(make_plan: F, seeds: &[u64]) -> Result<SweepResult>
where
    F: Fn(u64) -> Result<RunPlan> + Sync,
{
    let probe = make_plan(seeds.first().copied().unwrap_or(0))?;
    let space = probe.scenario.space()?;
    let workload = probe
        .workloads
        .iter()
        .map(|w| w.phases.iter().map(WorkloadSpec::name).collect::<Vec<_>>().join("+"))
        .collect::<Vec<_>>()
        .join(",");
    let jobs: Vec<(Configuration, u64)> = space
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let mut results: Vec<(Configuration, u64, f64)> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let mut plan = make_plan(s)?;
            plan.mode = RunMode::Fixed(c);
            plan.seed = s;
            run(&plan, &Models::default()).map(|r| (c, s, r.aggregate_mean()))
        })
        .collect::<Result<_>>()?;
    results.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    let rows: Vec<SweepRow> = space
        .iter()
        .map(|c| {
            let per_seed_bps: Vec<f64> = results.iter().filter(|r| r.0 == c).map(|r| r.2).collect();
            SweepRow {
                rpc_window_pages: c.rpc_window_pages,
                rpcs_in_flight: c.rpcs_in_flight,
                mean_bps: per_seed_bps.iter().sum::<f64>() / per_seed_bps.len().max(1) as f64,
                per_seed_bps,
            }
        })
        .collect();
    let best = sweep_argmax(&rows).ok_or_else(|| Error::Experiment("empty sweep".into()))?;
    Ok(SweepResult {
        workload,
        seeds: seeds.to_vec(),
        rows,
        best,
    })
}

pub fn write_sweep_csv<W: Write>(mut out: W, sweep: &SweepResult, provenance: &Provenance) -> Result<()> {
    out.write_all(provenance.comment_lines().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["workload", "rpc_window_pages", "rpcs_in_flight", "mean_bps", "best"])?;
    for r in &sweep.rows {
        w.write_record([
            sweep.workload.clone(),
            r.rpc_window_pages.to_string(),
            r.rpcs_in_flight.to_string(),
            r.mean_bps.to_string(),
            (r.config() == sweep.best).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write phase rows as CSV with a provenance header.
pub fn write_results_csv<W: Write>(mut out: W, rows: &[PhaseRow], provenance: &Provenance) -> Result<()> {
    out.write_all(provenance.comment_lines().as_bytes())?;
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| {
        (&a.workload, &a.mode, a.client, a.ost, a.phase, a.seed)
            .cmp(&(&b.workload, &b.mode, b.client, b.ost, b.phase, b.seed))
    });
    let mut w = csv::Writer::from_writer(out);
    for r in &sorted {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<PhaseRow>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Recover the provenance from a file's `# key=value` header, if complete.
pub fn read_provenance_header(text: &str) -> Option<Provenance> {
    let mut fields = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').trim().split_once('=') {
            fields.insert(k.to_string(), v.to_string());
        }
    }
    let seeds = fields.get("seeds")?;
    Some(Provenance {
        tool_version: fields.get("tool_version")?.clone(),
        schema_version: fields.get("schema_version")?.parse().ok()?,
        seeds: if seeds.is_empty() {
            Vec::new()
        } else {
            seeds.split(';').map(str::parse).collect::<std::result::Result<_, _>>().ok()?
        },
        scenario_hash: fields.get("scenario_hash")?.clone(),
    })
}

/// One line of the summary table: tuned and optimal as multiples of default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub workload: String,
    pub default_bps: Option<f64>,
    pub tuned_bps: Option<f64>,
    pub optimal_bps: Option<f64>,
    pub default_norm: Option<f64>,
    pub tuned_norm: Option<f64>,
    pub optimal_norm: Option<f64>,
}

/// Aggregate phase rows into per-workload means by mode. Fixed-mode rows
/// count as `optimal` candidates; the best fixed configuration is reported.
pub fn report(rows: &[PhaseRow]) -> Vec<ReportRow> {
    // workload -> mode -> seed -> summed throughput
    let mut acc: BTreeMap<&str, BTreeMap<&str, BTreeMap<u64, f64>>> = BTreeMap::new();
    for r in rows {
        *acc.entry(&r.workload)
            .or_default()
            .entry(&r.mode)
            .or_default()
            .entry(r.seed)
            .or_default() += r.read_bps + r.write_bps;
    }
    let mean = |m: &BTreeMap<u64, f64>| m.values().sum::<f64>() / m.len() as f64;
    acc.into_iter()
        .map(|(workload, modes)| {
            let default_bps = modes.get("default").map(mean);
            let tuned_bps = modes.get("tuned").map(mean);
            let optimal_bps = modes
                .iter()
                .filter(|(m, _)| m.starts_with("fixed"))
                .map(|(_, v)| mean(v))
                .fold(None, |a: Option<f64>, v| Some(a.map_or(v, |a| a.max(v))));
            let norm = |v: Option<f64>| match (v, default_bps) {
                (Some(v), Some(d)) if d > 0.0 => Some(v / d),
                _ => None,
            };
            ReportRow {
                workload: workload.to_string(),
                default_norm: norm(default_bps),
                tuned_norm: norm(tuned_bps),
                optimal_norm: norm(optimal_bps),
                default_bps,
                tuned_bps,
                optimal_bps,
            }
        })
        .collect()
}

pub fn write_report_csv<W: Write>(mut out: W, rows: &[ReportRow], provenance: &Provenance) -> Result<()> {
    out.write_all(provenance.comment_lines().as_bytes())?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table; missing cells print as `missing`.
pub fn format_report(rows: &[ReportRow]) -> String {
    let cell = |v: Option<f64>, scale: f64, prec: usize| {
        v.map_or("missing".to_string(), |v| format!("{:.*}", prec, v / scale))
    };
    let mut s = format!(
        "{:<28} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8}\n",
        "workload", "default MB/s", "tuned MB/s", "optimal MB/s", "default", "tuned", "optimal"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<28} {:>12} {:>12} {:>12} {:>8} {:>8} {:>8}\n",
            r.workload,
            cell(r.default_bps, 1e6, 1),
            cell(r.tuned_bps, 1e6, 1),
            cell(r.optimal_bps, 1e6, 1),
            cell(r.default_norm, 1.0, 2),
            cell(r.tuned_norm, 1.0, 2),
            cell(r.optimal_norm, 1.0, 2),
        ));
    }
    s
}

/// Mean and sample standard deviation over repeats of one client's phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub workload: String,
    pub mode: String,
    pub client: usize,
    pub phase: usize,
    pub phase_workload: String,
    pub repeats: usize,
    pub mean_bps: f64,
    pub std_bps: f64,
}

/// Group phase rows by (workload, mode, client, phase), summing OSCs per seed.
pub fn summarize_phases(rows: &[PhaseRow]) -> Vec<PhaseSummary> {
    type Key<'a> = (&'a str, &'a str, usize, usize, &'a str);
    let mut acc: BTreeMap<Key, BTreeMap<u64, f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.workload.as_str(), r.mode.as_str(), r.client, r.phase, r.phase_workload.as_str());
        *acc.entry(key).or_default().entry(r.seed).or_default() += r.read_bps + r.write_bps;
    }
    acc.into_iter()
        .map(|((workload, mode, client, phase, phase_workload), seeds)| {
            let n = seeds.len();
            let mean = seeds.values().sum::<f64>() / n as f64;
            let var = if n > 1 {
                seeds.values().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            PhaseSummary {
                workload: workload.to_string(),
                mode: mode.to_string(),
                client,
                phase,
                phase_workload: phase_workload.to_string(),
                repeats: n,
                mean_bps: mean,
                std_bps: var.sqrt(),
            }
        })
        .collect()
}
