use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use dial_core::agent::{AgentConfig, AgentMode, Models, OscAgent, SimOscPort};
use dial_core::experiment::{
    collect, format_report, read_provenance_header, read_results_csv, repeat_seeds, report, run, summarize_phases, sweep,
    train_and_evaluate, training_mixes, write_report_csv, write_results_csv, write_sweep_csv,
    PhaseRow, Protocol, RunMode, RunPlan,
};
use dial_core::gbdt::{read_samples, write_samples, GbdtModel, Hyperparams};
use dial_core::provenance::Provenance;
use dial_core::sim::{Configuration, Op, Scenario, SimState};
use dial_core::tuner::{decide, write_explain_csv};
use dial_core::workload::{parse_spec, WorkloadSequence};

#[derive(Parser)]
#[command(name = "dial", version, about = "Per-OSC RPC autotuning on a simulated parallel file system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Base seed; repeats use consecutive seeds.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use the full 300 s x 30 protocol instead of 60 s x 5.
    #[arg(long)]
    paper_scale: bool,
    /// Number of repeats; overrides the protocol default.
    #[arg(long)]
    repeats: Option<u32>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario> {
        match &self.scenario {
            Some(p) => Scenario::load(p).with_context(|| format!("loading scenario {}", p.display())),
            None => Ok(Scenario::default()),
        }
    }

    fn protocol(&self) -> Protocol {
        let mut p = if self.paper_scale { Protocol::paper() } else { Protocol::desk() };
        if let Some(r) = self.repeats {
            p.repeats = r;
        }
        p
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }
}

#[derive(Args, Clone)]
struct WorkloadArgs {
    /// Workload name, e.g. s_wr_rn_8k; comma-separated for one per client.
    #[arg(long, conflicts_with = "sequence")]
    workload: Option<String>,
    /// Phase sequence JSON file.
    #[arg(long)]
    sequence: Option<PathBuf>,
    /// Number of clients; a single workload is replicated to every client.
    #[arg(long)]
    clients: Option<usize>,
    /// Seconds per run; defaults to the protocol's run length.
    #[arg(long)]
    duration: Option<f64>,
}

impl WorkloadArgs {
    fn sequences(&self, duration: f64) -> Result<Vec<WorkloadSequence>> {
        let seqs: Vec<WorkloadSequence> = match (&self.workload, &self.sequence) {
            (Some(w), None) => w
                .split(',')
                .map(|n| Ok(WorkloadSequence::single(parse_spec(n.trim())?.with_duration(duration))?))
                .collect::<Result<_>>()?,
            (None, Some(p)) => vec![WorkloadSequence::load(p)
                .with_context(|| format!("loading sequence {}", p.display()))?],
            _ => bail!("give exactly one of --workload or --sequence"),
        };
        match self.clients {
            Some(n) if seqs.len() == 1 => Ok(vec![seqs[0].clone(); n]),
            Some(n) if n != seqs.len() => bail!("{} workloads given for {n} clients", seqs.len()),
            _ => Ok(seqs),
        }
    }

    fn plan(&self, common: &Common, mode: RunMode, seed: u64) -> Result<RunPlan> {
        let duration = self.duration.unwrap_or(common.protocol().run_seconds);
        let workloads = self.sequences(duration)?;
        let mut scenario = common.scenario()?;
        scenario.clients = workloads.len();
        Ok(RunPlan {
            scenario,
            workloads,
            mode,
            seed,
            agent: AgentConfig::default(),
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Default,
    Tuned,
    Fixed,
    Sweep,
}

#[derive(Subcommand)]
enum Command {
    /// Run collection agents over the training patterns and write labelled samples.
    Collect {
        #[command(flatten)]
        common: Common,
        /// Seconds per run; overrides the protocol default.
        #[arg(long)]
        run_seconds: Option<f64>,
    },
    /// Train read and write models on collected samples.
    Train {
        #[command(flatten)]
        common: Common,
        /// Directory holding read_samples.jsonl and write_samples.jsonl.
        #[arg(long)]
        samples: PathBuf,
        /// Hyperparameter JSON; defaults when omitted.
        #[arg(long)]
        hyper: Option<PathBuf>,
    },
    /// Run a workload under every configuration and report the grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        workload: WorkloadArgs,
    },
    /// Run a workload under one mode and write per-phase results.
    Run {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(long, value_enum, default_value = "default")]
        mode: ModeArg,
        /// Configuration for --mode fixed, as WINDOWxINFLIGHT.
        #[arg(long)]
        config: Option<String>,
        /// Directory holding read_model.json and write_model.json.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Agent configuration JSON.
        #[arg(long)]
        agent: Option<PathBuf>,
    },
    /// Summarize result CSVs as multiples of the default run.
    Report {
        #[command(flatten)]
        common: Common,
        /// Result CSV files written by `run`.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Show the scored candidate set for one OSC at one moment of a run.
    Explain {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        workload: WorkloadArgs,
        #[arg(long)]
        models: PathBuf,
        /// Simulated time at which to decide.
        #[arg(long, default_value_t = 5.0)]
        at: f64,
        #[arg(long, default_value_t = 0)]
        client: usize,
        #[arg(long, default_value_t = 0)]
        ost: usize,
    },
}

fn parse_config(s: &str) -> Result<Configuration> {
    let (w, r) = s
        .split_once(['x', 'X', ','])
        .with_context(|| format!("config {s:?} is not WINDOWxINFLIGHT"))?;
    Ok(Configuration::new(w.trim().parse()?, r.trim().parse()?))
}

fn load_models(dir: &Path) -> Result<Models> {
    let load = |name: &str| -> Result<Option<GbdtModel>> {
        let p = dir.join(name);
        if !p.exists() {
            return Ok(None);
        }
        Ok(Some(GbdtModel::load(&p).with_context(|| format!("loading {}", p.display()))?))
    };
    Ok(Models {
        read: load("read_model.json")?,
        write: load("write_model.json")?,
    })
}

fn cmd_collect(common: &Common, run_seconds: Option<f64>) -> Result<()> {
    let scenario = common.scenario()?;
    let mut protocol = common.protocol();
    if let Some(s) = run_seconds {
        protocol.run_seconds = s;
    }
    let mixes = training_mixes();
    info!(
        "{} patterns x {} repeats of {} s",
        mixes.len(),
        protocol.repeats,
        protocol.run_seconds
    );
    let collected = collect(&scenario, &mixes, &protocol, common.seed, &AgentConfig::default())?;
    let prov = Provenance::new(repeat_seeds(common.seed, protocol.repeats), scenario.hash());
    let dir = common.out_dir()?;
    write_samples(&dir.join("read_samples.jsonl"), &collected.read, Some(&prov))?;
    write_samples(&dir.join("write_samples.jsonl"), &collected.write, Some(&prov))?;
    let s = &collected.stats;
    println!("runs: {}", s.runs);
    for op in [Op::Read, Op::Write] {
        let i = op.index();
        println!(
            "{}: {} samples, {} positive, {} negative",
            op.as_str(),
            s.samples[i],
            s.positives[i],
            s.samples[i] - s.positives[i]
        );
    }
    println!("discarded (zero previous throughput): {}", s.discarded);
    Ok(())
}

fn cmd_train(common: &Common, samples: &Path, hyper: Option<&Path>) -> Result<()> {
    let hp: Hyperparams = match hyper {
        Some(p) => serde_json::from_str(&fs::read_to_string(p)?)?,
        None => Hyperparams::default(),
    };
    hp.validate()?;
    let scenario = common.scenario()?;
    let dir = common.out_dir()?;
    for op in [Op::Read, Op::Write] {
        let path = samples.join(format!("{}_samples.jsonl", op.as_str()));
        let data = read_samples(&path).with_context(|| format!("reading {}", path.display()))?;
        let (mut model, summary) = train_and_evaluate(&data, &hp, common.seed)?;
        model.provenance = Some(Provenance::new(vec![hp.seed, common.seed], scenario.hash()));
        model.save(&dir.join(format!("{}_model.json", op.as_str())))?;
        let c = &summary.confusion;
        println!(
            "{} model: schema v{}, {} train / {} test, class counts neg={} pos={}",
            op.as_str(),
            summary.schema_version,
            summary.train_samples,
            summary.test_samples,
            summary.class_counts[0],
            summary.class_counts[1]
        );
        println!(
            "  error rate {:.4}; confusion tp={} fp={} tn={} fn={}",
            summary.error_rate, c.true_pos, c.false_pos, c.true_neg, c.false_neg
        );
    }
    Ok(())
}

fn cmd_sweep(common: &Common, workload: &WorkloadArgs) -> Result<()> {
    let protocol = common.protocol();
    let seeds = repeat_seeds(common.seed, protocol.repeats);
    let template = workload.plan(common, RunMode::Default, common.seed)?;
    let result = sweep(|seed| Ok(RunPlan { seed, ..template.clone() }), &seeds)?;
    let prov = Provenance::new(seeds, template.scenario.hash());
    let path = common.out_dir()?.join("sweep.csv");
    write_sweep_csv(BufWriter::new(File::create(&path)?), &result, &prov)?;
    println!("{}: {} configurations", result.workload, result.rows.len());
    for r in &result.rows {
        println!("  {:>5} x {:>2}  {:>10.1} MB/s", r.rpc_window_pages, r.rpcs_in_flight, r.mean_bps / 1e6);
    }
    println!("best {} at {:.1} MB/s", result.best, result.best_row().mean_bps / 1e6);
    Ok(())
}

fn cmd_run(
    common: &Common,
    workload: &WorkloadArgs,
    mode: ModeArg,
    config: Option<&str>,
    models: Option<&Path>,
    agent: Option<&Path>,
) -> Result<()> {
    let protocol = common.protocol();
    let seeds = repeat_seeds(common.seed, protocol.repeats);
    let models = match models {
        Some(d) => load_models(d)?,
        None => Models::default(),
    };
    let agent = match agent {
        Some(p) => AgentConfig::load(p)?,
        None => AgentConfig::default(),
    };
    let mode = match mode {
        ModeArg::Default => RunMode::Default,
        ModeArg::Tuned => {
            if models.read.is_none() && models.write.is_none() {
                bail!("--mode tuned needs --models with at least one model");
            }
            RunMode::Tuned
        }
        ModeArg::Fixed => RunMode::Fixed(parse_config(config.context("--mode fixed needs --config")?)?),
        ModeArg::Sweep => {
            let template = workload.plan(common, RunMode::Default, common.seed)?;
            let best = sweep(|seed| Ok(RunPlan { seed, ..template.clone() }), &seeds)?.best;
            info!("sweep optimum {best}");
            RunMode::Fixed(best)
        }
    };
    let mut rows: Vec<PhaseRow> = Vec::new();
    let mut scenario = None;
    for &seed in &seeds {
        let mut plan = workload.plan(common, mode, seed)?;
        plan.agent = agent.clone();
        let result = run(&plan, &models)?;
        info!("seed {seed}: {:.1} MB/s aggregate", result.aggregate_mean() / 1e6);
        rows.extend(result.phases);
        scenario.get_or_insert(plan.scenario);
    }
    let scenario = scenario.context("no repeats")?;
    let prov = Provenance::new(seeds, scenario.hash());
    let path = common.out_dir()?.join(format!("results_{}.csv", mode.label()));
    write_results_csv(BufWriter::new(File::create(&path)?), &rows, &prov)?;
    for s in summarize_phases(&rows) {
        println!(
            "{} client {} phase {} ({}): {:.1} +/- {:.1} MB/s over {} repeats",
            s.mode,
            s.client,
            s.phase,
            s.phase_workload,
            s.mean_bps / 1e6,
            s.std_bps / 1e6,
            s.repeats
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_report(common: &Common, inputs: &[PathBuf]) -> Result<()> {
    let mut rows = Vec::new();
    let mut hashes = Vec::new();
    let mut seeds = Vec::new();
    for p in inputs {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        if let Some(prov) = read_provenance_header(&text) {
            hashes.push(prov.scenario_hash);
            seeds.extend(prov.seeds);
        }
        rows.extend(read_results_csv(text.as_bytes())?);
    }
    seeds.sort_unstable();
    seeds.dedup();
    hashes.sort();
    hashes.dedup();
    let table = report(&rows);
    let path = common.out_dir()?.join("report.csv");
    let prov = Provenance::new(seeds, hashes.join(";"));
    write_report_csv(BufWriter::new(File::create(&path)?), &table, &prov)?;
    print!("{}", format_report(&table));
    Ok(())
}

fn cmd_explain(common: &Common, workload: &WorkloadArgs, models: &Path, at: f64, client: usize, ost: usize) -> Result<()> {
    let models = load_models(models)?;
    let plan = workload.plan(common, RunMode::Default, common.seed)?;
    let mut scenario = plan.scenario.clone();
    scenario.seed = common.seed;
    let mut sim = SimState::new(scenario)?;
    for (c, seq) in plan.workloads.iter().enumerate() {
        sim.set_workload(c, seq.phases[0].clone())?;
    }
    let id = *sim
        .osc_ids()
        .iter()
        .find(|i| i.client == client && i.ost == ost)
        .with_context(|| format!("no OSC for client {client}, OST {ost}"))?;
    let cfg = AgentConfig::default();
    let dt = cfg.probe_interval;
    let mut agent = OscAgent::new(AgentConfig {
        mode: AgentMode::Passive,
        ..cfg.clone()
    })?;
    agent.start(&SimOscPort::new(&mut sim, id)?)?;
    let steps = (at / dt).round().max(2.0) as usize;
    let mut last = None;
    for k in 1..=steps {
        sim.advance(k as f64 * dt)?;
        last = Some(agent.run_interval(&mut SimOscPort::new(&mut sim, id)?, &models)?);
    }
    let rec = last.context("no interval ran")?;
    let snap = rec.snapshot.context("no snapshot at that time")?;
    let op = rec.op.context("OSC idle at that time")?;
    let model = models.get(op).with_context(|| format!("no {} model", op.as_str()))?;
    let current = sim.config(id)?;
    let decision = decide(model, &snap, sim.space(), current, &cfg.tuner, op)?;
    let path = common.out_dir()?.join("explain.csv");
    let prov = Provenance::new(vec![common.seed], sim.scenario().hash());
    write_explain_csv(BufWriter::new(File::create(&path)?), &decision, &prov)?;
    println!(
        "{id} at t={:.1}s, op {}, current {current}: {} candidates above tau {}, chosen {}",
        rec.time,
        op.as_str(),
        decision.candidates.len(),
        cfg.tuner.tau,
        decision.chosen
    );
    for c in &decision.candidates {
        println!(
            "  {:>5} x {:>2}  p={:.3}  score={:.3}{}",
            c.theta.rpc_window_pages,
            c.theta.rpcs_in_flight,
            c.p,
            c.score,
            if c.theta == decision.chosen { "  <- chosen" } else { "" }
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIAL_LOG", "info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Collect { common, run_seconds } => cmd_collect(common, *run_seconds),
        Command::Train { common, samples, hyper } => cmd_train(common, samples, hyper.as_deref()),
        Command::Sweep { common, workload } => cmd_sweep(common, workload),
        Command::Run {
            common,
            workload,
            mode,
            config,
            models,
            agent,
        } => cmd_run(common, workload, *mode, config.as_deref(), models.as_deref(), agent.as_deref()),
        Command::Report { common, inputs } => cmd_report(common, inputs),
        Command::Explain {
            common,
            workload,
            models,
            at,
            client,
            ost,
        } => cmd_explain(common, workload, models, *at, *client, *ost),
    }
}
