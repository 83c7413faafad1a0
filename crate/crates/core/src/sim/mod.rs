//! Deterministic discrete-event simulator of the client I/O path:
//! request ingestion, per-OSC dirty cache and RPC aggregation, bounded
//! parallel dispatch, a per-client processor-sharing link and FIFO OSTs.

pub mod osc;
mod scenario;
mod types;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, VecDeque};
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

pub use osc::{OscLimits, OscState, WriteOutcome};
pub use scenario::{ClientParams, NetworkParams, OscParams, OstParams, Scenario, SpaceParams};
pub use types::*;

use crate::error::{Error, Result};
use crate::metrics::RawCounters;
use crate::workload::{StreamCursor, WorkloadSpec};

/// FIFO object storage target shared by every client.
#[derive(Clone, Debug)]
pub struct OstState {
    pub disk_bandwidth: f64,
    pub per_rpc_overhead: f64,
    pub busy_until: f64,
    /// RPCs that have arrived and not yet completed, in service order.
    pub service_queue: VecDeque<u64>,
    pub bytes_served: u64,
}

impl OstState {
    /// Completion time of an RPC of `bytes` arriving at `arrival`.
    pub fn service(&mut self, rpc_id: u64, bytes: u64, arrival: f64) -> f64 {
        let start = self.busy_until.max(arrival);
        let done = start + self.per_rpc_overhead + bytes as f64 / self.disk_bandwidth;
        self.busy_until = done;
        self.service_queue.push_back(rpc_id);
        done
    }
}

#[derive(Clone, Debug)]
struct Link {
    bandwidth: f64,
    base_latency: f64,
    active: u32,
}

#[derive(Clone, Debug)]
struct FileInfo {
    client: usize,
    size: u64,
}

#[derive(Clone, Debug)]
struct Stream {
    file_id: u32,
    cursor: StreamCursor,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug, Default)]
struct ClientRecord {
    oscs: Vec<OscState>,
    spec: Option<WorkloadSpec>,
    generation: u64,
    stop_time: f64,
    streams: Vec<Stream>,
    stream_files: Vec<u32>,
    blocked: VecDeque<u64>,
    app_bytes: [u64; 2],
    requests_done: u64,
}

/// Piece of a request that lands on one OSC: object pages `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Piece {
    pub ost: usize,
    pub lo: u64,
    pub hi: u64,
}

#[derive(Clone, Debug)]
struct Pending {
    client: usize,
    stream: Option<(usize, u64)>,
    req: IoRequest,
    pieces: Vec<Piece>,
    outstanding: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum EventKind {
    Issue { client: usize, stream: usize, generation: u64 },
    Arrive { req: u64 },
    NetDone { osc: OscId, rpc: u64 },
    OstDone { osc: OscId, rpc: u64 },
    AgeCheck { osc: OscId },
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

/// One line of the debug trace.
#[derive(Clone, Debug, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: &'static str,
    pub osc: Option<OscId>,
    pub fields: serde_json::Value,
}

/// Per-client application-level totals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClientTotals {
    pub read_bytes: u64,
    pub write_bytes: u64,
    pub requests: u64,
}

pub struct SimState {
    scenario: Scenario,
    space: ConfigSpace,
    clock: f64,
    clients: Vec<ClientRecord>,
    osts: Vec<OstState>,
    links: Vec<Link>,
    queue: BinaryHeap<Event>,
    next_seq: u64,
    next_rpc: u64,
    next_req: u64,
    files: Vec<FileInfo>,
    pending: HashMap<u64, Pending>,
    waiters: HashMap<u64, Vec<u64>>,
    rpc_client_bytes: u64,
    digest: u64,
    trace: Option<Vec<TraceEvent>>,
    phase_counter: u64,
    pub(crate) seed: u64,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Order-sensitive seed combiner.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = FNV_OFFSET;
    for p in parts {
        let mut z = p.wrapping_add(0x9e37_79b9_7f4a_7c15) ^ h;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

impl SimState {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let space = scenario.space()?;
        let limits = OscLimits {
            max_dirty_pages: scenario.osc.max_dirty_pages,
            high_watermark: scenario.osc.high_watermark,
            age_timeout: scenario.osc.age_timeout,
            readahead_pages: scenario.osc.readahead_pages,
            throughput_horizon: scenario.throughput_horizon,
        };
        let clients = (0..scenario.clients)
            .map(|c| ClientRecord {
                oscs: (0..scenario.osts)
                    .map(|o| {
                        OscState::new(
                            OscId { client: c, ost: o },
                            scenario.default_config,
                            limits.clone(),
                        )
                    })
                    .collect(),
                ..Default::default()
            })
            .collect();
        let osts = (0..scenario.osts)
            .map(|_| OstState {
                disk_bandwidth: scenario.ost.disk_bandwidth,
                per_rpc_overhead: scenario.ost.per_rpc_overhead,
                busy_until: 0.0,
                service_queue: VecDeque::new(),
                bytes_served: 0,
            })
            .collect();
        let links = (0..scenario.clients)
            .map(|_| Link {
                bandwidth: scenario.network.link_bandwidth,
                base_latency: scenario.network.base_latency,
                active: 0,
            })
            .collect();
        Ok(SimState {
            seed: scenario.seed,
            trace: scenario.trace.then(Vec::new),
            scenario,
            space,
            clock: 0.0,
            clients,
            osts,
            links,
            queue: BinaryHeap::new(),
            next_seq: 0,
            next_rpc: 0,
            next_req: 0,
            files: Vec::new(),
            pending: HashMap::new(),
            waiters: HashMap::new(),
            rpc_client_bytes: 0,
            digest: FNV_OFFSET,
            phase_counter: 0,
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn osc_ids(&self) -> Vec<OscId> {
        (0..self.clients.len())
            .flat_map(|c| (0..self.osts.len()).map(move |o| OscId { client: c, ost: o }))
            .collect()
    }

    pub fn osc(&self, id: OscId) -> Result<&OscState> {
        self.clients
            .get(id.client)
            .ok_or(Error::UnknownClient(id.client))?
            .oscs
            .get(id.ost)
            .ok_or(Error::UnknownOst(id.ost))
    }

    fn osc_mut(&mut self, id: OscId) -> &mut OscState {
        &mut self.clients[id.client].oscs[id.ost]
    }

    pub fn ost(&self, ost: usize) -> Result<&OstState> {
        self.osts.get(ost).ok_or(Error::UnknownOst(ost))
    }

    pub fn client_totals(&self, client: usize) -> Result<ClientTotals> {
        let c = self.clients.get(client).ok_or(Error::UnknownClient(client))?;
        Ok(ClientTotals {
            read_bytes: c.app_bytes[Op::Read.index()],
            write_bytes: c.app_bytes[Op::Write.index()],
            requests: c.requests_done,
        })
    }

    /// Rolling hash over every processed event; equal digests mean equal traces.
    pub fn digest(&self) -> u64 {
        self.digest
    }

    pub fn trace(&self) -> Option<&[TraceEvent]> {
        self.trace.as_deref()
    }

    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for ev in self.trace.iter().flatten() {
            serde_json::to_writer(&mut out, ev)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    fn record(&mut self, kind: &'static str, osc: Option<OscId>, a: u64, b: u64, fields: impl FnOnce() -> serde_json::Value) {
        let code = kind.bytes().fold(0u64, |h, c| h.wrapping_mul(31).wrapping_add(c as u64));
        let o = osc.map_or(u64::MAX, |o| (o.client as u64) << 32 | o.ost as u64);
        for v in [self.clock.to_bits(), code, o, a, b] {
            self.digest = (self.digest ^ v).wrapping_mul(FNV_PRIME);
        }
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                time: self.clock,
                kind,
                osc,
                fields: fields(),
            });
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Event { time, seq, kind });
    }

    /// Register a file owned by `client`; returns its identifier.
    pub fn create_file(&mut self, client: usize, size: u64) -> Result<u32> {
        if client >= self.clients.len() {
            return Err(Error::UnknownClient(client));
        }
        if size == 0 {
            return Err(Error::InvalidRequest("file size must be positive".into()));
        }
        self.files.push(FileInfo { client, size });
        Ok(self.files.len() as u32 - 1)
    }

    /// Split file pages `[lo, hi)` into per-OST object ranges.
    pub fn map_pages(&self, file_id: u32, lo: u64, hi: u64) -> Vec<Piece> {
        let sp = self.scenario.stripe_pages();
        let n = self.osts.len() as u64;
        let mut pieces: Vec<Piece> = Vec::new();
        let mut p = lo;
        while p < hi {
            let stripe = p / sp;
            let end = ((stripe + 1) * sp).min(hi);
            let ost = ((stripe + file_id as u64) % n) as usize;
            let obj = (stripe / n) * sp + p % sp;
            let piece = Piece {
                ost,
                lo: obj,
                hi: obj + (end - p),
            };
            match pieces.iter_mut().find(|q| q.ost == ost && q.hi == piece.lo) {
                Some(q) => q.hi = piece.hi,
                None => pieces.push(piece),
            }
            p = end;
        }
        pieces
    }

    fn object_end(&self, file_id: u32) -> u64 {
        let sp = self.scenario.stripe_pages();
        let n = self.osts.len() as u64;
        let pages = self.files[file_id as usize].size.div_ceil(PAGE_SIZE);
        pages.div_ceil(sp).div_ceil(n) * sp
    }

    fn request_cost(&self, req: &IoRequest) -> f64 {
        self.scenario.client.request_overhead + req.length as f64 / self.scenario.client.copy_bandwidth
    }

    fn check_request(&self, client: usize, req: &IoRequest) -> Result<()> {
        if client >= self.clients.len() {
            return Err(Error::UnknownClient(client));
        }
        req.validate()?;
        let file = self
            .files
            .get(req.file_id as usize)
            .ok_or(Error::UnknownFile(req.file_id))?;
        if file.client != client {
            return Err(Error::UnknownFile(req.file_id));
        }
        if req.offset + req.length > file.size {
            return Err(Error::InvalidRequest(format!(
                "request [{}, {}) extends past the end of file {}",
                req.offset,
                req.offset + req.length,
                req.file_id
            )));
        }
        let (lo, hi) = req.page_range();
        if self
            .map_pages(req.file_id, lo, hi)
            .iter()
            .any(|p| p.hi - p.lo > self.scenario.osc.max_dirty_pages)
        {
            return Err(Error::InvalidRequest("request exceeds the dirty cache of one OSC".into()));
        }
        Ok(())
    }

    /// Hand an application request to the client file system. It reaches
    /// the OSCs after the client's per-request overhead and copy time.
    pub fn submit_io(&mut self, client: usize, req: IoRequest) -> Result<u64> {
        self.check_request(client, &req)?;
        Ok(self.submit(client, None, req))
    }

    fn submit(&mut self, client: usize, stream: Option<(usize, u64)>, req: IoRequest) -> u64 {
        let id = self.next_req;
        self.next_req += 1;
        let (lo, hi) = req.page_range();
        let pieces = self.map_pages(req.file_id, lo, hi);
        let at = req.submit_time.max(self.clock) + self.request_cost(&req);
        self.pending.insert(
            id,
            Pending {
                client,
                stream,
                req,
                pieces,
                outstanding: 0,
            },
        );
        self.record("submit", None, id, req.offset, || {
            json!({"client": client, "op": req.op, "file": req.file_id, "offset": req.offset, "length": req.length})
        });
        self.schedule(at, EventKind::Arrive { req: id });
        id
    }

    /// Drive `client` with a closed-loop workload from now on. Streams keep
    /// their files across calls, so a phase switch continues on the same data.
    pub fn set_workload(&mut self, client: usize, spec: WorkloadSpec) -> Result<()> {
        if client >= self.clients.len() {
            return Err(Error::UnknownClient(client));
        }
        spec.validate()?;
        while self.clients[client].stream_files.len() < spec.streams as usize {
            let f = self.create_file(client, spec.file_size)?;
            self.clients[client].stream_files.push(f);
        }
        for &f in &self.clients[client].stream_files {
            let info = &mut self.files[f as usize];
            info.size = info.size.max(spec.file_size);
        }
        let probe = IoRequest {
            op: spec.op,
            file_id: self.clients[client].stream_files[0],
            offset: 0,
            length: spec.request_size,
            submit_time: self.clock,
        };
        self.check_request(client, &probe)?;
        self.phase_counter += 1;
        let phase = self.phase_counter;
        let seed = self.seed;
        let now = self.clock;
        let qd = self.scenario.client.queue_depth;
        let rec = &mut self.clients[client];
        rec.generation += 1;
        rec.stop_time = now + spec.duration;
        rec.streams = (0..spec.streams as usize)
            .map(|s| Stream {
                file_id: rec.stream_files[s],
                cursor: StreamCursor::default(),
                rng: ChaCha8Rng::seed_from_u64(mix_seed(&[seed, client as u64, s as u64, phase])),
            })
            .collect();
        rec.spec = Some(spec.clone());
        let generation = rec.generation;
        self.record("workload", None, client as u64, generation, || {
            json!({"client": client, "spec": spec.name()})
        });
        for s in 0..spec.streams as usize {
            for _ in 0..qd {
                self.schedule(now, EventKind::Issue { client, stream: s, generation });
            }
        }
        Ok(())
    }

    /// Stop issuing new requests for `client`; outstanding ones still finish.
    pub fn stop_workload(&mut self, client: usize) -> Result<()> {
        let rec = self.clients.get_mut(client).ok_or(Error::UnknownClient(client))?;
        rec.generation += 1;
        rec.spec = None;
        Ok(())
    }

    pub fn config(&self, osc: OscId) -> Result<Configuration> {
        Ok(self.osc(osc)?.config())
    }

    /// Apply a configuration to one OSC; returns the previous one.
    pub fn set_config(&mut self, osc: OscId, config: Configuration) -> Result<Configuration> {
        self.space.check(&config)?;
        self.osc(osc)?;
        let now = self.clock;
        let mut next = self.next_rpc;
        let (prev, flushed) = self.osc_mut(osc).set_config(config, now, &mut next);
        self.next_rpc = next;
        if prev != config {
            self.record("set_config", Some(osc), config.rpc_window_pages as u64, config.rpcs_in_flight as u64, || {
                json!({"from": prev, "to": config, "flushed": flushed.len()})
            });
        }
        for r in &flushed {
            self.record_build(r);
        }
        self.osc_mut(osc).enqueue(flushed);
        self.pump(osc);
        Ok(prev)
    }

    pub fn probe(&self, osc: OscId) -> Result<RawCounters> {
        Ok(self.osc(osc)?.probe(self.clock))
    }

    /// Completed-RPC bytes per second over the trailing `window`, by op.
    pub fn measure_throughput(&self, osc: OscId, window: f64) -> Result<[f64; 2]> {
        if !(window > 0.0) {
            return Err(Error::Interval(format!("window {window} must be positive")));
        }
        Ok(self.osc(osc)?.measure_throughput(self.clock, window))
    }

    /// Sum of [`measure_throughput`](Self::measure_throughput) over all OSCs of a client, both ops.
    pub fn client_throughput(&self, client: usize, window: f64) -> Result<f64> {
        let rec = self.clients.get(client).ok_or(Error::UnknownClient(client))?;
        if !(window > 0.0) {
            return Err(Error::Interval(format!("window {window} must be positive")));
        }
        Ok(rec
            .oscs
            .iter()
            .map(|o| o.measure_throughput(self.clock, window).iter().sum::<f64>())
            .sum())
    }

    /// Process events up to and including `until`; returns completed RPCs.
    pub fn advance(&mut self, until: f64) -> Result<Vec<Rpc>> {
        if until < self.clock || until.is_nan() {
            return Err(Error::TimeReversal {
                clock: self.clock,
                until,
            });
        }
        let mut done = Vec::new();
        while self.queue.peek().is_some_and(|e| e.time <= until) {
            let ev = self.queue.pop().expect("peeked");
            debug_assert!(ev.time >= self.clock);
            self.clock = ev.time;
            match ev.kind {
                EventKind::Issue { client, stream, generation } => self.on_issue(client, stream, generation),
                EventKind::Arrive { req } => self.on_arrive(req),
                EventKind::NetDone { osc, rpc } => self.on_net_done(osc, rpc),
                EventKind::OstDone { osc, rpc } => {
                    if let Some(r) = self.on_ost_done(osc, rpc) {
                        done.push(r);
                    }
                }
                EventKind::AgeCheck { osc } => {
                    self.osc_mut(osc).age_timer = None;
                    self.record("age_check", Some(osc), 0, 0, || json!({}));
                    self.pump(osc);
                }
            }
        }
        self.clock = until;
        Ok(done)
    }

    fn on_issue(&mut self, client: usize, stream: usize, generation: u64) {
        let rec = &mut self.clients[client];
        if rec.generation != generation || self.clock >= rec.stop_time {
            return;
        }
        let Some(spec) = rec.spec.as_ref() else {
            return;
        };
        let s = &mut rec.streams[stream];
        let req = s.cursor.next_request(spec, s.file_id, &mut s.rng, self.clock);
        self.submit(client, Some((stream, generation)), req);
    }

    fn on_arrive(&mut self, req_id: u64) {
        let p = &self.pending[&req_id];
        let client = p.client;
        match p.req.op {
            Op::Write => {
                let rec = &mut self.clients[client];
                if !rec.blocked.is_empty() || !self.try_admit(req_id) {
                    self.clients[client].blocked.push_back(req_id);
                    self.record("blocked", None, req_id, 0, || json!({"client": client}));
                }
            }
            Op::Read => self.start_read(req_id),
        }
    }

    /// Dirty all pieces of a write if every target OSC has room.
    fn try_admit(&mut self, req_id: u64) -> bool {
        let p = self.pending[&req_id].clone();
        let fits = p.pieces.iter().all(|pc| {
            self.clients[p.client].oscs[pc.ost].has_room(pc.hi - pc.lo)
        });
        if !fits {
            return false;
        }
        let now = self.clock;
        for pc in &p.pieces {
            let id = OscId { client: p.client, ost: pc.ost };
            let out = self.osc_mut(id).write_pages(p.req.file_id, pc.lo, pc.hi, now);
            self.record("dirty", Some(id), out.new_pages, out.absorbed_pages, || {
                json!({"file": p.req.file_id, "lo": pc.lo, "hi": pc.hi, "new": out.new_pages, "absorbed": out.absorbed_pages})
            });
            self.pump(id);
        }
        self.finish_request(req_id);
        true
    }

    fn start_read(&mut self, req_id: u64) {
        let p = self.pending[&req_id].clone();
        let now = self.clock;
        let end = self.object_end(p.req.file_id);
        let mut waits = 0;
        for pc in &p.pieces {
            let id = OscId { client: p.client, ost: pc.ost };
            let mut next = self.next_rpc;
            let out = self.osc_mut(id).read_pages(p.req.file_id, pc.lo, pc.hi, end, now, &mut next);
            self.next_rpc = next;
            for r in &out.new_rpcs {
                self.record_build(r);
            }
            for w in out.wait_on {
                self.waiters.entry(w).or_default().push(req_id);
                waits += 1;
            }
            self.osc_mut(id).enqueue(out.new_rpcs);
            self.pump(id);
        }
        if waits == 0 {
            self.finish_request(req_id);
        } else {
            self.pending.get_mut(&req_id).expect("pending").outstanding = waits;
        }
    }

    fn finish_request(&mut self, req_id: u64) {
        let p = self.pending.remove(&req_id).expect("pending request");
        let rec = &mut self.clients[p.client];
        rec.app_bytes[p.req.op.index()] += p.req.length;
        rec.requests_done += 1;
        let think = rec.spec.as_ref().map_or(0.0, |s| s.think_time);
        let latency = self.clock - p.req.submit_time;
        self.record("request_done", None, req_id, p.req.length, || {
            json!({"client": p.client, "latency": latency})
        });
        if let Some((stream, generation)) = p.stream {
            if generation == self.clients[p.client].generation {
                let at = self.clock + think;
                self.schedule(at, EventKind::Issue { client: p.client, stream, generation });
            }
        }
    }

    fn record_build(&mut self, r: &Rpc) {
        let (id, pages) = (r.id, r.page_count as u64);
        let kind = r.kind;
        self.record("build", Some(r.osc_id), id, pages, || {
            json!({"rpc": id, "op": r.op, "kind": kind, "pages": pages, "start": r.start_page, "window": r.window_at_creation})
        });
    }

    /// Build, dispatch and arm the age timer of one OSC.
    fn pump(&mut self, id: OscId) {
        let now = self.clock;
        let mut next = self.next_rpc;
        let built = self.osc_mut(id).build_rpcs(now, &mut next);
        self.next_rpc = next;
        for r in &built {
            self.record_build(r);
        }
        let osc = self.osc_mut(id);
        osc.enqueue(built);
        let sent = osc.dispatch(now);
        let inflight = osc.inflight_len() as u64;
        for r in sent {
            let link = &mut self.links[id.client];
            link.active += 1;
            let transit = r.bytes() as f64 * link.active as f64 / link.bandwidth + link.base_latency;
            let (rid, bytes) = (r.id, r.bytes());
            self.record("dispatch", Some(id), rid, inflight, || {
                json!({"rpc": rid, "bytes": bytes, "inflight": inflight, "transit": transit})
            });
            self.schedule(now + transit, EventKind::NetDone { osc: id, rpc: rid });
        }
        let timeout = self.scenario.osc.age_timeout;
        let osc = self.osc_mut(id);
        if osc.age_timer.is_none() {
            // An already expired extent waits for a channel; completions pump it.
            if let Some(at) = osc.oldest_dirty().map(|t| t + timeout).filter(|&at| at > now) {
                osc.age_timer = Some(at);
                self.schedule(at, EventKind::AgeCheck { osc: id });
            }
        }
    }

    fn on_net_done(&mut self, id: OscId, rpc: u64) {
        self.links[id.client].active -= 1;
        let bytes = self.osc(id).ok().and_then(|o| o.inflight_rpc(rpc)).map_or(0, Rpc::bytes);
        let now = self.clock;
        let done = self.osts[id.ost].service(rpc, bytes, now);
        self.record("ost_arrive", Some(id), rpc, bytes, || json!({"rpc": rpc, "completes": done}));
        self.schedule(done, EventKind::OstDone { osc: id, rpc });
    }

    fn on_ost_done(&mut self, id: OscId, rpc_id: u64) -> Option<Rpc> {
        let ost = &mut self.osts[id.ost];
        if let Some(pos) = ost.service_queue.iter().position(|&r| r == rpc_id) {
            ost.service_queue.remove(pos);
        }
        let now = self.clock;
        let rpc = self.osc_mut(id).complete(rpc_id, now)?;
        self.osts[id.ost].bytes_served += rpc.bytes();
        self.rpc_client_bytes += rpc.bytes();
        self.record("complete", Some(id), rpc_id, rpc.page_count as u64, || {
            json!({"rpc": rpc_id, "op": rpc.op, "pages": rpc.page_count})
        });
        match rpc.op {
            Op::Write => {
                self.pump(id);
                self.unblock(id.client);
            }
            Op::Read => {
                for req in self.waiters.remove(&rpc_id).unwrap_or_default() {
                    let p = self.pending.get_mut(&req).expect("waiting request");
                    p.outstanding -= 1;
                    if p.outstanding == 0 {
                        self.finish_request(req);
                    }
                }
                self.pump(id);
            }
        }
        Some(rpc)
    }

    fn unblock(&mut self, client: usize) {
        while let Some(&req) = self.clients[client].blocked.front() {
            if !self.try_admit(req) {
                break;
            }
            self.clients[client].blocked.pop_front();
        }
    }

    /// Total bytes carried by completed RPCs across the whole system.
    pub fn completed_rpc_bytes(&self) -> u64 {
        self.rpc_client_bytes
    }

    pub fn pending_requests(&self) -> usize {
        self.pending.len()
    }

    /// Run to quiescence: stop all workloads and process every remaining event.
    pub fn drain(&mut self) -> Result<()> {
        for c in 0..self.clients.len() {
            self.stop_workload(c)?;
        }
        while let Some(t) = self.queue.peek().map(|e| e.time) {
            self.advance(t)?;
        }
        Ok(())
    }

    pub fn per_client_configs(&self, client: usize) -> Result<Vec<Configuration>> {
        let rec = self.clients.get(client).ok_or(Error::UnknownClient(client))?;
        Ok(rec.oscs.iter().map(|o| o.config()).collect())
    }

    pub fn clients(&self) -> usize {
        self.clients.len()
    }

    pub fn osts(&self) -> usize {
        self.osts.len()
    }

    /// Current workload of a client, if any.
    pub fn workload(&self, client: usize) -> Option<&WorkloadSpec> {
        self.clients.get(client)?.spec.as_ref()
    }

    /// Configured values of every OSC, keyed by id.
    pub fn configs(&self) -> BTreeMap<OscId, Configuration> {
        self.osc_ids()
            .into_iter()
            .map(|id| (id, self.clients[id.client].oscs[id.ost].config()))
            .collect()
    }
}
