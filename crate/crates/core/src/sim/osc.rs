//! Client-side state of one OSC: dirty page cache with window-aligned open
//! extents, readahead, the queue of built RPCs and the in-flight set.

use std::collections::{BTreeMap, VecDeque};

use super::types::{Configuration, Op, OscId, Rpc, RpcKind, MAX_WINDOW_PAGES, PAGE_SIZE};
use crate::metrics::RawCounters;

const WORDS: usize = MAX_WINDOW_PAGES as usize / 64;

/// Dirty-page bitmap for one extent (bit i = page `start + i`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PageBits([u64; WORDS]);

impl PageBits {
    /// Set bits `[lo, hi)`; returns how many were newly set.
    pub fn set_range(&mut self, lo: usize, hi: usize) -> u32 {
        let mut added = 0;
        let mut i = lo;
        while i < hi {
            let word = i / 64;
            let bit = i % 64;
            let span = (64 - bit).min(hi - i);
            let mask = if span == 64 { u64::MAX } else { ((1u64 << span) - 1) << bit };
            added += (mask & !self.0[word]).count_ones();
            self.0[word] |= mask;
            i += span;
        }
        added
    }

    pub fn count_range(&self, lo: usize, hi: usize) -> u32 {
        let mut n = 0;
        let mut i = lo;
        while i < hi {
            let word = i / 64;
            let bit = i % 64;
            let span = (64 - bit).min(hi - i);
            let mask = if span == 64 { u64::MAX } else { ((1u64 << span) - 1) << bit };
            n += (mask & self.0[word]).count_ones();
            i += span;
        }
        n
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..WORDS).flat_map(move |w| {
            let word = self.0[w];
            (0..64).filter(move |b| word >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }
}

/// Key of an aligned extent: file and extent index (`object_page / window`).
pub type ExtentKey = (u32, u64);

#[derive(Clone, Debug)]
pub struct OpenExtent {
    pub bits: PageBits,
    pub count: u32,
    pub first_dirty: f64,
    seq: u64,
}

/// Outcome of dirtying a page range.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WriteOutcome {
    pub new_pages: u64,
    pub absorbed_pages: u64,
}

#[derive(Clone, Debug)]
struct Segment {
    start: u64,
    end: u64,
    rpc_id: u64,
    done: bool,
}

/// Per-file readahead state on one OSC.
#[derive(Clone, Debug, Default)]
struct ReadStream {
    prev_end: Option<u64>,
    run_start: u64,
    active: bool,
    /// End of the prefetched range; segments cover `[segs[0].start, ra_end)`.
    ra_end: u64,
    segs: VecDeque<Segment>,
}

/// What a read access needs from the OSC.
#[derive(Clone, Debug, Default)]
pub struct ReadOutcome {
    /// RPCs (existing or new) whose completion the request waits for.
    pub wait_on: Vec<u64>,
    /// Newly built demand and prefetch RPCs.
    pub new_rpcs: Vec<Rpc>,
    pub hit_pages: u64,
}

#[derive(Clone, Debug)]
pub struct OscLimits {
    pub max_dirty_pages: u64,
    pub high_watermark: f64,
    pub age_timeout: f64,
    pub readahead_pages: u64,
    pub throughput_horizon: f64,
}

#[derive(Clone, Debug)]
pub struct OscState {
    pub id: OscId,
    config: Configuration,
    params: OscLimits,
    open: BTreeMap<ExtentKey, OpenExtent>,
    age_order: BTreeMap<u64, ExtentKey>,
    next_seq: u64,
    full: Vec<ExtentKey>,
    open_pages: u64,
    /// Dirty pages that belong to built write RPCs not yet completed.
    writeback_pages: u64,
    ready: VecDeque<Rpc>,
    ready_prefetch: VecDeque<Rpc>,
    inflight: BTreeMap<u64, Rpc>,
    reads: BTreeMap<u32, ReadStream>,
    counters: RawCounters,
    write_pages_submitted: u64,
    completions: VecDeque<(f64, Op, u64)>,
    pub(crate) age_timer: Option<f64>,
}

impl OscState {
    pub fn new(id: OscId, config: Configuration, params: OscLimits) -> Self {
        let counters = RawCounters {
            dirty_pages_max: params.max_dirty_pages,
            ..Default::default()
        };
        OscState {
            id,
            config,
            params,
            open: BTreeMap::new(),
            age_order: BTreeMap::new(),
            next_seq: 0,
            full: Vec::new(),
            open_pages: 0,
            writeback_pages: 0,
            ready: VecDeque::new(),
            ready_prefetch: VecDeque::new(),
            inflight: BTreeMap::new(),
            reads: BTreeMap::new(),
            counters,
            write_pages_submitted: 0,
            completions: VecDeque::new(),
            age_timer: None,
        }
    }

    pub fn config(&self) -> Configuration {
        self.config
    }

    pub fn dirty_pages(&self) -> u64 {
        self.open_pages + self.writeback_pages
    }

    pub fn open_pages(&self) -> u64 {
        self.open_pages
    }

    pub fn writeback_pages(&self) -> u64 {
        self.writeback_pages
    }

    pub fn max_dirty_pages(&self) -> u64 {
        self.params.max_dirty_pages
    }

    pub fn inflight_len(&self) -> usize {
        self.inflight.len()
    }

    pub fn inflight(&self) -> impl Iterator<Item = &Rpc> {
        self.inflight.values()
    }

    pub fn inflight_rpc(&self, id: u64) -> Option<&Rpc> {
        self.inflight.get(&id)
    }

    pub fn ready_len(&self) -> usize {
        self.ready.len() + self.ready_prefetch.len()
    }

    pub fn open_extents(&self) -> impl Iterator<Item = (&ExtentKey, &OpenExtent)> {
        self.open.iter()
    }

    pub fn write_pages_submitted(&self) -> u64 {
        self.write_pages_submitted
    }

    pub fn counters(&self) -> &RawCounters {
        &self.counters
    }

    pub fn oldest_dirty(&self) -> Option<f64> {
        self.age_order
            .values()
            .next()
            .map(|k| self.open[k].first_dirty)
    }

    fn under_pressure(&self) -> bool {
        self.dirty_pages() as f64
            >= self.params.high_watermark * self.params.max_dirty_pages as f64
    }

    /// Whether `pages` more dirty pages fit in the cache.
    pub fn has_room(&self, pages: u64) -> bool {
        self.dirty_pages() + pages <= self.params.max_dirty_pages
    }

    /// Mark object pages `[lo, hi)` of `file` dirty.
    ///
    /// Pages already dirty in an open extent are absorbed. Extents that become
    /// full are queued for the next [`build_rpcs`](Self::build_rpcs).
    pub fn write_pages(&mut self, file: u32, lo: u64, hi: u64, now: f64) -> WriteOutcome {
        let w = self.config.rpc_window_pages as u64;
        let mut out = WriteOutcome::default();
        let mut p = lo;
        while p < hi {
            let idx = p / w;
            let ext_end = ((idx + 1) * w).min(hi);
            let key = (file, idx);
            let seq = self.next_seq;
            let ext = self.open.entry(key).or_insert_with(|| OpenExtent {
                bits: PageBits::default(),
                count: 0,
                first_dirty: now,
                seq,
            });
            if ext.seq == seq {
                self.next_seq += 1;
                self.age_order.insert(seq, key);
            }
            let base = idx * w;
            let added = ext.bits.set_range((p - base) as usize, (ext_end - base) as usize);
            let was_full = ext.count as u64 == w;
            ext.count += added;
            out.new_pages += added as u64;
            out.absorbed_pages += (ext_end - p) - added as u64;
            if ext.count as u64 == w && !was_full {
                self.full.push(key);
            }
            p = ext_end;
        }
        let pages = hi - lo;
        self.open_pages += out.new_pages;
        self.write_pages_submitted += pages;
        self.counters.cache_absorbed_bytes += out.absorbed_pages * PAGE_SIZE;
        self.counters.llite_bytes_written_total += pages * PAGE_SIZE;
        self.sync_dirty();
        out
    }

    fn sync_dirty(&mut self) {
        self.counters.dirty_pages_current = self.dirty_pages();
    }

    fn take_extent(&mut self, key: ExtentKey) -> Option<OpenExtent> {
        let ext = self.open.remove(&key)?;
        self.age_order.remove(&ext.seq);
        self.open_pages -= ext.count as u64;
        Some(ext)
    }

    fn flush_rpc(&mut self, key: ExtentKey, start_page: u64, pages: u32, now: f64, next_id: &mut u64) -> Rpc {
        let rpc = Rpc {
            id: *next_id,
            osc_id: self.id,
            op: Op::Write,
            kind: RpcKind::Flush,
            file_id: key.0,
            start_page,
            page_count: pages,
            window_at_creation: self.config.rpc_window_pages,
            created_time: now,
            dispatched_time: None,
            completed_time: None,
        };
        *next_id += 1;
        self.writeback_pages += pages as u64;
        rpc
    }

    fn extent_rpc(&mut self, key: ExtentKey, now: f64, next_id: &mut u64) -> Option<Rpc> {
        let ext = self.take_extent(key)?;
        let start = key.1 * self.config.rpc_window_pages as u64;
        Some(self.flush_rpc(key, start, ext.count, now, next_id))
    }

    /// Pack open extents into write RPCs.
    ///
    /// RPCs are built only for channels that are idle and not already covered
    /// by a queued RPC, so a configuration change applies to every page still
    /// in the cache. Full extents go first, then extents whose oldest page has
    /// waited `age_timeout`, then, under cache pressure, the oldest extents.
    pub fn build_rpcs(&mut self, now: f64, next_id: &mut u64) -> Vec<Rpc> {
        let mut out = Vec::new();
        let cap = self.config.rpcs_in_flight as usize;
        let idle = |s: &Self, out: &Vec<Rpc>| s.inflight.len() + s.ready.len() + out.len() < cap;
        let mut full = std::mem::take(&mut self.full).into_iter();
        while idle(self, &out) {
            let Some(key) = full.next() else { break };
            if self.open.get(&key).is_some_and(|e| e.count == self.config.rpc_window_pages) {
                out.extend(self.extent_rpc(key, now, next_id));
            }
        }
        self.full.extend(full);
        while idle(self, &out) {
            let Some((_, &key)) = self.age_order.iter().next() else { break };
            let aged = self.open[&key].first_dirty + self.params.age_timeout <= now + 1e-12;
            if !(aged || self.under_pressure()) {
                break;
            }
            out.extend(self.extent_rpc(key, now, next_id));
        }
        self.sync_dirty();
        out
    }

    /// Append built RPCs to the dispatch queues.
    pub fn enqueue(&mut self, rpcs: impl IntoIterator<Item = Rpc>) {
        for rpc in rpcs {
            match rpc.kind {
                RpcKind::Prefetch => self.ready_prefetch.push_back(rpc),
                _ => self.ready.push_back(rpc),
            }
        }
    }

    /// Move queued RPCs into flight until the in-flight cap binds.
    pub fn dispatch(&mut self, now: f64) -> Vec<Rpc> {
        let cap = self.config.rpcs_in_flight as usize;
        let mut out = Vec::new();
        while self.inflight.len() < cap {
            let Some(mut rpc) = self.ready.pop_front().or_else(|| self.ready_prefetch.pop_front())
            else {
                break;
            };
            rpc.dispatched_time = Some(now);
            self.inflight.insert(rpc.id, rpc.clone());
            let n = self.inflight.len() as u64;
            let c = self.counters.op_mut(rpc.op);
            c.inflight_sample_sum += n;
            c.inflight_sample_count += 1;
            out.push(rpc);
        }
        out
    }

    /// Retire an in-flight RPC; returns it with `completed_time` set.
    pub fn complete(&mut self, rpc_id: u64, now: f64) -> Option<Rpc> {
        let mut rpc = self.inflight.remove(&rpc_id)?;
        rpc.completed_time = Some(now);
        let bytes = rpc.bytes();
        let c = self.counters.op_mut(rpc.op);
        c.rpc_count += 1;
        c.page_count += rpc.page_count as u64;
        c.bytes_transferred += bytes;
        c.rpc_latency_sum += now - rpc.dispatched_time.unwrap_or(now);
        if rpc.op == Op::Write {
            self.writeback_pages -= rpc.page_count as u64;
        } else if let Some(stream) = self.reads.get_mut(&rpc.file_id) {
            if let Some(seg) = stream.segs.iter_mut().find(|s| s.rpc_id == rpc_id) {
                seg.done = true;
            }
        }
        self.completions.push_back((now, rpc.op, bytes));
        let horizon = now - self.params.throughput_horizon;
        while self.completions.front().is_some_and(|c| c.0 < horizon) {
            self.completions.pop_front();
        }
        self.sync_dirty();
        Some(rpc)
    }

    /// Completed-RPC bytes per second for each op over `(now - window, now]`.
    pub fn measure_throughput(&self, now: f64, window: f64) -> [f64; 2] {
        let mut bytes = [0u64; 2];
        for &(t, op, b) in self.completions.iter().rev() {
            if t <= now - window {
                break;
            }
            if t <= now {
                bytes[op.index()] += b;
            }
        }
        [bytes[0] as f64 / window, bytes[1] as f64 / window]
    }

    /// Apply a new configuration; returns the previous one and any RPCs
    /// flushed because the window shrank.
    pub fn set_config(&mut self, config: Configuration, now: f64, next_id: &mut u64) -> (Configuration, Vec<Rpc>) {
        let prev = self.config;
        let old_w = prev.rpc_window_pages as u64;
        let new_w = config.rpc_window_pages as u64;
        self.config = config;
        let mut flushed = Vec::new();
        if new_w < old_w {
            let keys: Vec<ExtentKey> = self.age_order.values().copied().collect();
            for key in keys {
                let ext = self.take_extent(key).expect("indexed extent exists");
                let base = key.1 * old_w;
                for piece in 0..(old_w / new_w) {
                    let lo = (piece * new_w) as usize;
                    let n = ext.bits.count_range(lo, lo + new_w as usize);
                    if n > 0 {
                        let rpc = self.flush_rpc(key, base + lo as u64, n, now, next_id);
                        flushed.push(rpc);
                    }
                }
            }
            self.full.clear();
        } else if new_w > old_w {
            self.rebucket(old_w, new_w);
        }
        self.sync_dirty();
        (prev, flushed)
    }

    fn rebucket(&mut self, old_w: u64, new_w: u64) {
        let old = std::mem::take(&mut self.open);
        self.age_order.clear();
        self.full.clear();
        for ((file, idx), ext) in old {
            let first = idx * old_w;
            let key = (file, first / new_w);
            let shift = (first % new_w) as usize;
            let target = self.open.entry(key).or_insert_with(|| OpenExtent {
                bits: PageBits::default(),
                count: 0,
                first_dirty: ext.first_dirty,
                seq: ext.seq,
            });
            for i in ext.bits.ones() {
                target.bits.set_range(shift + i, shift + i + 1);
            }
            target.count += ext.count;
            if ext.seq < target.seq {
                target.seq = ext.seq;
                target.first_dirty = ext.first_dirty;
            }
        }
        for (key, ext) in &self.open {
            self.age_order.insert(ext.seq, *key);
            if ext.count as u64 == new_w {
                self.full.push(*key);
            }
        }
    }

    /// Serve a read of object pages `[lo, hi)` of `file`.
    ///
    /// Pages inside the readahead window are hits (waiting on the prefetch RPC
    /// if it has not completed); the rest become demand RPCs split at window
    /// boundaries. Once an access continues a contiguous run that spans two
    /// consecutive window extents, readahead keeps up to `readahead_pages`
    /// pages prefetched ahead of the reader in window-aligned pieces.
    pub fn read_pages(&mut self, file: u32, lo: u64, hi: u64, object_end: u64, now: f64, next_id: &mut u64) -> ReadOutcome {
        let w = self.config.rpc_window_pages as u64;
        let ra_cap = self.params.readahead_pages;
        let id = self.id;
        let mut out = ReadOutcome::default();
        let stream = self.reads.entry(file).or_default();

        let contiguous = stream.prev_end == Some(lo);
        if !contiguous {
            stream.run_start = lo;
            stream.active = false;
            stream.segs.clear();
            stream.ra_end = lo;
        }
        stream.prev_end = Some(hi);
        if contiguous && (hi - 1) / w > stream.run_start / w {
            stream.active = true;
        }

        let mut make = |kind: RpcKind, start: u64, end: u64| Rpc {
            id: {
                let v = *next_id;
                *next_id += 1;
                v
            },
            osc_id: id,
            op: Op::Read,
            kind,
            file_id: file,
            start_page: start,
            page_count: (end - start) as u32,
            window_at_creation: w as u32,
            created_time: now,
            dispatched_time: None,
            completed_time: None,
        };

        let (cov_lo, cov_hi) = match stream.segs.front() {
            Some(f) => (f.start, stream.ra_end),
            None => (lo, lo),
        };
        for seg in stream.segs.iter() {
            if seg.end <= lo || seg.start >= hi {
                continue;
            }
            let overlap = seg.end.min(hi) - seg.start.max(lo);
            out.hit_pages += overlap;
            if !seg.done {
                out.wait_on.push(seg.rpc_id);
            }
        }
        let mut demand = Vec::new();
        if cov_hi <= cov_lo || hi <= cov_lo || lo >= cov_hi {
            demand.push((lo, hi));
        } else {
            if lo < cov_lo {
                demand.push((lo, cov_lo));
            }
            if hi > cov_hi {
                demand.push((cov_hi, hi));
            }
        }
        for (a, b) in demand {
            let mut p = a;
            while p < b {
                let e = ((p / w + 1) * w).min(b);
                let rpc = make(RpcKind::Demand, p, e);
                out.wait_on.push(rpc.id);
                out.new_rpcs.push(rpc);
                p = e;
            }
        }

        while stream.segs.front().is_some_and(|s| s.end <= hi) {
            stream.segs.pop_front();
        }
        if stream.ra_end < hi {
            stream.ra_end = hi;
            stream.segs.clear();
        }
        if stream.active {
            loop {
                let start = stream.ra_end;
                let end = ((start / w + 1) * w).min(object_end);
                if end <= start || end - hi > ra_cap {
                    break;
                }
                let rpc = make(RpcKind::Prefetch, start, end);
                stream.segs.push_back(Segment {
                    start,
                    end,
                    rpc_id: rpc.id,
                    done: false,
                });
                stream.ra_end = end;
                out.new_rpcs.push(rpc);
            }
        } else {
            stream.segs.clear();
            stream.ra_end = hi;
        }
        out
    }

    pub fn probe(&self, now: f64) -> RawCounters {
        RawCounters {
            time: now,
            ..self.counters
        }
    }
}
