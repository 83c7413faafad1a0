use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Client page size in bytes.
pub const PAGE_SIZE: u64 = 4096;

/// Largest RPC window the extent bitmaps can represent.
pub const MAX_WINDOW_PAGES: u32 = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Read,
    Write,
}

impl Op {
    pub const ALL: [Op; 2] = [Op::Read, Op::Write];

    pub fn index(self) -> usize {
        match self {
            Op::Read => 0,
            Op::Write => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Op::Read => "read",
            Op::Write => "write",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The two per-OSC tunables: pages per RPC and concurrent RPCs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub rpc_window_pages: u32,
    pub rpcs_in_flight: u32,
}

impl Configuration {
    pub const fn new(rpc_window_pages: u32, rpcs_in_flight: u32) -> Self {
        Configuration {
            rpc_window_pages,
            rpcs_in_flight,
        }
    }

    /// Lustre client defaults: 1 MiB RPCs, 8 in flight.
    pub const LUSTRE_DEFAULT: Configuration = Configuration::new(256, 8);

    pub fn window_bytes(&self) -> u64 {
        self.rpc_window_pages as u64 * PAGE_SIZE
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.rpc_window_pages, self.rpcs_in_flight)
    }
}

/// The discrete configuration space: window sizes times in-flight limits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigSpace {
    window_pages: Vec<u32>,
    rpcs_in_flight: Vec<u32>,
}

impl Default for ConfigSpace {
    fn default() -> Self {
        ConfigSpace {
            window_pages: vec![16, 32, 64, 128, 256, 512, 1024],
            rpcs_in_flight: vec![1, 2, 4, 8, 16, 32],
        }
    }
}

impl ConfigSpace {
    pub fn new(mut window_pages: Vec<u32>, mut rpcs_in_flight: Vec<u32>) -> Result<Self> {
        window_pages.sort_unstable();
        window_pages.dedup();
        rpcs_in_flight.sort_unstable();
        rpcs_in_flight.dedup();
        if window_pages.is_empty() || rpcs_in_flight.is_empty() {
            return Err(Error::Scenario("configuration space must be nonempty".into()));
        }
        if window_pages[0] == 0 || rpcs_in_flight[0] == 0 {
            return Err(Error::Scenario("tunable values must be positive".into()));
        }
        if *window_pages.last().unwrap() > MAX_WINDOW_PAGES {
            return Err(Error::Scenario(format!(
                "window sizes above {MAX_WINDOW_PAGES} pages are not supported"
            )));
        }
        Ok(ConfigSpace {
            window_pages,
            rpcs_in_flight,
        })
    }

    pub fn window_pages(&self) -> &[u32] {
        &self.window_pages
    }

    pub fn rpcs_in_flight(&self) -> &[u32] {
        &self.rpcs_in_flight
    }

    pub fn len(&self) -> usize {
        self.window_pages.len() * self.rpcs_in_flight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        self.window_pages.binary_search(&c.rpc_window_pages).is_ok()
            && self.rpcs_in_flight.binary_search(&c.rpcs_in_flight).is_ok()
    }

    /// Ascending window, then ascending in-flight limit.
    pub fn iter(&self) -> impl Iterator<Item = Configuration> + '_ {
        self.window_pages.iter().flat_map(move |&w| {
            self.rpcs_in_flight
                .iter()
                .map(move |&r| Configuration::new(w, r))
        })
    }

    pub fn get(&self, index: usize) -> Option<Configuration> {
        let n = self.rpcs_in_flight.len();
        let w = *self.window_pages.get(index / n)?;
        Some(Configuration::new(w, self.rpcs_in_flight[index % n]))
    }

    pub fn check(&self, c: &Configuration) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::ConfigOutOfSpace(*c))
        }
    }
}

/// One application I/O request as seen by the client VFS layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoRequest {
    pub op: Op,
    pub file_id: u32,
    pub offset: u64,
    pub length: u64,
    pub submit_time: f64,
}

impl IoRequest {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidRequest("zero-length request".into()));
        }
        if !self.submit_time.is_finite() {
            return Err(Error::InvalidRequest("submit time is not finite".into()));
        }
        Ok(())
    }

    /// Page range `[first, end)` covered by the request in file space.
    pub fn page_range(&self) -> (u64, u64) {
        let first = self.offset / PAGE_SIZE;
        let end = (self.offset + self.length).div_ceil(PAGE_SIZE);
        (first, end)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OscId {
    pub client: usize,
    pub ost: usize,
}

impl fmt::Display for OscId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}.ost{}", self.client, self.ost)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RpcKind {
    /// Dirty-page writeback.
    Flush,
    /// Read pages an application request is waiting on.
    Demand,
    /// Speculative readahead.
    Prefetch,
}

/// A bulk RPC between one OSC and its OST.
///
/// Write RPCs carry up to one window of dirty pages from a single aligned
/// extent. Read RPCs cover a contiguous object page range inside one extent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rpc {
    pub id: u64,
    pub osc_id: OscId,
    pub op: Op,
    pub kind: RpcKind,
    pub file_id: u32,
    /// First object page of the extent the RPC was built from.
    pub start_page: u64,
    pub page_count: u32,
    /// Window in force when the RPC was built.
    pub window_at_creation: u32,
    pub created_time: f64,
    pub dispatched_time: Option<f64>,
    pub completed_time: Option<f64>,
}

impl Rpc {
    pub fn bytes(&self) -> u64 {
        self.page_count as u64 * PAGE_SIZE
    }
}
