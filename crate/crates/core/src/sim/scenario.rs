//! Simulator scenario file: topology, device constants, configuration space
//! and flush triggers. Every numeric constant the simulator uses lives here.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::types::{ConfigSpace, Configuration, MAX_WINDOW_PAGES};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OstParams {
    /// bytes/second
    pub disk_bandwidth: f64,
    /// seconds
    pub per_rpc_overhead: f64,
}

impl Default for OstParams {
    fn default() -> Self {
        OstParams {
            disk_bandwidth: 500e6,
            per_rpc_overhead: 0.5e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    /// Per-client link, bytes/second (25 Gb/s).
    pub link_bandwidth: f64,
    /// seconds
    pub base_latency: f64,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            link_bandwidth: 25e9 / 8.0,
            base_latency: 0.2e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscParams {
    pub max_dirty_pages: u64,
    /// Fraction of `max_dirty_pages` at which pressure flushing starts.
    pub high_watermark: f64,
    /// seconds
    pub age_timeout: f64,
    pub readahead_pages: u64,
}

impl Default for OscParams {
    fn default() -> Self {
        OscParams {
            max_dirty_pages: 8192,
            high_watermark: 0.75,
            age_timeout: 1.0,
            readahead_pages: 1024,
        }
    }
}

/// Client-side cost of handing a request to the file system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientParams {
    /// Fixed per-request cost, seconds.
    pub request_overhead: f64,
    /// Memory copy bandwidth between application and page cache, bytes/second.
    pub copy_bandwidth: f64,
    /// Outstanding requests per stream.
    pub queue_depth: u32,
}

impl Default for ClientParams {
    fn default() -> Self {
        ClientParams {
            request_overhead: 20e-6,
            copy_bandwidth: 4e9,
            queue_depth: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaceParams {
    pub window_pages: Vec<u32>,
    pub rpcs_in_flight: Vec<u32>,
}

impl Default for SpaceParams {
    fn default() -> Self {
        let d = ConfigSpace::default();
        SpaceParams {
            window_pages: d.window_pages().to_vec(),
            rpcs_in_flight: d.rpcs_in_flight().to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    pub osts: usize,
    pub clients: usize,
    /// Stripe unit in bytes; files are striped round-robin over all OSTs.
    pub stripe_size: u64,
    pub ost: OstParams,
    pub network: NetworkParams,
    pub osc: OscParams,
    pub client: ClientParams,
    pub space: SpaceParams,
    pub default_config: Configuration,
    /// Trailing horizon kept for `measure_throughput`, seconds.
    pub throughput_horizon: f64,
    /// Record a full event trace (debug).
    pub trace: bool,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 42,
            osts: 4,
            clients: 1,
            stripe_size: 1 << 20,
            ost: OstParams::default(),
            network: NetworkParams::default(),
            osc: OscParams::default(),
            client: ClientParams::default(),
            space: SpaceParams::default(),
            default_config: Configuration::LUSTRE_DEFAULT,
            throughput_horizon: 10.0,
            trace: false,
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let scenario: Scenario = serde_json::from_str(&text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn space(&self) -> Result<ConfigSpace> {
        ConfigSpace::new(
            self.space.window_pages.clone(),
            self.space.rpcs_in_flight.clone(),
        )
    }

    pub fn stripe_pages(&self) -> u64 {
        self.stripe_size / super::PAGE_SIZE
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Scenario(m.to_string()));
        if self.osts == 0 {
            return bad("at least one OST is required");
        }
        if self.clients == 0 {
            return bad("at least one client is required");
        }
        if self.stripe_size == 0 || !self.stripe_size.is_multiple_of(super::PAGE_SIZE) {
            return bad("stripe_size must be a positive multiple of the page size");
        }
        let positive = [
            self.ost.disk_bandwidth,
            self.network.link_bandwidth,
            self.osc.age_timeout,
            self.client.copy_bandwidth,
            self.throughput_horizon,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("bandwidths, timeouts and horizons must be positive");
        }
        let non_negative = [
            self.ost.per_rpc_overhead,
            self.network.base_latency,
            self.client.request_overhead,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("latencies and overheads must be non-negative");
        }
        if !(self.osc.high_watermark > 0.0 && self.osc.high_watermark <= 1.0) {
            return bad("high_watermark must be in (0, 1]");
        }
        if self.osc.max_dirty_pages < MAX_WINDOW_PAGES as u64 {
            return bad("max_dirty_pages must hold at least one full window");
        }
        if self.client.queue_depth == 0 {
            return bad("queue_depth must be positive");
        }
        let space = self.space()?;
        space.check(&self.default_config)?;
        Ok(())
    }

    /// Stable hash of the scenario's canonical JSON, used for provenance.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}
