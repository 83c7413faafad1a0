use serde::{Deserialize, Serialize};

use crate::metrics::FEATURE_SCHEMA_VERSION;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Reproduction metadata embedded in every output file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub schema_version: u32,
    pub seeds: Vec<u64>,
    pub scenario_hash: String,
}

impl Provenance {
    pub fn new(seeds: Vec<u64>, scenario_hash: String) -> Self {
        Provenance {
            tool_version: TOOL_VERSION.to_string(),
            schema_version: FEATURE_SCHEMA_VERSION,
            seeds,
            scenario_hash,
        }
    }

    /// `# key=value` lines for CSV headers.
    pub fn comment_lines(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# tool_version={}\n# schema_version={}\n# seeds={}\n# scenario_hash={}\n",
            self.tool_version,
            self.schema_version,
            seeds.join(";"),
            self.scenario_hash
        )
    }
}
