//! Scenario files (TOML): simulator timing under `[sim]`, the BSS under `[scenario]`.
//!
//! ```toml
//! [sim]
//! seed = 7
//! sim_duration_us = 2000000
//!
//! [scenario]
//! name = "two-stas"
//! mechanism = { type = "always_on", mode = "LCM" }
//! stas = [{ id = 1 }, { id = 2, listen_interval = 3 }]
//!
//! [[scenario.flows]]
//! sta = 1
//! kind = "Cbr"
//! rate = 5e6
//! packet_bytes = 1500
//! direction = "Ul"
//! ```

use std::path::Path;

use bnps_core::sim::{ScenarioSpec, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    #[serde(default)]
    pub sim: SimConfig,
    pub scenario: ScenarioSpec,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, toml::de::Error> {
    toml::from_str(text)
}

pub fn read_scenario(path: &Path) -> Result<ScenarioFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text).map_err(|e| Error::Format { path: path.to_path_buf(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use bnps_core::phy::ModeLabel;
    use bnps_core::sim::Mechanism;

    #[test]
    fn module_example_parses() {
        let text = include_str!("scenario.rs")
            .lines()
            .filter_map(|l| l.strip_prefix("//! "))
            .skip_while(|l| *l != "[sim]")
            .take_while(|l| *l != "```")
            .collect::<Vec<_>>()
            .join("\n");
        let f = parse_scenario(&text).unwrap();
        assert_eq!(f.sim.seed, 7);
        assert_eq!(f.scenario.mechanism, Mechanism::AlwaysOn { mode: ModeLabel::Lcm });
        assert_eq!(f.scenario.stas[1].listen_interval, 3);
        assert_eq!(f.scenario.flows[0].flow.rate, 5e6);
    }

    #[test]
    fn round_trips_through_toml() {
        let f = parse_scenario("[scenario]\nname = \"x\"\nmechanism = { type = \"always_on\", mode = \"HCM\" }\n").unwrap();
        assert_eq!(parse_scenario(&toml::to_string(&f).unwrap()).unwrap(), f);
    }
}
