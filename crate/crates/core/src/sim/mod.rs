//! Discrete-event simulator of one BSS (plus optional OBSS devices) on a
//! single channel with DCF contention.

pub mod dcf;
mod engine;
pub mod event;
pub mod report;
pub mod scenario;

pub use dcf::{freeze_backoffs, thaw_backoffs, DcfState, FreezeReason};
pub use event::{Event, EventKind, EventQueue, Nanos, TimerKind};
pub use report::*;
pub use scenario::{FlowBinding, Mechanism, ObssSpec, ScenarioSpec, ScheduleUpdate, StaSpec, AP_ID};

use crate::error::SimError;
use crate::phy::MacOverheadParams;

/// Timing parameters in µs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimConfig {
    pub seed: u64,
    pub sim_duration_us: u64,
    pub slot_time_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    pub beacon_interval_us: u64,
    pub cwmin: u32,
    pub cwmax: u32,
    /// Whether OBSS devices also freeze their backoff while the AP dozes.
    pub obss_freeze: bool,
    pub retry_limit: u32,
    pub ack_airtime_us: u64,
    /// Beacon body without the schedule element, bytes.
    pub beacon_bytes: u32,
    /// Per-device queue capacity in packets; arrivals beyond it are dropped.
    pub queue_limit: usize,
    pub overhead: MacOverheadParams,
    pub record_frames: bool,
    #[doc(hidden)]
    pub disable_doze_freeze: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            sim_duration_us: 1_000_000,
            slot_time_us: 9,
            sifs_us: 16,
            difs_us: 34,
            beacon_interval_us: 102_400,
            cwmin: 15,
            cwmax: 1023,
            obss_freeze: false,
            retry_limit: 7,
            ack_airtime_us: 44,
            beacon_bytes: 120,
            queue_limit: 1000,
            overhead: MacOverheadParams::default(),
            record_frames: false,
            disable_doze_freeze: false,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> alloc::vec::Vec<alloc::string::String> {
        use alloc::string::String;
        let mut e = alloc::vec::Vec::new();
        if self.sim_duration_us == 0 {
            e.push(String::from("sim_duration_us must be positive"));
        }
        if self.slot_time_us == 0 {
            e.push(String::from("slot_time_us must be positive"));
        }
        if self.sifs_us >= self.difs_us {
            e.push(String::from("sifs_us must be shorter than difs_us"));
        }
        if self.beacon_interval_us == 0 {
            e.push(String::from("beacon_interval_us must be positive"));
        }
        if self.cwmin > self.cwmax {
            e.push(String::from("cwmin must not exceed cwmax"));
        }
        if self.queue_limit == 0 {
            e.push(String::from("queue_limit must be positive"));
        }
        e
    }
}

/// Runs one scenario. Identical inputs give identical reports.
pub fn run(config: &SimConfig, scenario: &ScenarioSpec) -> Result<SimReport, SimError> {
    let mut errs = config.validate();
    if errs.is_empty() {
        let airtime = engine::beacon_airtime_ns(config, 0)?.div_ceil(1_000);
        errs.extend(scenario::validate(scenario, config.sim_duration_us, config.beacon_interval_us, airtime));
    }
    if !errs.is_empty() {
        return Err(SimError::Validation(errs));
    }
    engine::Engine::new(config, scenario)?.run()
}
