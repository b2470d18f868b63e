//! 802.11bn AP power save: Scheduled, Dynamic, Semi-Dynamic and Cross-Link PS
//! state machines and signaling frames, a parametric AP power model, a
//! deterministic DCF simulator, and the LCM/HCM crossover and campus studies.
//!
//! `no_std` with `alloc`; file formats and the command line live in the `bnps` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod dps;
pub mod error;
pub mod fcs;
pub mod multilink;
pub mod phy;
pub mod power;
pub mod rng;
pub mod sched;
pub mod sim;
pub mod trace;

pub use error::{AnalysisError, DpsError, FrameError, MultilinkError, PhyError, PowerError, ScheduleError, SimError, TraceError};
pub use phy::{data_rate, frame_airtime, Bandwidth, GuardInterval, MacOverheadParams, ModeLabel, ModePair, PhyConfig};
pub use power::{average_power, energy, savings_percent, PowerProfile, PowerState, RadioActivity, Segment, StateTimeline};
