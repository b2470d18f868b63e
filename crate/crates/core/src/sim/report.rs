use alloc::vec::Vec;

use super::event::Nanos;
use crate::phy::ModeLabel;
use crate::power::{PowerState, RadioActivity, Segment, StateTimeline};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceRole {
    Ap,
    Sta,
    LegacySta,
    Obss,
}

/// A timeline segment with exact integer duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NsSegment {
    pub state: PowerState,
    pub mode: ModeLabel,
    pub activity: RadioActivity,
    pub duration_ns: Nanos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceReport {
    pub id: u16,
    pub role: DeviceRole,
    pub segments: Vec<NsSegment>,
}

impl DeviceReport {
    pub fn timeline(&self) -> StateTimeline {
        let mut t = StateTimeline::new();
        for s in &self.segments {
            t.push(Segment::new(s.state, s.mode, s.activity, s.duration_ns as f64 * 1e-9));
        }
        t
    }

    pub fn total_ns(&self) -> Nanos {
        self.segments.iter().map(|s| s.duration_ns).sum()
    }

    pub fn time_in(&self, state: PowerState) -> Nanos {
        self.segments.iter().filter(|s| s.state == state).map(|s| s.duration_ns).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    /// Sending entity (the AP for downlink flows).
    pub src: u16,
    pub dst: Option<u16>,
    pub offered_packets: u64,
    pub delivered_packets: u64,
    pub dropped_packets: u64,
    pub offered_bps: f64,
    pub throughput_bps: f64,
    /// Queueing plus access delay of delivered packets, µs.
    pub latency_p50_us: f64,
    pub latency_p95_us: f64,
    pub latency_p99_us: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub frame_arrival: u64,
    pub tx_start: u64,
    pub tx_end: u64,
    pub backoff_expiry: u64,
    pub state_change: u64,
    pub beacon_due: u64,
    pub timer: u64,
}

impl EventCounts {
    pub(crate) fn bump(&mut self, index: usize) {
        let slot = match index {
            0 => &mut self.frame_arrival,
            1 => &mut self.tx_start,
            2 => &mut self.tx_end,
            3 => &mut self.backoff_expiry,
            4 => &mut self.state_change,
            5 => &mut self.beacon_due,
            _ => &mut self.timer,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        self.frame_arrival + self.tx_start + self.tx_end + self.backoff_expiry + self.state_change + self.beacon_due + self.timer
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Collision {
    pub at_ns: Nanos,
    /// Frames that overlapped.
    pub frames: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeaconRecord {
    pub tbtt_ns: Nanos,
    pub sent_ns: Nanos,
    pub active_version: Option<u16>,
    pub pending_version: Option<u16>,
    pub collided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleConflict {
    pub tbtt_ns: Nanos,
    pub state: PowerState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleAnnouncement {
    pub announced_ns: Nanos,
    pub version: u16,
    pub activation_ns: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleLearned {
    pub sta: u16,
    pub version: u16,
    pub at_ns: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Data,
    Ack,
    Beacon,
    Icf,
    Icr,
    Trigger,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub start_ns: Nanos,
    pub end_ns: Nanos,
    pub src: u16,
    pub dst: Option<u16>,
    pub kind: FrameKind,
    /// Capability mode whose rate carried the frame; `None` for basic-rate and OBSS frames.
    pub mode: Option<ModeLabel>,
    pub collided: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcrRecord {
    pub sent_ns: Nanos,
    pub sta: u16,
    pub effective_ns: Nanos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeChangeRecord {
    pub at_ns: Nanos,
    pub state: PowerState,
    pub mode: ModeLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub duration_ns: Nanos,
    /// AP first, then STAs and OBSS devices in scenario order.
    pub devices: Vec<DeviceReport>,
    /// BSS flows in scenario order, then OBSS flows.
    pub flows: Vec<FlowReport>,
    pub events: EventCounts,
    pub collisions: Vec<Collision>,
    pub beacons: Vec<BeaconRecord>,
    pub schedule_conflicts: Vec<ScheduleConflict>,
    pub announcements: Vec<ScheduleAnnouncement>,
    pub schedule_learned: Vec<ScheduleLearned>,
    /// AP (state, mode) after every change, starting with the initial one at 0.
    pub ap_changes: Vec<ModeChangeRecord>,
    pub icrs: Vec<IcrRecord>,
    /// (time, STA) of ICFs whose request was deferred.
    pub deferrals: Vec<(Nanos, u16)>,
    /// (time, STA) of the first transmission of each Trigger Frame.
    pub triggers: Vec<(Nanos, u16)>,
    /// Every frame on air, when `record_frames` is set.
    pub frames: Vec<FrameRecord>,
}

impl SimReport {
    pub fn device(&self, id: u16) -> Option<&DeviceReport> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn ap(&self) -> &DeviceReport {
        &self.devices[0]
    }
}

/// Nearest-rank percentile of sorted values.
pub(crate) fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = libm::ceil(p / 100.0 * sorted.len() as f64) as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
