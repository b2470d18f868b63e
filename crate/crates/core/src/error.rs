use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::phy::PhyConfig;
use crate::power::{PowerState, ProfileKey, RadioActivity};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhyError {
    #[error("rejected PHY configuration: MCS {} / {} / {} SS", .0.mcs_index, .0.bandwidth, .0.nss)]
    InvalidConfig(PhyConfig),
    #[error("HCM must offer strictly more bandwidth x spatial streams than LCM")]
    ModeOrdering,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("power profile has no entry for `{0}`")]
    IncompleteProfile(ProfileKey),
    #[error("activity {activity:?} is not permitted in state {state:?}")]
    ActivityNotPermitted { state: PowerState, activity: RadioActivity },
    #[error("negative segment duration {0}")]
    NegativeDuration(f64),
    #[error("average power is undefined for a zero-duration timeline")]
    UndefinedAverage,
    #[error("savings baseline must be positive, got {0}")]
    InvalidBaseline(f64),
    #[error("power profile violates its invariants: {}", .0.join("; "))]
    InvalidProfile(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("time {t} µs precedes the schedule epoch {epoch} µs")]
    BeforeEpoch { t: u64, epoch: u64 },
    #[error("new schedule version {new} does not follow current version {current}")]
    StaleSchedule { current: u16, new: u16 },
    #[error("presence request for {requested} µs is in the past (now {now} µs)")]
    StaleRequest { requested: u64, now: u64 },
    #[error("invalid presence request: duration must be positive")]
    InvalidRequest,
    #[error("schedule element truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unexpected element id {0:#04x}")]
    BadElementId(u8),
    #[error("element length field {field} disagrees with group count {groups}")]
    BadLength { field: u8, groups: u8 },
    #[error("schedule has {0} groups; the element carries at most 16")]
    TooManyGroups(usize),
    #[error("unknown power state code {0}")]
    BadStateCode(u8),
    #[error("malformed capability word {0:#06x}")]
    BadCapability(u16),
    #[error("value {0} µs does not fit the 32-bit wire field")]
    FieldOverflow(u64),
    #[error("schedule is invalid: {0:?}")]
    Invalid(Vec<crate::sched::Violation>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unexpected frame type {0:#04x}")]
    BadType(u8),
    #[error("checksum mismatch (corrupt frame)")]
    Corrupt,
    #[error("malformed capability word {0:#06x}")]
    BadCapability(u16),
    #[error("unknown grant kind {0}")]
    BadGrantKind(u8),
    #[error("wake-up bitmap is empty")]
    EmptyBitmap,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DpsError {
    #[error("ICF discarded: {0}")]
    FrameDiscarded(FrameError),
    #[error("operation requires mode {expected}, AP is in {actual}")]
    WrongMode { expected: crate::phy::ModeLabel, actual: crate::phy::ModeLabel },
    #[error("Type 1 combination has no doze phase")]
    InvalidCombination,
    #[error("invalid DPS policy: {0}")]
    InvalidPolicy(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MultilinkError {
    #[error("wake-up bitmap references unknown link {0}")]
    UnknownLink(u8),
    #[error("wake-up frame received on link {received} but the active link is {active}")]
    ProtocolViolation { received: u8, active: u8 },
    #[error("wake-up radio is disabled")]
    WurDisabled,
    #[error("invalid MLD state: {0}")]
    InvalidState(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("sample window must be positive")]
    ZeroWindow,
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error("trace format error: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("load list is empty")]
    NoLoads,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("calibration failed: {0}")]
    CalibrationFailure(String),
    #[error("invalid campus policy: {0}")]
    InvalidPolicy(&'static str),
    #[error(transparent)]
    Phy(#[from] PhyError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("scenario validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Phy(#[from] PhyError),
}
