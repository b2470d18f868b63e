//! Scenario description: who is in the BSS, what they send, and how the AP saves power.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::dps::{combined_mode, CombinedBehavior, DpsPolicy, HcmGrant, SchedulePhase, SdpsType};
use crate::phy::{ModeLabel, ModePair, PhyConfig};
use crate::power::PowerState;
use crate::sched::{self, PowerSchedule};
use crate::trace::{Direction, FlowSpec};

/// Entity id of the AP.
pub const AP_ID: u16 = 0;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Mechanism {
    /// No power save; the AP stays in one mode.
    AlwaysOn { mode: ModeLabel },
    /// Scheduled PS: ReducedCapabilities runs the LCM, FullCapabilities the HCM.
    Scheduled { schedule: PowerSchedule },
    /// Dynamic PS driven by STA-initiated ICF/ICR exchanges.
    Dynamic {
        policy: DpsPolicy,
        grant: HcmGrant,
        #[cfg_attr(feature = "serde", serde(default = "default_delay"))]
        delay_up_us: u64,
        #[cfg_attr(feature = "serde", serde(default = "default_delay"))]
        delay_down_us: u64,
    },
    /// Semi-dynamic PS inside a Scheduled PS schedule.
    Combined {
        schedule: PowerSchedule,
        sdps_type: SdpsType,
        policy: DpsPolicy,
        grant: HcmGrant,
        #[cfg_attr(feature = "serde", serde(default = "default_delay"))]
        delay_up_us: u64,
        #[cfg_attr(feature = "serde", serde(default = "default_delay"))]
        delay_down_us: u64,
    },
}

#[cfg(feature = "serde")]
fn default_delay() -> u64 {
    100
}

#[cfg(feature = "serde")]
fn default_listen_interval() -> u32 {
    1
}

impl Mechanism {
    pub fn schedule(&self) -> Option<&PowerSchedule> {
        match self {
            Self::Scheduled { schedule } | Self::Combined { schedule, .. } => Some(schedule),
            _ => None,
        }
    }

    pub fn uses_dps(&self) -> bool {
        matches!(self, Self::Dynamic { .. } | Self::Combined { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StaSpec {
    pub id: u16,
    #[cfg_attr(feature = "serde", serde(default))]
    pub legacy: bool,
    #[cfg_attr(feature = "serde", serde(default = "default_listen_interval"))]
    pub listen_interval: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub dps_capable: bool,
}

impl StaSpec {
    pub fn new(id: u16) -> Self {
        Self { id, legacy: false, listen_interval: 1, dps_capable: false }
    }
}

/// A device of a neighbouring BSS sharing the channel.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObssSpec {
    pub id: u16,
    pub phy: PhyConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub flows: Vec<FlowSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowBinding {
    pub sta: u16,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub flow: FlowSpec,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleUpdate {
    pub at_us: u64,
    pub schedule: PowerSchedule,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioSpec {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(default))]
    pub modes: ModePair,
    pub mechanism: Mechanism,
    #[cfg_attr(feature = "serde", serde(default))]
    pub stas: Vec<StaSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub obss: Vec<ObssSpec>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub flows: Vec<FlowBinding>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub schedule_update: Option<ScheduleUpdate>,
}

impl ScenarioSpec {
    pub fn new(name: impl Into<String>, mechanism: Mechanism) -> Self {
        Self {
            name: name.into(),
            modes: ModePair::default(),
            mechanism,
            stas: Vec::new(),
            obss: Vec::new(),
            flows: Vec::new(),
            schedule_update: None,
        }
    }

    pub fn with_sta(mut self, sta: StaSpec) -> Self {
        self.stas.push(sta);
        self
    }

    pub fn with_flow(mut self, sta: u16, flow: FlowSpec) -> Self {
        self.flows.push(FlowBinding { sta, flow });
        self
    }

    pub fn has_legacy(&self) -> bool {
        self.stas.iter().any(|s| s.legacy)
    }

    /// AP power state the mechanism's schedule dictates at `t_us`. Under
    /// SDPS the awake phases report ReducedCapabilities; DPS picks the mode.
    pub(crate) fn static_state(&self, schedule: &PowerSchedule, t_us: u64) -> PowerState {
        let s = sched::state_at(schedule, t_us).map_or(schedule.default_state, |(s, _)| s);
        let Mechanism::Combined { sdps_type, .. } = &self.mechanism else {
            return s;
        };
        let phase = match s {
            PowerState::FullCapabilities => SchedulePhase::ServicePeriod,
            PowerState::Doze => SchedulePhase::Doze,
            _ => SchedulePhase::PsPeriod,
        };
        match combined_mode(phase, *sdps_type) {
            Ok(CombinedBehavior::FullCapabilities) => PowerState::FullCapabilities,
            Ok(CombinedBehavior::SdpsActive) => PowerState::ReducedCapabilities,
            Ok(CombinedBehavior::Doze) | Err(_) => PowerState::Doze,
        }
    }
}

/// Checks everything that can be checked before the run; returns every problem found.
pub(crate) fn validate(spec: &ScenarioSpec, duration_us: u64, beacon_interval_us: u64, beacon_airtime_us: u64) -> Vec<String> {
    let mut errs = Vec::new();
    if let Err(e) = spec.modes.validate() {
        errs.push(format!("modes: {e}"));
    }
    let mut ids: Vec<u16> = Vec::new();
    for id in spec.stas.iter().map(|s| s.id).chain(spec.obss.iter().map(|o| o.id)) {
        if id == AP_ID {
            errs.push(format!("entity id {AP_ID} is reserved for the AP"));
        } else if ids.contains(&id) {
            errs.push(format!("duplicate entity id {id}"));
        }
        ids.push(id);
    }
    for (i, b) in spec.flows.iter().enumerate() {
        if !spec.stas.iter().any(|s| s.id == b.sta) {
            errs.push(format!("flow {i} references unknown STA {}", b.sta));
        }
        if let Err(e) = b.flow.validate() {
            errs.push(format!("flow {i}: {e}"));
        }
    }
    for o in &spec.obss {
        if let Err(e) = o.phy.validate() {
            errs.push(format!("OBSS device {}: {e}", o.id));
        }
        for (i, f) in o.flows.iter().enumerate() {
            if let Err(e) = f.validate() {
                errs.push(format!("OBSS device {} flow {i}: {e}", o.id));
            }
            if f.direction == Direction::Dl {
                errs.push(format!("OBSS device {} flow {i}: OBSS flows are sent by the device (use UL)", o.id));
            }
        }
    }
    match &spec.mechanism {
        Mechanism::Dynamic { policy, .. } => {
            if let Err(e) = policy.validate() {
                errs.push(format!("DPS policy: {e}"));
            }
        }
        Mechanism::Combined { policy, sdps_type, schedule, .. } => {
            if let Err(e) = policy.validate() {
                errs.push(format!("DPS policy: {e}"));
            }
            let has_doze = schedule.default_state == PowerState::Doze
                || schedule.groups.iter().any(|g| g.target_state == PowerState::Doze);
            if *sdps_type == SdpsType::Type1 && has_doze {
                errs.push(String::from("SDPS type 1 cannot be combined with Doze periods"));
            }
            if *sdps_type == SdpsType::Type2 && spec.has_legacy() {
                errs.push(String::from("SDPS type 2 dozes outside service periods, which legacy STAs cannot follow"));
            }
        }
        _ => {}
    }
    let mut schedules: Vec<&PowerSchedule> = spec.mechanism.schedule().into_iter().collect();
    if let Some(u) = &spec.schedule_update {
        match spec.mechanism.schedule() {
            None => errs.push(String::from("schedule update given for a mechanism without a schedule")),
            Some(cur) if Some(u.schedule.version) != cur.version.checked_add(1) => errs.push(format!(
                "schedule update version {} does not follow current version {}",
                u.schedule.version, cur.version
            )),
            Some(_) => {}
        }
        schedules.push(&u.schedule);
    }
    for s in schedules {
        if let Err(v) = sched::validate(s, spec.has_legacy()) {
            for x in v {
                errs.push(format!("schedule v{}: {x:?}", s.version));
            }
        }
        if s.epoch != 0 {
            errs.push(format!("schedule v{}: epoch must be 0 (the start of the run)", s.version));
        }
        if let Some(t) = first_beacon_conflict(spec, s, duration_us, beacon_interval_us, beacon_airtime_us) {
            errs.push(format!("schedule v{}: AP cannot transmit the Beacon due at {t} us", s.version));
        }
    }
    errs
}

/// First Beacon instant at which the schedule leaves the AP unable to initiate.
fn first_beacon_conflict(spec: &ScenarioSpec, s: &PowerSchedule, duration_us: u64, bi: u64, airtime: u64) -> Option<u64> {
    let mut tbtt = bi;
    while tbtt < duration_us {
        let mut t = tbtt;
        loop {
            if !spec.static_state(s, t).can_initiate() {
                return Some(tbtt);
            }
            match s.next_transition_after(t) {
                Some(n) if n < tbtt + airtime => t = n,
                _ => break,
            }
        }
        tbtt += bi;
    }
    None
}
