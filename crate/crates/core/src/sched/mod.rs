//! Scheduled Power Save: periodic AP state schedules, their dissemination
//! gating, and STA presence requests.

mod element;

use alloc::vec::Vec;

pub use element::{decode_schedule_element, encode_schedule_element, SCHEDULE_ELEMENT_ID};

use crate::error::ScheduleError;
use crate::phy::Bandwidth;
use crate::power::PowerState;

/// (bandwidth, spatial streams) advertised for an awake interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Capabilities {
    pub bandwidth: Bandwidth,
    pub nss: u8,
}

impl Capabilities {
    pub fn new(bandwidth: Bandwidth, nss: u8) -> Self {
        Self { bandwidth, nss }
    }

    fn product(&self) -> u32 {
        self.bandwidth.mhz() * u32::from(self.nss)
    }
}

/// A family of periodic windows mapped to one power state.
///
/// A `one_shot` group covers `[epoch + start_offset, epoch + start_offset + duration)`
/// exactly once; presence requests are granted with such groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntervalGroup {
    pub start_offset: u64,
    pub duration: u64,
    pub period: u64,
    pub target_state: PowerState,
    #[cfg_attr(feature = "serde", serde(default))]
    pub capabilities: Option<Capabilities>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub one_shot: bool,
}

impl IntervalGroup {
    pub fn periodic(start_offset: u64, duration: u64, period: u64, target_state: PowerState) -> Self {
        Self { start_offset, duration, period, target_state, capabilities: None, one_shot: false }
    }

    pub fn with_capabilities(mut self, caps: Capabilities) -> Self {
        self.capabilities = Some(caps);
        self
    }

    /// Whether the window family covers `rel` µs after the epoch.
    pub fn covers(&self, rel: u64) -> bool {
        if self.one_shot {
            return rel >= self.start_offset && rel - self.start_offset < self.duration;
        }
        if self.period == 0 {
            return false;
        }
        let phase = (i128::from(rel) - i128::from(self.start_offset)).rem_euclid(i128::from(self.period));
        phase < i128::from(self.duration)
    }

    /// Earliest window edge (start or end) strictly after `rel`, if any.
    fn next_edge_after(&self, rel: u64) -> Option<u64> {
        if self.one_shot {
            let start = self.start_offset;
            let end = start + self.duration;
            return [start, end].into_iter().find(|e| *e > rel);
        }
        if self.period == 0 {
            return None;
        }
        let p = i128::from(self.period);
        let phase = (i128::from(rel) - i128::from(self.start_offset)).rem_euclid(p);
        let base = i128::from(rel) - phase;
        let d = i128::from(self.duration);
        let candidates = [base + d, base + p];
        candidates.into_iter().filter(|c| *c > i128::from(rel)).min().map(|c| c as u64)
    }
}

/// The AP's announced state schedule. Immutable snapshot; changes produce a new version.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerSchedule {
    pub epoch: u64,
    pub groups: Vec<IntervalGroup>,
    #[cfg_attr(feature = "serde", serde(default = "default_state"))]
    pub default_state: PowerState,
    #[cfg_attr(feature = "serde", serde(default))]
    pub version: u16,
}

#[cfg(feature = "serde")]
fn default_state() -> PowerState {
    PowerState::FullCapabilities
}

impl PowerSchedule {
    /// An always-on schedule (no groups, FullCapabilities by default).
    pub fn always_on(epoch: u64) -> Self {
        Self { epoch, groups: Vec::new(), default_state: PowerState::FullCapabilities, version: 0 }
    }

    pub fn with_group(mut self, group: IntervalGroup) -> Self {
        self.groups.push(group);
        self
    }

    /// Least common multiple of the periodic groups' periods (1 if there are none),
    /// saturating at `u64::MAX`.
    pub fn hyperperiod(&self) -> u64 {
        self.groups
            .iter()
            .filter(|g| !g.one_shot && g.period > 0)
            .fold(1u64, |acc, g| lcm(acc, g.period))
    }

    /// Next instant strictly after `t` at which `state_at` may change.
    pub fn next_transition_after(&self, t: u64) -> Option<u64> {
        let rel = t.saturating_sub(self.epoch);
        if t < self.epoch {
            return Some(self.epoch);
        }
        self.groups.iter().filter_map(|g| g.next_edge_after(rel)).min().map(|r| r + self.epoch)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u64, b: u64) -> u64 {
    (a / gcd(a, b)).saturating_mul(b)
}

/// The AP's state at absolute time `t` (µs).
///
/// Where windows overlap, the most awake state wins; ties keep the larger
/// capability set, then list order.
pub fn state_at(schedule: &PowerSchedule, t: u64) -> Result<(PowerState, Option<Capabilities>), ScheduleError> {
    if t < schedule.epoch {
        return Err(ScheduleError::BeforeEpoch { t, epoch: schedule.epoch });
    }
    let rel = t - schedule.epoch;
    let mut best: Option<&IntervalGroup> = None;
    for g in schedule.groups.iter().filter(|g| g.covers(rel)) {
        let better = match best {
            None => true,
            Some(b) => {
                g.target_state > b.target_state
                    || (g.target_state == b.target_state
                        && g.capabilities.map_or(0, |c| c.product()) > b.capabilities.map_or(0, |c| c.product()))
            }
        };
        if better {
            best = Some(g);
        }
    }
    Ok(match best {
        Some(g) => (g.target_state, g.capabilities),
        None => (schedule.default_state, None),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// A Doze group while at least one legacy STA is associated.
    DozeWithLegacy { group: usize },
    /// Doze as the fallback state while a legacy STA is associated.
    DefaultDozeWithLegacy,
    DurationExceedsPeriod { group: usize },
    ZeroDuration { group: usize },
    /// Capabilities given for a non-awake state, or missing for an awake one.
    CapabilityMismatch { group: usize },
}

/// Lists every rule the schedule breaks; an empty list means the schedule is usable.
pub fn validate(schedule: &PowerSchedule, has_legacy_sta: bool) -> Result<(), Vec<Violation>> {
    let mut v = Vec::new();
    if has_legacy_sta && schedule.default_state == PowerState::Doze {
        v.push(Violation::DefaultDozeWithLegacy);
    }
    for (i, g) in schedule.groups.iter().enumerate() {
        if has_legacy_sta && g.target_state == PowerState::Doze {
            v.push(Violation::DozeWithLegacy { group: i });
        }
        if g.duration == 0 {
            v.push(Violation::ZeroDuration { group: i });
        }
        if !g.one_shot && g.duration > g.period {
            v.push(Violation::DurationExceedsPeriod { group: i });
        }
        if g.capabilities.is_some() != g.target_state.has_capabilities() {
            v.push(Violation::CapabilityMismatch { group: i });
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// How a STA learns schedule updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StaListenInfo {
    /// Beacon periods between wake-ups; 0 and 1 both mean "hears every Beacon".
    pub listen_interval: u32,
    /// Legacy STAs do not parse the schedule and are not waited for.
    pub legacy: bool,
    /// Time at which the AP answers a Schedule Request from this STA, if any.
    pub schedule_request_at: Option<u64>,
}

impl StaListenInfo {
    pub fn every_beacon() -> Self {
        Self { listen_interval: 1, legacy: false, schedule_request_at: None }
    }

    pub fn with_interval(listen_interval: u32) -> Self {
        Self { listen_interval, ..Self::every_beacon() }
    }
}

/// First Beacon instant strictly after `now` (Beacons fall on multiples of the interval).
pub fn next_beacon_after(now: u64, beacon_interval: u64) -> u64 {
    (now / beacon_interval + 1) * beacon_interval
}

/// When this STA is guaranteed to have had a chance to receive an element announced at `now`.
///
/// Without knowledge of the STA's wake phase, a STA waking every `n` Beacons
/// is certain to hear one of the next `n` Beacons.
pub fn informed_at(sta: &StaListenInfo, now: u64, beacon_interval: u64) -> Option<u64> {
    if sta.legacy {
        return None;
    }
    let n = u64::from(sta.listen_interval.max(1));
    let via_beacon = next_beacon_after(now, beacon_interval) + (n - 1) * beacon_interval;
    Some(match sta.schedule_request_at {
        Some(t) if t >= now => via_beacon.min(t),
        _ => via_beacon,
    })
}

/// Earliest time the AP may switch from `current` to `new`.
pub fn propose_change(
    current: &PowerSchedule,
    new: &PowerSchedule,
    stas: &[StaListenInfo],
    now: u64,
    beacon_interval: u64,
) -> Result<u64, ScheduleError> {
    if Some(new.version) != current.version.checked_add(1) {
        return Err(ScheduleError::StaleSchedule { current: current.version, new: new.version });
    }
    let first_beacon = next_beacon_after(now, beacon_interval);
    Ok(stas
        .iter()
        .filter_map(|s| informed_at(s, now, beacon_interval))
        .max()
        .map_or(first_beacon, |t| t.max(now)))
}

/// Holds the active schedule and, while a change is being disseminated, its successor.
///
/// Single writer; readers query by time and never see the successor before its activation.
#[derive(Debug, Clone)]
pub struct ScheduleManager {
    current: PowerSchedule,
    pending: Option<(PowerSchedule, u64)>,
}

impl ScheduleManager {
    pub fn new(current: PowerSchedule) -> Self {
        Self { current, pending: None }
    }

    pub fn current(&self) -> &PowerSchedule {
        &self.current
    }

    pub fn pending(&self) -> Option<(&PowerSchedule, u64)> {
        self.pending.as_ref().map(|(s, t)| (s, *t))
    }

    /// Latest announced schedule (pending if any).
    pub fn latest(&self) -> &PowerSchedule {
        self.pending.as_ref().map_or(&self.current, |(s, _)| s)
    }

    /// Announces `new`, returning its activation time. A newer proposal replaces a pending one
    /// but never activates earlier than it.
    pub fn propose(
        &mut self,
        new: PowerSchedule,
        stas: &[StaListenInfo],
        now: u64,
        beacon_interval: u64,
    ) -> Result<u64, ScheduleError> {
        self.commit(now);
        let mut activation = propose_change(self.latest(), &new, stas, now, beacon_interval)?;
        if let Some((_, previous)) = &self.pending {
            activation = activation.max(*previous);
        }
        self.pending = Some((new, activation));
        Ok(activation)
    }

    /// The schedule in force at `t`.
    pub fn schedule_at(&self, t: u64) -> &PowerSchedule {
        match &self.pending {
            Some((s, at)) if t >= *at => s,
            _ => &self.current,
        }
    }

    /// Swaps in the pending schedule once `now` reaches its activation time.
    pub fn commit(&mut self, now: u64) -> bool {
        match self.pending.take() {
            Some((s, at)) if now >= at => {
                self.current = s;
                true
            }
            other => {
                self.pending = other;
                false
            }
        }
    }

    pub fn state_at(&self, t: u64) -> Result<(PowerState, Option<Capabilities>), ScheduleError> {
        state_at(self.schedule_at(t), t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PresenceReason {
    QoS,
    Generic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresenceRequest {
    pub sta_id: u16,
    pub requested_time: u64,
    pub requested_duration: u64,
    pub reason: PresenceReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PresenceAcceptance {
    All,
    QosOnly,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PresencePolicy {
    pub acceptance: PresenceAcceptance,
    /// State granted for the requested window.
    pub window_state: PowerState,
    pub window_capabilities: Option<Capabilities>,
}

impl PresencePolicy {
    pub fn permissive(caps: Capabilities) -> Self {
        Self {
            acceptance: PresenceAcceptance::All,
            window_state: PowerState::FullCapabilities,
            window_capabilities: Some(caps),
        }
    }

    pub fn restrictive() -> Self {
        Self { acceptance: PresenceAcceptance::None, window_state: PowerState::FullCapabilities, window_capabilities: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PresenceOutcome {
    Accept(PowerSchedule),
    Decline,
}

/// Whether every instant of `[from, from + len)` is in a state at least as awake as `floor`.
pub fn window_at_least(schedule: &PowerSchedule, from: u64, len: u64, floor: PowerState) -> Result<bool, ScheduleError> {
    let end = from + len;
    let mut t = from;
    while t < end {
        if state_at(schedule, t)?.0 < floor {
            return Ok(false);
        }
        match schedule.next_transition_after(t) {
            Some(next) => t = next,
            None => break,
        }
    }
    Ok(true)
}

pub fn handle_presence_request(
    schedule: &PowerSchedule,
    req: &PresenceRequest,
    policy: &PresencePolicy,
    now: u64,
) -> Result<PresenceOutcome, ScheduleError> {
    if req.requested_duration == 0 {
        return Err(ScheduleError::InvalidRequest);
    }
    if req.requested_time < now {
        return Err(ScheduleError::StaleRequest { requested: req.requested_time, now });
    }
    if req.requested_time < schedule.epoch {
        return Err(ScheduleError::BeforeEpoch { t: req.requested_time, epoch: schedule.epoch });
    }
    let accept = match policy.acceptance {
        PresenceAcceptance::All => true,
        PresenceAcceptance::QosOnly => req.reason == PresenceReason::QoS,
        PresenceAcceptance::None => false,
    };
    if !accept {
        return Ok(PresenceOutcome::Decline);
    }
    let mut next = schedule.clone();
    next.version = schedule.version.wrapping_add(1);
    let already = window_at_least(schedule, req.requested_time, req.requested_duration, policy.window_state)?;
    if !already {
        next.groups.push(IntervalGroup {
            start_offset: req.requested_time - schedule.epoch,
            duration: req.requested_duration,
            period: req.requested_duration,
            target_state: policy.window_state,
            capabilities: policy.window_capabilities,
            one_shot: true,
        });
    }
    Ok(PresenceOutcome::Accept(next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn full_caps() -> Capabilities {
        Capabilities::new(Bandwidth::Mhz80, 2)
    }

    fn doze_schedule() -> PowerSchedule {
        // 100 ms period: first 40 ms doze.
        PowerSchedule::always_on(1_000).with_group(IntervalGroup::periodic(0, 40_000, 100_000, PowerState::Doze))
    }

    #[test]
    fn containment_and_fallback() {
        let s = doze_schedule();
        assert_eq!(state_at(&s, 1_000 + 10).unwrap().0, PowerState::Doze);
        assert_eq!(state_at(&s, 1_000 + 40_000).unwrap(), (PowerState::FullCapabilities, None));
        assert_eq!(state_at(&s, 1_000 + 100_000 + 39_999).unwrap().0, PowerState::Doze);
        assert_eq!(state_at(&s, 999), Err(ScheduleError::BeforeEpoch { t: 999, epoch: 1_000 }));
    }

    #[test]
    fn awake_state_dominates_overlap_by_enumeration() {
        let s = PowerSchedule { default_state: PowerState::Listen, ..PowerSchedule::always_on(0) }
            .with_group(IntervalGroup::periodic(0, 30, 50, PowerState::Doze))
            .with_group(IntervalGroup::periodic(20, 25, 75, PowerState::FullCapabilities).with_capabilities(full_caps()));
        let hyper = s.hyperperiod();
        assert_eq!(hyper, 150);
        // Brute force: list windows explicitly over one hyperperiod.
        let mut doze = vec![false; hyper as usize];
        let mut full = vec![false; hyper as usize];
        for k in 0..3u64 {
            for t in k * 50..k * 50 + 30 {
                doze[t as usize] = true;
            }
        }
        for k in 0..2u64 {
            for t in 20 + k * 75..20 + k * 75 + 25 {
                full[(t % hyper) as usize] = true;
            }
        }
        for t in 0..hyper {
            let expected = if full[t as usize] {
                PowerState::FullCapabilities
            } else if doze[t as usize] {
                PowerState::Doze
            } else {
                PowerState::Listen
            };
            assert_eq!(state_at(&s, t).unwrap().0, expected, "t = {t}");
        }
    }

    #[test]
    fn validate_legacy_and_shape() {
        let s = doze_schedule();
        assert_eq!(validate(&s, true), Err(vec![Violation::DozeWithLegacy { group: 0 }]));
        assert_eq!(validate(&s, false), Ok(()));
        let bad = PowerSchedule::always_on(0).with_group(IntervalGroup::periodic(0, 200, 100, PowerState::Listen));
        assert_eq!(validate(&bad, false), Err(vec![Violation::DurationExceedsPeriod { group: 0 }]));
        let mismatch = PowerSchedule::always_on(0).with_group(IntervalGroup::periodic(0, 10, 100, PowerState::ReducedCapabilities));
        assert_eq!(validate(&mismatch, false), Err(vec![Violation::CapabilityMismatch { group: 0 }]));
    }

    #[test]
    fn activation_waits_for_slowest_listener() {
        let cur = doze_schedule();
        let mut new = cur.clone();
        new.version = 1;
        let bi = 102_400;
        assert_eq!(propose_change(&cur, &new, &[StaListenInfo::every_beacon(); 3], 0, bi).unwrap(), bi);
        let stas = [StaListenInfo::every_beacon(), StaListenInfo::with_interval(3)];
        let at = propose_change(&cur, &new, &stas, 0, bi).unwrap();
        assert!(at >= 3 * bi);
        // Legacy STAs are not waited for.
        let legacy = StaListenInfo { legacy: true, ..StaListenInfo::with_interval(10) };
        assert_eq!(propose_change(&cur, &new, &[legacy], 5, bi).unwrap(), bi);
        // A Schedule Request answered early informs the STA at the response time.
        let asked = StaListenInfo { schedule_request_at: Some(2_000), ..StaListenInfo::with_interval(10) };
        assert_eq!(propose_change(&cur, &new, &[asked], 5, bi).unwrap(), 2_000);
    }

    #[test]
    fn version_regression_is_rejected() {
        let mut cur = doze_schedule();
        cur.version = 4;
        let mut new = cur.clone();
        new.version = 4;
        assert_eq!(
            propose_change(&cur, &new, &[], 0, 100),
            Err(ScheduleError::StaleSchedule { current: 4, new: 4 })
        );
    }

    #[test]
    fn manager_gates_new_version() {
        let mut m = ScheduleManager::new(doze_schedule());
        let mut new = PowerSchedule::always_on(1_000);
        new.version = 1;
        let at = m.propose(new, &[StaListenInfo::with_interval(2)], 50_000, 102_400).unwrap();
        assert_eq!(at, 2 * 102_400);
        assert_eq!(m.schedule_at(at - 1).version, 0);
        assert_eq!(m.schedule_at(at).version, 1);
        assert!(!m.commit(at - 1));
        assert!(m.commit(at));
        assert_eq!(m.current().version, 1);
    }

    #[test]
    fn presence_request_outcomes() {
        let s = doze_schedule();
        let policy = PresencePolicy::permissive(full_caps());
        // Inside an awake window: version bump only.
        let req = PresenceRequest { sta_id: 1, requested_time: 1_000 + 50_000, requested_duration: 10_000, reason: PresenceReason::QoS };
        let PresenceOutcome::Accept(out) = handle_presence_request(&s, &req, &policy, 0).unwrap() else { panic!() };
        assert_eq!(out.groups, s.groups);
        assert_eq!(out.version, 1);
        // Inside a doze window: the window becomes awake.
        let req = PresenceRequest { requested_time: 1_000 + 110_000, requested_duration: 20_000, ..req };
        let PresenceOutcome::Accept(out) = handle_presence_request(&s, &req, &policy, 0).unwrap() else { panic!() };
        for t in req.requested_time..req.requested_time + req.requested_duration {
            assert_ne!(state_at(&out, t).unwrap().0, PowerState::Doze);
        }
        // The grant is one-shot: the next period dozes again.
        assert_eq!(state_at(&out, req.requested_time + 100_000).unwrap().0, PowerState::Doze);
        assert_eq!(handle_presence_request(&s, &req, &PresencePolicy::restrictive(), 0).unwrap(), PresenceOutcome::Decline);
        assert!(matches!(handle_presence_request(&s, &req, &policy, req.requested_time + 1), Err(ScheduleError::StaleRequest { .. })));
    }

    #[test]
    fn next_transition_walks_edges() {
        let s = doze_schedule();
        assert_eq!(s.next_transition_after(1_000), Some(41_000));
        assert_eq!(s.next_transition_after(41_000), Some(101_000));
        assert_eq!(PowerSchedule::always_on(0).next_transition_after(5), None);
    }
}
