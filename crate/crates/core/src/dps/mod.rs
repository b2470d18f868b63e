//! Dynamic and Semi-Dynamic Power Save.
//!
//! The AP idles in LCM and moves to HCM when a STA asks for it with an ICF.
//! Under SDPS the AP may defer the request; deferred STAs are served with a
//! Trigger Frame the next time the AP is in HCM. Mode changes take effect
//! after the manufacturer-specific transition delay.

mod frames;

use alloc::collections::VecDeque;
use alloc::vec::Vec;

pub use frames::{
    decode_icf, decode_icr, decode_tf, encode_icf, encode_icr, encode_tf, DecodedIcf, IcfFrame, IcrFrame,
    TriggerFrame, ICF_BODY_LEN, ICF_TYPE, ICR_LEN, ICR_TYPE, TF_LEN, TF_TYPE,
};

use crate::error::{DpsError, PhyError};
use crate::phy::{Bandwidth, GuardInterval, ModeLabel, PhyConfig};

/// Requested or granted (bandwidth, NSS, MCS) configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CapabilityTuple {
    pub bandwidth: Bandwidth,
    pub nss: u8,
    pub mcs: u8,
}

impl CapabilityTuple {
    pub fn of(cfg: &PhyConfig) -> Self {
        Self { bandwidth: cfg.bandwidth, nss: cfg.nss, mcs: cfg.mcs_index }
    }

    /// Componentwise minimum.
    pub fn capped_to(&self, max: &CapabilityTuple) -> Self {
        Self { bandwidth: self.bandwidth.min(max.bandwidth), nss: self.nss.min(max.nss), mcs: self.mcs.min(max.mcs) }
    }

    pub fn fits_within(&self, max: &CapabilityTuple) -> bool {
        self.bandwidth <= max.bandwidth && self.nss <= max.nss && self.mcs <= max.mcs
    }

    pub fn to_phy(&self, gi: GuardInterval) -> Result<PhyConfig, PhyError> {
        let cfg = PhyConfig::new(self.mcs, self.bandwidth, self.nss, gi);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How long HCM lasts once granted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum HcmGrant {
    /// HCM for this many µs after it takes effect.
    ExplicitDuration(u32),
    /// HCM until this many µs pass without a frame exchange.
    InactivityTimeout(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PolicyKind {
    /// Pure DPS: every ICF switches the AP.
    AlwaysAccept,
    /// SDPS: non-LL requests wait until a batch forms or the oldest one ages out.
    Defer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DpsPolicy {
    pub kind: PolicyKind,
    pub defer_batch_min: usize,
    /// µs.
    pub max_defer: u64,
}

impl DpsPolicy {
    pub fn always_accept() -> Self {
        Self { kind: PolicyKind::AlwaysAccept, defer_batch_min: 3, max_defer: 50_000 }
    }

    pub fn defer() -> Self {
        Self { kind: PolicyKind::Defer, defer_batch_min: 3, max_defer: 50_000 }
    }

    pub fn validate(&self) -> Result<(), DpsError> {
        if self.defer_batch_min == 0 {
            return Err(DpsError::InvalidPolicy("defer_batch_min must be at least 1"));
        }
        if self.kind == PolicyKind::Defer && self.max_defer == 0 {
            return Err(DpsError::InvalidPolicy("max_defer must be positive when deferring"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PendingRequest {
    pub sta_id: u16,
    pub requested: CapabilityTuple,
    pub since: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeChange {
    pub to: ModeLabel,
    pub at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IcfDecision {
    SwitchNow(IcrFrame),
    Deferred,
    AlreadyHcm(IcrFrame),
}

/// Per-AP LCM/HCM state. Owned by one AP entity; all times in µs.
#[derive(Debug, Clone)]
pub struct ApModeState {
    pub ap_id: u16,
    pub mode: ModeLabel,
    /// A scheduled change that has not taken effect yet.
    pub transition: Option<ModeChange>,
    pub hcm_expiry: Option<u64>,
    pub inactivity_timeout: Option<u64>,
    pub last_exchange: u64,
    pub pending: VecDeque<PendingRequest>,
    pub transition_delay_up: u64,
    pub transition_delay_down: u64,
    /// Highest capabilities the AP supports (HCM).
    pub max_caps: CapabilityTuple,
}

impl ApModeState {
    pub fn new(ap_id: u16, max_caps: CapabilityTuple, transition_delay_up: u64, transition_delay_down: u64) -> Self {
        Self {
            ap_id,
            mode: ModeLabel::Lcm,
            transition: None,
            hcm_expiry: None,
            inactivity_timeout: None,
            last_exchange: 0,
            pending: VecDeque::new(),
            transition_delay_up,
            transition_delay_down,
            max_caps,
        }
    }

    /// Applies a scheduled transition whose time has come.
    pub fn advance(&mut self, now: u64) -> Option<ModeChange> {
        match self.transition {
            Some(change) if now >= change.at => {
                self.mode = change.to;
                self.transition = None;
                Some(change)
            }
            _ => None,
        }
    }

    /// Mode the AP is in or is already switching to.
    pub fn heading(&self) -> ModeLabel {
        self.transition.map_or(self.mode, |c| c.to)
    }

    /// Notes a frame exchange for the inactivity timer.
    pub fn record_exchange(&mut self, now: u64) {
        self.last_exchange = self.last_exchange.max(now);
    }

    fn apply_grant(&mut self, grant: HcmGrant, effective_at: u64) {
        match grant {
            HcmGrant::ExplicitDuration(d) => {
                let end = effective_at + u64::from(d);
                self.hcm_expiry = Some(self.hcm_expiry.map_or(end, |old| old.max(end)));
            }
            HcmGrant::InactivityTimeout(t) => {
                let t = u64::from(t);
                self.inactivity_timeout = Some(self.inactivity_timeout.map_or(t, |old| old.max(t)));
            }
        }
    }

    /// Schedules the switch to HCM; returns when it takes effect.
    pub fn enter_hcm(&mut self, now: u64, grant: HcmGrant) -> u64 {
        self.advance(now);
        let at = match (self.mode, self.transition) {
            (_, Some(ModeChange { to: ModeLabel::Hcm, at })) => at,
            (ModeLabel::Hcm, None) => now,
            (_, Some(ModeChange { at, .. })) => at + self.transition_delay_up,
            (ModeLabel::Lcm, None) => now + self.transition_delay_up,
        };
        if self.heading() == ModeLabel::Lcm {
            self.hcm_expiry = None;
            self.inactivity_timeout = None;
            self.transition = Some(ModeChange { to: ModeLabel::Hcm, at });
        }
        self.apply_grant(grant, at);
        self.last_exchange = self.last_exchange.max(at);
        at
    }

    /// True when SDPS should stop deferring and serve the queue.
    pub fn deferral_due(&self, policy: &DpsPolicy, now: u64) -> bool {
        if self.heading() == ModeLabel::Hcm {
            return false;
        }
        match self.pending.front() {
            None => false,
            Some(oldest) => self.pending.len() >= policy.defer_batch_min || now - oldest.since.min(now) >= policy.max_defer,
        }
    }
}

/// Reaction to a validated ICF.
pub fn on_icf(state: &mut ApModeState, icf: &IcfFrame, policy: &DpsPolicy, now: u64) -> IcfDecision {
    state.advance(now);
    let granted = icf.requested.capped_to(&state.max_caps);
    if state.heading() == ModeLabel::Hcm {
        let at = state.enter_hcm(now, icf.grant);
        state.record_exchange(now);
        return IcfDecision::AlreadyHcm(IcrFrame { ap_id: state.ap_id, granted, effective_at: at.max(now) });
    }
    if icf.ll_flag || policy.kind == PolicyKind::AlwaysAccept {
        let at = state.enter_hcm(now, icf.grant);
        return IcfDecision::SwitchNow(IcrFrame { ap_id: state.ap_id, granted, effective_at: at });
    }
    state.pending.push_back(PendingRequest { sta_id: icf.sta_id, requested: icf.requested, since: now });
    IcfDecision::Deferred
}

/// Decodes an ICF and reacts to it. Frames with a bad intermediate FCS change nothing.
pub fn on_icf_bytes(state: &mut ApModeState, bytes: &[u8], policy: &DpsPolicy, now: u64) -> Result<IcfDecision, DpsError> {
    let decoded = decode_icf(bytes).map_err(DpsError::FrameDiscarded)?;
    Ok(on_icf(state, &decoded.frame, policy, now))
}

/// One Trigger Frame per distinct pending STA, first-come order. Empties the queue.
pub fn drain_pending(state: &mut ApModeState, now: u64) -> Result<Vec<TriggerFrame>, DpsError> {
    state.advance(now);
    if state.mode != ModeLabel::Hcm {
        return Err(DpsError::WrongMode { expected: ModeLabel::Hcm, actual: state.mode });
    }
    let mut out: Vec<TriggerFrame> = Vec::with_capacity(state.pending.len());
    for req in state.pending.drain(..) {
        if !out.iter().any(|tf| tf.sta_id == req.sta_id) {
            out.push(TriggerFrame { ap_id: state.ap_id, sta_id: req.sta_id, granted: req.requested.capped_to(&state.max_caps) });
        }
    }
    Ok(out)
}

/// Checks the HCM grant; schedules the return to LCM when it has run out.
pub fn tick(state: &mut ApModeState, now: u64) -> Option<ModeChange> {
    state.advance(now);
    if state.mode != ModeLabel::Hcm || state.transition.is_some() {
        return None;
    }
    let expired = state.hcm_expiry.is_some_and(|e| now >= e);
    let idle = state.inactivity_timeout.is_some_and(|t| now.saturating_sub(state.last_exchange) >= t);
    if !(expired || idle) {
        return None;
    }
    state.hcm_expiry = None;
    state.inactivity_timeout = None;
    let change = ModeChange { to: ModeLabel::Lcm, at: now + state.transition_delay_down };
    state.transition = Some(change);
    Some(change)
}

/// When `tick` would next act, if a grant is running.
pub fn next_grant_check(state: &ApModeState) -> Option<u64> {
    if state.heading() != ModeLabel::Hcm {
        return None;
    }
    let a = state.hcm_expiry;
    let b = state.inactivity_timeout.map(|t| state.last_exchange + t);
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

/// Smallest ICF padding (bytes) whose transmission at `cfg` lasts at least `transition_delay_us`.
///
/// Padding time is counted at the bit rate, without rounding to symbol
/// boundaries, so it never relies on the final partial symbol.
pub fn required_padding(transition_delay_us: u64, cfg: &PhyConfig) -> Result<usize, PhyError> {
    let bits_per_symbol = u128::from(cfg.bits_per_symbol()?);
    let symbol_ns = u128::from(cfg.guard_interval.symbol_ns());
    let needed_bits_x_symbol = u128::from(transition_delay_us) * 1_000 * bits_per_symbol;
    let pad = needed_bits_x_symbol.div_ceil(8 * symbol_ns);
    Ok(pad as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SchedulePhase {
    ServicePeriod,
    PsPeriod,
    Doze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SdpsType {
    /// Uninterrupted service: full capabilities in SPs, SDPS in PS periods.
    Type1,
    /// Energy efficiency: SDPS in SPs, doze otherwise.
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinedBehavior {
    FullCapabilities,
    SdpsActive,
    Doze,
}

/// Behavior of an AP combining SDPS with Scheduled PS.
pub fn combined_mode(phase: SchedulePhase, sdps_type: SdpsType) -> Result<CombinedBehavior, DpsError> {
    use CombinedBehavior::*;
    match (sdps_type, phase) {
        (SdpsType::Type1, SchedulePhase::ServicePeriod) => Ok(FullCapabilities),
        (SdpsType::Type1, SchedulePhase::PsPeriod) => Ok(SdpsActive),
        (SdpsType::Type1, SchedulePhase::Doze) => Err(DpsError::InvalidCombination),
        (SdpsType::Type2, SchedulePhase::ServicePeriod) => Ok(SdpsActive),
        (SdpsType::Type2, _) => Ok(Doze),
    }
}
