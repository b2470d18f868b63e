//! Cross-Link Power Save for multi-link APs, and the wake-up radio companion.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{FrameError, MultilinkError};
use crate::fcs::{append_fcs, strip_fcs};
use crate::power::{PowerProfile, PowerState};
use crate::sched::Capabilities;

pub const WAKEUP_TYPE: u8 = 0x04;
pub const WAKEUP_LEN: usize = 1 + 2 + 4;
pub const MAX_LINK_ID: u8 = 15;
/// Default idle time after which a link woken by a cross-link request dozes again (µs).
pub const DEFAULT_LINK_DOZE_BACK: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub link_id: u8,
    pub state: PowerState,
    pub capabilities: Option<Capabilities>,
    /// Doze-to-awake latency in µs.
    pub wake_latency: u64,
    /// State the link returns to when woken.
    pub awake_state: PowerState,
    /// Time of the link's last frame exchange, for doze-back.
    pub last_activity: u64,
}

impl Link {
    pub fn new(link_id: u8, state: PowerState, wake_latency: u64) -> Self {
        Self {
            link_id,
            state,
            capabilities: None,
            wake_latency,
            awake_state: PowerState::FullCapabilities,
            last_activity: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MldState {
    links: Vec<Link>,
    active_link: u8,
    /// Pending wake-ups: (link_id, awake_at).
    waking: Vec<(u8, u64)>,
    pub doze_back_after: u64,
}

impl MldState {
    pub fn new(links: Vec<Link>, active_link: u8) -> Result<Self, MultilinkError> {
        for (i, l) in links.iter().enumerate() {
            if l.link_id > MAX_LINK_ID {
                return Err(MultilinkError::UnknownLink(l.link_id));
            }
            if links[..i].iter().any(|o| o.link_id == l.link_id) {
                return Err(MultilinkError::InvalidState("duplicate link id"));
            }
        }
        let active = links
            .iter()
            .find(|l| l.link_id == active_link)
            .ok_or(MultilinkError::UnknownLink(active_link))?;
        if active.state == PowerState::Doze {
            return Err(MultilinkError::InvalidState("active link cannot doze"));
        }
        Ok(Self { links, active_link, waking: Vec::new(), doze_back_after: DEFAULT_LINK_DOZE_BACK })
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn active_link(&self) -> u8 {
        self.active_link
    }

    pub fn link(&self, id: u8) -> Option<&Link> {
        self.links.iter().find(|l| l.link_id == id)
    }

    fn link_mut(&mut self, id: u8) -> Option<&mut Link> {
        self.links.iter_mut().find(|l| l.link_id == id)
    }

    /// Completes wake-ups that are due by `now`.
    pub fn advance(&mut self, now: u64) {
        let due: Vec<(u8, u64)> = self.waking.iter().copied().filter(|(_, at)| *at <= now).collect();
        self.waking.retain(|(_, at)| *at > now);
        for (id, at) in due {
            if let Some(l) = self.link_mut(id) {
                l.state = l.awake_state;
                l.last_activity = l.last_activity.max(at);
            }
        }
    }

    pub fn record_activity(&mut self, link_id: u8, now: u64) {
        if let Some(l) = self.link_mut(link_id) {
            l.last_activity = l.last_activity.max(now);
        }
    }

    /// Puts an idle non-active link to sleep. The active link never dozes.
    pub fn doze_link(&mut self, link_id: u8) -> Result<(), MultilinkError> {
        if link_id == self.active_link {
            return Err(MultilinkError::InvalidState("active link cannot doze"));
        }
        let link = self.link_mut(link_id).ok_or(MultilinkError::UnknownLink(link_id))?;
        link.state = PowerState::Doze;
        self.waking.retain(|(id, _)| *id != link_id);
        Ok(())
    }

    /// Dozes every non-active awake link idle for at least `doze_back_after`; returns their ids.
    pub fn doze_idle_links(&mut self, now: u64) -> Vec<u8> {
        self.advance(now);
        let active = self.active_link;
        let limit = self.doze_back_after;
        let mut dozed = Vec::new();
        for l in self.links.iter_mut() {
            if l.link_id != active
                && l.state != PowerState::Doze
                && !self.waking.iter().any(|(id, _)| *id == l.link_id)
                && now.saturating_sub(l.last_activity) >= limit
            {
                l.state = PowerState::Doze;
                dozed.push(l.link_id);
            }
        }
        dozed
    }

    /// Energy over `seconds` with every link held in its current state at `activity`-independent
    /// baseline power: awake links at their mode's idle draw, dozing links at doze power.
    pub fn idle_energy(&self, profile: &PowerProfile, seconds: f64) -> Result<f64, crate::error::PowerError> {
        use crate::phy::ModeLabel;
        use crate::power::RadioActivity;
        self.links.iter().try_fold(0.0, |acc, l| {
            let activity = if l.state == PowerState::Doze { RadioActivity::Off } else { RadioActivity::Idle };
            let mode = if l.state == PowerState::FullCapabilities { ModeLabel::Hcm } else { ModeLabel::Lcm };
            Ok(acc + profile.watts(l.state, mode, activity)? * seconds)
        })
    }
}

/// Cross-link wake-up request: bit `i` asks link `i` to wake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WakeUpFrame {
    pub link_bitmap: u16,
}

impl WakeUpFrame {
    pub fn new(link_bitmap: u16) -> Result<Self, FrameError> {
        if link_bitmap == 0 {
            return Err(FrameError::EmptyBitmap);
        }
        Ok(Self { link_bitmap })
    }

    pub fn for_links(ids: &[u8]) -> Result<Self, FrameError> {
        Self::new(ids.iter().fold(0u16, |acc, id| acc | (1 << (id & 0x0f))))
    }

    pub fn link_ids(&self) -> impl Iterator<Item = u8> + '_ {
        (0..=MAX_LINK_ID).filter(move |i| self.link_bitmap & (1 << i) != 0)
    }
}

pub fn encode_wakeup(frame: &WakeUpFrame) -> Vec<u8> {
    let mut out = vec![WAKEUP_TYPE];
    out.extend_from_slice(&frame.link_bitmap.to_le_bytes());
    append_fcs(&mut out);
    out
}

pub fn decode_wakeup(bytes: &[u8]) -> Result<WakeUpFrame, FrameError> {
    if bytes.len() < WAKEUP_LEN {
        return Err(FrameError::Truncated { need: WAKEUP_LEN, have: bytes.len() });
    }
    if bytes[0] != WAKEUP_TYPE {
        return Err(FrameError::BadType(bytes[0]));
    }
    let body = strip_fcs(&bytes[..WAKEUP_LEN]).ok_or(FrameError::Corrupt)?;
    WakeUpFrame::new(u16::from_le_bytes([body[1], body[2]]))
}

/// Handles a wake-up frame received on `received_on`; returns when each requested link is awake.
///
/// Dozing links wake after their own latency; links already awake (or already waking)
/// report their current availability. No link is ever put to sleep here.
pub fn on_wakeup_frame(
    mld: &mut MldState,
    frame: &WakeUpFrame,
    received_on: u8,
    now: u64,
) -> Result<Vec<(u8, u64)>, MultilinkError> {
    if received_on != mld.active_link {
        return Err(MultilinkError::ProtocolViolation { received: received_on, active: mld.active_link });
    }
    if let Some(unknown) = frame.link_ids().find(|id| mld.link(*id).is_none()) {
        return Err(MultilinkError::UnknownLink(unknown));
    }
    mld.advance(now);
    mld.record_activity(received_on, now);
    let mut out = Vec::new();
    for id in frame.link_ids() {
        if let Some((_, at)) = mld.waking.iter().find(|(w, _)| *w == id) {
            out.push((id, *at));
            continue;
        }
        let link = *mld.link(id).expect("checked above");
        if link.state == PowerState::Doze {
            let at = now + link.wake_latency;
            mld.waking.push((id, at));
            out.push((id, at));
        } else {
            mld.record_activity(id, now);
            out.push((id, now));
        }
    }
    Ok(out)
}

/// Always-on low-power receiver that wakes the primary radio.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WurCompanion {
    pub enabled: bool,
    /// Airtime of the low-rate wake-up frame, µs.
    pub wake_frame_airtime: u64,
    /// Primary radio start-up latency, µs.
    pub pcr_wake_latency: u64,
}

/// Time at which the primary radio is ready after a wake-up frame starting at `now`.
pub fn wur_wakeup(companion: &WurCompanion, now: u64) -> Result<u64, MultilinkError> {
    if !companion.enabled {
        return Err(MultilinkError::WurDisabled);
    }
    Ok(now + companion.wake_frame_airtime + companion.pcr_wake_latency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mld() -> MldState {
        MldState::new(
            vec![
                Link::new(0, PowerState::ReducedCapabilities, 0),
                Link::new(1, PowerState::Doze, 500),
                Link::new(2, PowerState::Doze, 200),
                Link::new(3, PowerState::Doze, 1_000),
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn active_link_only() {
        let mut m = mld();
        let f = WakeUpFrame::for_links(&[0]).unwrap();
        assert_eq!(on_wakeup_frame(&mut m, &f, 0, 1_000).unwrap(), vec![(0, 1_000)]);
    }

    #[test]
    fn per_link_latency() {
        let mut m = mld();
        let f = WakeUpFrame::for_links(&[2]).unwrap();
        assert_eq!(on_wakeup_frame(&mut m, &f, 0, 1_000).unwrap(), vec![(2, 1_200)]);
        let f = WakeUpFrame::for_links(&[1, 2, 3]).unwrap();
        let mut m = mld();
        let got = on_wakeup_frame(&mut m, &f, 0, 10).unwrap();
        // Oracle: each link independently at now + its own latency.
        let expected: Vec<(u8, u64)> = [1u8, 2, 3].iter().map(|id| (*id, 10 + m.link(*id).unwrap().wake_latency)).collect();
        assert_eq!(got, expected);
        m.advance(1_010);
        assert!(m.links().iter().all(|l| l.state != PowerState::Doze));
    }

    #[test]
    fn errors() {
        let mut m = mld();
        let f = WakeUpFrame::for_links(&[5]).unwrap();
        assert_eq!(on_wakeup_frame(&mut m, &f, 0, 0), Err(MultilinkError::UnknownLink(5)));
        let f = WakeUpFrame::for_links(&[1]).unwrap();
        assert_eq!(on_wakeup_frame(&mut m, &f, 1, 0), Err(MultilinkError::ProtocolViolation { received: 1, active: 0 }));
        assert_eq!(WakeUpFrame::new(0), Err(FrameError::EmptyBitmap));
        assert!(MldState::new(vec![Link::new(0, PowerState::Doze, 0)], 0).is_err());
        assert_eq!(m.doze_link(0), Err(MultilinkError::InvalidState("active link cannot doze")));
    }

    #[test]
    fn doze_back_after_inactivity() {
        let mut m = mld();
        on_wakeup_frame(&mut m, &WakeUpFrame::for_links(&[2]).unwrap(), 0, 0).unwrap();
        assert!(m.doze_idle_links(50_000).is_empty());
        assert_eq!(m.doze_idle_links(200 + DEFAULT_LINK_DOZE_BACK), vec![2]);
        assert_eq!(m.link(0).unwrap().state, PowerState::ReducedCapabilities);
    }

    #[test]
    fn wakeup_codec() {
        let f = WakeUpFrame::for_links(&[0, 2, 15]).unwrap();
        let bytes = encode_wakeup(&f);
        assert_eq!(&bytes[..3], &[0x04, 0x05, 0x80]);
        assert_eq!(decode_wakeup(&bytes), Ok(f));
        let mut bad = bytes.clone();
        bad[1] ^= 0x02;
        assert_eq!(decode_wakeup(&bad), Err(FrameError::Corrupt));
    }

    #[test]
    fn wur_latency() {
        let c = WurCompanion { enabled: true, wake_frame_airtime: 0, pcr_wake_latency: 0 };
        assert_eq!(wur_wakeup(&c, 77), Ok(77));
        let c = WurCompanion { enabled: true, wake_frame_airtime: 2_000, pcr_wake_latency: 1_000 };
        assert_eq!(wur_wakeup(&c, 10), Ok(3_010));
        assert_eq!(wur_wakeup(&WurCompanion { enabled: false, ..c }, 0), Err(MultilinkError::WurDisabled));
    }

    #[test]
    fn energy_is_additive_across_links() {
        let p = PowerProfile::reference();
        let m = mld();
        let total = m.idle_energy(&p, 2.0).unwrap();
        let expected = p.watts(PowerState::ReducedCapabilities, crate::phy::ModeLabel::Lcm, crate::power::RadioActivity::Idle).unwrap() * 2.0
            + 3.0 * p.get(crate::power::ProfileKey::Doze).unwrap() * 2.0;
        assert!((total - expected).abs() < 1e-12);
    }
}
