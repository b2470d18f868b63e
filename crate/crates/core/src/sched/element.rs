//! Schedule element wire format.
//!
//! ```text
//! id(1) len(1) version(2 LE) epoch(8 LE) count(1)
//!   count × [ offset(4 LE) duration(4 LE) period(4 LE) state(1) caps(2 LE) ]
//! ```
//!
//! `count` holds the group count in bits 0..=4 and the default state in bits 5..=7.
//! `state` holds the state code in bits 0..=2; bit 7 marks a one-shot group.
//! `caps` holds the bandwidth code in bits 0..=3 and NSS in bits 4..=7 (zero when absent).

use alloc::vec::Vec;

use super::{Capabilities, IntervalGroup, PowerSchedule};
use crate::error::ScheduleError;
use crate::phy::Bandwidth;
use crate::power::PowerState;

pub const SCHEDULE_ELEMENT_ID: u8 = 0xDB;
const FIXED_LEN: usize = 2 + 8 + 1;
const GROUP_LEN: usize = 4 + 4 + 4 + 1 + 2;
const MAX_GROUPS: usize = 16;
const ONE_SHOT: u8 = 0x80;

fn wire_u32(v: u64) -> Result<[u8; 4], ScheduleError> {
    u32::try_from(v).map(u32::to_le_bytes).map_err(|_| ScheduleError::FieldOverflow(v))
}

fn encode_caps(caps: Option<Capabilities>) -> u16 {
    caps.map_or(0, |c| u16::from(c.bandwidth.code()) | (u16::from(c.nss & 0x0f) << 4))
}

fn decode_caps(word: u16) -> Result<Option<Capabilities>, ScheduleError> {
    if word == 0 {
        return Ok(None);
    }
    let bw = Bandwidth::from_code((word & 0x0f) as u8).ok_or(ScheduleError::BadCapability(word))?;
    let nss = ((word >> 4) & 0x0f) as u8;
    if nss == 0 || word >> 8 != 0 {
        return Err(ScheduleError::BadCapability(word));
    }
    Ok(Some(Capabilities::new(bw, nss)))
}

pub fn encode_schedule_element(schedule: &PowerSchedule) -> Result<Vec<u8>, ScheduleError> {
    let n = schedule.groups.len();
    if n > MAX_GROUPS {
        return Err(ScheduleError::TooManyGroups(n));
    }
    let len = FIXED_LEN + n * GROUP_LEN;
    let mut out = Vec::with_capacity(2 + len);
    out.push(SCHEDULE_ELEMENT_ID);
    out.push(len as u8);
    out.extend_from_slice(&schedule.version.to_le_bytes());
    out.extend_from_slice(&schedule.epoch.to_le_bytes());
    out.push(n as u8 | (schedule.default_state.code() << 5));
    for g in &schedule.groups {
        out.extend_from_slice(&wire_u32(g.start_offset)?);
        out.extend_from_slice(&wire_u32(g.duration)?);
        out.extend_from_slice(&wire_u32(g.period)?);
        out.push(g.target_state.code() | if g.one_shot { ONE_SHOT } else { 0 });
        out.extend_from_slice(&encode_caps(g.capabilities).to_le_bytes());
    }
    Ok(out)
}

fn le_u32(b: &[u8]) -> u64 {
    u64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Decodes one element from the front of `bytes`, returning it and the bytes consumed.
pub fn decode_schedule_element(bytes: &[u8]) -> Result<(PowerSchedule, usize), ScheduleError> {
    if bytes.len() < 2 + FIXED_LEN {
        return Err(ScheduleError::Truncated { need: 2 + FIXED_LEN, have: bytes.len() });
    }
    if bytes[0] != SCHEDULE_ELEMENT_ID {
        return Err(ScheduleError::BadElementId(bytes[0]));
    }
    let len = bytes[1];
    let count_byte = bytes[12];
    let groups = count_byte & 0x1f;
    if usize::from(len) != FIXED_LEN + usize::from(groups) * GROUP_LEN {
        return Err(ScheduleError::BadLength { field: len, groups });
    }
    let total = 2 + usize::from(len);
    if bytes.len() < total {
        return Err(ScheduleError::Truncated { need: total, have: bytes.len() });
    }
    let version = u16::from_le_bytes([bytes[2], bytes[3]]);
    let mut epoch = [0u8; 8];
    epoch.copy_from_slice(&bytes[4..12]);
    let default_code = count_byte >> 5;
    let default_state = PowerState::from_code(default_code).ok_or(ScheduleError::BadStateCode(default_code))?;
    let mut out = Vec::with_capacity(usize::from(groups));
    for chunk in bytes[2 + FIXED_LEN..total].chunks_exact(GROUP_LEN) {
        let state_byte = chunk[12];
        let code = state_byte & 0x07;
        if state_byte & !(0x07 | ONE_SHOT) != 0 {
            return Err(ScheduleError::BadStateCode(state_byte));
        }
        out.push(IntervalGroup {
            start_offset: le_u32(&chunk[0..4]),
            duration: le_u32(&chunk[4..8]),
            period: le_u32(&chunk[8..12]),
            target_state: PowerState::from_code(code).ok_or(ScheduleError::BadStateCode(code))?,
            capabilities: decode_caps(u16::from_le_bytes([chunk[13], chunk[14]]))?,
            one_shot: state_byte & ONE_SHOT != 0,
        });
    }
    Ok((PowerSchedule { epoch: u64::from_le_bytes(epoch), groups: out, default_state, version }, total))
}
