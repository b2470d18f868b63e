//! ICF / ICR / Trigger Frame wire formats.
//!
//! ICF:
//! ```text
//! type(1)=0x01 sta(2 LE) caps(2 LE) grant_kind(1) grant_value(4 LE µs) flags(1)
//! body_fcs(4) padding(n × 0x00) frame_fcs(4)
//! ```
//! `body_fcs` covers the 11 header bytes, `frame_fcs` everything before it.
//! A receiver validates the header as soon as `body_fcs` arrives, so a frame
//! cut anywhere inside the padding still decodes.
//!
//! ICR: `type(1)=0x02 ap(2) caps(2) effective_at(8 LE µs) fcs(4)`.
//! TF:  `type(1)=0x03 ap(2) sta(2) caps(2) fcs(4)`.
//!
//! Capability words carry bandwidth code in bits 0..=3, NSS in 4..=7, MCS in 8..=11.

use alloc::vec;
use alloc::vec::Vec;

use super::{CapabilityTuple, HcmGrant};
use crate::error::FrameError;
use crate::fcs::{append_fcs, crc32, strip_fcs, FCS_LEN};
use crate::phy::Bandwidth;

pub const ICF_TYPE: u8 = 0x01;
pub const ICR_TYPE: u8 = 0x02;
pub const TF_TYPE: u8 = 0x03;

const ICF_HEADER_LEN: usize = 11;
/// Header plus intermediate FCS: the bytes needed to validate an ICF.
pub const ICF_BODY_LEN: usize = ICF_HEADER_LEN + FCS_LEN;
pub const ICR_LEN: usize = 1 + 2 + 2 + 8 + FCS_LEN;
pub const TF_LEN: usize = 1 + 2 + 2 + 2 + FCS_LEN;

const LL_FLAG: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcfFrame {
    pub sta_id: u16,
    pub requested: CapabilityTuple,
    pub grant: HcmGrant,
    pub ll_flag: bool,
    pub padding_len: usize,
}

impl IcfFrame {
    /// Same request, ignoring padding.
    pub fn same_request(&self, other: &IcfFrame) -> bool {
        self.sta_id == other.sta_id
            && self.requested == other.requested
            && self.grant == other.grant
            && self.ll_flag == other.ll_flag
    }

    pub fn encoded_len(&self) -> usize {
        ICF_BODY_LEN + self.padding_len + FCS_LEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IcrFrame {
    pub ap_id: u16,
    pub granted: CapabilityTuple,
    pub effective_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriggerFrame {
    pub ap_id: u16,
    pub sta_id: u16,
    pub granted: CapabilityTuple,
}

/// Result of parsing an ICF.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodedIcf {
    /// `padding_len` is the padding actually present in the input.
    pub frame: IcfFrame,
    /// Whether the trailing frame FCS was present and valid.
    pub complete: bool,
}

pub(crate) fn encode_caps(c: &CapabilityTuple) -> u16 {
    u16::from(c.bandwidth.code()) | (u16::from(c.nss & 0x0f) << 4) | (u16::from(c.mcs & 0x0f) << 8)
}

pub(crate) fn decode_caps(word: u16) -> Result<CapabilityTuple, FrameError> {
    let bandwidth = Bandwidth::from_code((word & 0x0f) as u8).ok_or(FrameError::BadCapability(word))?;
    let nss = ((word >> 4) & 0x0f) as u8;
    let mcs = ((word >> 8) & 0x0f) as u8;
    if nss == 0 || word >> 12 != 0 {
        return Err(FrameError::BadCapability(word));
    }
    Ok(CapabilityTuple { bandwidth, nss, mcs })
}

fn need(bytes: &[u8], n: usize) -> Result<(), FrameError> {
    if bytes.len() < n {
        Err(FrameError::Truncated { need: n, have: bytes.len() })
    } else {
        Ok(())
    }
}

fn check_type(bytes: &[u8], ty: u8) -> Result<(), FrameError> {
    need(bytes, 1)?;
    if bytes[0] != ty {
        return Err(FrameError::BadType(bytes[0]));
    }
    Ok(())
}

pub fn encode_icf(f: &IcfFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(f.encoded_len());
    out.push(ICF_TYPE);
    out.extend_from_slice(&f.sta_id.to_le_bytes());
    out.extend_from_slice(&encode_caps(&f.requested).to_le_bytes());
    let (kind, value) = match f.grant {
        HcmGrant::ExplicitDuration(d) => (0u8, d),
        HcmGrant::InactivityTimeout(t) => (1u8, t),
    };
    out.push(kind);
    out.extend_from_slice(&value.to_le_bytes());
    out.push(if f.ll_flag { LL_FLAG } else { 0 });
    append_fcs(&mut out);
    out.resize(out.len() + f.padding_len, 0);
    append_fcs(&mut out);
    out
}

pub fn decode_icf(bytes: &[u8]) -> Result<DecodedIcf, FrameError> {
    check_type(bytes, ICF_TYPE)?;
    need(bytes, ICF_BODY_LEN)?;
    let (header, rest) = bytes.split_at(ICF_HEADER_LEN);
    if crc32(header) != u32::from_le_bytes([rest[0], rest[1], rest[2], rest[3]]) {
        return Err(FrameError::Corrupt);
    }
    let grant_value = u32::from_le_bytes([header[6], header[7], header[8], header[9]]);
    let grant = match header[5] {
        0 => HcmGrant::ExplicitDuration(grant_value),
        1 => HcmGrant::InactivityTimeout(grant_value),
        k => return Err(FrameError::BadGrantKind(k)),
    };
    let complete = bytes.len() >= ICF_BODY_LEN + FCS_LEN && strip_fcs(bytes).is_some();
    let padding_len = if complete { bytes.len() - ICF_BODY_LEN - FCS_LEN } else { bytes.len() - ICF_BODY_LEN };
    Ok(DecodedIcf {
        frame: IcfFrame {
            sta_id: u16::from_le_bytes([header[1], header[2]]),
            requested: decode_caps(u16::from_le_bytes([header[3], header[4]]))?,
            grant,
            ll_flag: header[10] & LL_FLAG != 0,
            padding_len,
        },
        complete,
    })
}

pub fn encode_icr(f: &IcrFrame) -> Vec<u8> {
    let mut out = vec![ICR_TYPE];
    out.extend_from_slice(&f.ap_id.to_le_bytes());
    out.extend_from_slice(&encode_caps(&f.granted).to_le_bytes());
    out.extend_from_slice(&f.effective_at.to_le_bytes());
    append_fcs(&mut out);
    out
}

pub fn decode_icr(bytes: &[u8]) -> Result<IcrFrame, FrameError> {
    check_type(bytes, ICR_TYPE)?;
    need(bytes, ICR_LEN)?;
    let body = strip_fcs(&bytes[..ICR_LEN]).ok_or(FrameError::Corrupt)?;
    let mut at = [0u8; 8];
    at.copy_from_slice(&body[5..13]);
    Ok(IcrFrame {
        ap_id: u16::from_le_bytes([body[1], body[2]]),
        granted: decode_caps(u16::from_le_bytes([body[3], body[4]]))?,
        effective_at: u64::from_le_bytes(at),
    })
}

pub fn encode_tf(f: &TriggerFrame) -> Vec<u8> {
    let mut out = vec![TF_TYPE];
    out.extend_from_slice(&f.ap_id.to_le_bytes());
    out.extend_from_slice(&f.sta_id.to_le_bytes());
    out.extend_from_slice(&encode_caps(&f.granted).to_le_bytes());
    append_fcs(&mut out);
    out
}

pub fn decode_tf(bytes: &[u8]) -> Result<TriggerFrame, FrameError> {
    check_type(bytes, TF_TYPE)?;
    need(bytes, TF_LEN)?;
    let body = strip_fcs(&bytes[..TF_LEN]).ok_or(FrameError::Corrupt)?;
    Ok(TriggerFrame {
        ap_id: u16::from_le_bytes([body[1], body[2]]),
        sta_id: u16::from_le_bytes([body[3], body[4]]),
        granted: decode_caps(u16::from_le_bytes([body[5], body[6]]))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn icf() -> IcfFrame {
        IcfFrame {
            sta_id: 0x0102,
            requested: CapabilityTuple { bandwidth: Bandwidth::Mhz80, nss: 2, mcs: 7 },
            grant: HcmGrant::InactivityTimeout(10_000),
            ll_flag: true,
            padding_len: 6,
        }
    }

    #[test]
    fn icf_golden_header() {
        let bytes = encode_icf(&icf());
        assert_eq!(&bytes[..ICF_HEADER_LEN], &[0x01, 0x02, 0x01, 0x23, 0x07, 0x01, 0x10, 0x27, 0x00, 0x00, 0x01]);
        assert_eq!(bytes.len(), 15 + 6 + 4);
        assert_eq!(&bytes[15..21], &[0; 6]);
        let d = decode_icf(&bytes).unwrap();
        assert!(d.complete);
        assert_eq!(d.frame, icf());
    }

    #[test]
    fn truncated_padding_still_decodes() {
        let bytes = encode_icf(&icf());
        for cut in ICF_BODY_LEN..bytes.len() {
            let d = decode_icf(&bytes[..cut]).unwrap();
            assert!(!d.complete);
            assert!(d.frame.same_request(&icf()));
        }
        assert!(matches!(decode_icf(&bytes[..ICF_BODY_LEN - 1]), Err(FrameError::Truncated { .. })));
    }

    #[test]
    fn header_bit_flip_is_corrupt() {
        let bytes = encode_icf(&icf());
        for bit in 8..ICF_BODY_LEN * 8 {
            let mut b = bytes.clone();
            b[bit / 8] ^= 1 << (bit % 8);
            assert_eq!(decode_icf(&b), Err(FrameError::Corrupt), "bit {bit}");
        }
    }

    #[test]
    fn icr_and_tf_round_trip() {
        let caps = CapabilityTuple { bandwidth: Bandwidth::Mhz40, nss: 1, mcs: 5 };
        let icr = IcrFrame { ap_id: 7, granted: caps, effective_at: 123_456_789 };
        let bytes = encode_icr(&icr);
        assert_eq!(bytes.len(), ICR_LEN);
        assert_eq!(decode_icr(&bytes).unwrap(), icr);
        let tf = TriggerFrame { ap_id: 7, sta_id: 9, granted: caps };
        let bytes = encode_tf(&tf);
        assert_eq!(bytes[..7], [0x03, 0x07, 0x00, 0x09, 0x00, 0x12, 0x05]);
        assert_eq!(decode_tf(&bytes).unwrap(), tf);
        assert_eq!(decode_tf(&encode_icr(&icr)), Err(FrameError::BadType(ICR_TYPE)));
    }
}
