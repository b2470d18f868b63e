//! 802.11 frame check sequence (CRC-32, IEEE polynomial, reflected), little-endian on the wire.

use alloc::vec::Vec;

pub const FCS_LEN: usize = 4;

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn append_fcs(buf: &mut Vec<u8>) {
    let fcs = crc32(buf);
    buf.extend_from_slice(&fcs.to_le_bytes());
}

/// Returns the covered bytes when the trailing four bytes are their valid FCS.
pub fn strip_fcs(frame: &[u8]) -> Option<&[u8]> {
    let split = frame.len().checked_sub(FCS_LEN)?;
    let (body, fcs) = frame.split_at(split);
    (crc32(body) == u32::from_le_bytes([fcs[0], fcs[1], fcs[2], fcs[3]])).then_some(body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_value() {
        // Standard CRC-32 check value.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn strip_detects_damage() {
        let mut f = alloc::vec![1u8, 2, 3];
        append_fcs(&mut f);
        assert_eq!(strip_fcs(&f), Some(&[1u8, 2, 3][..]));
        f[1] ^= 0x10;
        assert_eq!(strip_fcs(&f), None);
        assert_eq!(strip_fcs(&[1, 2]), None);
    }
}
