//! VHT (802.11ac) rate and airtime arithmetic for the capability modes.

use core::fmt;

use crate::error::PhyError;

/// Channel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Bandwidth {
    #[cfg_attr(feature = "serde", serde(rename = "20"))]
    Mhz20,
    #[cfg_attr(feature = "serde", serde(rename = "40"))]
    Mhz40,
    #[cfg_attr(feature = "serde", serde(rename = "80"))]
    Mhz80,
    #[cfg_attr(feature = "serde", serde(rename = "160"))]
    Mhz160,
}

impl Bandwidth {
    pub const ALL: [Bandwidth; 4] = [Self::Mhz20, Self::Mhz40, Self::Mhz80, Self::Mhz160];

    pub fn mhz(self) -> u32 {
        match self {
            Self::Mhz20 => 20,
            Self::Mhz40 => 40,
            Self::Mhz80 => 80,
            Self::Mhz160 => 160,
        }
    }

    pub fn from_mhz(mhz: u32) -> Option<Self> {
        match mhz {
            20 => Some(Self::Mhz20),
            40 => Some(Self::Mhz40),
            80 => Some(Self::Mhz80),
            160 => Some(Self::Mhz160),
            _ => None,
        }
    }

    /// Number of data subcarriers.
    pub fn data_subcarriers(self) -> u32 {
        match self {
            Self::Mhz20 => 52,
            Self::Mhz40 => 108,
            Self::Mhz80 => 234,
            Self::Mhz160 => 468,
        }
    }

    /// 4-bit wire code used by the capability words (1..=4; 0 means "absent").
    pub fn code(self) -> u8 {
        match self {
            Self::Mhz20 => 1,
            Self::Mhz40 => 2,
            Self::Mhz80 => 3,
            Self::Mhz160 => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Self::Mhz20),
            2 => Some(Self::Mhz40),
            3 => Some(Self::Mhz80),
            4 => Some(Self::Mhz160),
            _ => None,
        }
    }
}

impl fmt::Display for Bandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.mhz())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum GuardInterval {
    /// 0.4 µs
    Short,
    /// 0.8 µs
    Long,
}

impl GuardInterval {
    /// OFDM symbol duration in nanoseconds (3.2 µs + GI).
    pub fn symbol_ns(self) -> u64 {
        match self {
            Self::Short => 3_600,
            Self::Long => 4_000,
        }
    }
}

pub const MAX_VHT_MCS: u8 = 9;
pub const MAX_VHT_NSS: u8 = 8;

/// Modulation and coding per VHT MCS index: (coded bits per subcarrier, rate numerator, rate denominator).
const VHT_MCS: [(u32, u32, u32); 10] = [
    (1, 1, 2),
    (2, 1, 2),
    (2, 3, 4),
    (4, 1, 2),
    (4, 3, 4),
    (6, 2, 3),
    (6, 3, 4),
    (6, 5, 6),
    (8, 3, 4),
    (8, 5, 6),
];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhyConfig {
    pub mcs_index: u8,
    pub bandwidth: Bandwidth,
    pub nss: u8,
    pub guard_interval: GuardInterval,
    /// Informational only; does not enter rate or energy arithmetic.
    #[cfg_attr(feature = "serde", serde(default = "default_tx_power"))]
    pub tx_power_dbm: f64,
}

#[cfg(feature = "serde")]
fn default_tx_power() -> f64 {
    16.0
}

impl PhyConfig {
    pub fn new(mcs_index: u8, bandwidth: Bandwidth, nss: u8, guard_interval: GuardInterval) -> Self {
        Self { mcs_index, bandwidth, nss, guard_interval, tx_power_dbm: 16.0 }
    }

    /// Low capability mode used throughout the case study: MCS 7, 20 MHz, 1 SS, short GI.
    pub fn lcm_default() -> Self {
        Self::new(7, Bandwidth::Mhz20, 1, GuardInterval::Short)
    }

    /// High capability mode used throughout the case study: MCS 7, 80 MHz, 2 SS, short GI.
    pub fn hcm_default() -> Self {
        Self::new(7, Bandwidth::Mhz80, 2, GuardInterval::Short)
    }

    /// Basic-rate configuration for Beacons and control responses.
    pub fn basic_rate() -> Self {
        Self::new(0, Bandwidth::Mhz20, 1, GuardInterval::Long)
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if self.mcs_index > MAX_VHT_MCS || self.nss == 0 || self.nss > MAX_VHT_NSS {
            return Err(PhyError::InvalidConfig(*self));
        }
        // Combinations excluded by the VHT rate tables (non-integer bits per encoder stream).
        let excluded = match (self.bandwidth, self.mcs_index) {
            (Bandwidth::Mhz20, 9) => !matches!(self.nss, 3 | 6),
            (Bandwidth::Mhz80, 6) => matches!(self.nss, 3 | 7),
            (Bandwidth::Mhz80, 9) => self.nss == 6,
            (Bandwidth::Mhz160, 9) => self.nss == 3,
            _ => false,
        };
        if excluded {
            return Err(PhyError::InvalidConfig(*self));
        }
        Ok(())
    }

    /// Data bits carried by one OFDM symbol across all spatial streams.
    pub fn bits_per_symbol(&self) -> Result<u32, PhyError> {
        self.validate()?;
        let (bpscs, num, den) = VHT_MCS[self.mcs_index as usize];
        Ok(self.bandwidth.data_subcarriers() * bpscs * num * u32::from(self.nss) / den)
    }

    /// Bandwidth × spatial streams, the capability "size" compared between modes.
    pub fn capability_product(&self) -> u32 {
        self.bandwidth.mhz() * u32::from(self.nss)
    }
}

/// PHY data rate in bits per second.
pub fn data_rate(cfg: &PhyConfig) -> Result<f64, PhyError> {
    let bits = cfg.bits_per_symbol()?;
    Ok(f64::from(bits) * 1e9 / cfg.guard_interval.symbol_ns() as f64)
}

/// Framing overheads applied on top of the MSDU payload.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MacOverheadParams {
    pub mac_header_bytes: u32,
    pub fcs_bytes: u32,
    /// VHT preamble (legacy + VHT training fields) in nanoseconds.
    pub preamble_ns: u64,
    pub service_bits: u32,
    pub tail_bits: u32,
}

impl Default for MacOverheadParams {
    fn default() -> Self {
        Self { mac_header_bytes: 36, fcs_bytes: 4, preamble_ns: 40_000, service_bits: 16, tail_bits: 6 }
    }
}

/// Number of OFDM symbols needed for `payload_bytes` of MSDU at `cfg`.
pub fn symbol_count(payload_bytes: u64, cfg: &PhyConfig, overhead: &MacOverheadParams) -> Result<u64, PhyError> {
    let per_symbol = u64::from(cfg.bits_per_symbol()?);
    if payload_bytes == 0 {
        return Ok(0);
    }
    let bits = u64::from(overhead.service_bits)
        + 8 * (payload_bytes + u64::from(overhead.mac_header_bytes) + u64::from(overhead.fcs_bytes))
        + u64::from(overhead.tail_bits);
    Ok(bits.div_ceil(per_symbol))
}

/// Frame airtime in nanoseconds. A zero-byte payload costs the preamble only.
pub fn frame_airtime_ns(payload_bytes: u64, cfg: &PhyConfig, overhead: &MacOverheadParams) -> Result<u64, PhyError> {
    let symbols = symbol_count(payload_bytes, cfg, overhead)?;
    Ok(overhead.preamble_ns + symbols * cfg.guard_interval.symbol_ns())
}

/// Frame airtime in microseconds.
pub fn frame_airtime(payload_bytes: u64, cfg: &PhyConfig, overhead: &MacOverheadParams) -> Result<f64, PhyError> {
    Ok(frame_airtime_ns(payload_bytes, cfg, overhead)? as f64 / 1e3)
}

/// Which of the two operating configurations a device is using.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum ModeLabel {
    Lcm,
    Hcm,
}

impl ModeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lcm => "LCM",
            Self::Hcm => "HCM",
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapabilityMode {
    pub label: ModeLabel,
    pub phy: PhyConfig,
}

/// A validated LCM/HCM pair: HCM must offer strictly more bandwidth × streams.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModePair {
    pub lcm: PhyConfig,
    pub hcm: PhyConfig,
}

impl Default for ModePair {
    fn default() -> Self {
        Self { lcm: PhyConfig::lcm_default(), hcm: PhyConfig::hcm_default() }
    }
}

impl ModePair {
    pub fn new(lcm: PhyConfig, hcm: PhyConfig) -> Result<Self, PhyError> {
        let pair = Self { lcm, hcm };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        self.lcm.validate()?;
        self.hcm.validate()?;
        if self.hcm.capability_product() <= self.lcm.capability_product() {
            return Err(PhyError::ModeOrdering);
        }
        Ok(())
    }

    pub fn get(&self, label: ModeLabel) -> CapabilityMode {
        let phy = match label {
            ModeLabel::Lcm => self.lcm,
            ModeLabel::Hcm => self.hcm,
        };
        CapabilityMode { label, phy }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_rates() {
        let lcm = data_rate(&PhyConfig::lcm_default()).unwrap();
        assert!((lcm - 72_222_222.22).abs() < 0.01);
        let hcm = data_rate(&PhyConfig::hcm_default()).unwrap();
        assert_eq!(hcm, 650_000_000.0);
        let mcs0 = data_rate(&PhyConfig::new(0, Bandwidth::Mhz20, 1, GuardInterval::Long)).unwrap();
        assert_eq!(mcs0, 6_500_000.0);
    }

    #[test]
    fn hcm_to_lcm_ratio_is_nine() {
        assert_eq!(PhyConfig::hcm_default().bits_per_symbol().unwrap(), 9 * PhyConfig::lcm_default().bits_per_symbol().unwrap());
    }

    #[test]
    fn rejects_invalid_combinations() {
        assert!(PhyConfig::new(9, Bandwidth::Mhz20, 1, GuardInterval::Short).validate().is_err());
        assert!(PhyConfig::new(9, Bandwidth::Mhz20, 3, GuardInterval::Short).validate().is_ok());
        assert!(PhyConfig::new(6, Bandwidth::Mhz80, 3, GuardInterval::Short).validate().is_err());
        assert!(PhyConfig::new(10, Bandwidth::Mhz40, 1, GuardInterval::Short).validate().is_err());
        assert!(PhyConfig::new(3, Bandwidth::Mhz40, 0, GuardInterval::Short).validate().is_err());
        assert!(data_rate(&PhyConfig::new(9, Bandwidth::Mhz160, 3, GuardInterval::Long)).is_err());
    }

    #[test]
    fn empty_payload_is_preamble_only() {
        let oh = MacOverheadParams::default();
        for cfg in [PhyConfig::lcm_default(), PhyConfig::hcm_default(), PhyConfig::basic_rate()] {
            assert_eq!(frame_airtime(0, &cfg, &oh).unwrap(), 40.0);
        }
    }

    #[test]
    fn airtime_1500_bytes_lcm() {
        // (16 + 8*(1500+36+4) + 6) bits = 12342 → ceil(12342/260) = 48 symbols of 3.6 µs.
        let oh = MacOverheadParams::default();
        let t = frame_airtime_ns(1500, &PhyConfig::lcm_default(), &oh).unwrap();
        assert_eq!(t, 40_000 + 48 * 3_600);
    }

    #[test]
    fn mode_pair_ordering() {
        assert!(ModePair::new(PhyConfig::lcm_default(), PhyConfig::hcm_default()).is_ok());
        assert_eq!(
            ModePair::new(PhyConfig::hcm_default(), PhyConfig::lcm_default()),
            Err(PhyError::ModeOrdering)
        );
    }
}
