//! Traffic descriptions: per-flow generators for the simulator and
//! per-AP 10-minute byte counts for the campus study.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::TraceError;
use crate::rng::stream;

/// Observation window of campus traces, seconds.
pub const CAMPUS_WINDOW_S: u32 = 600;
pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TraceSample {
    pub ap_id: String,
    /// Window start, seconds since the Unix epoch (UTC).
    pub t_start: i64,
    /// Window length, seconds.
    pub window: u32,
    pub dl_bytes: u64,
    pub ul_bytes: u64,
}

impl TraceSample {
    pub fn new(ap_id: impl Into<String>, t_start: i64, dl_bytes: u64, ul_bytes: u64) -> Self {
        Self { ap_id: ap_id.into(), t_start, window: CAMPUS_WINDOW_S, dl_bytes, ul_bytes }
    }

    pub fn total_bytes(&self) -> u64 {
        self.dl_bytes + self.ul_bytes
    }

    /// Hour of day (UTC) at the window start.
    pub fn hour_of_day(&self) -> u32 {
        (self.t_start.rem_euclid(SECONDS_PER_DAY) / 3_600) as u32
    }
}

/// Mean offered traffic of a sample in bits per second (UL + DL).
pub fn sample_rate(sample: &TraceSample) -> Result<f64, TraceError> {
    if sample.window == 0 {
        return Err(TraceError::ZeroWindow);
    }
    Ok(8.0 * (sample.dl_bytes as f64 + sample.ul_bytes as f64) / f64::from(sample.window))
}

/// Sorts by (ap_id, t_start).
pub fn sort_samples(samples: &mut [TraceSample]) {
    samples.sort_by(|a, b| (a.ap_id.as_str(), a.t_start).cmp(&(b.ap_id.as_str(), b.t_start)));
}

/// A window the trace should contain but does not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gap {
    pub ap_id: String,
    pub t_start: i64,
}

/// Fills missing windows of each AP with zero-traffic samples; returns the filled
/// list (sorted) and the gaps that were filled. Input must hold windows of equal length.
pub fn fill_gaps(mut samples: Vec<TraceSample>) -> (Vec<TraceSample>, Vec<Gap>) {
    sort_samples(&mut samples);
    let mut out = Vec::with_capacity(samples.len());
    let mut gaps = Vec::new();
    for s in samples {
        let prev = out.last().filter(|p: &&TraceSample| p.ap_id == s.ap_id && p.window > 0).map(|p| (p.t_start, p.window));
        if let Some((prev_start, window)) = prev {
            let step = i64::from(window);
            let mut t = prev_start + step;
            while t < s.t_start {
                gaps.push(Gap { ap_id: s.ap_id.clone(), t_start: t });
                out.push(TraceSample { ap_id: s.ap_id.clone(), t_start: t, window, dl_bytes: 0, ul_bytes: 0 });
                t += step;
            }
        }
        out.push(s);
    }
    (out, gaps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FlowKind {
    Cbr,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Direction {
    Ul,
    Dl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TrafficClass {
    QosStrict,
    LowLatency,
    BestEffort,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlowSpec {
    pub kind: FlowKind,
    /// Offered load, bits per second.
    pub rate: f64,
    pub packet_bytes: u32,
    pub direction: Direction,
    #[cfg_attr(feature = "serde", serde(default = "default_class"))]
    pub class: TrafficClass,
}

#[cfg(feature = "serde")]
fn default_class() -> TrafficClass {
    TrafficClass::BestEffort
}

impl FlowSpec {
    pub fn cbr(rate: f64, packet_bytes: u32, direction: Direction) -> Self {
        Self { kind: FlowKind::Cbr, rate, packet_bytes, direction, class: TrafficClass::BestEffort }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(format!("flow rate must be positive, got {}", self.rate));
        }
        if self.packet_bytes == 0 {
            return Err(String::from("flow packet size must be positive"));
        }
        Ok(())
    }

    /// Mean packet inter-arrival time, seconds.
    pub fn mean_interval(&self) -> f64 {
        f64::from(self.packet_bytes) * 8.0 / self.rate
    }
}

/// Shape of the synthetic campus load.
///
/// Illustrative defaults: office-hours plateau, a 10:1 office-to-night
/// level ratio, 5 % "hot" APs, 40 % of off-hours samples exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiurnalParams {
    /// Start of the trace (midnight UTC of the first day), Unix seconds.
    pub start: i64,
    pub office_start_hour: f64,
    pub office_end_hour: f64,
    /// End of the night trough (it starts at midnight).
    pub night_end_hour: f64,
    /// Median per-AP load at the office-hours plateau, bits per second.
    pub office_median_bps: f64,
    /// Office plateau level divided by the night level.
    pub peak_ratio: f64,
    pub hot_fraction: f64,
    pub hot_multiplier: f64,
    /// Log-normal spread of per-AP scale.
    pub ap_sigma: f64,
    /// Log-normal spread of each 10-minute sample around the AP's curve.
    pub sample_sigma: f64,
    /// Share of outside-office-hours samples that carry no traffic at all.
    pub night_zero_fraction: f64,
    /// Share of bytes that are downlink.
    pub dl_share: f64,
}

impl Default for DiurnalParams {
    fn default() -> Self {
        Self {
            // 2019-01-15 00:00:00 UTC, a Tuesday.
            start: 1_547_510_400,
            office_start_hour: 8.0,
            office_end_hour: 20.0,
            night_end_hour: 6.0,
            office_median_bps: 12e6,
            peak_ratio: 10.0,
            hot_fraction: 0.05,
            hot_multiplier: 4.0,
            ap_sigma: 0.8,
            sample_sigma: 0.6,
            night_zero_fraction: 0.4,
            dl_share: 0.8,
        }
    }
}

impl DiurnalParams {
    pub fn is_office_hour(&self, hour: f64) -> bool {
        hour >= self.office_start_hour && hour < self.office_end_hour
    }

    /// Relative load level at fractional hour `h` in [0, 24): 1 on the office plateau,
    /// `1 / peak_ratio` in the night trough, cosine ramps in between.
    pub fn level(&self, h: f64) -> f64 {
        let night = 1.0 / self.peak_ratio;
        let ramp = |x: f64| (1.0 - libm::cos(core::f64::consts::PI * x.clamp(0.0, 1.0))) / 2.0;
        if h < self.night_end_hour {
            night
        } else if h < self.office_start_hour {
            night + (1.0 - night) * ramp((h - self.night_end_hour) / (self.office_start_hour - self.night_end_hour))
        } else if h < self.office_end_hour {
            1.0
        } else {
            1.0 - (1.0 - night) * ramp((h - self.office_end_hour) / (24.0 - self.office_end_hour))
        }
    }
}

pub fn campus_ap_id(index: usize) -> String {
    format!("ap-{index:04}")
}

/// Synthetic campus trace: `n_aps` APs × `days` × 144 ten-minute windows, deterministic per seed.
pub fn synth_campus(n_aps: usize, days: u32, profile: &DiurnalParams, seed: u64) -> Vec<TraceSample> {
    let windows_per_day = (SECONDS_PER_DAY / i64::from(CAMPUS_WINDOW_S)) as u32;
    let mut out = Vec::with_capacity(n_aps * (days * windows_per_day) as usize);
    for ap in 0..n_aps {
        let mut rng = stream(seed, 0x74_7261_6365, ap as u64);
        let z: f64 = StandardNormal.sample(&mut rng);
        let hot = rng.gen::<f64>() < profile.hot_fraction;
        let mut scale = profile.office_median_bps * libm::exp(profile.ap_sigma * z);
        if hot {
            scale *= profile.hot_multiplier;
        }
        let id = campus_ap_id(ap);
        for w in 0..days * windows_per_day {
            let t_start = profile.start + i64::from(w) * i64::from(CAMPUS_WINDOW_S);
            let hour = (t_start.rem_euclid(SECONDS_PER_DAY)) as f64 / 3_600.0;
            let noise: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = rng.gen();
            let split: f64 = rng.gen();
            let zero = !profile.is_office_hour(hour) && u < profile.night_zero_fraction;
            let (dl, ul) = if zero {
                (0, 0)
            } else {
                // Median-preserving log-normal noise around the diurnal curve.
                let rate = scale * profile.level(hour) * libm::exp(profile.sample_sigma * noise);
                let bytes = libm::round(rate * f64::from(CAMPUS_WINDOW_S) / 8.0) as u64;
                let share = (profile.dl_share + 0.1 * (split - 0.5)).clamp(0.0, 1.0);
                let dl = libm::round(bytes as f64 * share) as u64;
                (dl, bytes - dl.min(bytes))
            };
            out.push(TraceSample { ap_id: id.clone(), t_start, window: CAMPUS_WINDOW_S, dl_bytes: dl, ul_bytes: ul });
        }
    }
    out
}
