//! LCM/HCM crossover sweep, power-profile calibration, and the campus
//! SDPS-versus-static savings study.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::error::AnalysisError;
use crate::phy::{data_rate, ModeLabel, ModePair, PhyConfig};
use crate::power::{average_power, energy, savings_percent, PowerProfile, PowerState, RadioActivity, Segment, StateTimeline};
use crate::rng::{hash_bytes, unit_interval};
use crate::sim::{self, Mechanism, ScenarioSpec, SimConfig, StaSpec};
use crate::trace::{sample_rate, Direction, FlowSpec, TraceSample};

/// Packet size of the crossover sweep's downlink flow.
pub const CROSSOVER_PACKET_BYTES: u32 = 1500;
/// A load point counts as saturated when less than this share of the offered load gets through.
pub const SATURATION_SHARE: f64 = 0.95;

/// Least-squares line `watts = intercept + slope * load_bps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    /// Watts per bit per second.
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    /// Ordinary least squares; `None` with fewer than two distinct abscissae.
    pub fn fit(points: &[(f64, f64)]) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if !(sxx > 0.0) {
            return None;
        }
        let slope = sxy / sxx;
        Some(Self { slope, intercept: my - slope * mx })
    }

    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Abscissa where the two lines meet; `None` for parallel lines.
    pub fn intersection(&self, other: &LinearFit) -> Option<f64> {
        let ds = self.slope - other.slope;
        if ds == 0.0 {
            return None;
        }
        Some((other.intercept - self.intercept) / ds)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverPoint {
    pub offered_bps: f64,
    pub mode: ModeLabel,
    pub avg_watts: f64,
    pub delivered_bps: f64,
    /// Excluded from the fit.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossoverReport {
    /// Both modes for each load, in load order (LCM first).
    pub points: Vec<CrossoverPoint>,
    pub lcm_fit: Option<LinearFit>,
    pub hcm_fit: Option<LinearFit>,
    /// Intersection of the fits; `None` when they are parallel or either is missing.
    pub crossover_bps: Option<f64>,
    /// (load, savings_percent(HCM power, LCM power)) per load.
    pub savings: Vec<(f64, f64)>,
}

impl CrossoverReport {
    pub fn point(&self, load: f64, mode: ModeLabel) -> Option<&CrossoverPoint> {
        self.points.iter().find(|p| p.offered_bps == load && p.mode == mode)
    }

    pub fn fit(&self, mode: ModeLabel) -> Option<LinearFit> {
        match mode {
            ModeLabel::Lcm => self.lcm_fit,
            ModeLabel::Hcm => self.hcm_fit,
        }
    }

    /// Largest saving over the unsaturated loads.
    pub fn peak_saving(&self) -> Option<f64> {
        self.savings
            .iter()
            .filter(|(load, _)| self.points.iter().all(|p| p.offered_bps != *load || !p.saturated))
            .map(|s| s.1)
            .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))))
    }
}

/// `count` evenly spaced loads from `start` to `end` inclusive.
pub fn load_sweep(start: f64, end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => (0..count).map(|i| start + (end - start) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// The single-STA scenario the sweep runs for one (load, mode) point.
pub fn crossover_scenario(load_bps: f64, mode: ModeLabel, lcm: PhyConfig, hcm: PhyConfig) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(format!("crossover-{}-{load_bps}", mode.as_str()), Mechanism::AlwaysOn { mode })
        .with_sta(StaSpec::new(1));
    spec.modes = ModePair { lcm, hcm };
    if load_bps > 0.0 {
        spec = spec.with_flow(1, FlowSpec::cbr(load_bps, CROSSOVER_PACKET_BYTES, Direction::Dl));
    }
    spec
}

/// Simulates one load point and returns (average AP power, delivered bps).
pub fn crossover_point(
    load_bps: f64,
    mode: ModeLabel,
    profile: &PowerProfile,
    lcm: PhyConfig,
    hcm: PhyConfig,
    cfg: &SimConfig,
) -> Result<CrossoverPoint, AnalysisError> {
    let report = sim::run(cfg, &crossover_scenario(load_bps, mode, lcm, hcm))?;
    let watts = average_power(&report.ap().timeline(), profile)?;
    let delivered = report.flows.iter().map(|f| f.throughput_bps).sum::<f64>();
    Ok(CrossoverPoint {
        offered_bps: load_bps,
        mode,
        avg_watts: watts,
        delivered_bps: delivered,
        saturated: load_bps > 0.0 && delivered < SATURATION_SHARE * load_bps,
    })
}

/// Assembles a report from already simulated points.
pub fn crossover_report(points: Vec<CrossoverPoint>) -> Result<CrossoverReport, AnalysisError> {
    let fit_of = |mode| {
        let xy: Vec<(f64, f64)> =
            points.iter().filter(|p| p.mode == mode && !p.saturated).map(|p| (p.offered_bps, p.avg_watts)).collect();
        LinearFit::fit(&xy)
    };
    let lcm_fit = fit_of(ModeLabel::Lcm);
    let hcm_fit = fit_of(ModeLabel::Hcm);
    let crossover_bps = match (lcm_fit, hcm_fit) {
        (Some(l), Some(h)) => l.intersection(&h),
        _ => None,
    };
    let mut savings = Vec::new();
    for p in points.iter().filter(|p| p.mode == ModeLabel::Lcm) {
        if let Some(h) = points.iter().find(|q| q.mode == ModeLabel::Hcm && q.offered_bps == p.offered_bps) {
            savings.push((p.offered_bps, savings_percent(h.avg_watts, p.avg_watts)?));
        }
    }
    Ok(CrossoverReport { points, lcm_fit, hcm_fit, crossover_bps, savings })
}

/// Simulates every load in both modes (one DL CBR STA, AP always on) and fits a line per mode.
pub fn crossover_study(
    loads: &[f64],
    profile: &PowerProfile,
    lcm: PhyConfig,
    hcm: PhyConfig,
    cfg: &SimConfig,
) -> Result<CrossoverReport, AnalysisError> {
    if loads.is_empty() {
        return Err(AnalysisError::NoLoads);
    }
    profile.validate()?;
    ModePair::new(lcm, hcm)?;
    let mut points = Vec::with_capacity(2 * loads.len());
    for &load in loads {
        for mode in [ModeLabel::Lcm, ModeLabel::Hcm] {
            points.push(crossover_point(load, mode, profile, lcm, hcm, cfg)?);
        }
    }
    crossover_report(points)
}

struct ModeCoeffs {
    idle: f64,
    tx: f64,
    rate: f64,
}

fn coeffs(profile: &PowerProfile, mode: ModeLabel, phy: &PhyConfig) -> Result<ModeCoeffs, AnalysisError> {
    Ok(ModeCoeffs {
        idle: profile.mode(mode, RadioActivity::Idle)?,
        tx: profile.mode(mode, RadioActivity::Tx)?,
        rate: data_rate(phy)?,
    })
}

/// Load where the per-second energies `P_idle (1 - L/R) + P_tx L/R` of the two modes are equal.
pub fn analytic_crossover(profile: &PowerProfile, lcm: PhyConfig, hcm: PhyConfig) -> Result<Option<f64>, AnalysisError> {
    let l = coeffs(profile, ModeLabel::Lcm, &lcm)?;
    let h = coeffs(profile, ModeLabel::Hcm, &hcm)?;
    let denom = (l.tx - l.idle) / l.rate - (h.tx - h.idle) / h.rate;
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some((h.idle - l.idle) / denom))
}

/// Sets the HCM idle power so that the analytic crossover equals `target_bps`.
pub fn calibrate_profile(
    target_bps: f64,
    lcm: PhyConfig,
    hcm: PhyConfig,
    base: &PowerProfile,
) -> Result<PowerProfile, AnalysisError> {
    base.validate()?;
    if !(target_bps > 0.0 && target_bps.is_finite()) {
        return Err(AnalysisError::CalibrationFailure(format!("target {target_bps} bps is not a positive load")));
    }
    if analytic_crossover(base, lcm, hcm)? == Some(target_bps) {
        return Ok(base.clone());
    }
    let l = coeffs(base, ModeLabel::Lcm, &lcm)?;
    let h = coeffs(base, ModeLabel::Hcm, &hcm)?;
    if target_bps >= h.rate {
        return Err(AnalysisError::CalibrationFailure(format!(
            "target {target_bps} bps is not below the HCM rate {} bps",
            h.rate
        )));
    }
    let idle = (l.idle + target_bps * ((l.tx - l.idle) / l.rate - h.tx / h.rate)) / (1.0 - target_bps / h.rate);
    let mut out = base.clone();
    out.set(crate::power::ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Idle), idle);
    out.validate().map_err(|e| {
        AnalysisError::CalibrationFailure(format!("HCM idle power would have to be {idle:.6} W, which breaks the profile: {e}"))
    })?;
    Ok(out)
}

/// How the campus study maps traffic to the AP's state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampusPolicy {
    /// The AP runs the HCM when a window's traffic exceeds this.
    pub mode_threshold_bps: f64,
    /// Share of zero-traffic windows in which the AP dozes.
    pub doze_fraction: f64,
    pub baseline: Baseline,
    /// Share of airtime spent on Beacons, charged at LCM transmit power to both arms alike.
    pub beacon_duty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Always in the HCM, never dozing.
    StaticHcm,
}

/// One 244 µs basic-rate Beacon per 102.4 ms.
pub const DEFAULT_BEACON_DUTY: f64 = 244.0 / 102_400.0;

impl Default for CampusPolicy {
    fn default() -> Self {
        Self {
            mode_threshold_bps: 30e6,
            doze_fraction: 0.5,
            baseline: Baseline::StaticHcm,
            beacon_duty: DEFAULT_BEACON_DUTY,
        }
    }
}

impl CampusPolicy {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.mode_threshold_bps > 0.0 && self.mode_threshold_bps.is_finite()) {
            return Err(AnalysisError::InvalidPolicy("mode threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.doze_fraction) {
            return Err(AnalysisError::InvalidPolicy("doze fraction must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.beacon_duty) {
            return Err(AnalysisError::InvalidPolicy("beacon duty must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Whether the AP dozes through a zero-traffic window; depends only on (ap_id, t_start).
pub fn dozes(ap_id: &str, t_start: i64, doze_fraction: f64) -> bool {
    unit_interval(hash_bytes(&[ap_id.as_bytes(), &t_start.to_le_bytes()])) < doze_fraction
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowResult {
    pub ap_id: alloc::string::String,
    pub t_start: i64,
    pub traffic_bps: f64,
    /// SDPS mode; `None` when the AP dozed.
    pub mode: Option<ModeLabel>,
    pub static_watts: f64,
    pub sdps_watts: f64,
    pub savings_pct: f64,
    /// Busy time exceeded the window in some arm and was clamped.
    pub overloaded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourlyResult {
    pub hour: u32,
    pub samples: usize,
    pub mean_traffic_bps: f64,
    pub mean_static_watts: f64,
    pub mean_sdps_watts: f64,
    /// Saving of the summed SDPS power over the summed static power.
    pub savings_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampusReport {
    pub windows: Vec<WindowResult>,
    /// Hours of day that occur in the trace, ascending.
    pub hourly: Vec<HourlyResult>,
    pub daily_savings_pct: f64,
    pub overloaded_windows: usize,
}

impl CampusReport {
    /// Energy-weighted saving over the windows whose start hour lies in `[from, to)`.
    pub fn savings_between(&self, from: u32, to: u32) -> Option<f64> {
        let (s, d) = self
            .windows
            .iter()
            .filter(|w| (from..to).contains(&hour_of(w.t_start)))
            .fold((0.0, 0.0), |(s, d), w| (s + w.static_watts, d + w.sdps_watts));
        (s > 0.0).then(|| 100.0 * (s - d) / s)
    }
}

fn hour_of(t_start: i64) -> u32 {
    (t_start.rem_euclid(crate::trace::SECONDS_PER_DAY) / 3_600) as u32
}

fn busy_timeline(
    state: PowerState,
    mode: ModeLabel,
    dl_bytes: u64,
    ul_bytes: u64,
    rate: f64,
    window: f64,
) -> (StateTimeline, bool) {
    let mut tx = dl_bytes as f64 * 8.0 / rate;
    let mut rx = ul_bytes as f64 * 8.0 / rate;
    let busy = tx + rx;
    let overloaded = busy > window;
    if overloaded {
        tx *= window / busy;
        rx = window - tx;
    }
    let mut t = StateTimeline::new();
    t.push(Segment::new(state, mode, RadioActivity::Tx, tx));
    t.push(Segment::new(state, mode, RadioActivity::Rx, rx));
    t.push(Segment::new(state, mode, RadioActivity::Idle, (window - tx - rx).max(0.0)));
    (t, overloaded)
}

/// Closed-form per-window energy of an SDPS AP against the static-HCM baseline.
pub fn campus_window(
    sample: &TraceSample,
    policy: &CampusPolicy,
    profile: &PowerProfile,
    modes: &ModePair,
) -> Result<WindowResult, AnalysisError> {
    let window = f64::from(sample.window);
    let traffic = sample_rate(sample).map_err(|_| AnalysisError::EmptyTrace)?;
    let (static_tl, static_over) = busy_timeline(
        PowerState::FullCapabilities,
        ModeLabel::Hcm,
        sample.dl_bytes,
        sample.ul_bytes,
        data_rate(&modes.hcm)?,
        window,
    );
    let (mode, sdps_tl, sdps_over) = if sample.total_bytes() == 0 {
        if dozes(&sample.ap_id, sample.t_start, policy.doze_fraction) {
            let mut t = StateTimeline::new();
            t.push(Segment::new(PowerState::Doze, ModeLabel::Lcm, RadioActivity::Off, window));
            (None, t, false)
        } else {
            let mut t = StateTimeline::new();
            t.push(Segment::new(PowerState::ReducedCapabilities, ModeLabel::Lcm, RadioActivity::Idle, window));
            (Some(ModeLabel::Lcm), t, false)
        }
    } else {
        let (label, state) = if traffic > policy.mode_threshold_bps {
            (ModeLabel::Hcm, PowerState::FullCapabilities)
        } else {
            (ModeLabel::Lcm, PowerState::ReducedCapabilities)
        };
        let rate = data_rate(&modes.get(label).phy)?;
        let (t, over) = busy_timeline(state, label, sample.dl_bytes, sample.ul_bytes, rate, window);
        (Some(label), t, over)
    };
    let beacons = policy.beacon_duty * profile.mode(ModeLabel::Lcm, RadioActivity::Tx)?;
    let static_watts = energy(&static_tl, profile)? / window + beacons;
    let sdps_watts = energy(&sdps_tl, profile)? / window + beacons;
    Ok(WindowResult {
        ap_id: sample.ap_id.clone(),
        t_start: sample.t_start,
        traffic_bps: traffic,
        mode,
        static_watts,
        sdps_watts,
        savings_pct: savings_percent(static_watts, sdps_watts)?,
        overloaded: static_over || sdps_over,
    })
}

/// Runs the campus study over every sample and aggregates by hour of day.
pub fn campus_study(
    trace: &[TraceSample],
    policy: &CampusPolicy,
    profile: &PowerProfile,
    lcm: PhyConfig,
    hcm: PhyConfig,
) -> Result<CampusReport, AnalysisError> {
    if trace.is_empty() {
        return Err(AnalysisError::EmptyTrace);
    }
    policy.validate()?;
    profile.validate()?;
    let modes = ModePair::new(lcm, hcm)?;
    let windows = trace.iter().map(|s| campus_window(s, policy, profile, &modes)).collect::<Result<Vec<_>, _>>()?;

    let mut by_hour: BTreeMap<u32, (usize, f64, f64, f64)> = BTreeMap::new();
    for w in &windows {
        let e = by_hour.entry(hour_of(w.t_start)).or_default();
        e.0 += 1;
        e.1 += w.traffic_bps;
        e.2 += w.static_watts;
        e.3 += w.sdps_watts;
    }
    let hourly = by_hour
        .into_iter()
        .map(|(hour, (n, traffic, st, sd))| {
            let n_f = n as f64;
            HourlyResult {
                hour,
                samples: n,
                mean_traffic_bps: traffic / n_f,
                mean_static_watts: st / n_f,
                mean_sdps_watts: sd / n_f,
                savings_pct: 100.0 * (st - sd) / st,
            }
        })
        .collect();
    let total_static: f64 = windows.iter().map(|w| w.static_watts).sum();
    let total_sdps: f64 = windows.iter().map(|w| w.sdps_watts).sum();
    let overloaded_windows = windows.iter().filter(|w| w.overloaded).count();
    Ok(CampusReport {
        windows,
        hourly,
        daily_savings_pct: 100.0 * (total_static - total_sdps) / total_static,
        overloaded_windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 + 0.5 * i as f64)).collect();
        let f = LinearFit::fit(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!(LinearFit::fit(&pts[..1]).is_none());
        assert!(LinearFit::fit(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
        let g = LinearFit { slope: -0.5, intercept: 8.0 };
        assert!((f.intersection(&g).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(f.intersection(&f), None);
    }

    #[test]
    fn sweep_endpoints() {
        let l = load_sweep(1e6, 100e6, 25);
        assert_eq!(l.len(), 25);
        assert_eq!(l[0], 1e6);
        assert_eq!(l[24], 100e6);
    }

    #[test]
    fn reference_crossover_is_about_29_mbps() {
        let x = analytic_crossover(&PowerProfile::reference(), PhyConfig::lcm_default(), PhyConfig::hcm_default())
            .unwrap()
            .unwrap();
        assert!((x - 29e6).abs() < 0.02 * 29e6, "{x}");
    }

    #[test]
    fn calibration_identity_and_failure() {
        let base = PowerProfile::reference();
        let (l, h) = (PhyConfig::lcm_default(), PhyConfig::hcm_default());
        let x = analytic_crossover(&base, l, h).unwrap().unwrap();
        assert_eq!(calibrate_profile(x, l, h, &base).unwrap(), base);
        assert!(matches!(calibrate_profile(300e6, l, h, &base), Err(AnalysisError::CalibrationFailure(_))));
        assert!(matches!(calibrate_profile(-1.0, l, h, &base), Err(AnalysisError::CalibrationFailure(_))));
    }

    #[test]
    fn fifty_mbps_runs_the_hcm() {
        let s = TraceSample::new("a", 0, 50_000_000 / 8 * 600, 0);
        let w = campus_window(&s, &CampusPolicy::default(), &PowerProfile::reference(), &ModePair::default()).unwrap();
        assert_eq!(w.mode, Some(ModeLabel::Hcm));
        assert!(w.savings_pct.abs() < 1e-12);
    }

    #[test]
    fn policy_validation() {
        assert!(CampusPolicy { mode_threshold_bps: 0.0, ..Default::default() }.validate().is_err());
        assert!(CampusPolicy { doze_fraction: 1.5, ..Default::default() }.validate().is_err());
        assert!(CampusPolicy::default().validate().is_ok());
    }
}
