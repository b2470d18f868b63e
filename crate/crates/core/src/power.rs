//! Per-state power table and timeline energy integration.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::PowerError;
use crate::phy::ModeLabel;

/// The five AP power states, ordered by how "awake" they are.
///
/// The derived ordering doubles as the overlap precedence of the schedule:
/// a later variant wins over an earlier one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PowerState {
    /// Radio disabled: no transmit, receive or CCA.
    Doze,
    /// CCA only; may switch to receive but never transmits.
    Listen,
    /// CCA and receive; can switch to transmission quickly.
    InterruptibleListen,
    ReducedCapabilities,
    FullCapabilities,
}

impl PowerState {
    pub const ALL: [PowerState; 5] = [
        Self::Doze,
        Self::Listen,
        Self::InterruptibleListen,
        Self::ReducedCapabilities,
        Self::FullCapabilities,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code)).copied()
    }

    /// States that carry a (bandwidth, nss) capability set.
    pub fn has_capabilities(self) -> bool {
        matches!(self, Self::ReducedCapabilities | Self::FullCapabilities)
    }

    /// The AP can start its own data transmissions.
    pub fn can_initiate(self) -> bool {
        self.has_capabilities()
    }

    /// The AP can receive a frame and answer it with a control response.
    pub fn can_respond(self) -> bool {
        self >= Self::InterruptibleListen
    }

    pub fn can_receive(self) -> bool {
        self != Self::Doze
    }

    pub fn permits(self, activity: RadioActivity) -> bool {
        use RadioActivity::*;
        match self {
            Self::Doze => activity == Off,
            Self::Listen => matches!(activity, Idle | Rx),
            _ => activity != Off,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Doze => "doze",
            Self::Listen => "listen",
            Self::InterruptibleListen => "interruptible_listen",
            Self::ReducedCapabilities => "reduced_capabilities",
            Self::FullCapabilities => "full_capabilities",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RadioActivity {
    Tx,
    Rx,
    Idle,
    Off,
}

impl RadioActivity {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Tx => "tx",
            Self::Rx => "rx",
            Self::Idle => "idle",
            Self::Off => "off",
        }
    }
}

/// One row of the power table.
///
/// Awake states draw the power of their capability mode; the low-power
/// states have their own rows regardless of mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ProfileKey {
    Doze,
    Listen(RadioActivity),
    InterruptibleListen(RadioActivity),
    Mode(ModeLabel, RadioActivity),
}

impl ProfileKey {
    pub fn for_segment(state: PowerState, mode: ModeLabel, activity: RadioActivity) -> Result<Self, PowerError> {
        if !state.permits(activity) {
            return Err(PowerError::ActivityNotPermitted { state, activity });
        }
        Ok(match state {
            PowerState::Doze => Self::Doze,
            PowerState::Listen => Self::Listen(activity),
            PowerState::InterruptibleListen => Self::InterruptibleListen(activity),
            PowerState::ReducedCapabilities | PowerState::FullCapabilities => Self::Mode(mode, activity),
        })
    }

    /// Configuration-file key (`doze`, `listen`, `listen.rx`, `lcm.idle`, `hcm.tx`, ...).
    pub fn name(&self) -> String {
        match *self {
            Self::Doze => String::from("doze"),
            Self::Listen(RadioActivity::Idle) => String::from("listen"),
            Self::Listen(a) => format!("listen.{}", a.as_str()),
            Self::InterruptibleListen(RadioActivity::Idle) => String::from("interruptible_listen"),
            Self::InterruptibleListen(a) => format!("interruptible_listen.{}", a.as_str()),
            Self::Mode(ModeLabel::Lcm, a) => format!("lcm.{}", a.as_str()),
            Self::Mode(ModeLabel::Hcm, a) => format!("hcm.{}", a.as_str()),
        }
    }
}

impl fmt::Display for ProfileKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for ProfileKey {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let activity = |a: &str| match a {
            "tx" => Ok(RadioActivity::Tx),
            "rx" => Ok(RadioActivity::Rx),
            "idle" => Ok(RadioActivity::Idle),
            _ => Err(()),
        };
        match s.split_once('.') {
            None => match s {
                "doze" => Ok(Self::Doze),
                "listen" => Ok(Self::Listen(RadioActivity::Idle)),
                "interruptible_listen" => Ok(Self::InterruptibleListen(RadioActivity::Idle)),
                _ => Err(()),
            },
            Some(("listen", a)) => Ok(Self::Listen(activity(a)?)),
            Some(("interruptible_listen", a)) => Ok(Self::InterruptibleListen(activity(a)?)),
            Some(("lcm", a)) => Ok(Self::Mode(ModeLabel::Lcm, activity(a)?)),
            Some(("hcm", a)) => Ok(Self::Mode(ModeLabel::Hcm, activity(a)?)),
            _ => Err(()),
        }
    }
}

/// Wake-up radios draw less than this (watts).
pub const WUR_POWER_BOUND_W: f64 = 0.001;

/// Power draw in watts per (state, mode, activity), plus the companion wake-up radio.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    watts: BTreeMap<ProfileKey, f64>,
    pub wur_watts: f64,
}

impl PowerProfile {
    pub fn new(wur_watts: f64) -> Self {
        Self { watts: BTreeMap::new(), wur_watts }
    }

    /// Illustrative reference profile.
    ///
    /// Not a measurement: the values are chosen to satisfy the ordering
    /// invariants, give LCM a 30 % idle advantage over HCM, and put the
    /// analytical LCM/HCM crossover at 29 Mbps for the default mode pair.
    pub fn reference() -> Self {
        let mut p = Self::new(0.0005);
        let listen = 2.2;
        p.set(ProfileKey::Doze, 0.4);
        p.set(ProfileKey::Listen(RadioActivity::Idle), listen);
        p.set(ProfileKey::Listen(RadioActivity::Rx), 2.6);
        p.set(ProfileKey::InterruptibleListen(RadioActivity::Idle), listen * 1.1);
        p.set(ProfileKey::InterruptibleListen(RadioActivity::Rx), 2.86);
        p.set(ProfileKey::InterruptibleListen(RadioActivity::Tx), 6.16);
        p.set(ProfileKey::Mode(ModeLabel::Lcm, RadioActivity::Idle), 2.8);
        p.set(ProfileKey::Mode(ModeLabel::Lcm, RadioActivity::Rx), 3.2);
        p.set(ProfileKey::Mode(ModeLabel::Lcm, RadioActivity::Tx), 6.16);
        p.set(ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Idle), 4.0);
        p.set(ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Rx), 4.4);
        p.set(ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Tx), 7.36);
        p
    }

    pub fn set(&mut self, key: ProfileKey, watts: f64) {
        self.watts.insert(key, watts);
    }

    pub fn get(&self, key: ProfileKey) -> Result<f64, PowerError> {
        self.watts.get(&key).copied().ok_or(PowerError::IncompleteProfile(key))
    }

    pub fn watts(&self, state: PowerState, mode: ModeLabel, activity: RadioActivity) -> Result<f64, PowerError> {
        self.get(ProfileKey::for_segment(state, mode, activity)?)
    }

    pub fn mode(&self, mode: ModeLabel, activity: RadioActivity) -> Result<f64, PowerError> {
        self.get(ProfileKey::Mode(mode, activity))
    }

    pub fn entries(&self) -> impl Iterator<Item = (ProfileKey, f64)> + '_ {
        self.watts.iter().map(|(k, v)| (*k, *v))
    }

    /// Checks non-negativity, the state ordering, and the wake-up radio bound.
    pub fn validate(&self) -> Result<(), PowerError> {
        let mut problems = Vec::new();
        for (k, v) in &self.watts {
            if !(*v >= 0.0) || !v.is_finite() {
                problems.push(format!("{k} = {v} is not a non-negative number"));
            }
        }
        if !(self.wur_watts >= 0.0 && self.wur_watts < WUR_POWER_BOUND_W) {
            problems.push(format!("wur = {} must lie in [0, 0.001) W", self.wur_watts));
        }
        let chain = [
            ProfileKey::Doze,
            ProfileKey::Listen(RadioActivity::Idle),
            ProfileKey::InterruptibleListen(RadioActivity::Idle),
            ProfileKey::Mode(ModeLabel::Lcm, RadioActivity::Idle),
            ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Idle),
        ];
        let mut values = Vec::new();
        for key in chain {
            match self.get(key) {
                Ok(v) => values.push(v),
                Err(_) => problems.push(format!("missing required entry `{key}`")),
            }
        }
        if values.len() == chain.len() {
            if !(values[0] < values[1]) {
                problems.push(String::from("doze must draw strictly less than listen"));
            }
            for i in 1..chain.len() - 1 {
                if values[i] > values[i + 1] {
                    problems.push(format!("`{}` exceeds `{}`", chain[i], chain[i + 1]));
                }
            }
        }
        for mode in [ModeLabel::Lcm, ModeLabel::Hcm] {
            let row = [RadioActivity::Idle, RadioActivity::Rx, RadioActivity::Tx].map(|a| self.mode(mode, a));
            match row {
                [Ok(idle), Ok(rx), Ok(tx)] => {
                    if !(idle <= rx && rx <= tx) {
                        problems.push(format!("{mode} must satisfy idle <= rx <= tx"));
                    }
                }
                _ => problems.push(format!("missing {mode} idle/rx/tx entries")),
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(PowerError::InvalidProfile(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: PowerState,
    pub mode: ModeLabel,
    pub activity: RadioActivity,
    /// Seconds.
    pub duration: f64,
}

impl Segment {
    pub fn new(state: PowerState, mode: ModeLabel, activity: RadioActivity, duration: f64) -> Self {
        Self { state, mode, activity, duration }
    }

    fn same_kind(&self, other: &Segment) -> bool {
        self.state == other.state && self.mode == other.mode && self.activity == other.activity
    }
}

/// Ordered (state, mode, activity, duration) segments of one device.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateTimeline {
    pub segments: Vec<Segment>,
}

impl StateTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a segment, merging it into the previous one when the kind matches.
    pub fn push(&mut self, segment: Segment) {
        if let Some(last) = self.segments.last_mut() {
            if last.same_kind(&segment) {
                last.duration += segment.duration;
                return;
            }
        }
        self.segments.push(segment);
    }

    pub fn extend(&mut self, other: &StateTimeline) {
        for s in &other.segments {
            self.push(*s);
        }
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Total seconds spent in segments matching `pred`.
    pub fn time_where(&self, pred: impl Fn(&Segment) -> bool) -> f64 {
        self.segments.iter().filter(|s| pred(s)).map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        for s in &self.segments {
            if !(s.duration >= 0.0) {
                return Err(PowerError::NegativeDuration(s.duration));
            }
            if !s.state.permits(s.activity) {
                return Err(PowerError::ActivityNotPermitted { state: s.state, activity: s.activity });
            }
        }
        Ok(())
    }
}

/// Energy in joules: the sum of power × duration over all segments.
pub fn energy(timeline: &StateTimeline, profile: &PowerProfile) -> Result<f64, PowerError> {
    timeline.validate()?;
    timeline
        .segments
        .iter()
        .try_fold(0.0, |acc, s| Ok(acc + profile.watts(s.state, s.mode, s.activity)? * s.duration))
}

/// Mean power in watts over the whole timeline.
pub fn average_power(timeline: &StateTimeline, profile: &PowerProfile) -> Result<f64, PowerError> {
    let total = timeline.total_duration();
    if !(total > 0.0) {
        return Err(PowerError::UndefinedAverage);
    }
    Ok(energy(timeline, profile)? / total)
}

/// Relative reduction of `candidate` with respect to `baseline`, in percent.
pub fn savings_percent(baseline: f64, candidate: f64) -> Result<f64, PowerError> {
    if !(baseline > 0.0) {
        return Err(PowerError::InvalidBaseline(baseline));
    }
    Ok(100.0 * (baseline - candidate) / baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use RadioActivity::*;

    fn seg(state: PowerState, mode: ModeLabel, activity: RadioActivity, d: f64) -> Segment {
        Segment::new(state, mode, activity, d)
    }

    #[test]
    fn empty_timeline_has_zero_energy() {
        assert_eq!(energy(&StateTimeline::new(), &PowerProfile::reference()).unwrap(), 0.0);
    }

    #[test]
    fn single_doze_segment() {
        let mut p = PowerProfile::reference();
        p.set(ProfileKey::Doze, 0.5);
        let mut t = StateTimeline::new();
        t.push(seg(PowerState::Doze, ModeLabel::Lcm, Off, 10.0));
        assert_eq!(energy(&t, &p).unwrap(), 5.0);
    }

    #[test]
    fn three_mixed_segments() {
        let p = PowerProfile::reference();
        let segs = [
            seg(PowerState::FullCapabilities, ModeLabel::Hcm, Tx, 0.25),
            seg(PowerState::Listen, ModeLabel::Lcm, Rx, 1.5),
            seg(PowerState::ReducedCapabilities, ModeLabel::Lcm, Idle, 3.0),
        ];
        let mut t = StateTimeline::new();
        let mut oracle = 0.0;
        for s in segs {
            t.push(s);
        }
        // Independent lookup by configuration-file key name.
        for (name, d) in [("hcm.tx", 0.25), ("listen.rx", 1.5), ("lcm.idle", 3.0)] {
            let w = p.entries().find(|(k, _)| k.name() == name).unwrap().1;
            oracle += w * d;
        }
        assert!((energy(&t, &p).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn average_power_cases() {
        let mut p = PowerProfile::reference();
        p.set(ProfileKey::Doze, 0.5);
        p.set(ProfileKey::Mode(ModeLabel::Hcm, Idle), 4.0);
        let mut t = StateTimeline::new();
        t.push(seg(PowerState::Doze, ModeLabel::Hcm, Off, 2.0));
        assert_eq!(average_power(&t, &p).unwrap(), 0.5);
        t.push(seg(PowerState::FullCapabilities, ModeLabel::Hcm, Idle, 2.0));
        assert_eq!(average_power(&t, &p).unwrap(), 2.25);
        assert_eq!(average_power(&StateTimeline::new(), &p), Err(PowerError::UndefinedAverage));
    }

    #[test]
    fn savings_cases() {
        assert_eq!(savings_percent(100.0, 72.0).unwrap(), 28.0);
        assert_eq!(savings_percent(100.0, 65.0).unwrap(), 35.0);
        assert_eq!(savings_percent(3.7, 3.7).unwrap(), 0.0);
        assert!(savings_percent(10.0, 12.0).unwrap() < 0.0);
        assert_eq!(savings_percent(0.0, 1.0), Err(PowerError::InvalidBaseline(0.0)));
    }

    #[test]
    fn missing_entry_is_reported() {
        let mut p = PowerProfile::new(0.0);
        p.set(ProfileKey::Doze, 0.1);
        let mut t = StateTimeline::new();
        t.push(seg(PowerState::FullCapabilities, ModeLabel::Hcm, Tx, 1.0));
        assert_eq!(
            energy(&t, &p),
            Err(PowerError::IncompleteProfile(ProfileKey::Mode(ModeLabel::Hcm, Tx)))
        );
    }

    #[test]
    fn forbidden_activities() {
        assert!(!PowerState::Listen.permits(Tx));
        assert!(!PowerState::Doze.permits(Idle));
        let mut t = StateTimeline::new();
        t.push(seg(PowerState::Listen, ModeLabel::Lcm, Tx, 1.0));
        assert!(matches!(energy(&t, &PowerProfile::reference()), Err(PowerError::ActivityNotPermitted { .. })));
    }

    #[test]
    fn reference_profile_is_valid() {
        PowerProfile::reference().validate().unwrap();
        let mut bad = PowerProfile::reference();
        bad.set(ProfileKey::Listen(Idle), 0.1);
        bad.wur_watts = 0.002;
        let Err(PowerError::InvalidProfile(problems)) = bad.validate() else { panic!() };
        assert_eq!(problems.len(), 2);
    }

    #[test]
    fn key_names_round_trip() {
        for (k, _) in PowerProfile::reference().entries() {
            assert_eq!(k.name().parse::<ProfileKey>(), Ok(k));
        }
        assert!("hcm.off".parse::<ProfileKey>().is_err());
    }

    #[test]
    fn push_merges_adjacent() {
        let mut t = StateTimeline::new();
        t.push(seg(PowerState::Doze, ModeLabel::Lcm, Off, 1.0));
        t.push(seg(PowerState::Doze, ModeLabel::Lcm, Off, 2.0));
        assert_eq!(t.segments.len(), 1);
        assert_eq!(t.total_duration(), 3.0);
    }
}
