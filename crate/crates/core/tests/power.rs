use bnps_core::phy::ModeLabel;
use bnps_core::power::{average_power, energy, savings_percent, PowerProfile, PowerState, RadioActivity, Segment, StateTimeline};
use proptest::prelude::*;

fn segment() -> impl Strategy<Value = Segment> {
    let state = prop::sample::select(PowerState::ALL.to_vec());
    let mode = prop_oneof![Just(ModeLabel::Lcm), Just(ModeLabel::Hcm)];
    let activity = prop::sample::select(vec![RadioActivity::Tx, RadioActivity::Rx, RadioActivity::Idle]);
    (state, mode, activity, 0.0f64..10.0).prop_map(|(state, mode, activity, d)| {
        let activity = match state {
            PowerState::Doze => RadioActivity::Off,
            PowerState::Listen if activity == RadioActivity::Tx => RadioActivity::Rx,
            _ => activity,
        };
        Segment::new(state, mode, activity, d)
    })
}

fn timeline() -> impl Strategy<Value = StateTimeline> {
    prop::collection::vec(segment(), 0..20).prop_map(|segs| {
        let mut t = StateTimeline::new();
        for s in segs {
            t.push(s);
        }
        t
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn energy_is_additive(a in timeline(), b in timeline()) {
        let p = PowerProfile::reference();
        let mut ab = a.clone();
        ab.extend(&b);
        let sum = energy(&a, &p).unwrap() + energy(&b, &p).unwrap();
        prop_assert!((energy(&ab, &p).unwrap() - sum).abs() <= 1e-9 * sum.max(1.0));
    }

    #[test]
    fn average_power_is_bounded_by_the_table(t in timeline()) {
        let p = PowerProfile::reference();
        prop_assume!(t.total_duration() > 0.0);
        let avg = average_power(&t, &p).unwrap();
        let watts: Vec<f64> = t
            .segments
            .iter()
            .filter(|s| s.duration > 0.0)
            .map(|s| p.watts(s.state, s.mode, s.activity).unwrap())
            .collect();
        let lo = watts.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = watts.iter().cloned().fold(0.0, f64::max);
        prop_assert!(avg >= lo - 1e-9 && avg <= hi + 1e-9);
    }

    #[test]
    fn dozing_instead_of_idling_saves(t in timeline(), extra in 0.001f64..10.0) {
        let p = PowerProfile::reference();
        let mut idle = t.clone();
        idle.push(Segment::new(PowerState::ReducedCapabilities, ModeLabel::Lcm, RadioActivity::Idle, extra));
        let mut doze = t;
        doze.push(Segment::new(PowerState::Doze, ModeLabel::Lcm, RadioActivity::Off, extra));
        let s = savings_percent(energy(&idle, &p).unwrap(), energy(&doze, &p).unwrap()).unwrap();
        prop_assert!(s > 0.0);
    }
}

#[test]
fn reference_profile_is_valid() {
    let p = PowerProfile::reference();
    p.validate().unwrap();
    let lcm = p.mode(ModeLabel::Lcm, RadioActivity::Idle).unwrap();
    let hcm = p.mode(ModeLabel::Hcm, RadioActivity::Idle).unwrap();
    assert!((savings_percent(hcm, lcm).unwrap() - 30.0).abs() < 1e-9);
}
