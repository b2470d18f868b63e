use bnps_core::analysis::{
    analytic_crossover, calibrate_profile, campus_study, crossover_point, crossover_study, load_sweep, CampusPolicy,
};
use bnps_core::phy::{ModeLabel, PhyConfig};
use bnps_core::power::{PowerProfile, ProfileKey, RadioActivity};
use bnps_core::sim::SimConfig;
use bnps_core::trace::{synth_campus, DiurnalParams, TraceSample};
use bnps_core::AnalysisError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn modes() -> (PhyConfig, PhyConfig) {
    (PhyConfig::lcm_default(), PhyConfig::hcm_default())
}

fn calibrated() -> PowerProfile {
    let (l, h) = modes();
    calibrate_profile(29e6, l, h, &PowerProfile::reference()).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Closed-form crossover from the literal profile numbers and PHY rates.
#[test]
fn calibration_lands_on_target() {
    let (l, h) = modes();
    let p = calibrated();
    let (li, lt) = (p.mode(ModeLabel::Lcm, RadioActivity::Idle).unwrap(), p.mode(ModeLabel::Lcm, RadioActivity::Tx).unwrap());
    let (hi, ht) = (p.mode(ModeLabel::Hcm, RadioActivity::Idle).unwrap(), p.mode(ModeLabel::Hcm, RadioActivity::Tx).unwrap());
    let (rl, rh) = (52.0 * 6.0 * 5.0 / 6.0 / 3.6e-6, 2.0 * 234.0 * 6.0 * 5.0 / 6.0 / 3.6e-6);
    // Per-second energies equal: li + L (lt - li) / rl = hi + L (ht - hi) / rh.
    let x = (hi - li) / ((lt - li) / rl - (ht - hi) / rh);
    assert!((28.42e6..=29.58e6).contains(&x), "{x}");
    assert!(close(analytic_crossover(&p, l, h).unwrap().unwrap(), x, 1e-9));
    p.validate().unwrap();
    for target in [5e6, 15e6, 35e6] {
        let q = calibrate_profile(target, l, h, &p).unwrap();
        let got = analytic_crossover(&q, l, h).unwrap().unwrap();
        assert!((got - target).abs() <= 0.02 * target, "{target}: {got}");
        let mut others = q.clone();
        others.set(ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Idle), 4.0);
        let mut base = p.clone();
        base.set(ProfileKey::Mode(ModeLabel::Hcm, RadioActivity::Idle), 4.0);
        assert_eq!(others, base, "only HCM idle may change");
    }
    let err = calibrate_profile(100e6, l, h, &p).unwrap_err();
    assert!(matches!(&err, AnalysisError::CalibrationFailure(m) if m.contains("HCM idle")), "{err}");
}

#[test]
fn idle_ap_draws_idle_power_plus_beacons() {
    let (l, h) = modes();
    let p = PowerProfile::reference();
    let cfg = SimConfig { sim_duration_us: 1_000_000, ..SimConfig::default() };
    for mode in [ModeLabel::Lcm, ModeLabel::Hcm] {
        let pt = crossover_point(0.0, mode, &p, l, h, &cfg).unwrap();
        let idle = p.mode(mode, RadioActivity::Idle).unwrap();
        let tx = p.mode(mode, RadioActivity::Tx).unwrap();
        // Nine 244 µs Beacons in one second.
        let share = 9.0 * 244e-6;
        assert!(close(pt.avg_watts, idle * (1.0 - share) + tx * share, 1e-9), "{mode:?}: {}", pt.avg_watts);
    }
}

#[test]
fn short_sweep_crosses_near_29_mbps() {
    let (l, h) = modes();
    let p = calibrated();
    let cfg = SimConfig { sim_duration_us: 2_000_000, ..SimConfig::default() };
    let r = crossover_study(&load_sweep(1e6, 60e6, 12), &p, l, h, &cfg).unwrap();
    let x = r.crossover_bps.unwrap();
    assert!((x - 29e6).abs() <= 0.15 * 29e6, "{x}");
    assert!(r.peak_saving().unwrap() >= 25.0);
    assert!(r.point(1e6, ModeLabel::Lcm).unwrap().avg_watts < r.point(1e6, ModeLabel::Hcm).unwrap().avg_watts);
    for &(load, s) in &r.savings {
        let (hp, lp) = (r.point(load, ModeLabel::Hcm).unwrap(), r.point(load, ModeLabel::Lcm).unwrap());
        let (hcm, lcm) = (hp.avg_watts, lp.avg_watts);
        // A saturated mode does not carry the load, so its power is not comparable.
        if hp.saturated || lp.saturated || (hcm - lcm).abs() <= 0.03 * hcm {
            continue;
        }
        if load < x {
            assert!(s > 0.0, "{load}: {s}");
        } else {
            assert!(s < 0.0, "{load}: {s}");
        }
    }
    assert!(r.points.iter().any(|p| p.saturated));
    assert!(matches!(crossover_study(&[], &p, l, h, &cfg), Err(AnalysisError::NoLoads)));
}

/// FNV-1a over each part plus a separator, finished with SplitMix64, mapped to [0, 1).
fn oracle_unit(ap: &str, t: i64) -> f64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in [ap.as_bytes(), &t.to_le_bytes()[..]] {
        for b in part.iter().copied().chain([0xffu8]) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    }
    let mut z = h.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / 9_007_199_254_740_992.0
}

struct Oracle {
    static_w: f64,
    sdps_w: f64,
    savings: f64,
}

fn oracle(s: &TraceSample, p: &PowerProfile, policy: &CampusPolicy) -> Oracle {
    let (threshold, doze_fraction) = (policy.mode_threshold_bps, policy.doze_fraction);
    let beacons = policy.beacon_duty * p.mode(ModeLabel::Lcm, RadioActivity::Tx).unwrap();
    let w = |m, a| p.mode(m, a).unwrap();
    let window = 600.0;
    let (rl, rh) = (72_222_222.222_222_22, 650e6);
    let watts = |m: ModeLabel, rate: f64| {
        let mut tx = s.dl_bytes as f64 * 8.0 / rate;
        let mut rx = s.ul_bytes as f64 * 8.0 / rate;
        if tx + rx > window {
            let k = window / (tx + rx);
            tx *= k;
            rx = window - tx;
        }
        (w(m, RadioActivity::Tx) * tx + w(m, RadioActivity::Rx) * rx + w(m, RadioActivity::Idle) * (window - tx - rx)) / window
    };
    let static_w = watts(ModeLabel::Hcm, rh) + beacons;
    let bps = (s.dl_bytes + s.ul_bytes) as f64 * 8.0 / window;
    let sdps_w = if s.dl_bytes + s.ul_bytes == 0 {
        if oracle_unit(&s.ap_id, s.t_start) < doze_fraction {
            p.get(ProfileKey::Doze).unwrap()
        } else {
            w(ModeLabel::Lcm, RadioActivity::Idle)
        }
    } else if bps > threshold {
        watts(ModeLabel::Hcm, rh)
    } else {
        watts(ModeLabel::Lcm, rl)
    } + beacons;
    Oracle { static_w, sdps_w, savings: 100.0 * (static_w - sdps_w) / static_w }
}

fn random_samples(n: usize, seed: u64) -> Vec<TraceSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let ap = format!("ap-{}", rng.gen_range(0..500));
            let t = 1_500_000_000 + 600 * rng.gen_range(0i64..10_000);
            let (dl, ul) = match rng.gen_range(0..10) {
                0..=2 => (0, 0),
                3 => (rng.gen_range(0..60_000_000_000u64), rng.gen_range(0..10_000_000_000u64)),
                _ => {
                    let total = (rng.gen::<f64>().powi(3) * 6e9) as u64;
                    let dl = rng.gen_range(0..=total);
                    (dl, total - dl)
                }
            };
            TraceSample::new(ap, t, dl, ul)
        })
        .collect()
}

#[test]
fn campus_matches_the_per_sample_oracle() {
    let (l, h) = modes();
    let p = calibrated();
    for (policy, seed) in [
        (CampusPolicy::default(), 1),
        (CampusPolicy { doze_fraction: 0.0, mode_threshold_bps: 10e6, ..Default::default() }, 2),
        (CampusPolicy { doze_fraction: 1.0, beacon_duty: 0.0, ..Default::default() }, 3),
    ] {
        let trace = random_samples(10_000, seed);
        let r = campus_study(&trace, &policy, &p, l, h).unwrap();
        assert_eq!(r.windows.len(), trace.len());
        let (mut st, mut sd) = (0.0, 0.0);
        for (s, w) in trace.iter().zip(&r.windows) {
            let o = oracle(s, &p, &policy);
            assert!(close(w.static_watts, o.static_w, 1e-9), "{s:?}");
            assert!(close(w.sdps_watts, o.sdps_w, 1e-9), "{s:?}");
            assert!(close(w.savings_pct, o.savings, 1e-9), "{s:?}");
            st += o.static_w;
            sd += o.sdps_w;
        }
        assert!(close(r.daily_savings_pct, 100.0 * (st - sd) / st, 1e-9));
        assert!(r.overloaded_windows > 0);
    }
}

#[test]
fn zero_traffic_without_doze_saves_the_idle_gap() {
    let (l, h) = modes();
    let p = PowerProfile::reference();
    let trace: Vec<TraceSample> = (0..200).map(|i| TraceSample::new(format!("ap-{}", i % 7), 600 * i, 0, 0)).collect();
    let policy = CampusPolicy { doze_fraction: 0.0, beacon_duty: 0.0, ..Default::default() };
    let r = campus_study(&trace, &policy, &p, l, h).unwrap();
    let expect = 100.0 * (4.0 - 2.8) / 4.0;
    assert!(r.windows.iter().all(|w| close(w.savings_pct, expect, 1e-12)));
    let all = campus_study(&trace, &CampusPolicy { doze_fraction: 1.0, beacon_duty: 0.0, ..Default::default() }, &p, l, h)
        .unwrap();
    assert!(all.windows.iter().all(|w| w.mode.is_none() && close(w.savings_pct, 90.0, 1e-12)));
}

#[test]
fn lower_doze_power_never_lowers_savings() {
    let (l, h) = modes();
    let p = calibrated();
    let mut frugal = p.clone();
    frugal.set(ProfileKey::Doze, 0.05);
    let trace = random_samples(2_000, 9);
    let policy = CampusPolicy::default();
    let a = campus_study(&trace, &policy, &p, l, h).unwrap();
    let b = campus_study(&trace, &policy, &frugal, l, h).unwrap();
    for (x, y) in a.windows.iter().zip(&b.windows) {
        assert!(y.savings_pct >= x.savings_pct);
    }
    assert!(b.daily_savings_pct > a.daily_savings_pct);
}

#[test]
fn doze_selection_is_close_to_the_fraction() {
    let (l, h) = modes();
    let trace: Vec<TraceSample> =
        (0..20_000).map(|i| TraceSample::new(format!("ap-{}", i % 470), 600 * (i / 470), 0, 0)).collect();
    let r = campus_study(&trace, &CampusPolicy::default(), &PowerProfile::reference(), l, h).unwrap();
    let dozed = r.windows.iter().filter(|w| w.mode.is_none()).count() as f64 / trace.len() as f64;
    assert!((dozed - 0.5).abs() < 0.02, "{dozed}");
}

#[test]
fn synthetic_campus_day() {
    let (l, h) = modes();
    let trace = synth_campus(470, 1, &DiurnalParams::default(), 1);
    let r = campus_study(&trace, &CampusPolicy::default(), &calibrated(), l, h).unwrap();
    assert!((20.0..=35.0).contains(&r.daily_savings_pct), "{}", r.daily_savings_pct);
    let night = r.savings_between(0, 6).unwrap();
    let office = r.savings_between(8, 20).unwrap();
    assert!(night > office && night >= 30.0, "{night} {office}");
    assert_eq!(r.hourly.len(), 24);
    assert!(matches!(campus_study(&[], &CampusPolicy::default(), &calibrated(), l, h), Err(AnalysisError::EmptyTrace)));
}
