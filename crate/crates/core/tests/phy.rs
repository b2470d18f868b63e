use bnps_core::phy::{data_rate, frame_airtime_ns, Bandwidth, GuardInterval, MacOverheadParams, PhyConfig};

const BANDWIDTHS: [Bandwidth; 4] = [Bandwidth::Mhz20, Bandwidth::Mhz40, Bandwidth::Mhz80, Bandwidth::Mhz160];

/// Published single-stream VHT rates in Mbps, long GI, rounded to 0.1; `None` where no rate exists.
const TABLE_LGI: [[Option<f64>; 10]; 4] = [
    [Some(6.5), Some(13.0), Some(19.5), Some(26.0), Some(39.0), Some(52.0), Some(58.5), Some(65.0), Some(78.0), None],
    [Some(13.5), Some(27.0), Some(40.5), Some(54.0), Some(81.0), Some(108.0), Some(121.5), Some(135.0), Some(162.0), Some(180.0)],
    [Some(29.3), Some(58.5), Some(87.8), Some(117.0), Some(175.5), Some(234.0), Some(263.3), Some(292.5), Some(351.0), Some(390.0)],
    [Some(58.5), Some(117.0), Some(175.5), Some(234.0), Some(351.0), Some(468.0), Some(526.5), Some(585.0), Some(702.0), Some(780.0)],
];

/// Same table for the short GI.
const TABLE_SGI: [[Option<f64>; 10]; 4] = [
    [Some(7.2), Some(14.4), Some(21.7), Some(28.9), Some(43.3), Some(57.8), Some(65.0), Some(72.2), Some(86.7), None],
    [Some(15.0), Some(30.0), Some(45.0), Some(60.0), Some(90.0), Some(120.0), Some(135.0), Some(150.0), Some(180.0), Some(200.0)],
    [Some(32.5), Some(65.0), Some(97.5), Some(130.0), Some(195.0), Some(260.0), Some(292.5), Some(325.0), Some(390.0), Some(433.3)],
    [Some(65.0), Some(130.0), Some(195.0), Some(260.0), Some(390.0), Some(520.0), Some(585.0), Some(650.0), Some(780.0), Some(866.7)],
];

/// Independent arithmetic: data subcarriers × modulation bits × coding rate × streams / symbol time.
fn oracle_bps(bw: usize, mcs: usize, nss: u8, short_gi: bool) -> f64 {
    let n_sd = [52.0, 108.0, 234.0, 468.0][bw];
    let (bits, rate) = [
        (1.0, 0.5),
        (2.0, 0.5),
        (2.0, 0.75),
        (4.0, 0.5),
        (4.0, 0.75),
        (6.0, 2.0 / 3.0),
        (6.0, 0.75),
        (6.0, 5.0 / 6.0),
        (8.0, 0.75),
        (8.0, 5.0 / 6.0),
    ][mcs];
    let t_sym = if short_gi { 3.6e-6 } else { 4.0e-6 };
    n_sd * bits * rate * f64::from(nss) / t_sym
}

#[test]
fn rates_match_the_mcs_table() {
    let mut checked = 0;
    for (b, bw) in BANDWIDTHS.into_iter().enumerate() {
        for mcs in 0..10u8 {
            for nss in 1..=2u8 {
                for (gi, table) in [(GuardInterval::Long, &TABLE_LGI), (GuardInterval::Short, &TABLE_SGI)] {
                    let cfg = PhyConfig::new(mcs, bw, nss, gi);
                    match table[b][mcs as usize] {
                        None => assert!(data_rate(&cfg).is_err(), "{cfg:?} should be invalid"),
                        Some(mbps) => {
                            let got = data_rate(&cfg).unwrap();
                            let exact = oracle_bps(b, mcs as usize, nss, gi == GuardInterval::Short);
                            assert!((got - exact).abs() <= 1e-9 * exact, "{cfg:?}: {got} vs {exact}");
                            assert!((got / 1e6 - mbps * f64::from(nss)).abs() <= 0.05 * f64::from(nss) + 1e-9, "{cfg:?}");
                            checked += 1;
                        }
                    }
                }
            }
        }
    }
    assert_eq!(checked, 4 * 10 * 2 * 2 - 4);
}

#[test]
fn reference_points() {
    let lcm = data_rate(&PhyConfig::lcm_default()).unwrap();
    let hcm = data_rate(&PhyConfig::hcm_default()).unwrap();
    assert!((lcm / 1e6 - 72.2).abs() < 0.05);
    assert!((hcm / 1e6 - 650.0).abs() < 1e-9);
}

#[test]
fn airtime_examples() {
    let o = MacOverheadParams::default();
    // 40 µs preamble + ceil((16 + 8·1540 + 6) / bits per symbol) symbols.
    assert_eq!(frame_airtime_ns(1500, &PhyConfig::lcm_default(), &o).unwrap(), 40_000 + 48 * 3_600);
    assert_eq!(frame_airtime_ns(1500, &PhyConfig::hcm_default(), &o).unwrap(), 40_000 + 6 * 3_600);
    assert_eq!(frame_airtime_ns(120, &PhyConfig::basic_rate(), &o).unwrap(), 40_000 + 51 * 4_000);
    assert_eq!(frame_airtime_ns(0, &PhyConfig::lcm_default(), &o).unwrap(), 40_000);
}
