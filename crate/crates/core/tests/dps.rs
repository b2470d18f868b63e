use std::collections::BTreeSet;

use bnps_core::dps::{
    drain_pending, next_grant_check, on_icf, on_icf_bytes, tick, encode_icf, ApModeState, CapabilityTuple, DpsPolicy,
    HcmGrant, IcfDecision, IcfFrame, PolicyKind,
};
use bnps_core::phy::{Bandwidth, ModeLabel};
use proptest::prelude::*;

fn max_caps() -> CapabilityTuple {
    CapabilityTuple { bandwidth: Bandwidth::Mhz80, nss: 2, mcs: 7 }
}

#[derive(Debug, Clone)]
enum Op {
    Icf { sta: u16, ll: bool },
    Exchange,
    Idle,
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        4 => (1u16..12, prop::bool::weighted(0.2)).prop_map(|(sta, ll)| Op::Icf { sta, ll }),
        2 => Just(Op::Exchange),
        1 => Just(Op::Idle),
    ]
}

fn grant() -> impl Strategy<Value = HcmGrant> {
    prop_oneof![
        (100u32..20_000).prop_map(HcmGrant::ExplicitDuration),
        (100u32..20_000).prop_map(HcmGrant::InactivityTimeout),
    ]
}

fn policy() -> impl Strategy<Value = DpsPolicy> {
    (any::<bool>(), 1usize..5, 1u64..60_000).prop_map(|(defer, defer_batch_min, max_defer)| DpsPolicy {
        kind: if defer { PolicyKind::Defer } else { PolicyKind::AlwaysAccept },
        defer_batch_min,
        max_defer,
    })
}

fn icf(sta: u16, ll: bool, grant: HcmGrant) -> IcfFrame {
    IcfFrame { sta_id: sta, requested: CapabilityTuple { bandwidth: Bandwidth::Mhz160, nss: 4, mcs: 9 }, grant, ll_flag: ll, padding_len: 0 }
}

/// What the AP observed while being driven through a random op sequence.
#[derive(Default)]
struct Log {
    ll_deferred: usize,
    max_pending_always_accept: usize,
    unserved_at_entry: Vec<u16>,
    early_hcm: Vec<(u64, u64)>,
}

/// Plays the AP side: every op happens `dt` µs after the previous one, HCM entries
/// drain the deferred queue, grants are checked, and deferral batches are served.
fn drive(policy: DpsPolicy, grant: HcmGrant, up: u64, down: u64, ops: &[(u64, Op)]) -> Log {
    let mut st = ApModeState::new(0, max_caps(), up, down);
    let mut log = Log::default();
    let mut deferred: BTreeSet<u16> = BTreeSet::new();
    let mut now = 0;
    let mut was_hcm = false;
    for (dt, op) in ops {
        now += dt;
        st.advance(now);
        let is_hcm = st.mode == ModeLabel::Hcm;
        if is_hcm && !was_hcm {
            let served: BTreeSet<u16> = drain_pending(&mut st, now).unwrap().iter().map(|tf| tf.sta_id).collect();
            log.unserved_at_entry.extend(deferred.difference(&served));
            deferred.clear();
        }
        was_hcm = is_hcm;
        tick(&mut st, now);
        if st.deferral_due(&policy, now) {
            st.enter_hcm(now, grant);
        }
        match op {
            Op::Icf { sta, ll } => {
                let before = st.clone();
                match on_icf(&mut st, &icf(*sta, *ll, grant), &policy, now) {
                    IcfDecision::Deferred => {
                        if *ll {
                            log.ll_deferred += 1;
                        }
                        deferred.insert(*sta);
                    }
                    IcfDecision::SwitchNow(icr) => {
                        let mut probe = before.clone();
                        probe.advance(now);
                        if probe.mode == ModeLabel::Lcm {
                            let mut early = st.clone();
                            early.advance(icr.effective_at.saturating_sub(1).max(now));
                            if icr.effective_at < now + up || (icr.effective_at > now && early.mode == ModeLabel::Hcm) {
                                log.early_hcm.push((now, icr.effective_at));
                            }
                        }
                    }
                    IcfDecision::AlreadyHcm(_) => {}
                }
            }
            Op::Exchange => st.record_exchange(now),
            Op::Idle => {}
        }
        if policy.kind == PolicyKind::AlwaysAccept {
            log.max_pending_always_accept = log.max_pending_always_accept.max(st.pending.len());
        }
    }
    log
}

fn ops() -> impl Strategy<Value = Vec<(u64, Op)>> {
    prop::collection::vec((0u64..15_000, op()), 1..80)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ll_icfs_are_never_deferred(p in policy(), g in grant(), up in 0u64..500, down in 0u64..500, ops in ops()) {
        let p = DpsPolicy { kind: PolicyKind::Defer, ..p };
        prop_assert_eq!(drive(p, g, up, down, &ops).ll_deferred, 0);
    }

    #[test]
    fn always_accept_keeps_the_queue_empty(p in policy(), g in grant(), up in 0u64..500, down in 0u64..500, ops in ops()) {
        let p = DpsPolicy { kind: PolicyKind::AlwaysAccept, ..p };
        prop_assert_eq!(drive(p, g, up, down, &ops).max_pending_always_accept, 0);
    }

    #[test]
    fn deferred_requests_get_a_tf_at_the_next_hcm_entry(p in policy(), g in grant(), up in 0u64..500, down in 0u64..500, ops in ops()) {
        let p = DpsPolicy { kind: PolicyKind::Defer, ..p };
        let log = drive(p, g, up, down, &ops);
        prop_assert!(log.unserved_at_entry.is_empty(), "{:?}", log.unserved_at_entry);
    }

    #[test]
    fn no_hcm_before_the_transition_delay(p in policy(), g in grant(), up in 0u64..500, down in 0u64..500, ops in ops()) {
        let log = drive(p, g, up, down, &ops);
        prop_assert!(log.early_hcm.is_empty(), "{:?}", log.early_hcm);
    }

    #[test]
    fn inactivity_timeout_returns_to_lcm(
        timeout in 1u32..50_000,
        up in 0u64..1_000,
        down in 0u64..1_000,
        start in 0u64..1_000_000,
        exchanges in prop::collection::vec(0u64..40_000, 0..10),
    ) {
        let mut st = ApModeState::new(0, max_caps(), up, down);
        let policy = DpsPolicy::always_accept();
        let d = on_icf(&mut st, &icf(1, false, HcmGrant::InactivityTimeout(timeout)), &policy, start);
        let IcfDecision::SwitchNow(icr) = d else { panic!("{d:?}") };
        prop_assert_eq!(icr.effective_at, start + up);
        // Exchanges while in HCM, each less than the timeout after the previous one.
        let mut t = icr.effective_at;
        st.advance(t);
        prop_assert_eq!(st.mode, ModeLabel::Hcm);
        for gap in exchanges {
            t += gap % u64::from(timeout);
            prop_assert_eq!(tick(&mut st, t), None);
            st.record_exchange(t);
        }
        let due = next_grant_check(&st).unwrap();
        prop_assert_eq!(due, t + u64::from(timeout));
        if due > 0 {
            prop_assert_eq!(tick(&mut st, due - 1), None);
        }
        let change = tick(&mut st, due).unwrap();
        prop_assert_eq!(change.to, ModeLabel::Lcm);
        prop_assert_eq!(change.at, due + down);
        st.advance(due + down);
        prop_assert_eq!(st.mode, ModeLabel::Lcm);
    }

    #[test]
    fn explicit_duration_ends_hcm(d in 1u32..50_000, up in 0u64..1_000, down in 0u64..1_000, start in 0u64..1_000_000) {
        let mut st = ApModeState::new(0, max_caps(), up, down);
        on_icf(&mut st, &icf(1, false, HcmGrant::ExplicitDuration(d)), &DpsPolicy::always_accept(), start);
        let end = start + up + u64::from(d);
        prop_assert_eq!(tick(&mut st, end - 1), None);
        prop_assert_eq!(tick(&mut st, end).map(|c| c.at), Some(end + down));
    }
}

#[test]
fn corrupt_icf_bytes_change_nothing() {
    let mut st = ApModeState::new(0, max_caps(), 100, 100);
    let mut bytes = encode_icf(&icf(3, true, HcmGrant::InactivityTimeout(1_000)));
    bytes[2] ^= 0x10;
    assert!(on_icf_bytes(&mut st, &bytes, &DpsPolicy::defer(), 10).is_err());
    assert_eq!(st.mode, ModeLabel::Lcm);
    assert!(st.transition.is_none() && st.pending.is_empty());
}

#[test]
fn granted_capabilities_are_capped() {
    let mut st = ApModeState::new(0, max_caps(), 100, 100);
    let IcfDecision::SwitchNow(icr) =
        on_icf(&mut st, &icf(3, false, HcmGrant::InactivityTimeout(1_000)), &DpsPolicy::always_accept(), 0)
    else {
        panic!()
    };
    assert_eq!(icr.granted, max_caps());
}
