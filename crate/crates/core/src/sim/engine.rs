use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::dcf::{freeze_backoffs, thaw_backoffs, DcfState, FreezeReason};
use super::event::{EventKind, EventQueue, Nanos, TimerKind};
use super::report::*;
use super::scenario::{Mechanism, ScenarioSpec, AP_ID};
use super::SimConfig;
use crate::dps::{encode_icf, encode_icr, encode_tf, IcfFrame, TriggerFrame, ICR_LEN};
use crate::dps::{self, ApModeState, CapabilityTuple, DpsPolicy, HcmGrant, IcfDecision};
use crate::error::SimError;
use crate::phy::{frame_airtime_ns, MacOverheadParams, ModeLabel, PhyConfig};
use crate::power::{PowerState, RadioActivity};
use crate::rng::stream;
use crate::sched::{ScheduleManager, StaListenInfo};
use crate::trace::{Direction, FlowKind, FlowSpec, TrafficClass};

const DOMAIN_DEVICE: u64 = 0x6465_7669_6365;
const DOMAIN_FLOW: u64 = 0x666c_6f77;
const DOMAIN_OBSS_FLOW: u64 = 0x6f62_7373;

/// Bytes of a schedule element carrying `groups` interval groups.
fn element_len(groups: usize) -> u32 {
    2 + 11 + 15 * groups as u32
}

fn control_overhead(base: &MacOverheadParams) -> MacOverheadParams {
    MacOverheadParams { mac_header_bytes: 10, fcs_bytes: 0, ..*base }
}

pub(crate) fn beacon_airtime_ns(cfg: &SimConfig, extra_bytes: u32) -> Result<Nanos, SimError> {
    Ok(frame_airtime_ns(u64::from(cfg.beacon_bytes + extra_bytes), &PhyConfig::basic_rate(), &cfg.overhead)?)
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    flow: usize,
    created: Nanos,
    bytes: u32,
    dst: Option<usize>,
    retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hold {
    None,
    /// Until the AP's state or mode next changes.
    UntilApChange,
    UntilTime(Nanos),
    /// Deferred SDPS request: wait for a Trigger Frame.
    AwaitTf,
}

struct Recorder {
    since: Nanos,
    cur: (PowerState, ModeLabel, RadioActivity),
    segs: Vec<NsSegment>,
}

impl Recorder {
    fn new(cur: (PowerState, ModeLabel, RadioActivity)) -> Self {
        Self { since: 0, cur, segs: Vec::new() }
    }

    fn close(&mut self, now: Nanos) {
        let d = now - self.since;
        if d > 0 {
            let (state, mode, activity) = self.cur;
            match self.segs.last_mut() {
                Some(l) if (l.state, l.mode, l.activity) == self.cur => l.duration_ns += d,
                _ => self.segs.push(NsSegment { state, mode, activity, duration_ns: d }),
            }
        }
        self.since = now;
    }

    fn set(&mut self, now: Nanos, new: (PowerState, ModeLabel, RadioActivity)) {
        if new != self.cur {
            self.close(now);
            self.cur = new;
        }
    }
}

struct Device {
    id: u16,
    role: DeviceRole,
    listen_interval: u32,
    dps_capable: bool,
    dcf: DcfState,
    has_backoff: bool,
    anchor: Option<Nanos>,
    /// Earliest time counting may (re)start.
    floor: Nanos,
    hold: Hold,
    queue: VecDeque<Packet>,
    rng: ChaCha8Rng,
    tx: u32,
    rx: u32,
    rec: Recorder,
    phy: Option<PhyConfig>,
    known_version: Option<u16>,
}

struct FlowRt {
    src: usize,
    dst: Option<usize>,
    spec: FlowSpec,
    rng: ChaCha8Rng,
    offered: u64,
    delivered: u64,
    dropped: u64,
    delivered_bytes: u64,
    latencies_us: Vec<f64>,
}

#[derive(Debug, Clone)]
struct OnAir {
    src: usize,
    dst: Option<usize>,
    kind: FrameKind,
    start: Nanos,
    end: Nanos,
    mode: Option<ModeLabel>,
    /// Off-BSS response; no device in the scenario is transmitting it.
    external: bool,
    payload: Vec<u8>,
    record: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
enum Then {
    /// The frame is an ACK for `data_sender`'s head-of-line packet.
    Ack { data_sender: usize, tf_done: bool },
    Icr { sta: usize, effective: Nanos },
    /// The frame is triggered uplink data from `sta`.
    TrigData { sta: usize },
}

enum Busy {
    Idle,
    Contention(Vec<OnAir>),
    Gap(OnAir, Then),
    Response(OnAir, Then),
}

struct Beacon {
    tbtt: Nanos,
    ready: Nanos,
}

struct DpsRt {
    state: ApModeState,
    policy: DpsPolicy,
    grant: HcmGrant,
}

pub(crate) struct Engine<'a> {
    cfg: &'a SimConfig,
    sc: &'a ScenarioSpec,
    now: Nanos,
    end: Nanos,
    q: EventQueue,
    dev: Vec<Device>,
    idx: BTreeMap<u16, usize>,
    flows: Vec<FlowRt>,
    busy: Busy,
    idle_since: Nanos,
    generation: u64,
    beacon: Option<Beacon>,
    sched: Option<ScheduleManager>,
    dps: Option<DpsRt>,
    ap_state: PowerState,
    ap_mode: ModeLabel,
    tf_queue: VecDeque<(TriggerFrame, u32)>,
    next_sched_change: Option<Nanos>,
    slot: Nanos,
    sifs: Nanos,
    difs: Nanos,
    ack: Nanos,
    out: SimReport,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(cfg: &'a SimConfig, sc: &'a ScenarioSpec) -> Result<Self, SimError> {
        let idle = (PowerState::ReducedCapabilities, ModeLabel::Lcm, RadioActivity::Idle);
        let device = |id: u16, role: DeviceRole, in_bss: bool| Device {
            id,
            role,
            listen_interval: 1,
            dps_capable: false,
            dcf: DcfState::new(cfg.cwmin, cfg.cwmax, in_bss),
            has_backoff: false,
            anchor: None,
            floor: 0,
            hold: Hold::None,
            queue: VecDeque::new(),
            rng: stream(cfg.seed, DOMAIN_DEVICE, u64::from(id)),
            tx: 0,
            rx: 0,
            rec: Recorder::new(idle),
            phy: None,
            known_version: None,
        };
        let initial_version = sc.mechanism.schedule().map(|s| s.version);
        let mut dev = Vec::with_capacity(1 + sc.stas.len() + sc.obss.len());
        dev.push(device(AP_ID, DeviceRole::Ap, true));
        for s in &sc.stas {
            let role = if s.legacy { DeviceRole::LegacySta } else { DeviceRole::Sta };
            let mut d = device(s.id, role, true);
            d.listen_interval = s.listen_interval.max(1);
            d.dps_capable = s.dps_capable && !s.legacy;
            d.known_version = if s.legacy { None } else { initial_version };
            dev.push(d);
        }
        for o in &sc.obss {
            let mut d = device(o.id, DeviceRole::Obss, false);
            d.phy = Some(o.phy);
            dev.push(d);
        }
        let idx: BTreeMap<u16, usize> = dev.iter().enumerate().map(|(i, d)| (d.id, i)).collect();

        let mut flows = Vec::new();
        let mut ordinal: BTreeMap<u16, u64> = BTreeMap::new();
        for b in &sc.flows {
            let sta = idx[&b.sta];
            let n = ordinal.entry(b.sta).or_insert(0);
            let key = (u64::from(b.sta) << 16) | *n;
            *n += 1;
            let (src, dst) = match b.flow.direction {
                Direction::Ul => (sta, Some(0)),
                Direction::Dl => (0, Some(sta)),
            };
            flows.push(FlowRt::new(src, dst, b.flow, stream(cfg.seed, DOMAIN_FLOW, key)));
        }
        for o in &sc.obss {
            for (n, f) in o.flows.iter().enumerate() {
                let key = (u64::from(o.id) << 16) | n as u64;
                flows.push(FlowRt::new(idx[&o.id], None, *f, stream(cfg.seed, DOMAIN_OBSS_FLOW, key)));
            }
        }

        let dps = match &sc.mechanism {
            Mechanism::Dynamic { policy, grant, delay_up_us, delay_down_us }
            | Mechanism::Combined { policy, grant, delay_up_us, delay_down_us, .. } => Some(DpsRt {
                state: ApModeState::new(AP_ID, CapabilityTuple::of(&sc.modes.hcm), *delay_up_us, *delay_down_us),
                policy: *policy,
                grant: *grant,
            }),
            _ => None,
        };

        let end = cfg.sim_duration_us * 1_000;
        let mut e = Self {
            cfg,
            sc,
            now: 0,
            end,
            q: EventQueue::new(),
            dev,
            idx,
            flows,
            busy: Busy::Idle,
            idle_since: 0,
            generation: 0,
            beacon: None,
            sched: sc.mechanism.schedule().cloned().map(ScheduleManager::new),
            dps,
            ap_state: PowerState::ReducedCapabilities,
            ap_mode: ModeLabel::Lcm,
            tf_queue: VecDeque::new(),
            next_sched_change: None,
            slot: cfg.slot_time_us * 1_000,
            sifs: cfg.sifs_us * 1_000,
            difs: cfg.difs_us * 1_000,
            ack: cfg.ack_airtime_us * 1_000,
            out: SimReport {
                duration_ns: end,
                devices: Vec::new(),
                flows: Vec::new(),
                events: EventCounts::default(),
                collisions: Vec::new(),
                beacons: Vec::new(),
                schedule_conflicts: Vec::new(),
                announcements: Vec::new(),
                schedule_learned: Vec::new(),
                ap_changes: Vec::new(),
                icrs: Vec::new(),
                deferrals: Vec::new(),
                triggers: Vec::new(),
                frames: Vec::new(),
            },
        };
        let (st, md) = e.ap_condition(0);
        e.ap_state = st;
        e.ap_mode = md;
        e.out.ap_changes.push(ModeChangeRecord { at_ns: 0, state: st, mode: md });
        if st == PowerState::Doze {
            e.freeze();
        }
        e.set_ap_frozen();
        for i in 0..e.dev.len() {
            let c = e.condition(i);
            e.dev[i].rec = Recorder::new(c);
        }
        Ok(e)
    }

    pub(crate) fn run(mut self) -> Result<SimReport, SimError> {
        for f in 0..self.flows.len() {
            let first = self.flows[f].first_arrival();
            self.push(first, 0, EventKind::FrameArrival { flow: f });
        }
        self.push(self.cfg.beacon_interval_us * 1_000, 0, EventKind::BeaconDue);
        if let Some(u) = &self.sc.schedule_update {
            self.push(u.at_us * 1_000, 0, EventKind::Timer(TimerKind::ScheduleUpdate));
        }
        self.plan_sched_change();
        self.rearm();

        while let Some(ev) = self.q.pop() {
            if ev.time >= self.end {
                break;
            }
            self.now = ev.time;
            self.out.events.bump(ev.kind.index());
            match ev.kind {
                EventKind::FrameArrival { flow } => self.on_arrival(flow),
                EventKind::TxStart => self.on_tx_start(),
                EventKind::TxEnd => self.on_tx_end(),
                EventKind::BackoffExpiry { generation } => {
                    if generation == self.generation {
                        self.on_backoff_expiry();
                    }
                }
                EventKind::StateChange => {
                    self.refresh_ap();
                    if self.next_sched_change.is_some_and(|t| t <= self.now) {
                        self.next_sched_change = None;
                        self.plan_sched_change();
                    }
                }
                EventKind::BeaconDue => self.on_beacon_due(),
                EventKind::Timer(kind) => self.on_timer(kind)?,
            }
        }
        Ok(self.finish())
    }

    fn push(&mut self, time: Nanos, target: u16, kind: EventKind) {
        if time < self.end {
            self.q.push(time, target, kind);
        }
    }

    fn now_us(&self) -> u64 {
        self.now.div_ceil(1_000)
    }

    // ---- AP state ----

    fn ap_condition(&self, t: Nanos) -> (PowerState, ModeLabel) {
        let awake = |m: ModeLabel| match m {
            ModeLabel::Lcm => (PowerState::ReducedCapabilities, ModeLabel::Lcm),
            ModeLabel::Hcm => (PowerState::FullCapabilities, ModeLabel::Hcm),
        };
        let t_us = t / 1_000;
        let dps_mode = self.dps.as_ref().map_or(ModeLabel::Lcm, |d| d.state.mode);
        match &self.sc.mechanism {
            Mechanism::AlwaysOn { mode } => awake(*mode),
            Mechanism::Dynamic { .. } => awake(dps_mode),
            Mechanism::Scheduled { .. } => {
                let s = self.static_state(t_us);
                (s, if s == PowerState::FullCapabilities { ModeLabel::Hcm } else { ModeLabel::Lcm })
            }
            Mechanism::Combined { .. } => match self.static_state(t_us) {
                PowerState::FullCapabilities => awake(ModeLabel::Hcm),
                PowerState::Doze => (PowerState::Doze, ModeLabel::Lcm),
                _ => awake(dps_mode),
            },
        }
    }

    fn static_state(&self, t_us: u64) -> PowerState {
        match &self.sched {
            Some(m) => self.sc.static_state(m.schedule_at(t_us), t_us),
            None => PowerState::FullCapabilities,
        }
    }

    fn next_sched_change_after(&self, t_us: u64) -> Option<u64> {
        let m = self.sched.as_ref()?;
        let a = m.schedule_at(t_us).next_transition_after(t_us);
        let b = m.pending().map(|(_, at)| at).filter(|&at| at > t_us);
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }

    fn plan_sched_change(&mut self) {
        if let Some(t) = self.next_sched_change_after(self.now / 1_000) {
            let t = t * 1_000;
            if self.next_sched_change.is_none_or(|old| t < old) {
                self.next_sched_change = Some(t);
                self.push(t, 0, EventKind::StateChange);
            }
        }
    }

    /// Whether the AP stays in a state satisfying `ok` over [t, t + dur).
    fn ap_holds(&self, t: Nanos, dur: Nanos, ok: fn(PowerState) -> bool) -> bool {
        if self.sched.is_none() {
            return true;
        }
        let mut t_us = t / 1_000;
        loop {
            if !ok(self.static_state(t_us)) {
                return false;
            }
            match self.next_sched_change_after(t_us) {
                Some(n) if n * 1_000 < t + dur => t_us = n,
                _ => return true,
            }
        }
    }

    fn refresh_ap(&mut self) {
        let now_us = self.now / 1_000;
        if let Some(m) = self.sched.as_mut() {
            m.commit(now_us);
        }
        if let Some(d) = self.dps.as_mut() {
            d.state.advance(now_us);
        }
        let (st, md) = self.ap_condition(self.now);
        if (st, md) == (self.ap_state, self.ap_mode) {
            return;
        }
        let was = self.ap_state;
        self.ap_state = st;
        self.ap_mode = md;
        self.out.ap_changes.push(ModeChangeRecord { at_ns: self.now, state: st, mode: md });
        if st == PowerState::Doze && was != PowerState::Doze {
            self.freeze();
        } else if was == PowerState::Doze && st != PowerState::Doze {
            let floor = self.now + self.difs;
            for d in self.dev.iter_mut().filter(|d| d.dcf.in_bss) {
                d.floor = d.floor.max(floor);
            }
            let obss_freeze = self.cfg.obss_freeze;
            thaw_backoffs(self.dev.iter_mut().filter(|d| d.dcf.in_bss || obss_freeze).map(|d| &mut d.dcf));
        }
        for d in &mut self.dev {
            if d.hold == Hold::UntilApChange {
                d.hold = Hold::None;
            }
        }
        self.set_ap_frozen();
        if md == ModeLabel::Hcm {
            self.serve_deferred();
        }
        for i in 0..self.dev.len() {
            self.touch(i);
        }
        self.rearm();
    }

    /// The AP's own counter also stands still whenever it may not initiate.
    fn set_ap_frozen(&mut self) {
        let st = self.ap_state;
        let frozen = !st.can_initiate() && !(st == PowerState::Doze && self.cfg.disable_doze_freeze);
        if frozen != self.dev[0].dcf.frozen {
            if frozen {
                self.consume(0, self.now);
            } else {
                self.dev[0].floor = self.dev[0].floor.max(self.now + self.difs);
            }
            self.dev[0].dcf.frozen = frozen;
        }
    }

    fn freeze(&mut self) {
        if self.cfg.disable_doze_freeze {
            return;
        }
        let now = self.now;
        let obss_freeze = self.cfg.obss_freeze;
        for i in 0..self.dev.len() {
            if self.dev[i].dcf.in_bss || obss_freeze {
                self.consume(i, now);
            }
        }
        freeze_backoffs(self.dev.iter_mut().map(|d| &mut d.dcf), FreezeReason::ApDoze, obss_freeze);
    }

    /// In HCM: turn the deferred requests into Trigger Frames and release
    /// STAs that no longer need one.
    fn serve_deferred(&mut self) {
        let now_us = self.now / 1_000;
        if let Some(d) = self.dps.as_mut() {
            if d.state.mode == ModeLabel::Hcm {
                if let Ok(tfs) = dps::drain_pending(&mut d.state, now_us) {
                    for tf in tfs {
                        if !self.tf_queue.iter().any(|(q, _)| q.sta_id == tf.sta_id) {
                            self.tf_queue.push_back((tf, 0));
                        }
                    }
                }
            }
        }
        for i in 0..self.dev.len() {
            let id = self.dev[i].id;
            if self.dev[i].hold == Hold::AwaitTf && !self.tf_queue.iter().any(|(t, _)| t.sta_id == id) {
                self.dev[i].hold = Hold::None;
                if let Some(d) = self.dps.as_mut() {
                    d.state.pending.retain(|p| p.sta_id != id);
                }
            }
        }
        self.schedule_grant_check();
    }

    fn schedule_grant_check(&mut self) {
        if let Some(t) = self.dps.as_ref().and_then(|d| dps::next_grant_check(&d.state)) {
            let t = (t * 1_000).max(self.now);
            self.push(t, 0, EventKind::Timer(TimerKind::GrantCheck));
        }
    }

    fn dps_active(&self) -> bool {
        match &self.sc.mechanism {
            Mechanism::Dynamic { .. } => true,
            Mechanism::Combined { .. } => self.static_state(self.now / 1_000) == PowerState::ReducedCapabilities,
            _ => false,
        }
    }

    fn record_exchange(&mut self) {
        let now_us = self.now_us();
        if let Some(d) = self.dps.as_mut() {
            d.state.record_exchange(now_us);
            self.schedule_grant_check();
        }
    }

    fn on_timer(&mut self, kind: TimerKind) -> Result<(), SimError> {
        let now_us = self.now / 1_000;
        match kind {
            TimerKind::Rearm => self.rearm(),
            TimerKind::GrantCheck => {
                if !self.tf_queue.is_empty() {
                    return Ok(());
                }
                if let Some(t) = self.busy_until() {
                    self.push(t, 0, EventKind::Timer(TimerKind::GrantCheck));
                    return Ok(());
                }
                if let Some(d) = self.dps.as_mut() {
                    if let Some(change) = dps::tick(&mut d.state, now_us) {
                        self.push(change.at * 1_000, 0, EventKind::StateChange);
                    }
                }
            }
            TimerKind::DeferralCheck => self.check_deferral(),
            TimerKind::ScheduleUpdate => {
                let Some(u) = &self.sc.schedule_update else { return Ok(()) };
                let stas: Vec<StaListenInfo> = self
                    .sc
                    .stas
                    .iter()
                    .map(|s| StaListenInfo { listen_interval: s.listen_interval, legacy: s.legacy, schedule_request_at: None })
                    .collect();
                let bi = self.cfg.beacon_interval_us;
                if let Some(m) = self.sched.as_mut() {
                    let at = m
                        .propose(u.schedule.clone(), &stas, now_us, bi)
                        .map_err(|e| SimError::Validation(alloc::vec![alloc::format!("schedule update: {e}")]))?;
                    self.out.announcements.push(ScheduleAnnouncement {
                        announced_ns: self.now,
                        version: u.schedule.version,
                        activation_ns: at * 1_000,
                    });
                    self.plan_sched_change();
                }
            }
        }
        Ok(())
    }

    fn check_deferral(&mut self) {
        let now_us = self.now / 1_000;
        let Some(d) = self.dps.as_mut() else { return };
        if d.state.deferral_due(&d.policy, now_us) {
            let at = d.state.enter_hcm(now_us, d.grant);
            self.push(at * 1_000, 0, EventKind::StateChange);
            self.schedule_grant_check();
        } else if let Some(oldest) = d.state.pending.front() {
            let t = (oldest.since + d.policy.max_defer) * 1_000;
            self.push(t.max(self.now), 0, EventKind::Timer(TimerKind::DeferralCheck));
        }
    }

    // ---- devices ----

    fn condition(&self, i: usize) -> (PowerState, ModeLabel, RadioActivity) {
        let d = &self.dev[i];
        let activity = if d.tx > 0 {
            RadioActivity::Tx
        } else if d.rx > 0 {
            RadioActivity::Rx
        } else {
            RadioActivity::Idle
        };
        let (state, mode) = match d.role {
            DeviceRole::Ap => (self.ap_state, self.ap_mode),
            DeviceRole::Sta if self.ap_state == PowerState::Doze => (PowerState::Doze, ModeLabel::Lcm),
            DeviceRole::Sta | DeviceRole::LegacySta => match self.ap_mode {
                ModeLabel::Hcm => (PowerState::FullCapabilities, ModeLabel::Hcm),
                ModeLabel::Lcm => (PowerState::ReducedCapabilities, ModeLabel::Lcm),
            },
            DeviceRole::Obss => (PowerState::ReducedCapabilities, ModeLabel::Lcm),
        };
        let activity = match state {
            PowerState::Doze => RadioActivity::Off,
            PowerState::Listen if activity == RadioActivity::Tx => RadioActivity::Rx,
            _ => activity,
        };
        (state, mode, activity)
    }

    fn touch(&mut self, i: usize) {
        let c = self.condition(i);
        let now = self.now;
        self.dev[i].rec.set(now, c);
    }

    fn has_work(&self, i: usize) -> bool {
        !self.dev[i].queue.is_empty() || (i == 0 && !self.tf_queue.is_empty())
    }

    fn eligible(&mut self, i: usize) -> bool {
        if self.dev[i].dcf.frozen || !self.has_work(i) {
            return false;
        }
        match self.dev[i].hold {
            Hold::None => true,
            Hold::UntilApChange | Hold::AwaitTf => false,
            Hold::UntilTime(t) if self.now >= t => {
                self.dev[i].hold = Hold::None;
                true
            }
            Hold::UntilTime(_) => false,
        }
    }

    /// Stops counting at `t`, keeping the slots that elapsed.
    fn consume(&mut self, i: usize, t: Nanos) {
        let slot = self.slot;
        let d = &mut self.dev[i];
        if let Some(a) = d.anchor.take() {
            if t > a {
                d.dcf.count_down((t - a) / slot);
            }
        }
    }

    fn rearm(&mut self) {
        if !matches!(self.busy, Busy::Idle) {
            return;
        }
        let grid = self.idle_since + self.difs;
        for i in 0..self.dev.len() {
            let ok = self.eligible(i);
            let d = &self.dev[i];
            if d.anchor.is_some() && !ok {
                self.consume(i, self.now);
            } else if d.anchor.is_none() && ok {
                let now = self.now;
                let slot = self.slot;
                let d = &mut self.dev[i];
                if !d.has_backoff {
                    d.dcf.draw(&mut d.rng);
                    d.has_backoff = true;
                }
                let start = if now <= grid { grid } else { grid + (now - grid).div_ceil(slot) * slot };
                d.anchor = Some(start.max(d.floor));
            }
        }
        self.schedule_resolution();
    }

    fn ready_at(&self, i: usize) -> Option<Nanos> {
        let d = &self.dev[i];
        d.anchor.map(|a| a + u64::from(d.dcf.backoff_slots) * self.slot)
    }

    fn schedule_resolution(&mut self) {
        self.generation += 1;
        if !matches!(self.busy, Busy::Idle) {
            return;
        }
        let pifs = self.sifs + self.slot;
        if let Some(b) = self.beacon.as_mut() {
            b.ready = b.tbtt.max(self.idle_since + pifs).max(self.now);
        }
        let t = (0..self.dev.len()).filter_map(|i| self.ready_at(i)).chain(self.beacon.as_ref().map(|b| b.ready)).min();
        if let Some(t) = t {
            let g = self.generation;
            self.push(t, 0, EventKind::BackoffExpiry { generation: g });
        }
    }

    // ---- traffic ----

    fn on_arrival(&mut self, f: usize) {
        let now = self.now;
        let fl = &mut self.flows[f];
        fl.offered += 1;
        let p = Packet { flow: f, created: now, bytes: fl.spec.packet_bytes, dst: fl.dst, retries: 0 };
        let src = fl.src;
        let next = now + fl.next_gap();
        if self.dev[src].queue.len() < self.cfg.queue_limit {
            self.dev[src].queue.push_back(p);
        } else {
            self.flows[f].dropped += 1;
        }
        self.push(next, 0, EventKind::FrameArrival { flow: f });
        self.rearm();
    }

    fn mode_phy(&self, mode: ModeLabel) -> PhyConfig {
        match mode {
            ModeLabel::Lcm => self.sc.modes.lcm,
            ModeLabel::Hcm => self.sc.modes.hcm,
        }
    }

    fn airtime(&self, bytes: u64, phy: &PhyConfig, control: bool) -> Nanos {
        let o = if control { control_overhead(&self.cfg.overhead) } else { self.cfg.overhead };
        // Configurations were validated up front.
        frame_airtime_ns(bytes, phy, &o).unwrap_or(0)
    }

    fn data_frame(&self, src: usize, p: &Packet, start: Nanos) -> OnAir {
        let (phy, mode) = match self.dev[src].phy {
            Some(phy) => (phy, None),
            None => (self.mode_phy(self.ap_mode), Some(self.ap_mode)),
        };
        let end = start + self.airtime(u64::from(p.bytes), &phy, false);
        OnAir { src, dst: p.dst, kind: FrameKind::Data, start, end, mode, external: false, payload: Vec::new(), record: None }
    }

    fn control_frame(&self, src: usize, dst: usize, kind: FrameKind, payload: Vec<u8>, mode: ModeLabel, start: Nanos) -> OnAir {
        let end = match kind {
            FrameKind::Ack => start + self.ack,
            _ => start + self.airtime(payload.len() as u64, &self.mode_phy(mode), true),
        };
        OnAir { src, dst: Some(dst), kind, start, end, mode: Some(mode), external: false, payload, record: None }
    }

    fn icf_for(&self, i: usize) -> Vec<u8> {
        let d = self.dps.as_ref().expect("ICF without DPS");
        let ll = self.dev[i].queue.front().is_some_and(|p| {
            matches!(self.flows[p.flow].spec.class, TrafficClass::LowLatency | TrafficClass::QosStrict)
        });
        let padding = dps::required_padding(d.state.transition_delay_up, &self.sc.modes.lcm).unwrap_or(0);
        encode_icf(&IcfFrame {
            sta_id: self.dev[i].id,
            requested: CapabilityTuple::of(&self.sc.modes.hcm),
            grant: d.grant,
            ll_flag: ll,
            padding_len: padding,
        })
    }

    /// The frame device `i` sends on winning contention at `t`, or `None` if it must hold.
    fn plan_tx(&mut self, i: usize, t: Nanos) -> Option<OnAir> {
        let sifs = self.sifs;
        let ack = self.ack;
        match self.dev[i].role {
            DeviceRole::Obss => {
                let p = *self.dev[i].queue.front()?;
                Some(self.data_frame(i, &p, t))
            }
            DeviceRole::Ap => {
                let (frame, tail) = if let Some((tf, _)) = self.tf_queue.front() {
                    let sta = self.idx[&tf.sta_id];
                    let f = self.control_frame(0, sta, FrameKind::Trigger, encode_tf(tf), self.ap_mode, t);
                    let data = self.dev[sta].queue.front().map_or(0, |p| {
                        self.airtime(u64::from(p.bytes), &self.mode_phy(self.ap_mode), false) + sifs + ack
                    });
                    (f, sifs + data)
                } else {
                    let p = *self.dev[0].queue.front()?;
                    (self.data_frame(0, &p, t), sifs + ack)
                };
                if self.ap_holds(t, frame.end - t + tail, PowerState::can_initiate) {
                    Some(frame)
                } else {
                    self.defer_past_transition(i, PowerState::can_initiate);
                    None
                }
            }
            DeviceRole::LegacySta => {
                let p = *self.dev[i].queue.front()?;
                Some(self.data_frame(i, &p, t))
            }
            DeviceRole::Sta => {
                let p = *self.dev[i].queue.front()?;
                let use_icf = self.dev[i].dps_capable
                    && self.dps_active()
                    && self.ap_mode == ModeLabel::Lcm
                    && self.dps.as_ref().is_some_and(|d| d.state.heading() == ModeLabel::Lcm);
                let (frame, tail) = if use_icf {
                    let f = self.control_frame(i, 0, FrameKind::Icf, self.icf_for(i), ModeLabel::Lcm, t);
                    let icr = self.airtime(ICR_LEN as u64, &self.sc.modes.lcm, true);
                    (f, sifs + icr)
                } else {
                    (self.data_frame(i, &p, t), sifs + ack)
                };
                if self.ap_holds(t, frame.end - t + tail, PowerState::can_respond) {
                    Some(frame)
                } else {
                    self.defer_past_transition(i, PowerState::can_respond);
                    None
                }
            }
        }
    }

    /// The exchange would not finish before the AP changes state. If the AP can serve
    /// it now, the device draws a fresh backoff for after the change; if not, its
    /// counter simply expired while the AP was away and it waits at zero.
    fn defer_past_transition(&mut self, i: usize, ok: fn(PowerState) -> bool) {
        let d = &mut self.dev[i];
        d.hold = Hold::UntilApChange;
        if ok(self.ap_state) {
            d.has_backoff = false;
        }
    }

    fn on_backoff_expiry(&mut self) {
        let t = self.now;
        let starters: Vec<usize> = (0..self.dev.len()).filter(|&i| self.ready_at(i) == Some(t)).collect();
        let mut frames = Vec::new();
        for &i in &starters {
            if let Some(f) = self.plan_tx(i, t) {
                frames.push(f);
            }
        }
        if let Some(b) = self.beacon.take_if(|b| b.ready == t) {
            match self.beacon_frame(b.tbtt, t) {
                Some(f) => frames.push(f),
                None => self.out.schedule_conflicts.push(ScheduleConflict { tbtt_ns: b.tbtt, state: self.ap_state }),
            }
        }
        for i in 0..self.dev.len() {
            self.consume(i, t);
        }
        if frames.is_empty() {
            self.rearm();
            return;
        }
        self.start_busy(frames);
    }

    fn beacon_frame(&mut self, tbtt: Nanos, t: Nanos) -> Option<OnAir> {
        let (active, pending, groups) = match &self.sched {
            Some(m) => {
                let cur = m.schedule_at(t / 1_000);
                let pend = m.pending().filter(|(s, _)| s.version != cur.version).map(|(s, _)| s);
                (
                    Some(cur.version),
                    pend.map(|s| s.version),
                    cur.groups.len() + pend.map_or(0, |s| s.groups.len()),
                )
            }
            None => (None, None, 0),
        };
        let elements = match (active, pending) {
            (None, _) => 0,
            (Some(_), None) => element_len(groups),
            (Some(_), Some(_)) => element_len(groups) + element_len(0),
        };
        let air = beacon_airtime_ns(self.cfg, elements).unwrap_or(0);
        if !self.ap_holds(t, air, PowerState::can_initiate) || !self.ap_state.can_initiate() {
            return None;
        }
        self.out.beacons.push(BeaconRecord {
            tbtt_ns: tbtt,
            sent_ns: t,
            active_version: active,
            pending_version: pending,
            collided: false,
        });
        Some(OnAir {
            src: 0,
            dst: None,
            kind: FrameKind::Beacon,
            start: t,
            end: t + air,
            mode: None,
            external: false,
            payload: Vec::new(),
            record: None,
        })
    }

    fn on_beacon_due(&mut self) {
        let bi = self.cfg.beacon_interval_us * 1_000;
        self.push(self.now + bi, 0, EventKind::BeaconDue);
        if !self.ap_state.can_initiate() {
            self.out.schedule_conflicts.push(ScheduleConflict { tbtt_ns: self.now, state: self.ap_state });
            return;
        }
        if let Some(old) = self.beacon.take() {
            self.out.schedule_conflicts.push(ScheduleConflict { tbtt_ns: old.tbtt, state: self.ap_state });
        }
        self.beacon = Some(Beacon { tbtt: self.now, ready: self.now });
        self.schedule_resolution();
    }

    // ---- medium ----

    fn begin_frame(&mut self, f: &mut OnAir) {
        if !f.external {
            self.dev[f.src].tx += 1;
            self.touch(f.src);
        }
        match (f.kind, f.dst) {
            (FrameKind::Beacon, _) => {
                for i in 1..self.dev.len() {
                    if self.dev[i].dcf.in_bss {
                        self.dev[i].rx += 1;
                        self.touch(i);
                    }
                }
            }
            (_, Some(d)) => {
                self.dev[d].rx += 1;
                self.touch(d);
            }
            _ => {}
        }
        if self.cfg.record_frames {
            f.record = Some(self.out.frames.len());
            self.out.frames.push(FrameRecord {
                start_ns: f.start,
                end_ns: f.end,
                src: self.dev[f.src].id,
                dst: f.dst.map(|d| self.dev[d].id),
                kind: f.kind,
                mode: f.mode,
                collided: false,
            });
        }
    }

    fn end_frame(&mut self, f: &OnAir) {
        if !f.external {
            self.dev[f.src].tx -= 1;
            self.touch(f.src);
        }
        match (f.kind, f.dst) {
            (FrameKind::Beacon, _) => {
                for i in 1..self.dev.len() {
                    if self.dev[i].dcf.in_bss {
                        self.dev[i].rx -= 1;
                        self.touch(i);
                    }
                }
            }
            (_, Some(d)) => {
                self.dev[d].rx -= 1;
                self.touch(d);
            }
            _ => {}
        }
    }

    fn start_busy(&mut self, mut frames: Vec<OnAir>) {
        self.generation += 1;
        let collided = frames.len() > 1;
        if collided {
            self.out.collisions.push(Collision { at_ns: self.now, frames: frames.len() as u32 });
        }
        for f in frames.iter_mut() {
            self.begin_frame(f);
            if collided {
                if let Some(r) = f.record {
                    self.out.frames[r].collided = true;
                }
            }
            if f.kind == FrameKind::Trigger && self.tf_queue.front().is_some_and(|(_, n)| *n == 0) {
                let sta = self.tf_queue[0].0.sta_id;
                self.out.triggers.push((self.now, sta));
            }
            if collided && f.kind == FrameKind::Beacon {
                if let Some(b) = self.out.beacons.last_mut() {
                    b.collided = true;
                }
            }
        }
        let end = frames.iter().map(|f| f.end).max().unwrap_or(self.now);
        self.busy = Busy::Contention(frames);
        self.push(end, 0, EventKind::TxEnd);
    }

    fn busy_until(&self) -> Option<Nanos> {
        match &self.busy {
            Busy::Idle => None,
            Busy::Contention(frames) => frames.iter().map(|f| f.end).max(),
            Busy::Gap(..) => Some(self.now + self.sifs),
            Busy::Response(f, _) => Some(f.end),
        }
    }

    fn go_idle(&mut self) {
        self.busy = Busy::Idle;
        self.idle_since = self.now;
        self.rearm();
    }

    fn respond(&mut self, f: OnAir, then: Then) {
        self.busy = Busy::Gap(f, then);
        let t = self.now + self.sifs;
        self.push(t, 0, EventKind::TxStart);
        if t >= self.end {
            self.busy = Busy::Idle;
        }
    }

    fn on_tx_start(&mut self) {
        let Busy::Gap(mut f, then) = core::mem::replace(&mut self.busy, Busy::Idle) else { return };
        let dur = f.end - f.start;
        f.start = self.now;
        f.end = self.now + dur;
        self.begin_frame(&mut f);
        let end = f.end;
        self.busy = Busy::Response(f, then);
        self.push(end, 0, EventKind::TxEnd);
    }

    fn on_tx_end(&mut self) {
        match core::mem::replace(&mut self.busy, Busy::Idle) {
            Busy::Contention(frames) => {
                for f in &frames {
                    self.end_frame(f);
                }
                if frames.len() > 1 {
                    for f in &frames {
                        self.fail(f);
                    }
                    self.go_idle();
                } else if let Some(f) = frames.into_iter().next() {
                    self.deliver(f);
                }
            }
            Busy::Response(f, then) => {
                self.end_frame(&f);
                self.complete(then);
            }
            other => self.busy = other,
        }
    }

    /// A single frame ended without collision.
    fn deliver(&mut self, f: OnAir) {
        let now = self.now;
        match f.kind {
            FrameKind::Beacon => {
                self.on_beacon_received(now);
                self.go_idle();
            }
            FrameKind::Data => match f.dst {
                None => {
                    let mut ack = self.control_frame(f.src, f.src, FrameKind::Ack, Vec::new(), ModeLabel::Lcm, now);
                    ack.dst = None;
                    ack.external = true;
                    ack.mode = None;
                    self.respond(ack, Then::Ack { data_sender: f.src, tf_done: false });
                }
                Some(d) => {
                    if d == 0 && !self.ap_state.can_respond() {
                        self.fail(&f);
                        self.go_idle();
                    } else {
                        let ack = self.control_frame(d, f.src, FrameKind::Ack, Vec::new(), self.ap_mode, now);
                        self.respond(ack, Then::Ack { data_sender: f.src, tf_done: false });
                    }
                }
            },
            FrameKind::Icf => self.on_icf_received(f),
            FrameKind::Trigger => {
                let sta = f.dst.expect("trigger has a receiver");
                if self.dev[sta].hold == Hold::AwaitTf {
                    self.dev[sta].hold = Hold::None;
                }
                match self.dev[sta].queue.front().copied() {
                    Some(p) if p.dst == Some(0) => {
                        let data = self.data_frame(sta, &p, now);
                        self.respond(data, Then::TrigData { sta });
                    }
                    _ => {
                        self.finish_trigger();
                        self.go_idle();
                    }
                }
            }
            FrameKind::Ack | FrameKind::Icr => self.go_idle(),
        }
    }

    fn on_icf_received(&mut self, f: OnAir) {
        let sta = f.src;
        let icr_at = self.now + self.sifs;
        if !self.ap_state.can_respond() || self.dps.is_none() {
            self.fail(&f);
            self.go_idle();
            return;
        }
        let icr_us = icr_at.div_ceil(1_000);
        let d = self.dps.as_mut().expect("checked above");
        match dps::on_icf_bytes(&mut d.state, &f.payload, &d.policy, icr_us) {
            Ok(IcfDecision::SwitchNow(icr)) | Ok(IcfDecision::AlreadyHcm(icr)) => {
                let effective = icr.effective_at * 1_000;
                self.push(effective, 0, EventKind::StateChange);
                self.out.icrs.push(IcrRecord { sent_ns: icr_at, sta: self.dev[sta].id, effective_ns: effective });
                let bytes = encode_icr(&icr);
                debug_assert_eq!(bytes.len(), ICR_LEN);
                let frame = self.control_frame(0, sta, FrameKind::Icr, bytes, ModeLabel::Lcm, self.now);
                self.schedule_grant_check();
                self.respond(frame, Then::Icr { sta, effective });
            }
            Ok(IcfDecision::Deferred) => {
                self.out.deferrals.push((self.now, self.dev[sta].id));
                let dv = &mut self.dev[sta];
                dv.dcf.on_success();
                dv.has_backoff = false;
                dv.hold = Hold::AwaitTf;
                self.check_deferral();
                self.go_idle();
            }
            Err(_) => {
                self.fail(&f);
                self.go_idle();
            }
        }
    }

    fn complete(&mut self, then: Then) {
        let now = self.now;
        match then {
            Then::Ack { data_sender, tf_done } => {
                self.succeed(data_sender);
                if tf_done {
                    self.finish_trigger();
                }
                if data_sender == 0 || self.dev[data_sender].dcf.in_bss {
                    self.record_exchange();
                }
                self.go_idle();
            }
            Then::Icr { sta, effective } => {
                let d = &mut self.dev[sta];
                d.dcf.on_success();
                d.has_backoff = false;
                if effective > now {
                    d.hold = Hold::UntilTime(effective);
                    self.push(effective, 0, EventKind::Timer(TimerKind::Rearm));
                }
                self.go_idle();
            }
            Then::TrigData { sta } => {
                let ack = self.control_frame(0, sta, FrameKind::Ack, Vec::new(), self.ap_mode, now);
                self.respond(ack, Then::Ack { data_sender: sta, tf_done: true });
            }
        }
    }

    fn finish_trigger(&mut self) {
        self.tf_queue.pop_front();
        let ap = &mut self.dev[0];
        ap.dcf.on_success();
        ap.has_backoff = false;
        self.record_exchange();
        if self.tf_queue.is_empty() {
            self.schedule_grant_check();
        }
    }

    fn succeed(&mut self, i: usize) {
        let now = self.now;
        let d = &mut self.dev[i];
        d.dcf.on_success();
        d.has_backoff = false;
        if let Some(p) = d.queue.pop_front() {
            let fl = &mut self.flows[p.flow];
            fl.delivered += 1;
            fl.delivered_bytes += u64::from(p.bytes);
            fl.latencies_us.push((now - p.created) as f64 / 1_000.0);
        }
    }

    fn fail(&mut self, f: &OnAir) {
        let limit = self.cfg.retry_limit;
        let i = f.src;
        let d = &mut self.dev[i];
        d.dcf.on_failure();
        d.has_backoff = false;
        match f.kind {
            FrameKind::Trigger => {
                if let Some((_, n)) = self.tf_queue.front_mut() {
                    *n += 1;
                    if *n > limit {
                        self.tf_queue.pop_front();
                        self.dev[0].dcf.on_success();
                    }
                }
            }
            FrameKind::Data | FrameKind::Icf => {
                if let Some(p) = d.queue.front_mut() {
                    p.retries += 1;
                    if p.retries > limit {
                        let flow = p.flow;
                        d.queue.pop_front();
                        d.dcf.on_success();
                        self.flows[flow].dropped += 1;
                    }
                }
            }
            _ => {}
        }
    }

    fn on_beacon_received(&mut self, now: Nanos) {
        let Some(b) = self.out.beacons.last().copied() else { return };
        let bi = self.cfg.beacon_interval_us * 1_000;
        let k = b.tbtt_ns / bi.max(1);
        for d in self.dev.iter_mut().filter(|d| d.role == DeviceRole::Sta) {
            let li = u64::from(d.listen_interval.max(1));
            if k % li != u64::from(d.id) % li {
                continue;
            }
            for v in [b.active_version, b.pending_version].into_iter().flatten() {
                if d.known_version.is_none_or(|known| v > known) {
                    d.known_version = Some(v);
                    self.out.schedule_learned.push(ScheduleLearned { sta: d.id, version: v, at_ns: now });
                }
            }
        }
    }

    fn finish(mut self) -> SimReport {
        let end = self.end;
        for d in self.dev.iter_mut() {
            d.rec.close(end);
        }
        let secs = end as f64 * 1e-9;
        let mut out = self.out;
        out.devices = self
            .dev
            .iter_mut()
            .map(|d| DeviceReport { id: d.id, role: d.role, segments: core::mem::take(&mut d.rec.segs) })
            .collect();
        out.flows = self
            .flows
            .iter_mut()
            .map(|f| {
                f.latencies_us.sort_by(f64::total_cmp);
                FlowReport {
                    src: self.dev[f.src].id,
                    dst: f.dst.map(|d| self.dev[d].id),
                    offered_packets: f.offered,
                    delivered_packets: f.delivered,
                    dropped_packets: f.dropped,
                    offered_bps: f.spec.rate,
                    throughput_bps: f.delivered_bytes as f64 * 8.0 / secs,
                    latency_p50_us: percentile(&f.latencies_us, 50.0),
                    latency_p95_us: percentile(&f.latencies_us, 95.0),
                    latency_p99_us: percentile(&f.latencies_us, 99.0),
                }
            })
            .collect();
        out
    }
}

impl FlowRt {
    fn new(src: usize, dst: Option<usize>, spec: FlowSpec, rng: ChaCha8Rng) -> Self {
        Self { src, dst, spec, rng, offered: 0, delivered: 0, dropped: 0, delivered_bytes: 0, latencies_us: Vec::new() }
    }

    fn interval_ns(&self) -> f64 {
        self.spec.mean_interval() * 1e9
    }

    fn first_arrival(&mut self) -> Nanos {
        let i = self.interval_ns();
        (self.rng.gen::<f64>() * i) as Nanos
    }

    fn next_gap(&mut self) -> Nanos {
        let i = self.interval_ns();
        let gap = match self.spec.kind {
            FlowKind::Cbr => i,
            FlowKind::Poisson => Exp::new(1.0 / i).map_or(i, |d| d.sample(&mut self.rng)),
        };
        (gap as Nanos).max(1)
    }
}
