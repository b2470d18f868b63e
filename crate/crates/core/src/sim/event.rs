use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

/// Simulation time in nanoseconds.
pub type Nanos = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimerKind {
    /// Re-evaluate who may contend (a hold expired).
    Rearm,
    /// Check the HCM grant for expiry or inactivity.
    GrantCheck,
    /// Check whether deferred SDPS requests are due.
    DeferralCheck,
    /// Announce the scenario's schedule update.
    ScheduleUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A packet of flow `flow` is generated.
    FrameArrival { flow: usize },
    /// A SIFS-spaced response frame starts.
    TxStart,
    /// The frame(s) currently on air end.
    TxEnd,
    /// Contention resolves; stale unless `generation` is current.
    BackoffExpiry { generation: u64 },
    /// The AP's power state or capability mode may change.
    StateChange,
    BeaconDue,
    Timer(TimerKind),
}

impl EventKind {
    pub(crate) fn index(&self) -> usize {
        match self {
            Self::FrameArrival { .. } => 0,
            Self::TxStart => 1,
            Self::TxEnd => 2,
            Self::BackoffExpiry { .. } => 3,
            Self::StateChange => 4,
            Self::BeaconDue => 5,
            Self::Timer(_) => 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub time: Nanos,
    pub seq: u64,
    pub target: u16,
    pub kind: EventKind,
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-queue on (time, insertion sequence).
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: Nanos, target: u16, kind: EventKind) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event { time, seq, target, kind });
        seq
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn peek_time(&self) -> Option<Nanos> {
        self.heap.peek().map(|e| e.time)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}
