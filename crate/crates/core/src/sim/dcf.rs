//! Per-device DCF backoff state and the doze freeze rule.

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DcfState {
    pub backoff_slots: u32,
    pub cw: u32,
    /// While frozen the counter does not move on slot boundaries.
    pub frozen: bool,
    pub in_bss: bool,
    pub cwmin: u32,
    pub cwmax: u32,
}

impl DcfState {
    pub fn new(cwmin: u32, cwmax: u32, in_bss: bool) -> Self {
        Self { backoff_slots: 0, cw: cwmin, frozen: false, in_bss, cwmin, cwmax }
    }

    /// Draws a fresh counter uniformly from [0, cw].
    pub fn draw<R: Rng>(&mut self, rng: &mut R) {
        self.backoff_slots = rng.gen_range(0..=self.cw);
    }

    /// Counts down `slots` idle slots; returns how many were consumed.
    pub fn count_down(&mut self, slots: u64) -> u32 {
        if self.frozen {
            return 0;
        }
        let n = slots.min(u64::from(self.backoff_slots)) as u32;
        self.backoff_slots -= n;
        n
    }

    pub fn on_success(&mut self) {
        self.cw = self.cwmin;
    }

    /// Binary exponential backoff after a failed attempt.
    pub fn on_failure(&mut self) {
        self.cw = ((self.cw + 1) * 2 - 1).min(self.cwmax);
    }
}

/// Why backoffs are being frozen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreezeReason {
    ApDoze,
}

/// Freezes every in-BSS counter, and OBSS counters only when `obss_freeze` is set.
pub fn freeze_backoffs<'a>(devices: impl IntoIterator<Item = &'a mut DcfState>, _reason: FreezeReason, obss_freeze: bool) {
    for d in devices {
        if d.in_bss || obss_freeze {
            d.frozen = true;
        }
    }
}

/// Resumes all counters; residual slot counts are untouched.
pub fn thaw_backoffs<'a>(devices: impl IntoIterator<Item = &'a mut DcfState>) {
    for d in devices {
        d.frozen = false;
    }
}
