use crate::engine::SimTime;

/// Constant-bit-rate application. Data it could not hand over stays
/// pending and is offered again later, never discarded.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSource {
    pub rate_bps: f64,
    last: SimTime,
    /// Fractional bits carried between ticks.
    carry_bits: f64,
    pending: u64,
    pub offered_bytes: u64,
}

impl RateSource {
    pub fn new(rate_bps: f64, start: SimTime) -> Self {
        RateSource {
            rate_bps,
            last: start,
            carry_bits: 0.0,
            pending: 0,
            offered_bytes: 0,
        }
    }

    /// Bytes generated since the previous call, plus any deferred bytes.
    pub fn generate(&mut self, now: SimTime) -> u64 {
        let dt = now.saturating_sub(self.last).as_secs_f64();
        self.last = now.max(self.last);
        let bits = self.carry_bits + self.rate_bps * dt;
        let bytes = (bits / 8.0).floor();
        self.carry_bits = bits - bytes * 8.0;
        self.offered_bytes += bytes as u64;
        self.pending += bytes as u64;
        self.pending
    }

    /// Records that `accepted` of the pending bytes were taken.
    pub fn accept(&mut self, accepted: u64) {
        self.pending -= accepted.min(self.pending);
    }

    pub fn pending(&self) -> u64 {
        self.pending
    }
}
