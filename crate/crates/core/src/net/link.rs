use crate::engine::SimTime;

/// Point-to-point link with a fixed one-way delay and optional rate limit.
/// Packets are served first in, first out.
#[derive(Clone, Debug, PartialEq)]
pub struct DelayLink {
    pub delay: SimTime,
    /// Bits per second; `None` means serialization takes no time.
    pub rate_bps: Option<f64>,
    busy_until: SimTime,
}

impl DelayLink {
    pub fn new(delay: SimTime, rate_bps: Option<f64>) -> Self {
        DelayLink {
            delay,
            rate_bps,
            busy_until: SimTime::ZERO,
        }
    }

    /// Arrival time at the far end of a packet handed over at `now`.
    pub fn transmit(&mut self, now: SimTime, bytes: u64) -> SimTime {
        let start = now.max(self.busy_until);
        let tx = match self.rate_bps {
            Some(r) if r > 0.0 => SimTime::from_secs_f64(bytes as f64 * 8.0 / r),
            _ => SimTime::ZERO,
        };
        self.busy_until = start + tx;
        self.busy_until + self.delay
    }
}

/// Chain of links traversed back to back.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub links: Vec<DelayLink>,
}

impl Path {
    pub fn new(links: Vec<DelayLink>) -> Self {
        Path { links }
    }

    /// Remote host to base station through the gateway: two hops.
    pub fn core(hop_delay: SimTime, rate_bps: Option<f64>) -> Self {
        Path::new(vec![
            DelayLink::new(hop_delay, rate_bps),
            DelayLink::new(hop_delay, rate_bps),
        ])
    }

    pub fn transmit(&mut self, now: SimTime, bytes: u64) -> SimTime {
        self.links.iter_mut().fold(now, |t, l| l.transmit(t, bytes))
    }

    pub fn one_way_delay(&self) -> SimTime {
        self.links.iter().fold(SimTime::ZERO, |t, l| t + l.delay)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_path_delay() {
        let mut p = Path::core(SimTime::from_millis(10), None);
        assert_eq!(
            p.transmit(SimTime::from_millis(1), 1500),
            SimTime::from_millis(21)
        );
        assert_eq!(p.one_way_delay(), SimTime::from_millis(20));
    }

    #[test]
    fn serialization_is_fifo() {
        let mut l = DelayLink::new(SimTime::ZERO, Some(8e6));
        assert_eq!(l.transmit(SimTime::ZERO, 1000), SimTime::from_millis(1));
        assert_eq!(l.transmit(SimTime::ZERO, 1000), SimTime::from_millis(2));
        assert_eq!(
            l.transmit(SimTime::from_millis(5), 1000),
            SimTime::from_millis(6)
        );
    }
}
