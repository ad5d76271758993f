use std::collections::BTreeMap;
use std::fmt;

use crate::engine::SimTime;

pub const DEFAULT_MSS: u64 = 1400;
pub const TCP_IP_HEADER_BYTES: u64 = 40;
pub const DEFAULT_BUFFER_BYTES: u64 = 5 * 1024 * 1024;
pub const DEFAULT_SSTHRESH_SEGMENTS: u64 = 6000;
pub const DEFAULT_INITIAL_CWND_SEGMENTS: u64 = 10;

const RTO_MIN: SimTime = SimTime::from_millis(200);
const RTO_MAX: SimTime = SimTime::from_millis(60_000);
const RTO_INITIAL: SimTime = SimTime::from_millis(1_000);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TcpPhase {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
}

impl fmt::Display for TcpPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TcpPhase::SlowStart => "SlowStart",
            TcpPhase::CongestionAvoidance => "CongestionAvoidance",
            TcpPhase::FastRecovery => "FastRecovery",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TcpSegment {
    pub seq: u64,
    pub len: u64,
    pub retransmission: bool,
}

impl TcpSegment {
    pub fn wire_bytes(&self) -> u64 {
        self.len + TCP_IP_HEADER_BYTES
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcpConfig {
    pub mss: u64,
    pub send_buffer: u64,
    pub initial_cwnd_segments: u64,
    pub ssthresh_segments: u64,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            mss: DEFAULT_MSS,
            send_buffer: DEFAULT_BUFFER_BYTES,
            initial_cwnd_segments: DEFAULT_INITIAL_CWND_SEGMENTS,
            ssthresh_segments: DEFAULT_SSTHRESH_SEGMENTS,
        }
    }
}

/// Byte-counting New Reno sender.
#[derive(Clone, Debug)]
pub struct TcpSender {
    pub mss: u64,
    pub cwnd: u64,
    pub ssthresh: u64,
    pub phase: TcpPhase,
    pub srtt: Option<SimTime>,
    pub rttvar: SimTime,
    pub rto: SimTime,
    send_buffer: u64,
    snd_una: u64,
    snd_nxt: u64,
    high_water: u64,
    app_end: u64,
    recover: u64,
    dupacks: u32,
    /// Segment end -> (send time, retransmitted), for RTT sampling.
    in_flight: BTreeMap<u64, (SimTime, bool)>,
    rto_deadline: Option<SimTime>,
    pub last_rtt: Option<SimTime>,
    pub rtt_samples: u64,
    pub retransmissions: u64,
    pub timeouts: u64,
    pub fast_retransmits: u64,
}

impl TcpSender {
    pub fn new(cfg: TcpConfig) -> Self {
        TcpSender {
            mss: cfg.mss,
            cwnd: cfg.initial_cwnd_segments * cfg.mss,
            ssthresh: cfg.ssthresh_segments * cfg.mss,
            phase: TcpPhase::SlowStart,
            srtt: None,
            rttvar: SimTime::ZERO,
            rto: RTO_INITIAL,
            send_buffer: cfg.send_buffer,
            snd_una: 0,
            snd_nxt: 0,
            high_water: 0,
            app_end: 0,
            recover: 0,
            dupacks: 0,
            in_flight: BTreeMap::new(),
            rto_deadline: None,
            last_rtt: None,
            rtt_samples: 0,
            retransmissions: 0,
            timeouts: 0,
            fast_retransmits: 0,
        }
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn rto_deadline(&self) -> Option<SimTime> {
        self.rto_deadline
    }

    /// Room left in the send buffer.
    pub fn buffer_space(&self) -> u64 {
        self.send_buffer.saturating_sub(self.app_end - self.snd_una)
    }

    /// Application write; returns the bytes accepted.
    pub fn write(&mut self, bytes: u64) -> u64 {
        let n = bytes.min(self.buffer_space());
        self.app_end += n;
        n
    }

    fn restart_timer(&mut self, now: SimTime) {
        self.rto_deadline = if self.snd_nxt > self.snd_una {
            Some(now + self.rto)
        } else {
            None
        };
    }

    fn segment_at(&self, seq: u64) -> TcpSegment {
        let len = self.mss.min(self.high_water.max(self.snd_nxt) - seq).max(1);
        TcpSegment {
            seq,
            len,
            retransmission: true,
        }
    }

    fn mark_sent(&mut self, seg: &TcpSegment, now: SimTime) {
        let end = seg.seq + seg.len;
        let retx = seg.retransmission || seg.seq < self.high_water;
        self.in_flight
            .entry(end)
            .and_modify(|e| *e = (now, true))
            .or_insert((now, retx));
        if retx {
            self.retransmissions += 1;
        }
    }

    /// Segments the window and buffered data allow right now.
    pub fn poll_send(&mut self, now: SimTime) -> Vec<TcpSegment> {
        let mut out = Vec::new();
        while self.snd_nxt < self.app_end {
            let len = self.mss.min(self.app_end - self.snd_nxt);
            if self.snd_nxt + len > self.snd_una + self.cwnd {
                break;
            }
            let seg = TcpSegment {
                seq: self.snd_nxt,
                len,
                retransmission: self.snd_nxt < self.high_water,
            };
            self.mark_sent(&seg, now);
            self.snd_nxt += len;
            self.high_water = self.high_water.max(self.snd_nxt);
            out.push(seg);
        }
        if !out.is_empty() && self.rto_deadline.is_none() {
            self.restart_timer(now);
        }
        out
    }

    /// Jacobson/Karels smoothing with a 200 ms floor.
    pub fn rtt_update(&mut self, sample: SimTime) {
        self.last_rtt = Some(sample);
        self.rtt_samples += 1;
        match self.srtt {
            None => {
                self.srtt = Some(sample);
                self.rttvar = SimTime::from_nanos(sample.as_nanos() / 2);
            }
            Some(srtt) => {
                let s = srtt.as_nanos() as f64;
                let r = sample.as_nanos() as f64;
                let var = 0.75 * self.rttvar.as_nanos() as f64 + 0.25 * (s - r).abs();
                let srtt = 0.875 * s + 0.125 * r;
                self.rttvar = SimTime::from_nanos(var.round() as u64);
                self.srtt = Some(SimTime::from_nanos(srtt.round() as u64));
            }
        }
        let srtt = self.srtt.expect("set above");
        let rto = srtt + SimTime::from_nanos(4 * self.rttvar.as_nanos());
        self.rto = rto.max(RTO_MIN).min(RTO_MAX);
    }

    /// Processes a cumulative ACK; returns a segment to retransmit at once.
    pub fn on_ack(&mut self, ack: u64, now: SimTime) -> Option<TcpSegment> {
        if ack > self.snd_una {
            let acked = ack - self.snd_una;
            // Karn: only segments never retransmitted give samples.
            let sample = self
                .in_flight
                .range(..=ack)
                .next_back()
                .filter(|(_, (_, retx))| !retx)
                .map(|(_, (t, _))| now.saturating_sub(*t));
            let keep = self.in_flight.split_off(&(ack + 1));
            self.in_flight = keep;
            if let Some(s) = sample {
                self.rtt_update(s);
            }
            self.snd_una = ack;
            if self.snd_nxt < self.snd_una {
                self.snd_nxt = self.snd_una;
            }
            let mut retx = None;
            if self.phase == TcpPhase::FastRecovery {
                if ack >= self.recover {
                    self.cwnd = self.ssthresh;
                    self.phase = TcpPhase::CongestionAvoidance;
                    self.dupacks = 0;
                } else {
                    let seg = self.segment_at(self.snd_una);
                    self.mark_sent(&seg, now);
                    self.cwnd = self.cwnd.saturating_sub(acked) + self.mss;
                    retx = Some(seg);
                }
            } else {
                self.dupacks = 0;
                if self.cwnd < self.ssthresh {
                    self.cwnd += self.mss;
                    self.phase = if self.cwnd < self.ssthresh {
                        TcpPhase::SlowStart
                    } else {
                        TcpPhase::CongestionAvoidance
                    };
                } else {
                    self.cwnd += (self.mss * self.mss / self.cwnd).max(1);
                    self.phase = TcpPhase::CongestionAvoidance;
                }
            }
            self.restart_timer(now);
            return retx;
        }
        if ack == self.snd_una && self.snd_nxt > self.snd_una {
            self.dupacks += 1;
            if self.phase == TcpPhase::FastRecovery {
                self.cwnd += self.mss;
            } else if self.dupacks == 3 {
                self.ssthresh = (self.flight() / 2).max(2 * self.mss);
                self.cwnd = self.ssthresh + 3 * self.mss;
                self.recover = self.snd_nxt;
                self.phase = TcpPhase::FastRecovery;
                self.fast_retransmits += 1;
                let seg = self.segment_at(self.snd_una);
                self.mark_sent(&seg, now);
                self.restart_timer(now);
                return Some(seg);
            }
        }
        None
    }

    /// Retransmission timeout: collapse the window and go back to `snd_una`.
    pub fn on_timeout(&mut self, now: SimTime) {
        if self.snd_nxt == self.snd_una {
            self.rto_deadline = None;
            return;
        }
        self.timeouts += 1;
        self.ssthresh = (self.flight() / 2).max(2 * self.mss);
        self.cwnd = self.mss;
        self.phase = TcpPhase::SlowStart;
        self.dupacks = 0;
        self.recover = self.snd_nxt;
        self.snd_nxt = self.snd_una;
        self.rto = (self.rto + self.rto).min(RTO_MAX);
        self.rto_deadline = Some(now + self.rto);
    }
}

/// Cumulative-ACK receiver with out-of-order buffering.
#[derive(Clone, Debug, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    ooo: BTreeMap<u64, u64>,
    pub delivered_bytes: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    /// Accepts a segment and returns the ACK number to send.
    pub fn on_segment(&mut self, seq: u64, len: u64) -> u64 {
        let end = seq + len;
        if end > self.rcv_nxt {
            if seq <= self.rcv_nxt {
                self.advance(end);
            } else {
                let e = self.ooo.entry(seq).or_insert(end);
                *e = (*e).max(end);
            }
            while let Some((&s, &e)) = self.ooo.first_key_value() {
                if s > self.rcv_nxt {
                    break;
                }
                self.ooo.pop_first();
                if e > self.rcv_nxt {
                    self.advance(e);
                }
            }
        }
        self.rcv_nxt
    }

    fn advance(&mut self, to: u64) {
        self.delivered_bytes += to - self.rcv_nxt;
        self.rcv_nxt = to;
    }
}
