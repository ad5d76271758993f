//! Link-layer buffering with segmentation, reassembly and simplified ARQ.

use std::collections::{BTreeMap, VecDeque};

use crate::engine::SimTime;
use crate::mac::amc::RLC_HEADER_BYTES;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RlcMode {
    /// Saturation: synthetic data always available.
    Sm,
    Um,
    Am,
}

pub const AM_DEFAULT_CAPACITY: u64 = 10 * 1024 * 1024;
pub const UM_DEFAULT_CAPACITY: u64 = 1024 * 1024;
pub const DEFAULT_ARQ_MAX_RETX: u32 = 4;
/// Backlog reported by a saturation-mode buffer.
pub const SM_BACKLOG_BYTES: u64 = 1 << 30;
/// SDU size used for synthetic saturation data.
pub const SM_SDU_BYTES: u64 = 1500;

/// A piece of an upper-layer SDU carried in one RLC PDU.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RlcSegment {
    pub sn: u64,
    pub offset: u64,
    pub len: u64,
    pub sdu_bytes: u64,
    pub tag: u64,
    pub arrival: SimTime,
    pub arq_count: u32,
}

impl RlcSegment {
    pub fn wire_bytes(&self) -> u64 {
        self.len + RLC_HEADER_BYTES
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Sdu {
    sn: u64,
    bytes: u64,
    sent: u64,
    tag: u64,
    arrival: SimTime,
}

/// Transmit-side RLC entity for one flow.
#[derive(Clone, Debug)]
pub struct RlcBuffer {
    mode: RlcMode,
    capacity: u64,
    arq_max_retx: u32,
    queue: VecDeque<Sdu>,
    retx: VecDeque<RlcSegment>,
    occupancy: u64,
    next_sn: u64,
    pub enqueued_bytes: u64,
    pub dequeued_bytes: u64,
    pub drops: u64,
    pub arq_retransmissions: u64,
}

impl RlcBuffer {
    pub fn new(mode: RlcMode, capacity: u64) -> Self {
        RlcBuffer {
            mode,
            capacity,
            arq_max_retx: DEFAULT_ARQ_MAX_RETX,
            queue: VecDeque::new(),
            retx: VecDeque::new(),
            occupancy: 0,
            next_sn: 0,
            enqueued_bytes: 0,
            dequeued_bytes: 0,
            drops: 0,
            arq_retransmissions: 0,
        }
    }

    pub fn with_defaults(mode: RlcMode) -> Self {
        let cap = match mode {
            RlcMode::Am => AM_DEFAULT_CAPACITY,
            _ => UM_DEFAULT_CAPACITY,
        };
        RlcBuffer::new(mode, cap)
    }

    pub fn set_arq_max_retx(&mut self, n: u32) {
        self.arq_max_retx = n;
    }

    pub fn mode(&self) -> RlcMode {
        self.mode
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Payload bytes held, excluding headers.
    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    /// Appends an SDU; rejects it when it would overflow the buffer.
    pub fn enqueue(&mut self, bytes: u64, tag: u64, now: SimTime) -> bool {
        if self.mode == RlcMode::Sm {
            return true;
        }
        if bytes == 0 || self.occupancy + bytes > self.capacity {
            self.drops += 1;
            return false;
        }
        self.queue.push_back(Sdu {
            sn: self.next_sn,
            bytes,
            sent: 0,
            tag,
            arrival: now,
        });
        self.next_sn += 1;
        self.occupancy += bytes;
        self.enqueued_bytes += bytes;
        true
    }

    /// Number of PDUs a full drain would produce, for header accounting.
    pub fn pending_pdus(&self) -> u64 {
        (self.queue.len() + self.retx.len()) as u64
    }

    /// Bytes to report in a BSR, including one RLC header per pending PDU.
    pub fn buffer_status(&self) -> u64 {
        match self.mode {
            RlcMode::Sm => SM_BACKLOG_BYTES,
            _ if self.occupancy == 0 => 0,
            _ => self.occupancy + RLC_HEADER_BYTES * self.pending_pdus(),
        }
    }

    pub fn head_arrival(&self) -> Option<SimTime> {
        let a = self.retx.front().map(|s| s.arrival);
        let b = self.queue.front().map(|s| s.arrival);
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        }
    }

    pub fn hol_delay(&self, now: SimTime) -> SimTime {
        self.head_arrival()
            .map_or(SimTime::ZERO, |a| now.saturating_sub(a))
    }

    /// Segments filling at most `grant_bytes`, each with its own header.
    /// Retransmissions go first.
    pub fn dequeue_for_grant(&mut self, grant_bytes: u64, now: SimTime) -> Vec<RlcSegment> {
        let mut out = Vec::new();
        let mut left = grant_bytes;
        if self.mode == RlcMode::Sm {
            while left > RLC_HEADER_BYTES {
                let len = (left - RLC_HEADER_BYTES).min(SM_SDU_BYTES);
                out.push(RlcSegment {
                    sn: self.next_sn,
                    offset: 0,
                    len,
                    sdu_bytes: len,
                    tag: 0,
                    arrival: now,
                    arq_count: 0,
                });
                self.next_sn += 1;
                self.dequeued_bytes += len;
                left -= len + RLC_HEADER_BYTES;
            }
            return out;
        }
        while left > RLC_HEADER_BYTES {
            let Some(head) = self.retx.front_mut() else {
                break;
            };
            let room = left - RLC_HEADER_BYTES;
            let seg = if head.len <= room {
                self.retx.pop_front().expect("non-empty")
            } else {
                let part = RlcSegment { len: room, ..*head };
                head.offset += room;
                head.len -= room;
                part
            };
            left -= seg.wire_bytes();
            self.occupancy -= seg.len;
            self.dequeued_bytes += seg.len;
            out.push(seg);
        }
        while left > RLC_HEADER_BYTES {
            let Some(head) = self.queue.front_mut() else {
                break;
            };
            let room = left - RLC_HEADER_BYTES;
            let remaining = head.bytes - head.sent;
            let len = remaining.min(room);
            out.push(RlcSegment {
                sn: head.sn,
                offset: head.sent,
                len,
                sdu_bytes: head.bytes,
                tag: head.tag,
                arrival: head.arrival,
                arq_count: 0,
            });
            head.sent += len;
            if head.sent == head.bytes {
                self.queue.pop_front();
            }
            left -= len + RLC_HEADER_BYTES;
            self.occupancy -= len;
            self.dequeued_bytes += len;
        }
        out
    }

    /// Handles segments lost after HARQ exhaustion. In AM they are queued
    /// for retransmission until the ARQ limit; returns the sequence numbers
    /// given up on, which the receiver must skip.
    pub fn harq_drop_notification(&mut self, segments: &[RlcSegment]) -> Vec<u64> {
        let mut lost = Vec::new();
        for s in segments {
            if self.mode == RlcMode::Am && s.arq_count < self.arq_max_retx {
                let again = RlcSegment {
                    arq_count: s.arq_count + 1,
                    ..*s
                };
                // Keep the retransmission queue ordered by (sn, offset).
                let at = self
                    .retx
                    .partition_point(|r| (r.sn, r.offset) < (again.sn, again.offset));
                self.retx.insert(at, again);
                self.occupancy += s.len;
                self.arq_retransmissions += 1;
            } else if self.mode != RlcMode::Sm {
                lost.push(s.sn);
            }
        }
        if !lost.is_empty() {
            self.purge(&lost);
        }
        lost.dedup();
        lost
    }

    /// Drops every remaining piece of the given SDUs.
    fn purge(&mut self, sns: &[u64]) {
        let mut freed = 0;
        self.retx.retain(|r| {
            let keep = !sns.contains(&r.sn);
            if !keep {
                freed += r.len;
            }
            keep
        });
        self.queue.retain(|q| {
            let keep = !sns.contains(&q.sn);
            if !keep {
                freed += q.bytes - q.sent;
            }
            keep
        });
        self.occupancy -= freed;
    }
}

/// An SDU handed to the upper layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeliveredSdu {
    pub sn: u64,
    pub bytes: u64,
    pub tag: u64,
}

#[derive(Clone, Debug, Default)]
struct Partial {
    bytes: u64,
    tag: u64,
    /// Received byte ranges, sorted and merged.
    ranges: Vec<(u64, u64)>,
    complete: bool,
}

impl Partial {
    fn add(&mut self, start: u64, end: u64) {
        self.ranges.push((start, end));
        self.ranges.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(self.ranges.len());
        for &(s, e) in &self.ranges {
            match merged.last_mut() {
                Some(last) if s <= last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        self.ranges = merged;
        self.complete = self.ranges.len() == 1 && self.ranges[0] == (0, self.bytes);
    }
}

/// Receive-side reassembly. AM delivers in sequence order; UM and SM
/// deliver each SDU as soon as it is complete.
#[derive(Clone, Debug)]
pub struct RlcReceiver {
    mode: RlcMode,
    next_sn: u64,
    pending: BTreeMap<u64, Partial>,
    skipped: BTreeMap<u64, ()>,
    pub delivered_bytes: u64,
    pub delivered_sdus: u64,
}

impl RlcReceiver {
    pub fn new(mode: RlcMode) -> Self {
        RlcReceiver {
            mode,
            next_sn: 0,
            pending: BTreeMap::new(),
            skipped: BTreeMap::new(),
            delivered_bytes: 0,
            delivered_sdus: 0,
        }
    }

    pub fn receive(&mut self, seg: &RlcSegment) -> Vec<DeliveredSdu> {
        if seg.sn < self.next_sn && self.mode == RlcMode::Am {
            return Vec::new();
        }
        let p = self.pending.entry(seg.sn).or_insert_with(|| Partial {
            bytes: seg.sdu_bytes,
            tag: seg.tag,
            ..Default::default()
        });
        if p.complete {
            return Vec::new();
        }
        p.add(seg.offset, seg.offset + seg.len);
        if self.mode == RlcMode::Am {
            self.drain_in_order()
        } else if p.complete {
            let p = self.pending.remove(&seg.sn).expect("present");
            self.emit(seg.sn, &p).into_iter().collect()
        } else {
            Vec::new()
        }
    }

    /// The sender gave up on `sn`; stop waiting for it.
    pub fn skip(&mut self, sn: u64) -> Vec<DeliveredSdu> {
        self.pending.remove(&sn);
        if self.mode == RlcMode::Am {
            if sn >= self.next_sn {
                self.skipped.insert(sn, ());
            }
            self.drain_in_order()
        } else {
            Vec::new()
        }
    }

    fn emit(&mut self, sn: u64, p: &Partial) -> Option<DeliveredSdu> {
        self.delivered_bytes += p.bytes;
        self.delivered_sdus += 1;
        Some(DeliveredSdu {
            sn,
            bytes: p.bytes,
            tag: p.tag,
        })
    }

    fn drain_in_order(&mut self) -> Vec<DeliveredSdu> {
        let mut out = Vec::new();
        loop {
            if self.skipped.remove(&self.next_sn).is_some() {
                self.next_sn += 1;
                continue;
            }
            match self.pending.get(&self.next_sn) {
                Some(p) if p.complete => {
                    let p = self.pending.remove(&self.next_sn).expect("present");
                    let sn = self.next_sn;
                    out.extend(self.emit(sn, &p));
                    self.next_sn += 1;
                }
                _ => break,
            }
        }
        out
    }
}
