use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use crate::engine::SimTime;
use crate::error::{Error, Result};

/// Identifies a scheduled event so it can be cancelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        self.at == other.at && self.seq == other.seq
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Clock plus pending events. Ties on time pop in insertion order.
pub struct Scheduler<E> {
    now: SimTime,
    seq: u64,
    heap: BinaryHeap<Reverse<Entry<E>>>,
    cancelled: HashSet<u64>,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, at: SimTime, event: E) -> Result<EventHandle> {
        if at < self.now {
            return Err(Error::violation(format!(
                "event scheduled at {at} before current time {}",
                self.now
            )));
        }
        let seq = self.seq;
        self.seq += 1;
        self.heap.push(Reverse(Entry { at, seq, event }));
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current time; never fails.
    pub fn schedule_in(&mut self, delay: SimTime, event: E) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, event)
            .expect("relative schedule is never in the past")
    }

    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.seq {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pops the next event due at or before `until`, advancing the clock.
    pub fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        loop {
            let head = self.heap.peek()?;
            if head.0.at > until {
                return None;
            }
            let Reverse(entry) = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.at >= self.now);
            self.now = entry.at;
            return Some((entry.at, entry.event));
        }
    }

    pub(crate) fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Anything that consumes events from a [`Scheduler`].
pub trait Handler<E> {
    fn handle(&mut self, sched: &mut Scheduler<E>, event: E);
}

impl<E, F: FnMut(&mut Scheduler<E>, E)> Handler<E> for F {
    fn handle(&mut self, sched: &mut Scheduler<E>, event: E) {
        self(sched, event)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events_executed: u64,
    pub final_time: SimTime,
}

/// Executes every event with time `<= until`; leaves the clock at `until`.
pub fn run<E, H: Handler<E>>(
    sched: &mut Scheduler<E>,
    handler: &mut H,
    until: SimTime,
) -> RunStats {
    let mut executed = 0;
    while let Some((_, ev)) = sched.pop_until(until) {
        handler.handle(sched, ev);
        executed += 1;
    }
    sched.advance_to(until);
    RunStats {
        events_executed: executed,
        final_time: sched.now(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_run_in_insertion_order() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 'A').unwrap();
        s.schedule(SimTime::ZERO, 'B').unwrap();
        let mut seen = Vec::new();
        run(
            &mut s,
            &mut |_: &mut Scheduler<char>, e| seen.push(e),
            SimTime::ZERO,
        );
        assert_eq!(seen, vec!['A', 'B']);
    }

    #[test]
    fn subframe_start_fires_at_exact_time() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_micros(100), ()).unwrap();
        let mut fired = None;
        run(
            &mut s,
            &mut |sch: &mut Scheduler<()>, _| fired = Some(sch.now()),
            SimTime::from_millis(1),
        );
        assert_eq!(fired, Some(SimTime::from_nanos(100_000)));
    }

    #[test]
    fn past_schedule_rejected() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.schedule(SimTime::from_micros(5), ()).unwrap();
        run(
            &mut s,
            &mut |_: &mut Scheduler<()>, _| {},
            SimTime::from_micros(10),
        );
        assert!(matches!(
            s.schedule(SimTime::from_micros(3), ()),
            Err(Error::Violation(_))
        ));
    }

    #[test]
    fn empty_run_to_zero() {
        let mut s: Scheduler<()> = Scheduler::new();
        let stats = run(&mut s, &mut |_: &mut Scheduler<()>, _| {}, SimTime::ZERO);
        assert_eq!(stats.events_executed, 0);
        assert_eq!(stats.final_time, SimTime::ZERO);
    }

    #[test]
    fn cancelled_events_do_not_fire() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime::from_micros(1), 1).unwrap();
        s.schedule(SimTime::from_micros(2), 2).unwrap();
        s.cancel(h);
        let mut seen = Vec::new();
        run(
            &mut s,
            &mut |_: &mut Scheduler<i32>, e| seen.push(e),
            SimTime::from_micros(5),
        );
        assert_eq!(seen, vec![2]);
    }

    #[test]
    fn clock_never_goes_backwards() {
        let mut s = Scheduler::new();
        for t in [50u64, 10, 30, 10, 70, 0] {
            s.schedule(SimTime::from_nanos(t), t).unwrap();
        }
        let mut last = SimTime::ZERO;
        run(
            &mut s,
            &mut |sch: &mut Scheduler<u64>, t: u64| {
                assert!(sch.now() >= last);
                assert_eq!(sch.now().as_nanos(), t);
                last = sch.now();
                if t == 30 {
                    sch.schedule_in(SimTime::from_nanos(5), 35);
                }
            },
            SimTime::from_nanos(100),
        );
        assert_eq!(last, SimTime::from_nanos(70));
    }
}
