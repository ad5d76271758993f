use crate::engine::{PhyMacConfig, SimTime};
use crate::mac::amc::Amc;
use crate::mac::amc::{mcs as mcs_entry, MAX_MCS};
use crate::phy::{data_region, Direction, SlotAllocation, SlotKind, SubframeAllocation};

/// Scheduler view of one (user, direction) flow.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub user: u32,
    pub direction: Direction,
    /// Buffered bytes as last reported.
    pub buffer_bytes: u64,
    /// MAC and RLC header bytes needed to carry `buffer_bytes`.
    pub header_bytes: u64,
    pub cqi: Option<u8>,
    pub delay_budget: SimTime,
    pub hol_arrival: Option<SimTime>,
    /// Idle HARQ process for new data; flows without one wait.
    pub free_process: Option<u8>,
}

impl FlowState {
    pub fn key(&self) -> (u32, Direction) {
        (self.user, self.direction)
    }

    /// MCS for new transmissions: the reported CQI, or 0 before any report.
    pub fn mcs(&self) -> u8 {
        self.cqi.unwrap_or(0).min(MAX_MCS)
    }

    pub fn need_symbols(&self, amc: &Amc) -> u32 {
        if self.buffer_bytes == 0 || self.free_process.is_none() {
            return 0;
        }
        let m = mcs_entry(self.mcs()).expect("clamped MCS");
        amc.num_symbols_for_buffer(&m, self.buffer_bytes + self.header_bytes)
    }

    /// Absolute deadline of the head-of-line data.
    pub fn deadline(&self, now: SimTime) -> SimTime {
        self.hol_arrival.unwrap_or(now) + self.delay_budget
    }
}

/// A pending HARQ retransmission.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RetxRequest {
    pub user: u32,
    pub direction: Direction,
    pub process: u8,
    pub num_symbols: u32,
    pub mcs: u8,
}

pub struct ScheduleInput<'a> {
    pub frame: u64,
    pub subframe: u32,
    pub now: SimTime,
    pub flows: &'a [FlowState],
    pub retx: &'a [RetxRequest],
    pub cfg: &'a PhyMacConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerKind {
    RoundRobin,
    Edf,
}

pub trait MacScheduler: Send {
    fn schedule(&mut self, input: &ScheduleInput<'_>) -> SubframeAllocation;
}

pub fn make_scheduler(kind: SchedulerKind, fixed_tti: Option<u32>) -> Box<dyn MacScheduler> {
    match kind {
        SchedulerKind::RoundRobin => Box::new(RoundRobinScheduler::new(fixed_tti)),
        SchedulerKind::Edf => Box::new(EdfScheduler::new(fixed_tti)),
    }
}

struct Grant {
    user: u32,
    direction: Direction,
    num_symbols: u32,
    mcs: u8,
    process: u8,
    is_retx: bool,
}

/// First-fit placement of retransmissions; returns symbols left.
fn place_retx(retx: &[RetxRequest], available: u32, grants: &mut Vec<Grant>) -> u32 {
    let mut left = available;
    for r in retx {
        if r.num_symbols == 0 || r.num_symbols > left {
            continue;
        }
        left -= r.num_symbols;
        grants.push(Grant {
            user: r.user,
            direction: r.direction,
            num_symbols: r.num_symbols,
            mcs: r.mcs,
            process: r.process,
            is_retx: true,
        });
    }
    left
}

/// Lays grants out contiguously after the DL CTRL symbols, DL before UL.
fn layout(input: &ScheduleInput<'_>, mut grants: Vec<Grant>) -> SubframeAllocation {
    grants.sort_by_key(|g| g.direction);
    let mut alloc = SubframeAllocation::control_only(input.frame, input.subframe, input.cfg);
    let mut at = data_region(input.cfg).start;
    for g in grants {
        alloc.push_data(SlotAllocation {
            start_symbol: at,
            num_symbols: g.num_symbols,
            direction: g.direction,
            kind: SlotKind::Data,
            user: Some(g.user),
            mcs: g.mcs,
            harq_process: g.process,
            is_retx: g.is_retx,
        });
        at += g.num_symbols;
    }
    alloc
}

/// Round-robin symbol shares for flows visited in the given order.
///
/// Every flow first receives `min(floor(available / n), need)`. Remaining
/// symbols are then handed out one at a time in the same order to flows
/// whose need is not yet met. Returns the shares and the index of the
/// last flow that received a hand-out symbol, if any.
pub fn round_robin_shares(needs: &[u32], available: u32) -> (Vec<u32>, Option<usize>) {
    let active = needs.iter().filter(|&&n| n > 0).count() as u32;
    let mut shares = vec![0u32; needs.len()];
    if active == 0 || available == 0 {
        return (shares, None);
    }
    let share = available / active;
    let mut pool = available;
    for (s, &n) in shares.iter_mut().zip(needs) {
        *s = share.min(n);
        pool -= *s;
    }
    let mut last = None;
    while pool > 0 {
        let mut progressed = false;
        for (i, (s, &n)) in shares.iter_mut().zip(needs).enumerate() {
            if pool == 0 {
                break;
            }
            if *s < n {
                *s += 1;
                pool -= 1;
                last = Some(i);
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    (shares, last)
}

/// Greedy fill in priority order.
pub fn greedy_shares(needs: &[u32], available: u32) -> Vec<u32> {
    let mut left = available;
    needs
        .iter()
        .map(|&n| {
            let s = n.min(left);
            left -= s;
            s
        })
        .collect()
}

/// Fixed-TTI shares: every served flow gets exactly `tti` symbols.
fn fixed_shares(needs: &[u32], available: u32, tti: u32) -> (Vec<u32>, Option<usize>) {
    let mut left = available;
    let mut last = None;
    let shares = needs
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            if n > 0 && tti > 0 && left >= tti {
                left -= tti;
                last = Some(i);
                tti
            } else {
                0
            }
        })
        .collect();
    (shares, last)
}

fn new_grants(order: &[&FlowState], shares: &[u32], grants: &mut Vec<Grant>) {
    for (f, &s) in order.iter().zip(shares) {
        if s > 0 {
            grants.push(Grant {
                user: f.user,
                direction: f.direction,
                num_symbols: s,
                mcs: f.mcs(),
                process: f.free_process.expect("flows with need have a process"),
                is_retx: false,
            });
        }
    }
}

/// Round-robin over active flows with a cursor that persists across
/// subframes, so the flow after the last one favored is visited first.
#[derive(Clone, Debug, Default)]
pub struct RoundRobinScheduler {
    cursor: Option<(u32, Direction)>,
    fixed_tti: Option<u32>,
}

impl RoundRobinScheduler {
    pub fn new(fixed_tti: Option<u32>) -> Self {
        RoundRobinScheduler {
            cursor: None,
            fixed_tti,
        }
    }
}

impl MacScheduler for RoundRobinScheduler {
    fn schedule(&mut self, input: &ScheduleInput<'_>) -> SubframeAllocation {
        let amc = Amc::new(input.cfg);
        let available = data_region(input.cfg).len() as u32;
        let mut grants = Vec::new();
        let left = place_retx(input.retx, available, &mut grants);

        let mut order: Vec<&FlowState> = input.flows.iter().collect();
        order.sort_by_key(|f| f.key());
        if let Some(c) = self.cursor {
            let start = order.partition_point(|f| f.key() <= c);
            order.rotate_left(start);
        }
        let needs: Vec<u32> = order.iter().map(|f| f.need_symbols(&amc)).collect();
        let (shares, last) = match self.fixed_tti {
            Some(t) => fixed_shares(&needs, left, t),
            None => round_robin_shares(&needs, left),
        };
        if let Some(i) = last {
            self.cursor = Some(order[i].key());
        }
        new_grants(&order, &shares, &mut grants);
        layout(input, grants)
    }
}

/// Earliest-deadline-first by head-of-line arrival plus delay budget.
#[derive(Clone, Debug, Default)]
pub struct EdfScheduler {
    fixed_tti: Option<u32>,
}

impl EdfScheduler {
    pub fn new(fixed_tti: Option<u32>) -> Self {
        EdfScheduler { fixed_tti }
    }
}

impl MacScheduler for EdfScheduler {
    fn schedule(&mut self, input: &ScheduleInput<'_>) -> SubframeAllocation {
        let amc = Amc::new(input.cfg);
        let available = data_region(input.cfg).len() as u32;
        let mut grants = Vec::new();
        let left = place_retx(input.retx, available, &mut grants);

        let mut order: Vec<&FlowState> = input.flows.iter().collect();
        order.sort_by_key(|f| (f.deadline(input.now), f.user, f.direction));
        let needs: Vec<u32> = order.iter().map(|f| f.need_symbols(&amc)).collect();
        let shares = match self.fixed_tti {
            Some(t) => fixed_shares(&needs, left, t).0,
            None => greedy_shares(&needs, left),
        };
        new_grants(&order, &shares, &mut grants);
        layout(input, grants)
    }
}
