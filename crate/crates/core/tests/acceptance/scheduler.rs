use std::collections::BTreeMap;

use mmwave_core::engine::{PhyMacConfig, RngStream, SimTime};
use mmwave_core::mac::amc::mcs as mcs_entry;
use mmwave_core::mac::{
    Amc, EdfScheduler, FlowState, MacScheduler, RetxRequest, RoundRobinScheduler, ScheduleInput,
};
use mmwave_core::phy::{data_region, Direction, SubframeAllocation};

use crate::Outcome;

type Key = (u32, Direction);

fn cfg_with_data_symbols(s: u32) -> PhyMacConfig {
    let mut cfg = PhyMacConfig::default();
    let overhead = cfg.symbols_per_subframe - cfg.data_symbols();
    cfg.symbols_per_subframe = s + overhead;
    assert_eq!(data_region(&cfg).len() as u32, s);
    cfg
}

struct Instance {
    cfg: PhyMacConfig,
    flows: Vec<FlowState>,
    retx: Vec<RetxRequest>,
    now: SimTime,
}

fn random_instance(rng: &mut RngStream) -> Instance {
    let s = 1 + (rng.next_u64() % 8) as u32;
    let cfg = cfg_with_data_symbols(s);
    let amc = Amc::new(&cfg);
    let n = 1 + (rng.next_u64() % 4) as usize;
    let mut keys: Vec<Key> = Vec::new();
    while keys.len() < n {
        let k = (
            (rng.next_u64() % 4) as u32,
            if rng.bernoulli(0.6) {
                Direction::Dl
            } else {
                Direction::Ul
            },
        );
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let now = SimTime::from_millis(50);
    let flows = keys
        .iter()
        .map(|&(user, direction)| {
            let cqi = if rng.bernoulli(0.1) {
                None
            } else {
                Some((rng.next_u64() % 29) as u8)
            };
            let m = mcs_entry(cqi.unwrap_or(0)).unwrap();
            let cap = amc.tb_size_bits(&m, s + 3) / 8;
            let buffer_bytes = if rng.bernoulli(0.2) {
                0
            } else {
                1 + rng.next_u64() % cap.max(1)
            };
            FlowState {
                user,
                direction,
                buffer_bytes,
                header_bytes: if buffer_bytes > 0 { 5 } else { 0 },
                cqi,
                delay_budget: SimTime::from_millis(1 + rng.next_u64() % 100),
                hol_arrival: if buffer_bytes > 0 {
                    Some(SimTime::from_micros(rng.next_u64() % 50_000))
                } else {
                    None
                },
                free_process: if rng.bernoulli(0.85) {
                    Some((rng.next_u64() % 20) as u8)
                } else {
                    None
                },
            }
        })
        .collect();
    let retx = (0..rng.next_u64() % 4)
        .map(|i| RetxRequest {
            user: (rng.next_u64() % 4) as u32,
            direction: if rng.bernoulli(0.5) {
                Direction::Dl
            } else {
                Direction::Ul
            },
            process: 20 + i as u8,
            num_symbols: 1 + (rng.next_u64() % s as u64) as u32,
            mcs: (rng.next_u64() % 29) as u8,
        })
        .collect();
    Instance {
        cfg,
        flows,
        retx,
        now,
    }
}

/// Every vector `v` with `v[i] <= caps[i]` and `sum(v) <= budget`.
fn enumerate(caps: &[u32], budget: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; caps.len()];
    fn rec(i: usize, left: u32, caps: &[u32], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == caps.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=caps[i].min(left) {
            cur[i] = v;
            rec(i + 1, left - v, caps, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, budget, caps, &mut cur, &mut out);
    out
}

fn sorted(v: &[u32]) -> Vec<u32> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

/// Structural checks shared by both policies. Returns the new-data shares
/// by flow key and the symbols left after retransmissions, or a reason.
fn structure(
    inst: &Instance,
    alloc: &SubframeAllocation,
) -> Result<(BTreeMap<Key, u32>, u32), String> {
    let region = data_region(&inst.cfg);
    alloc.validate(&inst.cfg).map_err(|e| e.to_string())?;
    let slots: Vec<_> = alloc.data_slots().collect();
    let mut at = region.start;
    let mut seen_ul = false;
    for s in &slots {
        if s.start_symbol != at || s.num_symbols == 0 {
            return Err(format!(
                "slot at {} not contiguous (expected {at})",
                s.start_symbol
            ));
        }
        at += s.num_symbols;
        seen_ul |= s.direction == Direction::Ul;
        if seen_ul && s.direction == Direction::Dl {
            return Err("DL slot after UL slot".into());
        }
    }
    if at > region.end {
        return Err("data slots overrun the data region".into());
    }
    // First-fit oracle for retransmissions.
    let mut left = region.len() as u32;
    let mut expected = Vec::new();
    for r in &inst.retx {
        if r.num_symbols <= left {
            left -= r.num_symbols;
            expected.push((r.user, r.direction, r.process, r.num_symbols, r.mcs));
        }
    }
    let mut got: Vec<_> = slots
        .iter()
        .filter(|s| s.is_retx)
        .map(|s| {
            (
                s.user.unwrap(),
                s.direction,
                s.harq_process,
                s.num_symbols,
                s.mcs,
            )
        })
        .collect();
    got.sort();
    expected.sort();
    if got != expected {
        return Err(format!(
            "retransmissions {got:?} differ from first-fit {expected:?}"
        ));
    }
    let mut shares = BTreeMap::new();
    for s in slots.iter().filter(|s| !s.is_retx) {
        let f = inst
            .flows
            .iter()
            .find(|f| f.key() == (s.user.unwrap(), s.direction))
            .ok_or("grant for unknown flow")?;
        if s.mcs != f.mcs() || Some(s.harq_process) != f.free_process {
            return Err("new-data grant with wrong MCS or process".into());
        }
        if shares.insert(f.key(), s.num_symbols).is_some() {
            return Err("flow granted twice".into());
        }
    }
    Ok((shares, left))
}

#[derive(Default)]
pub struct Tally {
    pub instances: usize,
    pub violations: usize,
    pub first: Option<String>,
}

impl Tally {
    fn record(&mut self, r: Result<(), String>) {
        self.instances += 1;
        if let Err(e) = r {
            self.violations += 1;
            self.first.get_or_insert(e);
        }
    }
}

fn check_rr(inst: &Instance, alloc: &SubframeAllocation) -> Result<(), String> {
    let (shares, left) = structure(inst, alloc)?;
    let amc = Amc::new(&inst.cfg);
    let needs: Vec<u32> = inst.flows.iter().map(|f| f.need_symbols(&amc)).collect();
    let got: Vec<u32> = inst
        .flows
        .iter()
        .map(|f| shares.get(&f.key()).copied().unwrap_or(0))
        .collect();
    if got.iter().zip(&needs).any(|(g, n)| g > n) {
        return Err(format!("share beyond need: {got:?} vs {needs:?}"));
    }
    let total: u32 = got.iter().sum();
    let demand: u32 = needs.iter().sum();
    if total != left.min(demand) {
        return Err(format!(
            "not work conserving: used {total} of {left}, demand {demand}"
        ));
    }
    // Max-min fairness: the sorted share vector must be lexicographically
    // maximal among all feasible vectors.
    let best = enumerate(&needs, left)
        .into_iter()
        .map(|v| sorted(&v))
        .max()
        .unwrap();
    if sorted(&got) != best {
        return Err(format!("shares {got:?} are not max-min fair (best sorted {best:?}, needs {needs:?}, {left} symbols)"));
    }
    Ok(())
}

fn check_edf(inst: &Instance, alloc: &SubframeAllocation) -> Result<(), String> {
    let (shares, left) = structure(inst, alloc)?;
    let amc = Amc::new(&inst.cfg);
    let mut order: Vec<&FlowState> = inst.flows.iter().collect();
    order.sort_by_key(|f| (f.deadline(inst.now), f.user, f.direction));
    let needs: Vec<u32> = order.iter().map(|f| f.need_symbols(&amc)).collect();
    let got: Vec<u32> = order
        .iter()
        .map(|f| shares.get(&f.key()).copied().unwrap_or(0))
        .collect();
    // Greedy in deadline order is the lexicographic maximum.
    let best = enumerate(&needs, left).into_iter().max().unwrap();
    if got != best {
        return Err(format!(
            "EDF shares {got:?} differ from enumerated optimum {best:?}"
        ));
    }
    for (i, f) in order.iter().enumerate() {
        for (j, g) in order.iter().enumerate() {
            if got[i] > 0
                && got[j] == 0
                && needs[j] > 0
                && f.deadline(inst.now) > g.deadline(inst.now)
            {
                return Err("scheduled flow has a later deadline than an unscheduled one".into());
            }
        }
    }
    Ok(())
}

fn input<'a>(inst: &'a Instance, k: u64) -> ScheduleInput<'a> {
    ScheduleInput {
        frame: k / 10,
        subframe: (k % 10) as u32,
        now: inst.now,
        flows: &inst.flows,
        retx: &inst.retx,
        cfg: &inst.cfg,
    }
}

pub fn randomized(n: usize, seed: u64) -> (Tally, Tally) {
    let mut rng = RngStream::new(seed, "oracle/scheduler");
    let (mut rr_tally, mut edf_tally) = (Tally::default(), Tally::default());
    let mut rr = RoundRobinScheduler::new(None);
    for k in 0..n as u64 {
        // The cursor persists, so each instance also sees an arbitrary RR start.
        let inst = random_instance(&mut rng);
        let a = rr.schedule(&input(&inst, k));
        rr_tally.record(check_rr(&inst, &a));
        let e = EdfScheduler::new(None).schedule(&input(&inst, k));
        edf_tally.record(check_edf(&inst, &e));
    }
    (rr_tally, edf_tally)
}

/// Identical saturated flows: per-subframe spread at most one symbol and
/// long-run shares equal within 1%.
pub fn long_run_fairness() -> Result<(), String> {
    for s in [1, 3, 5, 8, 21] {
        let cfg = cfg_with_data_symbols(s);
        for n in 1..=4u32 {
            let flows: Vec<FlowState> = (0..n)
                .map(|user| FlowState {
                    user,
                    direction: Direction::Dl,
                    buffer_bytes: 1 << 30,
                    header_bytes: 5,
                    cqi: Some(28),
                    delay_budget: SimTime::from_millis(100),
                    hol_arrival: Some(SimTime::ZERO),
                    free_process: Some(0),
                })
                .collect();
            let inst = Instance {
                cfg: cfg.clone(),
                flows,
                retx: Vec::new(),
                now: SimTime::ZERO,
            };
            let mut rr = RoundRobinScheduler::new(None);
            let mut totals = vec![0u64; n as usize];
            for k in 0..10_000 {
                let a = rr.schedule(&input(&inst, k));
                let mut per = vec![0u32; n as usize];
                for sl in a.data_slots() {
                    per[sl.user.unwrap() as usize] += sl.num_symbols;
                }
                let (lo, hi) = (per.iter().min().unwrap(), per.iter().max().unwrap());
                if hi - lo > 1 || per.iter().sum::<u32>() != s {
                    return Err(format!("S={s} N={n} subframe {k}: shares {per:?}"));
                }
                for (t, p) in totals.iter_mut().zip(&per) {
                    *t += *p as u64;
                }
            }
            let mean = totals.iter().sum::<u64>() as f64 / n as f64;
            if totals
                .iter()
                .any(|&t| (t as f64 - mean).abs() > 0.01 * mean)
            {
                return Err(format!("S={s} N={n}: long-run totals {totals:?}"));
            }
        }
    }
    Ok(())
}

pub fn check() -> Outcome {
    let (rr, edf) = randomized(10_000, 99);
    let fair = long_run_fairness();
    let pass = rr.violations == 0 && edf.violations == 0 && fair.is_ok();
    let mut detail = format!(
        "RR {}/{} instances violate feasibility/work-conservation/max-min; EDF {}/{} violate dominance/optimality; long-run fairness {}",
        rr.violations,
        rr.instances,
        edf.violations,
        edf.instances,
        match &fair {
            Ok(()) => "ok".to_string(),
            Err(e) => e.clone(),
        }
    );
    for (name, t) in [("RR", &rr), ("EDF", &edf)] {
        if let Some(e) = &t.first {
            detail.push_str(&format!("; first {name} violation: {e}"));
        }
    }
    Outcome::new("scheduler properties", pass, detail)
}
