use std::fmt;
use std::ops::Range;

use crate::engine::PhyMacConfig;
use crate::error::{Error, Result};
use crate::mac::amc::MAX_MCS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Dl,
    Ul,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Dl => "DL",
            Direction::Ul => "UL",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotKind {
    Ctrl,
    Data,
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotKind::Ctrl => "CTRL",
            SlotKind::Data => "DATA",
        })
    }
}

/// A contiguous run of OFDM symbols within one subframe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SlotAllocation {
    pub start_symbol: u32,
    pub num_symbols: u32,
    pub direction: Direction,
    pub kind: SlotKind,
    /// `None` marks a broadcast control slot.
    pub user: Option<u32>,
    pub mcs: u8,
    pub harq_process: u8,
    pub is_retx: bool,
}

impl SlotAllocation {
    pub fn ctrl(direction: Direction, start_symbol: u32, num_symbols: u32) -> Self {
        SlotAllocation {
            start_symbol,
            num_symbols,
            direction,
            kind: SlotKind::Ctrl,
            user: None,
            mcs: 0,
            harq_process: 0,
            is_retx: false,
        }
    }

    pub fn end_symbol(&self) -> u32 {
        self.start_symbol + self.num_symbols
    }

    pub fn symbols(&self) -> Range<u32> {
        self.start_symbol..self.end_symbol()
    }
}

/// Allocation of one subframe: DL CTRL first, DATA slots, UL CTRL last.
///
/// The guard symbol for the UL-to-DL switch at the subframe boundary sits
/// after the UL CTRL symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubframeAllocation {
    pub frame: u64,
    pub subframe: u32,
    pub slots: Vec<SlotAllocation>,
}

/// Symbols available for DATA slots.
pub fn data_region(cfg: &PhyMacConfig) -> Range<u32> {
    cfg.num_dl_ctrl_symbols..ul_ctrl_start(cfg)
}

fn ul_ctrl_start(cfg: &PhyMacConfig) -> u32 {
    cfg.symbols_per_subframe - cfg.guard_symbols() - cfg.num_ul_ctrl_symbols
}

impl SubframeAllocation {
    pub fn control_only(frame: u64, subframe: u32, cfg: &PhyMacConfig) -> Self {
        SubframeAllocation {
            frame,
            subframe,
            slots: vec![
                SlotAllocation::ctrl(Direction::Dl, 0, cfg.num_dl_ctrl_symbols),
                SlotAllocation::ctrl(Direction::Ul, ul_ctrl_start(cfg), cfg.num_ul_ctrl_symbols),
            ],
        }
    }

    pub fn data_slots(&self) -> impl Iterator<Item = &SlotAllocation> {
        self.slots.iter().filter(|s| s.kind == SlotKind::Data)
    }

    /// Inserts a DATA slot before the UL CTRL slot, keeping symbol order.
    pub fn push_data(&mut self, slot: SlotAllocation) {
        let at = self.slots.len().saturating_sub(1);
        self.slots.insert(at, slot);
    }

    pub fn validate(&self, cfg: &PhyMacConfig) -> Result<()> {
        let bad = |m: String| {
            Err(Error::violation(format!(
                "subframe {}/{}: {m}",
                self.frame, self.subframe
            )))
        };
        let n = self.slots.len();
        if n < 2 {
            return bad("missing control slots".into());
        }
        let first = &self.slots[0];
        if first.kind != SlotKind::Ctrl
            || first.direction != Direction::Dl
            || first.start_symbol != 0
            || first.num_symbols != cfg.num_dl_ctrl_symbols
        {
            return bad("first slot must be the DL CTRL region".into());
        }
        let last = &self.slots[n - 1];
        if last.kind != SlotKind::Ctrl
            || last.direction != Direction::Ul
            || last.start_symbol != ul_ctrl_start(cfg)
            || last.num_symbols != cfg.num_ul_ctrl_symbols
        {
            return bad("last slot must be the UL CTRL region".into());
        }
        let region = data_region(cfg);
        for s in &self.slots[1..n - 1] {
            if s.kind != SlotKind::Data {
                return bad("control slot inside the data region".into());
            }
            if s.num_symbols == 0 {
                return bad("empty slot".into());
            }
            if s.start_symbol < region.start || s.end_symbol() > region.end {
                return bad(format!(
                    "slot {:?} outside data symbols {:?}",
                    s.symbols(),
                    region
                ));
            }
            if s.user.is_none() {
                return bad("DATA slot without a user".into());
            }
            if s.mcs > MAX_MCS {
                return bad(format!("MCS {} out of range", s.mcs));
            }
        }
        for w in self.slots.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if b.start_symbol < a.end_symbol() {
                return bad(format!(
                    "overlapping slots {:?} and {:?}",
                    a.symbols(),
                    b.symbols()
                ));
            }
            if a.direction == Direction::Ul
                && b.direction == Direction::Dl
                && b.start_symbol < a.end_symbol() + cfg.guard_symbols()
            {
                return bad("missing guard symbol at UL to DL switch".into());
            }
        }
        if last.end_symbol() + cfg.guard_symbols() > cfg.symbols_per_subframe {
            return bad("no room for the boundary guard symbol".into());
        }
        Ok(())
    }
}
