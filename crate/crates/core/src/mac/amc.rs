use crate::engine::PhyMacConfig;
use crate::error::{Error, Result};

/// Modulation order and code rate (in 1/1024 units) of one MCS index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McsEntry {
    pub index: u8,
    pub modulation_order: u8,
    pub rate_x1024: u16,
}

impl McsEntry {
    pub fn code_rate(&self) -> f64 {
        self.rate_x1024 as f64 / 1024.0
    }

    /// Information bits per modulation symbol.
    pub fn spectral_efficiency(&self) -> f64 {
        self.modulation_order as f64 * self.code_rate()
    }
}

pub const MAX_MCS: u8 = 28;
pub const CRC_BITS: u64 = 24;
pub const MAC_HEADER_BYTES: u64 = 3;
pub const RLC_HEADER_BYTES: u64 = 2;

const fn e(index: u8, modulation_order: u8, rate_x1024: u16) -> McsEntry {
    McsEntry {
        index,
        modulation_order,
        rate_x1024,
    }
}

pub const MCS_TABLE: [McsEntry; 29] = [
    e(0, 2, 78),
    e(1, 2, 102),
    e(2, 2, 120),
    e(3, 2, 157),
    e(4, 2, 193),
    e(5, 2, 251),
    e(6, 2, 308),
    e(7, 2, 379),
    e(8, 2, 449),
    e(9, 2, 526),
    e(10, 4, 340),
    e(11, 4, 378),
    e(12, 4, 434),
    e(13, 4, 490),
    e(14, 4, 553),
    e(15, 4, 616),
    e(16, 4, 640),
    e(17, 6, 438),
    e(18, 6, 466),
    e(19, 6, 517),
    e(20, 6, 567),
    e(21, 6, 616),
    e(22, 6, 666),
    e(23, 6, 719),
    e(24, 6, 772),
    e(25, 6, 822),
    e(26, 6, 873),
    e(27, 6, 910),
    e(28, 6, 948),
];

pub fn mcs(index: u8) -> Result<McsEntry> {
    MCS_TABLE
        .get(index as usize)
        .copied()
        .ok_or_else(|| Error::violation(format!("MCS index {index} out of range 0..={MAX_MCS}")))
}

/// Transport-block sizing for a given frame numerology.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Amc {
    pub data_subcarriers: u32,
}

impl Amc {
    pub fn new(cfg: &PhyMacConfig) -> Self {
        Amc {
            data_subcarriers: cfg.data_subcarriers_per_symbol(),
        }
    }

    /// Coded payload bits carried by one symbol, before CRC.
    pub fn bits_per_symbol(&self, m: &McsEntry) -> u64 {
        self.data_subcarriers as u64 * m.modulation_order as u64 * m.rate_x1024 as u64 / 1024
    }

    pub fn tb_size_bits(&self, m: &McsEntry, num_symbols: u32) -> u64 {
        (self.bits_per_symbol(m) * num_symbols as u64).saturating_sub(CRC_BITS)
    }

    /// Smallest symbol count whose TB holds `bytes`; zero for an empty buffer.
    /// Header bytes are the caller's to add.
    pub fn num_symbols_for_buffer(&self, m: &McsEntry, bytes: u64) -> u32 {
        if bytes == 0 {
            return 0;
        }
        let per = self.bits_per_symbol(m);
        if per == 0 {
            return u32::MAX;
        }
        let need = bytes * 8 + CRC_BITS;
        need.div_ceil(per).min(u32::MAX as u64) as u32
    }
}
