use crate::engine::SimTime;
use crate::error::{Error, Result};

/// Frame numerology shared by PHY and MAC.
///
/// Durations are held in integer nanoseconds. The subframe length is the
/// exact product `symbols_per_subframe * symbol_length`; the nominal
/// 100 us figure is accepted on input but 24 x 4.16 us = 99.84 us is used.
#[derive(Clone, Debug, PartialEq)]
pub struct PhyMacConfig {
    pub subframes_per_frame: u32,
    pub symbols_per_subframe: u32,
    pub symbol_length: SimTime,
    pub num_subbands: u32,
    pub subband_width_hz: f64,
    pub subcarriers_per_subband: u32,
    pub center_freq_hz: f64,
    pub num_ref_sc_per_symbol: u32,
    pub num_dl_ctrl_symbols: u32,
    pub num_ul_ctrl_symbols: u32,
    pub guard_period: SimTime,
    pub mac_phy_data_latency: u32,
    pub phy_mac_data_latency: u32,
    pub num_harq_processes: u32,
}

impl Default for PhyMacConfig {
    fn default() -> Self {
        PhyMacConfig {
            subframes_per_frame: 10,
            symbols_per_subframe: 24,
            symbol_length: SimTime::from_nanos(4_160),
            num_subbands: 72,
            subband_width_hz: 13.89e6,
            subcarriers_per_subband: 48,
            center_freq_hz: 28e9,
            num_ref_sc_per_symbol: 864,
            num_dl_ctrl_symbols: 1,
            num_ul_ctrl_symbols: 1,
            guard_period: SimTime::from_nanos(4_160),
            mac_phy_data_latency: 2,
            phy_mac_data_latency: 2,
            num_harq_processes: 20,
        }
    }
}

/// Configuration keys accepted by [`PhyMacConfig::set`].
pub const PHY_MAC_KEYS: &[&str] = &[
    "SubframePerFrame",
    "SubframeLength",
    "SymbolsPerSubframe",
    "SymbolLength",
    "NumSubbands",
    "SubbandWidth",
    "SubcarriersPerSubband",
    "CenterFreq",
    "NumRefScPerSymbol",
    "NumDlCtrlSymbols",
    "NumUlCtrlSymbols",
    "GuardPeriod",
    "MacPhyDataLatency",
    "PhyMacDataLatency",
    "NumHarqProcesses",
];

impl PhyMacConfig {
    pub fn subframe_length(&self) -> SimTime {
        SimTime::from_nanos(self.symbol_length.as_nanos() * self.symbols_per_subframe as u64)
    }

    pub fn frame_length(&self) -> SimTime {
        SimTime::from_nanos(self.subframe_length().as_nanos() * self.subframes_per_frame as u64)
    }

    pub fn total_subcarriers(&self) -> u32 {
        self.num_subbands * self.subcarriers_per_subband
    }

    /// Subcarriers per symbol left after reference signals.
    pub fn data_subcarriers_per_symbol(&self) -> u32 {
        self.total_subcarriers() - self.num_ref_sc_per_symbol
    }

    /// Symbols consumed by the guard period, rounded up.
    pub fn guard_symbols(&self) -> u32 {
        let sym = self.symbol_length.as_nanos();
        self.guard_period.as_nanos().div_ceil(sym) as u32
    }

    /// Symbols available to DATA slots in one subframe.
    pub fn data_symbols(&self) -> u32 {
        self.symbols_per_subframe.saturating_sub(
            self.num_dl_ctrl_symbols + self.num_ul_ctrl_symbols + self.guard_symbols(),
        )
    }

    /// Center frequency of subband `b` in Hz.
    pub fn subband_center_hz(&self, b: usize) -> f64 {
        let offset = b as f64 - (self.num_subbands as f64 - 1.0) / 2.0;
        self.center_freq_hz + offset * self.subband_width_hz
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("SubframePerFrame", self.subframes_per_frame),
            ("SymbolsPerSubframe", self.symbols_per_subframe),
            ("NumSubbands", self.num_subbands),
            ("SubcarriersPerSubband", self.subcarriers_per_subband),
            ("NumDlCtrlSymbols", self.num_dl_ctrl_symbols),
            ("NumUlCtrlSymbols", self.num_ul_ctrl_symbols),
            ("NumHarqProcesses", self.num_harq_processes),
        ];
        for (k, v) in counts {
            if v < 1 {
                return Err(Error::config(k, "must be >= 1"));
            }
        }
        if self.symbol_length.as_nanos() == 0 {
            return Err(Error::config("SymbolLength", "must be > 0"));
        }
        if self.num_ref_sc_per_symbol >= self.total_subcarriers() {
            return Err(Error::config(
                "NumRefScPerSymbol",
                "must leave data subcarriers in each symbol",
            ));
        }
        if self.num_dl_ctrl_symbols + self.num_ul_ctrl_symbols >= self.symbols_per_subframe {
            return Err(Error::config(
                "NumDlCtrlSymbols",
                "control symbols must be fewer than SymbolsPerSubframe",
            ));
        }
        if self.data_symbols() == 0 {
            return Err(Error::config(
                "GuardPeriod",
                "no data symbols left in the subframe",
            ));
        }
        if !(self.subband_width_hz > 0.0) || !(self.center_freq_hz > 0.0) {
            return Err(Error::config(
                "SubbandWidth",
                "frequencies must be positive",
            ));
        }
        Ok(())
    }

    /// Applies one `key = value` pair. Durations are given in microseconds.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let count = || -> Result<u32> {
            value
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::config(key, format!("expected a count, got `{value}`")))
        };
        let real = || -> Result<f64> {
            let v = value
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::config(key, format!("expected a number, got `{value}`")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::config(key, "must be finite and non-negative"));
            }
            Ok(v)
        };
        let micros = |v: f64| SimTime::from_nanos((v * 1_000.0).round() as u64);
        match key {
            "SubframePerFrame" | "SubframesPerFrame" => self.subframes_per_frame = count()?,
            "SubframeLength" => {
                // Nominal value: must agree with the symbol product within 1%.
                let nominal = micros(real()?).as_nanos() as f64;
                let exact = self.subframe_length().as_nanos() as f64;
                if (nominal - exact).abs() > 0.01 * exact {
                    return Err(Error::config(
                        key,
                        format!(
                            "{} us disagrees with SymbolsPerSubframe x SymbolLength = {} us",
                            nominal / 1e3,
                            exact / 1e3
                        ),
                    ));
                }
            }
            "SymbolsPerSubframe" => self.symbols_per_subframe = count()?,
            "SymbolLength" => self.symbol_length = micros(real()?),
            "NumSubbands" => self.num_subbands = count()?,
            "SubbandWidth" => self.subband_width_hz = real()?,
            "SubcarriersPerSubband" => self.subcarriers_per_subband = count()?,
            "CenterFreq" => self.center_freq_hz = real()?,
            "NumRefScPerSymbol" => self.num_ref_sc_per_symbol = count()?,
            "NumDlCtrlSymbols" => self.num_dl_ctrl_symbols = count()?,
            "NumUlCtrlSymbols" => self.num_ul_ctrl_symbols = count()?,
            "GuardPeriod" => self.guard_period = micros(real()?),
            "MacPhyDataLatency" => self.mac_phy_data_latency = count()?,
            "PhyMacDataLatency" => self.phy_mac_data_latency = count()?,
            "NumHarqProcesses" => self.num_harq_processes = count()?,
            _ => return Err(Error::config(key, "unknown PHY/MAC parameter")),
        }
        Ok(())
    }
}
