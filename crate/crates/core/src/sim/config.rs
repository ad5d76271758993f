use crate::channel::{ChannelSource, LinkConfig};
use crate::engine::{PhyMacConfig, SimTime};
use crate::error::{Error, Result};
use crate::mac::SchedulerKind;
use crate::net::TcpConfig;
use crate::rlc::RlcMode;
use crate::scene::{Building, MobilityTrack, Position};

#[derive(Clone, Debug, PartialEq)]
pub struct CellSpec {
    pub position: Position,
    /// Planar array size (x, y).
    pub array: (usize, usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct UeSpec {
    pub track: MobilityTrack,
    /// Index of the serving cell.
    pub cell: usize,
    pub array: (usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrafficDirection {
    Dl,
    Ul,
    Both,
}

impl TrafficDirection {
    pub fn dl(self) -> bool {
        matches!(self, TrafficDirection::Dl | TrafficDirection::Both)
    }

    pub fn ul(self) -> bool {
        matches!(self, TrafficDirection::Ul | TrafficDirection::Both)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Traffic {
    /// Saturated RLC buffers in the chosen directions.
    FullBuffer,
    /// Constant-rate datagrams.
    Udp {
        rate_bps: f64,
        packet_bytes: u64,
    },
    /// Remote host to user bulk transfer over New Reno.
    Tcp {
        rate_bps: f64,
        tcp: TcpConfig,
    },
    None,
}

/// Trace selection. `dir = None` disables file output entirely.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceOptions {
    pub dir: Option<std::path::PathBuf>,
    pub alloc: bool,
    pub phy_tb: bool,
    pub sinr_period: SimTime,
    /// Sampling period of the RLC and TCP traces and bin width of the
    /// delivered-bytes trace.
    pub bin: SimTime,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            dir: None,
            alloc: true,
            phy_tb: true,
            sinr_period: SimTime::from_millis(1),
            bin: SimTime::from_millis(10),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub name: String,
    pub seed: u64,
    pub duration: SimTime,
    pub phy: PhyMacConfig,
    pub link: LinkConfig,
    pub source: ChannelSource,
    pub cells: Vec<CellSpec>,
    pub ues: Vec<UeSpec>,
    pub buildings: Vec<Building>,
    pub scheduler: SchedulerKind,
    pub fixed_tti: Option<u32>,
    pub max_retx: u32,
    pub delay_budget: SimTime,
    pub enb_tx_power_dbm: f64,
    pub ue_tx_power_dbm: f64,
    pub enb_noise_figure_db: f64,
    pub ue_noise_figure_db: f64,
    pub traffic: Traffic,
    pub direction: TrafficDirection,
    pub rlc_mode: RlcMode,
    pub rlc_capacity: u64,
    pub arq_max_retx: u32,
    pub core_hop_delay: SimTime,
    pub core_rate_bps: Option<f64>,
    pub app_tick: SimTime,
    pub geometry_period: SimTime,
    pub trace: TraceOptions,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            name: "scenario".into(),
            seed: 1,
            duration: SimTime::from_millis(1000),
            phy: PhyMacConfig::default(),
            link: LinkConfig::default(),
            source: ChannelSource::Statistical,
            cells: vec![CellSpec {
                position: Position::new(0.0, 0.0, 10.0),
                array: (8, 8),
            }],
            ues: Vec::new(),
            buildings: Vec::new(),
            scheduler: SchedulerKind::RoundRobin,
            fixed_tti: None,
            max_retx: 3,
            delay_budget: SimTime::from_millis(100),
            enb_tx_power_dbm: 30.0,
            ue_tx_power_dbm: 23.0,
            enb_noise_figure_db: 5.0,
            ue_noise_figure_db: 7.0,
            traffic: Traffic::FullBuffer,
            direction: TrafficDirection::Dl,
            rlc_mode: RlcMode::Um,
            rlc_capacity: crate::rlc::UM_DEFAULT_CAPACITY,
            arq_max_retx: crate::rlc::DEFAULT_ARQ_MAX_RETX,
            core_hop_delay: SimTime::from_millis(10),
            core_rate_bps: Some(100e9),
            app_tick: SimTime::from_micros(100),
            geometry_period: SimTime::from_millis(1),
            trace: TraceOptions::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.phy.validate()?;
        if self.duration == SimTime::ZERO {
            return Err(Error::config("duration", "must be positive"));
        }
        if self.cells.is_empty() {
            return Err(Error::config(
                "enb",
                "at least one base station is required",
            ));
        }
        for (i, u) in self.ues.iter().enumerate() {
            if u.cell >= self.cells.len() {
                return Err(Error::config(
                    "cell",
                    format!(
                        "user {i} is attached to cell {} but only {} exist",
                        u.cell,
                        self.cells.len()
                    ),
                ));
            }
            if u.array.0 * u.array.1 == 0 {
                return Err(Error::config(
                    "ue_antennas",
                    "array needs at least one element",
                ));
            }
        }
        if self.cells.iter().any(|c| c.array.0 * c.array.1 == 0) {
            return Err(Error::config(
                "enb_antennas",
                "array needs at least one element",
            ));
        }
        if self.geometry_period == SimTime::ZERO {
            return Err(Error::config("geometry_period_ms", "must be positive"));
        }
        if self.trace.bin == SimTime::ZERO || self.trace.sinr_period == SimTime::ZERO {
            return Err(Error::config(
                "trace_bin_ms",
                "trace periods must be positive",
            ));
        }
        if self.app_tick == SimTime::ZERO {
            return Err(Error::config("app_tick_us", "must be positive"));
        }
        if let Some(t) = self.fixed_tti {
            if t == 0 || t > self.phy.data_symbols() {
                return Err(Error::config(
                    "fixed_tti",
                    format!("must be in 1..={}", self.phy.data_symbols()),
                ));
            }
        }
        Ok(())
    }

    /// RLC mode actually used by the traffic flows.
    pub fn effective_rlc_mode(&self) -> RlcMode {
        match self.traffic {
            Traffic::FullBuffer => RlcMode::Sm,
            _ => self.rlc_mode,
        }
    }
}
