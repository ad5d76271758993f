//! Wiring of all layers into one event-driven run.

mod config;
mod stats;
pub mod trace;
mod world;

pub use config::{CellSpec, SimConfig, TraceOptions, Traffic, TrafficDirection, UeSpec};
pub use stats::{
    empirical_cdf, format_summary, recompute_from_traces, verify_summary, DirStats, DropSummary,
    UserStats, RUN_HEADER, SUMMARY_HEADER,
};
pub use world::{ChannelEvent, ChannelEventReason, SimOutput, Simulation, SinrSample, TcpSample};
