//! Core-network links, traffic sources and the TCP endpoints.

mod app;
mod link;
mod tcp;

pub use app::RateSource;
pub use link::{DelayLink, Path};
pub use tcp::{
    TcpConfig, TcpPhase, TcpReceiver, TcpSegment, TcpSender, DEFAULT_BUFFER_BYTES, DEFAULT_MSS,
    TCP_IP_HEADER_BYTES,
};
