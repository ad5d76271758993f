//! Discrete-event core: clock, event queue, random streams and numerology.

mod config;
mod queue;
mod rng;
mod time;

pub use config::{PhyMacConfig, PHY_MAC_KEYS};
pub use queue::{run, EventHandle, Handler, RunStats, Scheduler};
pub use rng::{fnv1a, RngStream};
pub use time::SimTime;
