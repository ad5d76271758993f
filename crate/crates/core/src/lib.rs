//! Discrete-event simulator of a beamformed mmWave cellular network.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod engine;
pub mod error;
pub mod mac;
pub mod net;
pub mod phy;
pub mod rlc;
pub mod scenario;
pub mod scene;
pub mod sim;

pub use error::{Error, Result};
