//! Frame layout, SINR, link-to-system mapping, HARQ soft combining and CQI.

mod bler;
mod cqi;
mod error_model;
mod frame;
mod mi;
mod sinr;

pub use bler::{BlerCurve, BlerTable};
pub use cqi::{generate_cqi, TARGET_BLER};
pub use error_model::{
    combined_bler, effective_sinr_for_mcs, DecodeOutcome, DecodeResult, HarqReceiver, SoftBuffer,
};
pub use frame::{data_region, Direction, SlotAllocation, SlotKind, SubframeAllocation};
pub use mi::{miesm_effective_sinr, MiTable};
pub use sinr::{
    compute_sinr, db_to_linear, dbm_to_watts, linear_to_db, noise_power_watts, watts_to_dbm,
    Interferer, SinrReport, THERMAL_NOISE_DBM_PER_HZ,
};
