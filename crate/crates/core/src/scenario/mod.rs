//! Scenario files and the experiment runners built on them.

mod file;
mod run;

pub use file::{RandomUes, Scenario, DEFAULT_UE_ARRAY};
pub use run::{
    format_cdf, format_cells, format_drops, format_sweep, report_direction, run_drops,
    run_scenario, sweep_pathloss, DropsReport, RunReport, SweepPoint, CDF_HEADER, CELLS_HEADER,
    DROPS_HEADER, SWEEP_HEADER,
};
