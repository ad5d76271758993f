//! Propagation: pathloss, clustered fading channels, beamforming and
//! per-link channel state.

mod antenna;
mod beamforming;
mod cluster;
mod fading;
pub mod linalg;
mod link;
mod pathloss;
mod raytrace;

pub use antenna::AntennaArray;
pub use beamforming::{
    power_iteration_beamforming, sector_sweep, sector_sweep_matrix, BeamPair,
    DEFAULT_POWER_ITERATIONS,
};
pub use cluster::{
    generate_realization, ChannelRealization, Cluster, ClusterConfig, LinkGeometry,
    RealizationPool, Subpath, POOL_VERSION_TAG,
};
pub use fading::{channel_matrix, doppler_hz, small_scale_gain, Motion, SPEED_OF_LIGHT};
pub use link::{BeamformingMethod, ChannelSource, LinkChannel, LinkConfig, UpdateTimer};
pub use pathloss::{pathloss_db, PathlossModel, PathlossParams};
pub use raytrace::{RayPath, RayTraceRoute, RayTraceSample, RAYTRACE_HEADER};
