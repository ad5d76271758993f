use std::f64::consts::PI;

use super::antenna::AntennaArray;
use super::cluster::{ChannelRealization, Subpath};
use super::linalg::{CMatrix, C64};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Maximum Doppler shift for speed `v` (m/s) at carrier `fc` (Hz).
pub fn doppler_hz(speed: f64, fc: f64) -> f64 {
    speed * fc / SPEED_OF_LIGHT
}

/// Receiver motion used to evaluate the time-varying phase of each subpath.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Motion {
    pub doppler_hz: f64,
    /// Horizontal heading of the receiver, radians.
    pub heading: f64,
}

impl Motion {
    pub fn omega(&self, sp: &Subpath) -> f64 {
        sp.aoa_az - self.heading
    }
}

/// `sqrt(P) exp(2 pi i fd cos(omega) t - 2 pi i tau f)`
pub fn small_scale_gain(sp: &Subpath, t: f64, f: f64, fd: f64, omega: f64) -> C64 {
    let phase = 2.0 * PI * fd * omega.cos() * t - 2.0 * PI * sp.delay_s * f;
    C64::from_polar(sp.power.sqrt(), phase)
}

/// Sum over subpaths of `g_kl * u_rx u_tx^H`; shape (rx elements, tx elements).
pub fn channel_matrix(
    real: &ChannelRealization,
    tx: &AntennaArray,
    rx: &AntennaArray,
    t: f64,
    f: f64,
    motion: &Motion,
) -> CMatrix {
    let mut h = CMatrix::zeros(rx.len(), tx.len());
    let mut u_rx = Vec::new();
    let mut u_tx = Vec::new();
    for sp in real.subpaths() {
        let g = small_scale_gain(sp, t, f, motion.doppler_hz, motion.omega(sp));
        rx.spatial_signature_into(sp.aoa_az, sp.aoa_el, &mut u_rx);
        tx.spatial_signature_into(sp.aod_az, sp.aod_el, &mut u_tx);
        h.add_outer(g, &u_rx, &u_tx);
    }
    h
}
