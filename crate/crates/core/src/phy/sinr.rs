use crate::engine::SimTime;
use crate::error::{Error, Result};

pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Thermal noise power over `bandwidth_hz` with receiver noise figure.
pub fn noise_power_watts(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(THERMAL_NOISE_DBM_PER_HZ + noise_figure_db) * bandwidth_hz
}

/// Per-subband SINR, linear.
#[derive(Clone, Debug, PartialEq)]
pub struct SinrReport {
    pub sinr: Vec<f64>,
    pub time: SimTime,
}

impl SinrReport {
    pub fn mean_linear(&self) -> f64 {
        self.sinr.iter().sum::<f64>() / self.sinr.len().max(1) as f64
    }
}

/// A concurrent transmission seen by the victim receiver.
#[derive(Clone, Debug, PartialEq)]
pub struct Interferer<'a> {
    pub power_per_subband_w: f64,
    pub gains: &'a [f64],
    /// Fraction of the victim slot overlapped in time, in [0, 1].
    pub overlap: f64,
}

/// `P G(f) / (N + sum_j P_j G_j(f))` per subband.
pub fn compute_sinr(
    power_per_subband_w: f64,
    signal_gains: &[f64],
    noise_per_subband_w: f64,
    interferers: &[Interferer<'_>],
    time: SimTime,
) -> Result<SinrReport> {
    if signal_gains.is_empty() {
        return Err(Error::violation("no subbands in SINR computation"));
    }
    if interferers
        .iter()
        .any(|i| i.gains.len() != signal_gains.len())
    {
        return Err(Error::violation("interferer subband count mismatch"));
    }
    let sinr = signal_gains
        .iter()
        .enumerate()
        .map(|(b, g)| {
            let i: f64 = interferers
                .iter()
                .map(|j| j.power_per_subband_w * j.gains[b] * j.overlap.clamp(0.0, 1.0))
                .sum();
            (power_per_subband_w * g / (noise_per_subband_w + i)).max(0.0)
        })
        .collect();
    Ok(SinrReport { sinr, time })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_only_flat() {
        let n = noise_power_watts(13.89e6, 7.0);
        let r = compute_sinr(1e-3, &[1e-10; 72], n, &[], SimTime::ZERO).unwrap();
        let expect = 1e-3 * 1e-10 / n;
        assert!(r.sinr.iter().all(|s| (s - expect).abs() < 1e-12 * expect));
    }

    #[test]
    fn equal_interferer_below_zero_db() {
        let g = [2e-9; 4];
        let n = noise_power_watts(13.89e6, 5.0);
        let i = Interferer {
            power_per_subband_w: 1e-3,
            gains: &g,
            overlap: 1.0,
        };
        let r = compute_sinr(1e-3, &g, n, &[i], SimTime::ZERO).unwrap();
        let pg = 1e-3 * 2e-9;
        for s in r.sinr {
            assert!((s - pg / (n + pg)).abs() < 1e-12);
            assert!(s < 1.0);
        }
    }

    #[test]
    fn noise_density() {
        // -174 dBm/Hz over 1 Hz with 0 dB figure.
        assert!((watts_to_dbm(noise_power_watts(1.0, 0.0)) + 174.0).abs() < 1e-9);
    }
}
