use crate::error::{Error, Result};
use crate::scene::ChannelState;

/// Log-distance pathloss parameters for one channel state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossParams {
    /// Intercept in dB.
    pub alpha: f64,
    /// Distance slope (unitless, multiplies 10 log10 d).
    pub beta: f64,
    /// Shadowing standard deviation in dB.
    pub sigma: f64,
}

impl PathlossParams {
    pub fn new(alpha: f64, beta: f64, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !(beta > 0.0) || !alpha.is_finite() {
            return Err(Error::violation(format!(
                "pathloss parameters need sigma >= 0 and beta > 0 (alpha {alpha}, beta {beta}, sigma {sigma})"
            )));
        }
        Ok(PathlossParams { alpha, beta, sigma })
    }
}

/// Per-state parameter pair. Defaults are the 28 GHz measurement fits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathlossModel {
    pub los: PathlossParams,
    pub nlos: PathlossParams,
}

impl Default for PathlossModel {
    fn default() -> Self {
        PathlossModel {
            los: PathlossParams {
                alpha: 61.4,
                beta: 2.0,
                sigma: 5.8,
            },
            nlos: PathlossParams {
                alpha: 72.0,
                beta: 2.92,
                sigma: 8.7,
            },
        }
    }
}

impl PathlossModel {
    pub fn params(&self, state: ChannelState) -> Option<&PathlossParams> {
        match state {
            ChannelState::LoS => Some(&self.los),
            ChannelState::NLoS => Some(&self.nlos),
            ChannelState::Outage => None,
        }
    }
}

/// `alpha + beta * 10 log10(d) + shadowing`, in dB.
pub fn pathloss_db(
    d: f64,
    state: ChannelState,
    params: &PathlossParams,
    shadowing_db: f64,
) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::violation(format!(
            "pathloss distance {d} must be > 0"
        )));
    }
    if state == ChannelState::Outage {
        return Err(Error::violation("pathloss is undefined in outage"));
    }
    Ok(params.alpha + params.beta * 10.0 * d.log10() + shadowing_db)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_distance_gives_alpha() {
        let m = PathlossModel::default();
        assert_eq!(
            pathloss_db(1.0, ChannelState::LoS, &m.los, 0.0).unwrap(),
            61.4
        );
    }

    #[test]
    fn reference_points() {
        let m = PathlossModel::default();
        let los = pathloss_db(100.0, ChannelState::LoS, &m.los, 0.0).unwrap();
        assert!((los - 101.4).abs() < 1e-9);
        let nlos = pathloss_db(50.0, ChannelState::NLoS, &m.nlos, 0.0).unwrap();
        assert!((nlos - 121.61).abs() < 0.01, "{nlos}");
    }

    #[test]
    fn invalid_inputs() {
        let m = PathlossModel::default();
        assert!(pathloss_db(0.0, ChannelState::LoS, &m.los, 0.0).is_err());
        assert!(pathloss_db(10.0, ChannelState::Outage, &m.los, 0.0).is_err());
        assert!(PathlossParams::new(60.0, 0.0, 1.0).is_err());
        assert!(PathlossParams::new(60.0, 2.0, -1.0).is_err());
    }
}
