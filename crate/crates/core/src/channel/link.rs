use std::f64::consts::PI;
use std::sync::Arc;

use super::antenna::AntennaArray;
use super::beamforming::{
    power_iteration_beamforming, sector_sweep, BeamPair, DEFAULT_POWER_ITERATIONS,
};
use super::cluster::{
    generate_realization, ChannelRealization, ClusterConfig, LinkGeometry, RealizationPool,
};
use super::fading::{channel_matrix, doppler_hz, Motion};
use super::linalg::{inner, CMatrix, C64};
use super::pathloss::{pathloss_db, PathlossModel};
use super::raytrace::RayTraceRoute;
use crate::engine::{PhyMacConfig, RngStream, SimTime};
use crate::error::{Error, Result};
use crate::scene::{channel_state, direction, Building, ChannelState, Position};

/// How NLoS realizations are refreshed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum UpdateTimer {
    Fixed(SimTime),
    Exponential(SimTime),
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BeamformingMethod {
    PowerIteration { iterations: usize },
    SectorSweep { codebook_size: usize },
}

impl Default for BeamformingMethod {
    fn default() -> Self {
        BeamformingMethod::PowerIteration {
            iterations: DEFAULT_POWER_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ChannelSource {
    Statistical,
    Pool(Arc<RealizationPool>),
    RayTrace(Arc<RayTraceRoute>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    pub pathloss: PathlossModel,
    pub clusters: ClusterConfig,
    pub update: UpdateTimer,
    pub beamforming: BeamformingMethod,
    /// False selects a flat channel with the same mean power (no fading).
    pub fading: bool,
    pub shadowing: bool,
    /// Speed used for Doppler when the user is not moving.
    pub artificial_speed: Option<f64>,
    pub pathloss_offset_db: f64,
    pub outage_distance: f64,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            pathloss: PathlossModel::default(),
            clusters: ClusterConfig::default(),
            update: UpdateTimer::Exponential(SimTime::from_millis(100)),
            beamforming: BeamformingMethod::default(),
            fading: true,
            shadowing: true,
            artificial_speed: None,
            pathloss_offset_db: 0.0,
            outage_distance: 300.0,
        }
    }
}

/// Channel between one base station (matrix columns) and one user (rows).
///
/// The same matrix serves both directions; the downlink transmit beam is
/// the uplink receive beam and vice versa.
#[derive(Clone, Debug)]
pub struct LinkChannel {
    cfg: LinkConfig,
    source: ChannelSource,
    enb_array: AntennaArray,
    ue_array: AntennaArray,
    center_freq: f64,
    subband_freqs: Vec<f64>,

    state: ChannelState,
    distance: f64,
    geometry: LinkGeometry,
    shadowing_db: f64,
    pathloss_db: f64,
    motion: Motion,

    realization: Option<ChannelRealization>,
    realization_id: u64,
    raytrace_index: Option<usize>,
    beams: Option<BeamPair>,
    coeffs: Vec<C64>,
    doppler: Vec<f64>,
    phasors: Vec<C64>,

    next_update: Option<SimTime>,
    timer_updates: u64,

    cluster_rng: RngStream,
    shadow_rng: RngStream,
    timer_rng: RngStream,
}

impl LinkChannel {
    pub fn new(
        cfg: LinkConfig,
        source: ChannelSource,
        enb_array: AntennaArray,
        ue_array: AntennaArray,
        phy: &PhyMacConfig,
        seed: u64,
        label: &str,
    ) -> Self {
        let subband_freqs = (0..phy.num_subbands as usize)
            .map(|b| phy.subband_center_hz(b))
            .collect();
        LinkChannel {
            cfg,
            source,
            enb_array,
            ue_array,
            center_freq: phy.center_freq_hz,
            subband_freqs,
            state: ChannelState::Outage,
            distance: 0.0,
            geometry: LinkGeometry::default(),
            shadowing_db: 0.0,
            pathloss_db: f64::INFINITY,
            motion: Motion::default(),
            realization: None,
            realization_id: 0,
            raytrace_index: None,
            beams: None,
            coeffs: Vec::new(),
            doppler: Vec::new(),
            phasors: Vec::new(),
            next_update: None,
            timer_updates: 0,
            cluster_rng: RngStream::new(seed, format!("{label}/clusters")),
            shadow_rng: RngStream::new(seed, format!("{label}/shadowing")),
            timer_rng: RngStream::new(seed, format!("{label}/update-timer")),
        }
    }

    pub fn config(&self) -> &LinkConfig {
        &self.cfg
    }

    pub fn state(&self) -> ChannelState {
        self.state
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    /// Total pathloss in dB including shadowing and any configured offset.
    pub fn pathloss_db(&self) -> f64 {
        self.pathloss_db
    }

    pub fn shadowing_db(&self) -> f64 {
        self.shadowing_db
    }

    pub fn realization(&self) -> Option<&ChannelRealization> {
        self.realization.as_ref()
    }

    /// Increments every time the realization is replaced.
    pub fn realization_id(&self) -> u64 {
        self.realization_id
    }

    pub fn beam_pair(&self) -> Option<&BeamPair> {
        self.beams.as_ref()
    }

    pub fn enb_beam(&self) -> Option<&[C64]> {
        self.beams.as_ref().map(|b| b.tx.as_slice())
    }

    pub fn ue_beam(&self) -> Option<&[C64]> {
        self.beams.as_ref().map(|b| b.rx.as_slice())
    }

    pub fn motion(&self) -> Motion {
        self.motion
    }

    pub fn next_update_time(&self) -> Option<SimTime> {
        self.next_update
    }

    pub fn timer_update_count(&self) -> u64 {
        self.timer_updates
    }

    pub fn num_subbands(&self) -> usize {
        self.subband_freqs.len()
    }

    pub fn set_pathloss_offset_db(&mut self, offset: f64) {
        self.pathloss_db += offset - self.cfg.pathloss_offset_db;
        self.cfg.pathloss_offset_db = offset;
    }

    /// Re-evaluates geometry at `now`. Draws a new realization when the
    /// channel state changes (or the ray-trace sample changes) and keeps the
    /// current one otherwise. Returns true if the realization changed.
    pub fn update_geometry(
        &mut self,
        now: SimTime,
        enb: &Position,
        ue: &Position,
        ue_velocity: (f64, f64),
        buildings: &[Building],
    ) -> Result<bool> {
        let state = channel_state(enb, ue, buildings, self.cfg.outage_distance);
        self.distance = enb.distance(ue).max(1e-3);
        let (aod_az, aod_el) = direction(enb, ue);
        let (aoa_az, aoa_el) = direction(ue, enb);
        self.geometry = LinkGeometry {
            aod_el,
            aoa_el,
            los_aod_az: Some(aod_az),
            los_aoa_az: Some(aoa_az),
        };

        let (speed, heading) = ue_velocity;
        let motion = if speed > 0.0 {
            Motion {
                doppler_hz: doppler_hz(speed, self.center_freq),
                heading,
            }
        } else {
            Motion {
                doppler_hz: doppler_hz(self.cfg.artificial_speed.unwrap_or(0.0), self.center_freq),
                heading: 0.0,
            }
        };
        if motion != self.motion {
            self.motion = motion;
            self.refresh_doppler();
        }

        let mut changed = false;
        if state != self.state {
            self.state = state;
            if state == ChannelState::Outage {
                self.clear_realization();
            } else if !matches!(self.source, ChannelSource::RayTrace(_)) {
                self.draw_realization(now)?;
            }
            changed = true;
        }
        if let ChannelSource::RayTrace(route) = &self.source {
            if state != ChannelState::Outage {
                let idx = route.nearest_index(self.distance);
                if self.raytrace_index != Some(idx) || changed {
                    let route = Arc::clone(route);
                    self.install_raytrace(&route, idx, now)?;
                    changed = true;
                }
            }
        }
        self.refresh_pathloss()?;
        Ok(changed)
    }

    /// Replaces an NLoS realization when its update timer has fired.
    /// LoS realizations and ray-trace links are never touched.
    pub fn long_term_update(&mut self, now: SimTime) -> Result<bool> {
        match self.next_update {
            Some(t) if t <= now && self.state == ChannelState::NLoS => {
                self.draw_realization(now)?;
                self.timer_updates += 1;
                self.refresh_pathloss()?;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn clear_realization(&mut self) {
        self.realization = None;
        self.beams = None;
        self.coeffs.clear();
        self.doppler.clear();
        self.phasors.clear();
        self.next_update = None;
        self.raytrace_index = None;
        self.realization_id += 1;
    }

    fn draw_realization(&mut self, now: SimTime) -> Result<()> {
        let real = match &self.source {
            ChannelSource::Pool(pool) => pool.pick(self.state, now, &mut self.cluster_rng),
            _ => None,
        };
        let real = match real {
            Some(r) => r,
            None => generate_realization(
                self.state,
                &self.cfg.clusters,
                &self.geometry,
                now,
                &mut self.cluster_rng,
            )?,
        };
        self.shadowing_db = match (self.cfg.shadowing, self.cfg.pathloss.params(self.state)) {
            (true, Some(p)) => self.shadow_rng.normal(0.0, p.sigma)?,
            _ => 0.0,
        };
        self.next_update = if self.state == ChannelState::NLoS {
            match self.cfg.update {
                UpdateTimer::Fixed(p) => Some(now + p),
                UpdateTimer::Exponential(mean) => {
                    let dt = self.timer_rng.exponential(mean.as_secs_f64());
                    Some(now + SimTime::from_secs_f64(dt).max(SimTime::from_nanos(1)))
                }
                UpdateTimer::Never => None,
            }
        } else {
            None
        };
        self.install(real, now)
    }

    fn install_raytrace(&mut self, route: &RayTraceRoute, idx: usize, now: SimTime) -> Result<()> {
        let sample = &route.samples()[idx];
        let real = sample.to_realization(self.state, now)?;
        self.shadowing_db = 0.0;
        self.next_update = None;
        self.raytrace_index = Some(idx);
        self.install(real, now)
    }

    fn install(&mut self, real: ChannelRealization, now: SimTime) -> Result<()> {
        let t = now.as_secs_f64();
        let beams = match (self.cfg.beamforming, &self.source) {
            (
                BeamformingMethod::SectorSweep { codebook_size },
                ChannelSource::Statistical | ChannelSource::Pool(_),
            ) => sector_sweep(
                &real,
                &self.enb_array,
                &self.ue_array,
                codebook_size,
                t,
                self.center_freq,
                &self.motion,
            )?,
            (BeamformingMethod::PowerIteration { iterations }, _) => {
                let h = channel_matrix(
                    &real,
                    &self.enb_array,
                    &self.ue_array,
                    t,
                    self.center_freq,
                    &self.motion,
                );
                power_iteration_beamforming(&h, iterations)?
            }
            // Trace-driven links always use the power method.
            (_, ChannelSource::RayTrace(_)) => {
                let h = channel_matrix(
                    &real,
                    &self.enb_array,
                    &self.ue_array,
                    t,
                    self.center_freq,
                    &self.motion,
                );
                power_iteration_beamforming(&h, DEFAULT_POWER_ITERATIONS)?
            }
        };
        self.coeffs =
            Self::coefficients(&real, &self.enb_array, &self.ue_array, &beams.tx, &beams.rx);
        let nb = self.subband_freqs.len();
        self.phasors.clear();
        self.phasors.reserve(real.num_subpaths() * nb);
        for sp in real.subpaths() {
            for f in &self.subband_freqs {
                self.phasors
                    .push(C64::from_polar(1.0, -2.0 * PI * sp.delay_s * f));
            }
        }
        self.beams = Some(beams);
        self.realization = Some(real);
        self.realization_id += 1;
        self.refresh_doppler();
        Ok(())
    }

    fn refresh_doppler(&mut self) {
        let motion = self.motion;
        self.doppler = match &self.realization {
            Some(r) => r
                .subpaths()
                .map(|sp| motion.doppler_hz * motion.omega(sp).cos())
                .collect(),
            None => Vec::new(),
        };
    }

    fn refresh_pathloss(&mut self) -> Result<()> {
        self.pathloss_db = match (&self.source, self.state) {
            (_, ChannelState::Outage) => f64::INFINITY,
            (ChannelSource::RayTrace(route), _) => {
                let idx = self
                    .raytrace_index
                    .unwrap_or_else(|| route.nearest_index(self.distance));
                route.samples()[idx].total_loss_db() + self.cfg.pathloss_offset_db
            }
            (_, state) => {
                let params = self
                    .cfg
                    .pathloss
                    .params(state)
                    .ok_or_else(|| Error::violation("no pathloss parameters for state"))?;
                pathloss_db(self.distance, state, params, self.shadowing_db)?
                    + self.cfg.pathloss_offset_db
            }
        };
        Ok(())
    }

    /// `sqrt(N_enb N_ue P) (w_rx^H u_rx)(u_tx^H w_tx)` per subpath. The
    /// signatures are unit norm, so the element counts restore the array
    /// gain of the link budget.
    fn coefficients(
        real: &ChannelRealization,
        enb: &AntennaArray,
        ue: &AntennaArray,
        w_enb: &[C64],
        w_ue: &[C64],
    ) -> Vec<C64> {
        let mut u_rx = Vec::new();
        let mut u_tx = Vec::new();
        let array = ((enb.len() * ue.len()) as f64).sqrt();
        real.subpaths()
            .map(|sp| {
                ue.spatial_signature_into(sp.aoa_az, sp.aoa_el, &mut u_rx);
                enb.spatial_signature_into(sp.aod_az, sp.aod_el, &mut u_tx);
                array * sp.power.sqrt() * inner(w_ue, &u_rx) * inner(&u_tx, w_enb)
            })
            .collect()
    }

    fn gains_from(&self, coeffs: &[C64], t: SimTime, out: &mut Vec<f64>) {
        let nb = self.subband_freqs.len();
        out.clear();
        if self.realization.is_none() || !self.pathloss_db.is_finite() {
            out.resize(nb, 0.0);
            return;
        }
        let pl = 10f64.powf(-self.pathloss_db / 10.0);
        if !self.cfg.fading {
            let flat: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * pl;
            out.resize(nb, flat);
            return;
        }
        let ts = t.as_secs_f64();
        let mut acc = vec![C64::new(0.0, 0.0); nb];
        for (k, (c, fd)) in coeffs.iter().zip(&self.doppler).enumerate() {
            let a = c * C64::from_polar(1.0, 2.0 * PI * fd * ts);
            for (x, p) in acc.iter_mut().zip(&self.phasors[k * nb..(k + 1) * nb]) {
                *x += a * p;
            }
        }
        out.extend(acc.iter().map(|x| x.norm_sqr() * pl));
    }

    /// Per-subband linear gain with the link's own beam pair.
    pub fn subband_gains(&self, t: SimTime, out: &mut Vec<f64>) {
        self.gains_from(&self.coeffs, t, out);
    }

    /// Per-subband linear gain with arbitrary base-station and user beams,
    /// as seen by interference between links.
    pub fn subband_gains_with(&self, w_enb: &[C64], w_ue: &[C64], t: SimTime, out: &mut Vec<f64>) {
        match &self.realization {
            Some(real) => {
                let coeffs = Self::coefficients(real, &self.enb_array, &self.ue_array, w_enb, w_ue);
                self.gains_from(&coeffs, t, out);
            }
            None => {
                out.clear();
                out.resize(self.subband_freqs.len(), 0.0);
            }
        }
    }

    /// Element-count factor `N_enb N_ue` applied on top of the matrix gain.
    pub fn array_gain(&self) -> f64 {
        (self.enb_array.len() * self.ue_array.len()) as f64
    }

    /// `10^(-PL/10) N_enb N_ue |w_rx^H H(t, f_b) w_tx|^2` for subband `b`.
    pub fn link_gain_linear(&self, t: SimTime, b: usize) -> f64 {
        let mut out = Vec::new();
        self.subband_gains(t, &mut out);
        out.get(b).copied().unwrap_or(0.0)
    }

    /// Full channel matrix at time `t` and frequency `f`, without pathloss.
    pub fn channel_matrix(&self, t: SimTime, f: f64) -> Option<CMatrix> {
        self.realization.as_ref().map(|r| {
            channel_matrix(
                r,
                &self.enb_array,
                &self.ue_array,
                t.as_secs_f64(),
                f,
                &self.motion,
            )
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::linalg::bilinear_gain;

    fn phy() -> PhyMacConfig {
        PhyMacConfig::default()
    }

    fn link(cfg: LinkConfig) -> LinkChannel {
        LinkChannel::new(
            cfg,
            ChannelSource::Statistical,
            AntennaArray::new(8, 8),
            AntennaArray::new(4, 4),
            &phy(),
            7,
            "test",
        )
    }

    #[test]
    fn outage_is_zero_gain() {
        let mut l = link(LinkConfig::default());
        let enb = Position::new(0.0, 0.0, 10.0);
        let ue = Position::new(400.0, 0.0, 1.5);
        l.update_geometry(SimTime::ZERO, &enb, &ue, (0.0, 0.0), &[])
            .unwrap();
        assert_eq!(l.state(), ChannelState::Outage);
        assert_eq!(l.link_gain_linear(SimTime::ZERO, 3), 0.0);
    }

    #[test]
    fn los_never_refreshed_by_timer() {
        let mut l = link(LinkConfig {
            update: UpdateTimer::Fixed(SimTime::from_millis(100)),
            ..Default::default()
        });
        let enb = Position::new(0.0, 0.0, 10.0);
        let ue = Position::new(50.0, 0.0, 1.5);
        l.update_geometry(SimTime::ZERO, &enb, &ue, (0.0, 0.0), &[])
            .unwrap();
        let id = l.realization_id();
        for ms in 1..=2000 {
            let now = SimTime::from_millis(ms);
            l.update_geometry(now, &enb, &ue, (0.0, 0.0), &[]).unwrap();
            assert!(!l.long_term_update(now).unwrap());
        }
        assert_eq!(l.realization_id(), id);
    }

    #[test]
    fn nlos_fixed_period_counts() {
        let mut l = link(LinkConfig {
            update: UpdateTimer::Fixed(SimTime::from_millis(100)),
            ..Default::default()
        });
        let enb = Position::new(0.0, 0.0, 10.0);
        let ue = Position::new(50.0, 0.0, 1.5);
        let wall = Building::from_bounds([20.0, 25.0, -10.0, 10.0, 0.0, 20.0]).unwrap();
        l.update_geometry(SimTime::ZERO, &enb, &ue, (0.0, 0.0), &[wall])
            .unwrap();
        assert_eq!(l.state(), ChannelState::NLoS);
        let horizon = SimTime::from_secs_f64(1.0);
        while let Some(t) = l.next_update_time() {
            if t > horizon {
                break;
            }
            assert!(l.long_term_update(t).unwrap());
        }
        assert_eq!(l.timer_update_count(), 10);
    }

    #[test]
    fn matched_gain_matches_matrix() {
        let mut l = link(LinkConfig {
            shadowing: false,
            ..Default::default()
        });
        let enb = Position::new(0.0, 0.0, 10.0);
        let ue = Position::new(80.0, 20.0, 1.5);
        l.update_geometry(SimTime::ZERO, &enb, &ue, (1.5, 0.3), &[])
            .unwrap();
        let t = SimTime::from_millis(37);
        let mut g = Vec::new();
        l.subband_gains(t, &mut g);
        let bp = l.beam_pair().unwrap().clone();
        let pl = 10f64.powf(-l.pathloss_db() / 10.0);
        for b in [0, 35, 71] {
            let h = l.channel_matrix(t, phy().subband_center_hz(b)).unwrap();
            let direct = bilinear_gain(&h, &bp.tx, &bp.rx) * pl * l.array_gain();
            assert!(
                (g[b] - direct).abs() <= 1e-9 * direct,
                "{} vs {}",
                g[b],
                direct
            );
        }
    }

    #[test]
    fn awgn_mode_is_flat() {
        let mut l = link(LinkConfig {
            fading: false,
            ..Default::default()
        });
        let enb = Position::new(0.0, 0.0, 10.0);
        let ue = Position::new(60.0, 0.0, 1.5);
        l.update_geometry(SimTime::ZERO, &enb, &ue, (1.5, 0.0), &[])
            .unwrap();
        let mut g = Vec::new();
        l.subband_gains(SimTime::from_millis(5), &mut g);
        assert!(g.iter().all(|x| (x - g[0]).abs() <= 1e-15 * g[0]) && g[0] > 0.0);
    }
}
