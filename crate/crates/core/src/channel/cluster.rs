use std::f64::consts::PI;

use crate::engine::{RngStream, SimTime};
use crate::error::{Error, Result};
use crate::scene::ChannelState;

/// One propagation subpath. Power is a fraction of the link total.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Subpath {
    pub cluster: usize,
    pub index: usize,
    pub power: f64,
    pub delay_s: f64,
    pub aoa_az: f64,
    pub aoa_el: f64,
    pub aod_az: f64,
    pub aod_el: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    pub subpaths: Vec<Subpath>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub clusters: Vec<Cluster>,
    pub state: ChannelState,
    pub generated_at: SimTime,
}

impl ChannelRealization {
    pub fn subpaths(&self) -> impl Iterator<Item = &Subpath> {
        self.clusters.iter().flat_map(|c| c.subpaths.iter())
    }

    pub fn num_subpaths(&self) -> usize {
        self.clusters.iter().map(|c| c.subpaths.len()).sum()
    }

    pub fn total_power(&self) -> f64 {
        self.subpaths().map(|s| s.power).sum()
    }

    /// Builds a realization from raw subpaths, renormalizing powers to sum 1.
    pub fn from_subpaths(
        state: ChannelState,
        generated_at: SimTime,
        mut subpaths: Vec<Subpath>,
    ) -> Result<Self> {
        if subpaths.is_empty() {
            return Err(Error::violation("realization needs at least one subpath"));
        }
        let total: f64 = subpaths.iter().map(|s| s.power).sum();
        if !(total > 0.0) || subpaths.iter().any(|s| s.power < 0.0 || s.delay_s < 0.0) {
            return Err(Error::violation(
                "subpath powers and delays must be non-negative with positive total",
            ));
        }
        for s in &mut subpaths {
            s.power /= total;
        }
        let nclusters = subpaths.iter().map(|s| s.cluster).max().unwrap_or(0) + 1;
        let mut clusters = vec![
            Cluster {
                subpaths: Vec::new()
            };
            nclusters
        ];
        for s in subpaths {
            clusters[s.cluster].subpaths.push(s);
        }
        clusters.retain(|c| !c.subpaths.is_empty());
        Ok(ChannelRealization {
            clusters,
            state,
            generated_at,
        })
    }
}

/// Cluster statistics used by [`generate_realization`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterConfig {
    /// Poisson mean for the cluster count; at least one cluster is drawn.
    pub cluster_lambda: f64,
    /// Overrides the random cluster count.
    pub fixed_clusters: Option<usize>,
    pub subpaths_per_cluster: usize,
    /// RMS angular spread of subpaths about the cluster center, degrees.
    pub angular_spread_deg: f64,
    pub delay_rms_los_s: f64,
    pub delay_rms_nlos_s: f64,
    pub intra_cluster_delay_rms_s: f64,
    /// Cluster powers are perturbed by a uniform factor in `1 +/- this`.
    pub power_perturbation: f64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            cluster_lambda: 1.9,
            fixed_clusters: None,
            subpaths_per_cluster: 10,
            angular_spread_deg: 10.0,
            delay_rms_los_s: 200e-9,
            delay_rms_nlos_s: 300e-9,
            intra_cluster_delay_rms_s: 5e-9,
            power_perturbation: 0.5,
        }
    }
}

impl ClusterConfig {
    /// Mean of `max(Poisson(lambda), 1)`, or the fixed count.
    pub fn expected_cluster_count(&self) -> f64 {
        match self.fixed_clusters {
            Some(k) => k.max(1) as f64,
            None => self.cluster_lambda + (-self.cluster_lambda).exp(),
        }
    }
}

/// Central angles taken from link geometry. Elevations apply to every
/// cluster; the direct-path azimuths, when given, anchor the first cluster
/// of a LoS realization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LinkGeometry {
    pub aod_el: f64,
    pub aoa_el: f64,
    pub los_aod_az: Option<f64>,
    pub los_aoa_az: Option<f64>,
}

fn wrap_angle(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x == -PI {
        x = PI;
    }
    x
}

pub fn generate_realization(
    state: ChannelState,
    cfg: &ClusterConfig,
    geometry: &LinkGeometry,
    now: SimTime,
    rng: &mut RngStream,
) -> Result<ChannelRealization> {
    if state == ChannelState::Outage {
        return Err(Error::violation("no realization for a link in outage"));
    }
    let k = match cfg.fixed_clusters {
        Some(k) => k.max(1),
        None => (rng.poisson(cfg.cluster_lambda) as usize).max(1),
    };
    let l = cfg.subpaths_per_cluster.max(1);
    let rms = match state {
        ChannelState::LoS => cfg.delay_rms_los_s,
        _ => cfg.delay_rms_nlos_s,
    };

    let mut delays: Vec<f64> = (0..k).map(|_| rng.exponential(rms)).collect();
    delays.sort_by(f64::total_cmp);
    let d0 = delays[0];
    for d in &mut delays {
        *d -= d0;
    }
    let mut powers: Vec<f64> = delays
        .iter()
        .map(|d| {
            let decay = if rms > 0.0 { (-d / rms).exp() } else { 1.0 };
            decay * rng.uniform(1.0 - cfg.power_perturbation, 1.0 + cfg.power_perturbation)
        })
        .collect();
    let total: f64 = powers.iter().sum();
    for p in &mut powers {
        *p /= total;
    }

    let spread = cfg.angular_spread_deg.to_radians() / std::f64::consts::SQRT_2;
    let mut clusters = Vec::with_capacity(k);
    for c in 0..k {
        let mut aoa_az = rng.uniform(-PI, PI);
        let mut aod_az = rng.uniform(-PI, PI);
        if c == 0 && state == ChannelState::LoS {
            aoa_az = geometry.los_aoa_az.unwrap_or(aoa_az);
            aod_az = geometry.los_aod_az.unwrap_or(aod_az);
        }
        let subpaths = (0..l)
            .map(|i| Subpath {
                cluster: c,
                index: i,
                power: powers[c] / l as f64,
                delay_s: delays[c] + rng.exponential(cfg.intra_cluster_delay_rms_s),
                aoa_az: wrap_angle(aoa_az + rng.laplacian(spread)),
                aoa_el: (geometry.aoa_el + rng.laplacian(spread)).clamp(-PI / 2.0, PI / 2.0),
                aod_az: wrap_angle(aod_az + rng.laplacian(spread)),
                aod_el: (geometry.aod_el + rng.laplacian(spread)).clamp(-PI / 2.0, PI / 2.0),
            })
            .collect();
        clusters.push(Cluster { subpaths });
    }
    Ok(ChannelRealization {
        clusters,
        state,
        generated_at: now,
    })
}

pub const POOL_VERSION_TAG: &str = "# realization-pool v1";
const POOL_HEADER: &str = "index,state,cluster,subpath,power,delay_s,aoa_az,aoa_el,aod_az,aod_el";

/// Pre-drawn realizations per channel state; links pick one at random on
/// each update instead of drawing afresh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RealizationPool {
    pub los: Vec<ChannelRealization>,
    pub nlos: Vec<ChannelRealization>,
}

impl RealizationPool {
    pub fn generate(
        n: usize,
        cfg: &ClusterConfig,
        geometry: &LinkGeometry,
        rng: &mut RngStream,
    ) -> Result<Self> {
        let mut pool = RealizationPool::default();
        for _ in 0..n {
            pool.los.push(generate_realization(
                ChannelState::LoS,
                cfg,
                geometry,
                SimTime::ZERO,
                rng,
            )?);
            pool.nlos.push(generate_realization(
                ChannelState::NLoS,
                cfg,
                geometry,
                SimTime::ZERO,
                rng,
            )?);
        }
        Ok(pool)
    }

    pub fn for_state(&self, state: ChannelState) -> &[ChannelRealization] {
        match state {
            ChannelState::LoS => &self.los,
            ChannelState::NLoS => &self.nlos,
            ChannelState::Outage => &[],
        }
    }

    /// Uniformly chosen member for `state`, restamped at `now`.
    pub fn pick(
        &self,
        state: ChannelState,
        now: SimTime,
        rng: &mut RngStream,
    ) -> Option<ChannelRealization> {
        let set = self.for_state(state);
        if set.is_empty() {
            return None;
        }
        let i = (rng.next_u64() % set.len() as u64) as usize;
        let mut r = set[i].clone();
        r.generated_at = now;
        Some(r)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{POOL_VERSION_TAG}\n{POOL_HEADER}\n");
        for (state, set) in [("LoS", &self.los), ("NLoS", &self.nlos)] {
            for (i, r) in set.iter().enumerate() {
                for s in r.subpaths() {
                    out.push_str(&format!(
                        "{i},{state},{},{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                        s.cluster,
                        s.index,
                        s.power,
                        s.delay_s,
                        s.aoa_az,
                        s.aoa_el,
                        s.aod_az,
                        s.aod_el
                    ));
                }
            }
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == POOL_VERSION_TAG => {}
            _ => return Err(perr(1, format!("missing version tag `{POOL_VERSION_TAG}`"))),
        }
        match lines.next() {
            Some((_, l)) if l.trim() == POOL_HEADER => {}
            _ => return Err(perr(2, format!("expected header `{POOL_HEADER}`"))),
        }
        let mut groups: Vec<((ChannelState, usize), Vec<Subpath>)> = Vec::new();
        for (idx, raw) in lines {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 10 {
                return Err(perr(
                    lineno,
                    format!("expected 10 fields, found {}", f.len()),
                ));
            }
            let int = |k: usize| {
                f[k].parse::<usize>()
                    .map_err(|_| perr(lineno, format!("bad integer `{}`", f[k])))
            };
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|_| perr(lineno, format!("bad number `{}`", f[k])))
            };
            let state = match f[1] {
                "LoS" => ChannelState::LoS,
                "NLoS" => ChannelState::NLoS,
                other => return Err(perr(lineno, format!("bad state `{other}`"))),
            };
            let key = (state, int(0)?);
            let sp = Subpath {
                cluster: int(2)?,
                index: int(3)?,
                power: num(4)?,
                delay_s: num(5)?,
                aoa_az: num(6)?,
                aoa_el: num(7)?,
                aod_az: num(8)?,
                aod_el: num(9)?,
            };
            match groups.last_mut() {
                Some((k, v)) if *k == key => v.push(sp),
                _ => groups.push((key, vec![sp])),
            }
        }
        let mut pool = RealizationPool::default();
        for ((state, _), subpaths) in groups {
            let r = ChannelRealization::from_subpaths(state, SimTime::ZERO, subpaths)?;
            match state {
                ChannelState::LoS => pool.los.push(r),
                _ => pool.nlos.push(r),
            }
        }
        Ok(pool)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_single_subpath() {
        let cfg = ClusterConfig {
            fixed_clusters: Some(1),
            subpaths_per_cluster: 1,
            ..Default::default()
        };
        let mut rng = RngStream::new(1, "clusters");
        let r = generate_realization(
            ChannelState::LoS,
            &cfg,
            &LinkGeometry::default(),
            SimTime::ZERO,
            &mut rng,
        )
        .unwrap();
        assert_eq!(r.num_subpaths(), 1);
        assert_eq!(r.subpaths().next().unwrap().power, 1.0);
    }

    #[test]
    fn cluster_count_mean_and_normalization() {
        let cfg = ClusterConfig::default();
        let mut rng = RngStream::new(9, "clusters");
        let n = 1000;
        let mut total_k = 0usize;
        for _ in 0..n {
            let r = generate_realization(
                ChannelState::NLoS,
                &cfg,
                &LinkGeometry::default(),
                SimTime::ZERO,
                &mut rng,
            )
            .unwrap();
            assert!((r.total_power() - 1.0).abs() < 1e-12);
            assert!(r.clusters.iter().all(|c| !c.subpaths.is_empty()));
            assert!(r.subpaths().all(|s| s.delay_s >= 0.0));
            total_k += r.clusters.len();
        }
        let mean = total_k as f64 / n as f64;
        let expected = cfg.expected_cluster_count();
        assert!(
            (mean - expected).abs() < 0.15 * expected,
            "mean K {mean} vs {expected}"
        );
    }

    #[test]
    fn pool_round_trip() {
        let mut rng = RngStream::new(3, "pool");
        let pool = RealizationPool::generate(
            4,
            &ClusterConfig::default(),
            &LinkGeometry::default(),
            &mut rng,
        )
        .unwrap();
        let back = RealizationPool::parse(&pool.to_csv(), "mem").unwrap();
        assert_eq!(back.los.len(), 4);
        assert_eq!(back.nlos.len(), 4);
        for (a, b) in pool.nlos.iter().zip(&back.nlos) {
            assert_eq!(a.num_subpaths(), b.num_subpaths());
            for (x, y) in a.subpaths().zip(b.subpaths()) {
                assert!((x.power - y.power).abs() < 1e-12);
                assert!((x.delay_s - y.delay_s).abs() < 1e-18);
            }
        }
        assert!(RealizationPool::parse("index\n", "mem").is_err());
    }

    #[test]
    fn outage_rejected() {
        let mut rng = RngStream::new(1, "clusters");
        assert!(generate_realization(
            ChannelState::Outage,
            &ClusterConfig::default(),
            &LinkGeometry::default(),
            SimTime::ZERO,
            &mut rng
        )
        .is_err());
    }
}
