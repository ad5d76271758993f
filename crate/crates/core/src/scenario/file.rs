use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::channel::{
    BeamformingMethod, ChannelSource, PathlossParams, RayTraceRoute, RealizationPool, UpdateTimer,
};
use crate::engine::{RngStream, SimTime, PHY_MAC_KEYS};
use crate::error::{Error, Result};
use crate::mac::SchedulerKind;
use crate::net::TcpConfig;
use crate::rlc::{RlcMode, AM_DEFAULT_CAPACITY, UM_DEFAULT_CAPACITY};
use crate::scene::{Building, MobilityTrack, Position};
use crate::sim::{CellSpec, SimConfig, Traffic, TrafficDirection, UeSpec};

/// Default user array when a `[ue]` block does not name one.
pub const DEFAULT_UE_ARRAY: (usize, usize) = (4, 4);

/// Users dropped uniformly in distance and bearing around their cell.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomUes {
    pub count: usize,
    pub min_distance: f64,
    pub max_distance: f64,
    pub height: f64,
    pub cell: usize,
    pub array: (usize, usize),
}

impl Default for RandomUes {
    fn default() -> Self {
        RandomUes {
            count: 0,
            min_distance: 20.0,
            max_distance: 200.0,
            height: 1.5,
            cell: 0,
            array: DEFAULT_UE_ARRAY,
        }
    }
}

/// A parsed scenario file. Random placements are resolved per seed by
/// [`Scenario::build`].
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: SimConfig,
    pub random_ues: Option<RandomUes>,
    pub sweep_offsets: Vec<f64>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Section {
    Top,
    Phy,
    Enb,
    Ue,
    RandomUes,
    Buildings,
}

#[derive(Default)]
struct UeBlock {
    position: Option<Position>,
    waypoints: Vec<(SimTime, Position)>,
    cell: usize,
    array: Option<(usize, usize)>,
}

#[derive(Default)]
struct EnbBlock {
    position: Option<Position>,
    array: Option<(usize, usize)>,
}

struct Builder {
    cfg: SimConfig,
    base: PathBuf,
    enbs: Vec<EnbBlock>,
    ues: Vec<UeBlock>,
    random: Option<RandomUes>,
    sweep: Vec<f64>,
    output: Option<PathBuf>,
    traffic: String,
    app_rate_bps: f64,
    packet_bytes: u64,
    tcp: TcpConfig,
    capacity_set: bool,
    channel: String,
    raytrace_file: Option<PathBuf>,
    pool_file: Option<PathBuf>,
    update: String,
    update_period: SimTime,
    beamforming: String,
    power_iterations: Option<usize>,
    codebook_size: usize,
    enb_array: (usize, usize),
    ue_array: (usize, usize),
}

fn number(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("expected a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

fn non_negative(key: &str, v: &str) -> Result<f64> {
    let x = number(key, v)?;
    if x < 0.0 {
        return Err(Error::config(key, "must be non-negative"));
    }
    Ok(x)
}

fn integer(key: &str, v: &str) -> Result<u64> {
    let t = v.trim();
    if let Ok(n) = t.parse::<u64>() {
        return Ok(n);
    }
    // Accept integral values in float notation such as 1e7.
    match t.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
        _ => Err(Error::config(
            key,
            format!("expected a non-negative integer, got `{v}`"),
        )),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected true or false, got `{v}`"),
        )),
    }
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| number(key, s))
        .collect()
}

fn millis(key: &str, v: &str) -> Result<SimTime> {
    Ok(SimTime::from_nanos(
        (non_negative(key, v)? * 1e6).round() as u64
    ))
}

fn seconds(key: &str, v: &str) -> Result<SimTime> {
    Ok(SimTime::from_nanos(
        (non_negative(key, v)? * 1e9).round() as u64
    ))
}

fn position(key: &str, v: &str) -> Result<Position> {
    match list(key, v)?.as_slice() {
        [x, y, z] => Ok(Position::new(*x, *y, *z)),
        _ => Err(Error::config(key, "expected `x, y, z`")),
    }
}

/// `8, 8`, `8x8` or a single count for a square array.
fn array(key: &str, v: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = v.split([',', 'x']).map(str::trim).collect();
    let dims = parts
        .iter()
        .map(|p| integer(key, p).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let a = match dims.as_slice() {
        [n] => {
            let side = (*n as f64).sqrt().round() as usize;
            if side * side != *n {
                return Err(Error::config(
                    key,
                    format!("{n} elements do not form a square array"),
                ));
            }
            (side, side)
        }
        [x, y] => (*x, *y),
        _ => return Err(Error::config(key, "expected `rows, cols`")),
    };
    if a.0 * a.1 == 0 {
        return Err(Error::config(key, "array needs at least one element"));
    }
    Ok(a)
}

impl Builder {
    fn new(base: &Path) -> Self {
        Builder {
            cfg: SimConfig::default(),
            base: base.to_path_buf(),
            enbs: Vec::new(),
            ues: Vec::new(),
            random: None,
            sweep: Vec::new(),
            output: None,
            traffic: "full-buffer".into(),
            app_rate_bps: 100e6,
            packet_bytes: 1400,
            tcp: TcpConfig::default(),
            capacity_set: false,
            channel: "statistical".into(),
            raytrace_file: None,
            pool_file: None,
            update: "exponential".into(),
            update_period: SimTime::from_millis(100),
            beamforming: "power".into(),
            power_iterations: None,
            codebook_size: 64,
            enb_array: (8, 8),
            ue_array: DEFAULT_UE_ARRAY,
        }
    }

    fn path(&self, v: &str) -> PathBuf {
        let p = Path::new(v.trim());
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn top(&mut self, key: &str, v: &str) -> Result<()> {
        let c = &mut self.cfg;
        let word = v.trim().to_ascii_lowercase();
        match key {
            "name" => c.name = v.trim().to_string(),
            "seed" => c.seed = integer(key, v)?,
            "duration" => {
                c.duration = seconds(key, v)?;
                if c.duration == SimTime::ZERO {
                    return Err(Error::config(key, "must be positive"));
                }
            }
            "output" => self.output = Some(PathBuf::from(v.trim())),
            "scheduler" => {
                c.scheduler = match word.as_str() {
                    "rr" | "round-robin" => SchedulerKind::RoundRobin,
                    "edf" => SchedulerKind::Edf,
                    _ => return Err(Error::config(key, format!("expected rr or edf, got `{v}`"))),
                }
            }
            "fixed_tti" => {
                c.fixed_tti = match word.as_str() {
                    "off" | "none" | "false" => None,
                    _ => Some(integer(key, v)? as u32),
                }
            }
            "max_retx" => c.max_retx = integer(key, v)? as u32,
            "delay_budget_ms" => c.delay_budget = millis(key, v)?,
            "channel" => match word.as_str() {
                "statistical" | "raytrace" | "pool" => self.channel = word,
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected statistical, pool or raytrace, got `{v}`"),
                    ))
                }
            },
            "raytrace_file" => self.raytrace_file = Some(self.path(v)),
            "pool_file" => self.pool_file = Some(self.path(v)),
            "update" => match word.as_str() {
                "fixed" | "exponential" | "never" => self.update = word,
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected fixed, exponential or never, got `{v}`"),
                    ))
                }
            },
            "update_period_ms" => {
                self.update_period = millis(key, v)?;
                if self.update_period == SimTime::ZERO {
                    return Err(Error::config(key, "must be positive"));
                }
            }
            "beamforming" => match word.as_str() {
                "power" | "sweep" => self.beamforming = word,
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected power or sweep, got `{v}`"),
                    ))
                }
            },
            "power_iterations" => self.power_iterations = Some(integer(key, v)? as usize),
            "codebook_size" => self.codebook_size = integer(key, v)? as usize,
            "fading" => c.link.fading = boolean(key, v)?,
            "shadowing" => c.link.shadowing = boolean(key, v)?,
            "artificial_speed" => {
                let s = non_negative(key, v)?;
                c.link.artificial_speed = (s > 0.0).then_some(s);
            }
            "pathloss_offset_db" => c.link.pathloss_offset_db = number(key, v)?,
            "outage_distance" => c.link.outage_distance = non_negative(key, v)?,
            "los_alpha" | "los_beta" | "los_sigma" | "nlos_alpha" | "nlos_beta" | "nlos_sigma" => {
                let x = number(key, v)?;
                let p = if key.starts_with("los") {
                    &mut c.link.pathloss.los
                } else {
                    &mut c.link.pathloss.nlos
                };
                let (a, b, s) = match &key[key.find('_').unwrap() + 1..] {
                    "alpha" => (x, p.beta, p.sigma),
                    "beta" => (p.alpha, x, p.sigma),
                    _ => (p.alpha, p.beta, x),
                };
                *p = PathlossParams::new(a, b, s).map_err(|e| Error::config(key, e.to_string()))?;
            }
            "cluster_lambda" => c.link.clusters.cluster_lambda = non_negative(key, v)?,
            "fixed_clusters" => {
                c.link.clusters.fixed_clusters = match word.as_str() {
                    "off" | "none" => None,
                    _ => Some(integer(key, v)?.max(1) as usize),
                }
            }
            "subpaths_per_cluster" => {
                c.link.clusters.subpaths_per_cluster = integer(key, v)?.max(1) as usize
            }
            "angular_spread_deg" => c.link.clusters.angular_spread_deg = non_negative(key, v)?,
            "enb_tx_power_dbm" => c.enb_tx_power_dbm = number(key, v)?,
            "ue_tx_power_dbm" => c.ue_tx_power_dbm = number(key, v)?,
            "enb_noise_figure_db" => c.enb_noise_figure_db = non_negative(key, v)?,
            "ue_noise_figure_db" => c.ue_noise_figure_db = non_negative(key, v)?,
            "enb_antennas" => self.enb_array = array(key, v)?,
            "ue_antennas" => self.ue_array = array(key, v)?,
            "traffic" => match word.as_str() {
                "full-buffer" | "udp" | "tcp" | "none" => self.traffic = word,
                _ => {
                    return Err(Error::config(
                        key,
                        format!("expected full-buffer, udp, tcp or none, got `{v}`"),
                    ))
                }
            },
            "direction" => {
                c.direction = match word.as_str() {
                    "dl" => TrafficDirection::Dl,
                    "ul" => TrafficDirection::Ul,
                    "both" => TrafficDirection::Both,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected dl, ul or both, got `{v}`"),
                        ))
                    }
                }
            }
            "app_rate_bps" => self.app_rate_bps = non_negative(key, v)?,
            "packet_size" => self.packet_bytes = integer(key, v)?.max(1),
            "rlc_mode" => {
                c.rlc_mode = match word.as_str() {
                    "sm" => RlcMode::Sm,
                    "um" => RlcMode::Um,
                    "am" => RlcMode::Am,
                    _ => {
                        return Err(Error::config(
                            key,
                            format!("expected sm, um or am, got `{v}`"),
                        ))
                    }
                }
            }
            "rlc_capacity_bytes" => {
                c.rlc_capacity = integer(key, v)?;
                self.capacity_set = true;
            }
            "arq_max_retx" => c.arq_max_retx = integer(key, v)? as u32,
            "core_delay_ms" => c.core_hop_delay = millis(key, v)?,
            "core_rate_bps" => {
                let r = non_negative(key, v)?;
                c.core_rate_bps = (r > 0.0).then_some(r);
            }
            "app_tick_us" => {
                c.app_tick = SimTime::from_nanos((non_negative(key, v)? * 1e3).round() as u64)
            }
            "geometry_period_ms" => c.geometry_period = millis(key, v)?,
            "tcp_mss" => self.tcp.mss = integer(key, v)?.max(1),
            "tcp_buffer_bytes" => self.tcp.send_buffer = integer(key, v)?,
            "tcp_ssthresh_segments" => self.tcp.ssthresh_segments = integer(key, v)?,
            "tcp_initial_cwnd_segments" => self.tcp.initial_cwnd_segments = integer(key, v)?.max(1),
            "trace_alloc" => c.trace.alloc = boolean(key, v)?,
            "trace_phy_tb" => c.trace.phy_tb = boolean(key, v)?,
            "sinr_trace_period_ms" => c.trace.sinr_period = millis(key, v)?,
            "trace_bin_ms" => c.trace.bin = millis(key, v)?,
            "sweep_offsets" => self.sweep.extend(list(key, v)?),
            _ if PHY_MAC_KEYS.contains(&key) || key == "SubframesPerFrame" => c.phy.set(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    fn entry(&mut self, section: Section, key: &str, v: &str) -> Result<()> {
        match section {
            Section::Top => self.top(key, v),
            Section::Phy => self.cfg.phy.set(key, v),
            Section::Enb => {
                let e = self.enbs.last_mut().expect("section opened");
                match key {
                    "position" => e.position = Some(position(key, v)?),
                    "antennas" => e.array = Some(array(key, v)?),
                    _ => return Err(Error::config(key, "unknown key in [enb]")),
                }
                Ok(())
            }
            Section::Ue => {
                let u = self.ues.last_mut().expect("section opened");
                match key {
                    "position" => u.position = Some(position(key, v)?),
                    "waypoint" => match list(key, v)?.as_slice() {
                        [t, x, y, z] if *t >= 0.0 => u.waypoints.push((
                            SimTime::from_nanos((t * 1e9).round() as u64),
                            Position::new(*x, *y, *z),
                        )),
                        _ => return Err(Error::config(key, "expected `t_seconds, x, y, z`")),
                    },
                    "cell" => u.cell = integer(key, v)? as usize,
                    "antennas" => u.array = Some(array(key, v)?),
                    _ => return Err(Error::config(key, "unknown key in [ue]")),
                }
                Ok(())
            }
            Section::RandomUes => {
                let r = self.random.get_or_insert_with(RandomUes::default);
                match key {
                    "count" => r.count = integer(key, v)? as usize,
                    "min_distance" => r.min_distance = non_negative(key, v)?,
                    "max_distance" => r.max_distance = non_negative(key, v)?,
                    "height" => r.height = number(key, v)?,
                    "cell" => r.cell = integer(key, v)? as usize,
                    "antennas" => r.array = array(key, v)?,
                    _ => return Err(Error::config(key, "unknown key in [random-ues]")),
                }
                Ok(())
            }
            Section::Buildings => match key {
                "box" => {
                    let b = list(key, v)?;
                    let bounds: [f64; 6] = b.try_into().map_err(|_| {
                        Error::config(key, "expected `xmin, xmax, ymin, ymax, zmin, zmax`")
                    })?;
                    let bx = Building::from_bounds(bounds)
                        .map_err(|e| Error::config(key, e.to_string()))?;
                    self.cfg.buildings.push(bx);
                    Ok(())
                }
                _ => Err(Error::config(key, "unknown key in [buildings]")),
            },
        }
    }

    fn finish(mut self) -> Result<Scenario> {
        let c = &mut self.cfg;
        if !self.enbs.is_empty() {
            c.cells = self
                .enbs
                .iter()
                .map(|e| {
                    Ok(CellSpec {
                        position: e
                            .position
                            .ok_or_else(|| Error::config("position", "[enb] needs a position"))?,
                        array: e.array.unwrap_or(self.enb_array),
                    })
                })
                .collect::<Result<_>>()?;
        } else {
            for cell in &mut c.cells {
                cell.array = self.enb_array;
            }
        }
        for u in &self.ues {
            let track = if u.waypoints.is_empty() {
                MobilityTrack::stationary(u.position.ok_or_else(|| {
                    Error::config("position", "[ue] needs a position or waypoints")
                })?)
            } else {
                let mut w = u.waypoints.clone();
                if let Some(p) = u.position {
                    if w[0].0 > SimTime::ZERO {
                        w.insert(0, (SimTime::ZERO, p));
                    }
                }
                MobilityTrack::new(w).map_err(|e| Error::config("waypoint", e.to_string()))?
            };
            c.ues.push(UeSpec {
                track,
                cell: u.cell,
                array: u.array.unwrap_or(self.ue_array),
            });
        }
        if let Some(r) = &self.random {
            if r.min_distance > r.max_distance {
                return Err(Error::config("min_distance", "exceeds max_distance"));
            }
        }
        c.traffic = match self.traffic.as_str() {
            "full-buffer" => Traffic::FullBuffer,
            "udp" => Traffic::Udp {
                rate_bps: self.app_rate_bps,
                packet_bytes: self.packet_bytes,
            },
            "tcp" => Traffic::Tcp {
                rate_bps: self.app_rate_bps,
                tcp: self.tcp,
            },
            _ => Traffic::None,
        };
        if !self.capacity_set {
            c.rlc_capacity = match c.rlc_mode {
                RlcMode::Am => AM_DEFAULT_CAPACITY,
                _ => UM_DEFAULT_CAPACITY,
            };
        }
        c.link.update = match self.update.as_str() {
            "fixed" => UpdateTimer::Fixed(self.update_period),
            "exponential" => UpdateTimer::Exponential(self.update_period),
            _ => UpdateTimer::Never,
        };
        c.link.beamforming = if self.beamforming == "sweep" {
            BeamformingMethod::SectorSweep {
                codebook_size: self.codebook_size.max(1),
            }
        } else {
            match (self.power_iterations, BeamformingMethod::default()) {
                (Some(iterations), _) => BeamformingMethod::PowerIteration { iterations },
                (None, d) => d,
            }
        };
        c.source = match self.channel.as_str() {
            "raytrace" => {
                let p = self.raytrace_file.as_ref().ok_or_else(|| {
                    Error::config("raytrace_file", "required when channel = raytrace")
                })?;
                ChannelSource::RayTrace(Arc::new(RayTraceRoute::load(p)?))
            }
            "pool" => {
                let p = self
                    .pool_file
                    .as_ref()
                    .ok_or_else(|| Error::config("pool_file", "required when channel = pool"))?;
                ChannelSource::Pool(Arc::new(RealizationPool::load(p)?))
            }
            _ => ChannelSource::Statistical,
        };
        let scenario = Scenario {
            config: self.cfg,
            random_ues: self.random,
            sweep_offsets: self.sweep,
            output: self.output,
        };
        scenario.build(scenario.config.seed)?.validate()?;
        Ok(scenario)
    }
}

impl Scenario {
    /// Parses scenario text. Relative file references resolve against `base`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Scenario> {
        let mut b = Builder::new(base);
        let mut section = Section::Top;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let perr = |m: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message: m,
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| perr(format!("unterminated section header `{line}`")))?
                    .trim();
                section = match name {
                    "phy" => Section::Phy,
                    "enb" => {
                        b.enbs.push(EnbBlock::default());
                        Section::Enb
                    }
                    "ue" => {
                        b.ues.push(UeBlock::default());
                        Section::Ue
                    }
                    "random-ues" => {
                        b.random.get_or_insert_with(RandomUes::default);
                        Section::RandomUes
                    }
                    "buildings" => Section::Buildings,
                    _ => return Err(perr(format!("unknown section `[{name}]`"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr(format!("expected `key = value`, got `{line}`")))?;
            b.entry(section, key.trim(), value.trim())?;
        }
        b.finish()
    }

    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::parse(&text, &path.display().to_string(), base)
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    /// Concrete configuration for one run: fixed users followed by the
    /// random drop drawn from the `placement` stream of `seed`.
    pub fn build(&self, seed: u64) -> Result<SimConfig> {
        let mut cfg = self.config.clone();
        cfg.seed = seed;
        if let Some(r) = &self.random_ues {
            let center = cfg
                .cells
                .get(r.cell)
                .ok_or_else(|| {
                    Error::config(
                        "cell",
                        format!("random users reference missing cell {}", r.cell),
                    )
                })?
                .position;
            let mut rng = RngStream::new(seed, "placement");
            for _ in 0..r.count {
                let d = rng.uniform(r.min_distance, r.max_distance);
                let phi = rng.uniform(0.0, std::f64::consts::TAU);
                let p = Position::new(center.x + d * phi.cos(), center.y + d * phi.sin(), r.height);
                cfg.ues.push(UeSpec {
                    track: MobilityTrack::stationary(p),
                    cell: r.cell,
                    array: r.array,
                });
            }
        }
        Ok(cfg)
    }
}
