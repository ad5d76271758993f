use std::collections::VecDeque;
use std::fs;

use crate::channel::{AntennaArray, LinkChannel};
use crate::engine::{run, Handler, PhyMacConfig, RngStream, Scheduler, SimTime};
use crate::error::{Error, Result};
use crate::mac::amc::{mcs as mcs_entry, MAC_HEADER_BYTES};
use crate::mac::make_scheduler;
use crate::mac::{
    Amc, FeedbackResult, FlowState, HarqEntity, MacScheduler, RetxRequest, ScheduleInput, StoredTb,
};
use crate::net::{Path, RateSource, TcpReceiver, TcpSender, TCP_IP_HEADER_BYTES};
use crate::phy::{
    compute_sinr, dbm_to_watts, effective_sinr_for_mcs, generate_cqi, linear_to_db,
    noise_power_watts, DecodeOutcome, Direction, HarqReceiver, Interferer, SinrReport, SlotKind,
    SubframeAllocation,
};
use crate::rlc::{DeliveredSdu, RlcBuffer, RlcMode, RlcReceiver, RlcSegment};
use crate::scene::{ChannelState, Position};

use super::config::{SimConfig, Traffic};
use super::stats::{format_summary, DropSummary, UserStats, RUN_HEADER};
use super::trace::{self, fmt_time, round4, TraceSink};

/// Floor for SINR values printed in dB, so outage stays finite.
const MIN_SINR_LINEAR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Event {
    Geometry,
    LongTerm {
        ue: usize,
        link: usize,
        id: u64,
    },
    Subframe(u64),
    SlotEnd {
        cell: usize,
        slot: usize,
    },
    UlCtrl {
        cell: usize,
    },
    SinrSample,
    TraceSample,
    AppTick,
    /// A downlink packet reaches the base station from the core.
    DlArrival {
        ue: usize,
        tag: u64,
        bytes: u64,
    },
    /// A TCP acknowledgement reaches the remote host.
    AckArrival {
        ue: usize,
        ack: u64,
    },
    Rto {
        ue: usize,
    },
}

/// One direction of one user: transmit side, receive side and HARQ.
struct Flow {
    rlc_tx: RlcBuffer,
    rlc_rx: RlcReceiver,
    harq_tx: HarqEntity<Vec<RlcSegment>>,
    harq_rx: HarqReceiver,
    decode_rng: RngStream,
    /// Delivered bytes not yet written to the binned trace.
    bin_bytes: u64,
}

impl Flow {
    fn new(cfg: &SimConfig, seed: u64, label: String) -> Self {
        let mode = cfg.effective_rlc_mode();
        let mut rlc_tx = RlcBuffer::new(mode, cfg.rlc_capacity);
        rlc_tx.set_arq_max_retx(cfg.arq_max_retx);
        let n = cfg.phy.num_harq_processes as usize;
        Flow {
            rlc_tx,
            rlc_rx: RlcReceiver::new(mode),
            harq_tx: HarqEntity::new(n, cfg.max_retx),
            harq_rx: HarqReceiver::new(n),
            decode_rng: RngStream::new(seed, label),
            bin_bytes: 0,
        }
    }
}

struct TcpFlow {
    sender: TcpSender,
    receiver: TcpReceiver,
    source: RateSource,
    downlink: Path,
    uplink: Path,
    rto_armed: Option<SimTime>,
    bin_rtt_sum: f64,
    bin_rtt_n: u64,
    bin_rtt_min: f64,
    bin_rtt_max: f64,
    seen_samples: u64,
    delivered_at_bin: u64,
}

/// Application feeding a constant-rate datagram flow.
struct UdpFlow {
    source: RateSource,
    packet_bytes: u64,
    downlink: Path,
    next_tag: u64,
}

struct Ue {
    track: crate::scene::MobilityTrack,
    cell: usize,
    /// One channel per base station; the serving one is `links[cell]`.
    links: Vec<LinkChannel>,
    dl: Flow,
    ul: Flow,
    dl_cqi: Option<u8>,
    ul_cqi: Option<u8>,
    bsr: u64,
    ul_hol: Option<SimTime>,
    tcp: Option<TcpFlow>,
    udp_dl: Option<UdpFlow>,
    udp_ul: Option<RateSource>,
    stats: UserStats,
}

impl Ue {
    fn flow(&self, d: Direction) -> &Flow {
        match d {
            Direction::Dl => &self.dl,
            Direction::Ul => &self.ul,
        }
    }

    fn flow_mut(&mut self, d: Direction) -> &mut Flow {
        match d {
            Direction::Dl => &mut self.dl,
            Direction::Ul => &mut self.ul,
        }
    }

    fn serving(&self) -> &LinkChannel {
        &self.links[self.cell]
    }
}

/// Decoded or corrupted TB waiting for its MAC delivery subframe.
#[derive(Clone, Copy, Debug)]
struct Delivery {
    due: u64,
    ue: usize,
    direction: Direction,
    process: u8,
    ok: bool,
}

struct Cell {
    position: Position,
    scheduler: Box<dyn MacScheduler>,
    ues: Vec<usize>,
    /// Allocations already decided, keyed by absolute subframe index.
    pending: std::collections::BTreeMap<u64, SubframeAllocation>,
    current: SubframeAllocation,
    current_index: u64,
    deliveries: VecDeque<Delivery>,
}

/// Per-bin TCP state, also kept in memory for analysis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcpSample {
    pub time: SimTime,
    pub user: u32,
    pub cwnd_bytes: u64,
    pub ssthresh_bytes: u64,
    /// Mean, min and max RTT of the samples taken in the bin, in ms.
    pub rtt_ms: Option<(f64, f64, f64)>,
    pub goodput_mbps: f64,
    pub state: crate::net::TcpPhase,
    pub retransmissions: u64,
    pub timeouts: u64,
    pub serving_state: ChannelState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinrSample {
    pub time: SimTime,
    pub user: u32,
    pub cell: usize,
    pub state: ChannelState,
    pub dl_sinr_db: f64,
    pub ul_sinr_db: f64,
    pub pathloss_db: f64,
    pub realization_id: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelEventReason {
    Geometry,
    Timer,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelEvent {
    pub time: SimTime,
    pub user: u32,
    pub cell: usize,
    pub reason: ChannelEventReason,
    pub state: ChannelState,
    pub pathloss_db: f64,
    pub realization_id: u64,
}

/// Everything a finished run reports back.
#[derive(Clone, Debug)]
pub struct SimOutput {
    pub seed: u64,
    pub duration: SimTime,
    pub users: Vec<UserStats>,
    pub tcp: Vec<TcpSample>,
    pub sinr: Vec<SinrSample>,
    pub channel_events: Vec<ChannelEvent>,
    pub events_executed: u64,
    pub harq_ignored_feedback: u64,
    pub rlc_drops: u64,
    pub arq_retransmissions: u64,
}

impl SimOutput {
    pub fn drop_summary(&self, dir: Direction) -> DropSummary {
        DropSummary::from_stats(self.seed, &self.users, self.duration, dir)
    }
}

pub struct Simulation {
    cfg: SimConfig,
    amc: Amc,
    cells: Vec<Cell>,
    ues: Vec<Ue>,
    traces: TraceSink,
    enb_power_sub: f64,
    ue_power_sub: f64,
    ue_noise_sub: f64,
    enb_noise_sub: f64,
    gains: Vec<f64>,
    tcp_samples: Vec<TcpSample>,
    sinr_samples: Vec<SinrSample>,
    channel_events: Vec<ChannelEvent>,
    error: Option<Error>,
}

fn slot_overlap(a: std::ops::Range<u32>, b: std::ops::Range<u32>) -> u32 {
    a.end.min(b.end).saturating_sub(a.start.max(b.start))
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let traces = match &cfg.trace.dir {
            Some(d) => TraceSink::new(d)?,
            None => TraceSink::disabled(),
        };
        let nb = cfg.phy.num_subbands as f64;
        let phy: &PhyMacConfig = &cfg.phy;
        let multi = cfg.cells.len() > 1;
        let mut cells: Vec<Cell> = cfg
            .cells
            .iter()
            .map(|spec| Cell {
                position: spec.position,
                scheduler: make_scheduler(cfg.scheduler, cfg.fixed_tti),
                ues: Vec::new(),
                pending: Default::default(),
                current: SubframeAllocation::control_only(0, 0, phy),
                current_index: 0,
                deliveries: VecDeque::new(),
            })
            .collect();
        let mut ues = Vec::with_capacity(cfg.ues.len());
        for (i, spec) in cfg.ues.iter().enumerate() {
            cells[spec.cell].ues.push(i);
            let links = cfg
                .cells
                .iter()
                .enumerate()
                .filter(|(c, _)| multi || *c == spec.cell)
                .map(|(c, cs)| {
                    LinkChannel::new(
                        cfg.link.clone(),
                        cfg.source.clone(),
                        AntennaArray::new(cs.array.0, cs.array.1),
                        AntennaArray::new(spec.array.0, spec.array.1),
                        phy,
                        cfg.seed,
                        &format!("link/cell{c}/ue{i}"),
                    )
                })
                .collect();
            let tcp = match cfg.traffic {
                Traffic::Tcp { rate_bps, tcp } if cfg.direction.dl() => Some(TcpFlow {
                    sender: TcpSender::new(tcp),
                    receiver: TcpReceiver::new(),
                    source: RateSource::new(rate_bps, SimTime::ZERO),
                    downlink: Path::core(cfg.core_hop_delay, cfg.core_rate_bps),
                    uplink: Path::core(cfg.core_hop_delay, cfg.core_rate_bps),
                    rto_armed: None,
                    bin_rtt_sum: 0.0,
                    bin_rtt_n: 0,
                    bin_rtt_min: f64::INFINITY,
                    bin_rtt_max: 0.0,
                    seen_samples: 0,
                    delivered_at_bin: 0,
                }),
                _ => None,
            };
            let (udp_dl, udp_ul) = match cfg.traffic {
                Traffic::Udp {
                    rate_bps,
                    packet_bytes,
                } => (
                    cfg.direction.dl().then(|| UdpFlow {
                        source: RateSource::new(rate_bps, SimTime::ZERO),
                        packet_bytes,
                        downlink: Path::core(cfg.core_hop_delay, cfg.core_rate_bps),
                        next_tag: 0,
                    }),
                    cfg.direction
                        .ul()
                        .then(|| RateSource::new(rate_bps, SimTime::ZERO)),
                ),
                _ => (None, None),
            };
            let mut ue = Ue {
                track: spec.track.clone(),
                cell: if multi { spec.cell } else { 0 },
                links,
                dl: Flow::new(&cfg, cfg.seed, format!("ue{i}/dl/decode")),
                ul: Flow::new(&cfg, cfg.seed, format!("ue{i}/ul/decode")),
                dl_cqi: None,
                ul_cqi: None,
                bsr: 0,
                ul_hol: None,
                tcp,
                udp_dl,
                udp_ul,
                stats: UserStats {
                    user: i as u32,
                    ..Default::default()
                },
            };
            // Full-buffer users only saturate the requested directions.
            if matches!(cfg.traffic, Traffic::FullBuffer) {
                if !cfg.direction.dl() {
                    ue.dl.rlc_tx = RlcBuffer::new(RlcMode::Um, cfg.rlc_capacity);
                    ue.dl.rlc_rx = RlcReceiver::new(RlcMode::Um);
                }
                if !cfg.direction.ul() {
                    ue.ul.rlc_tx = RlcBuffer::new(RlcMode::Um, cfg.rlc_capacity);
                    ue.ul.rlc_rx = RlcReceiver::new(RlcMode::Um);
                }
            }
            ues.push(ue);
        }
        let sw = cfg.phy.subband_width_hz;
        Ok(Simulation {
            amc: Amc::new(&cfg.phy),
            enb_power_sub: dbm_to_watts(cfg.enb_tx_power_dbm) / nb,
            ue_power_sub: dbm_to_watts(cfg.ue_tx_power_dbm) / nb,
            ue_noise_sub: noise_power_watts(sw, cfg.ue_noise_figure_db),
            enb_noise_sub: noise_power_watts(sw, cfg.enb_noise_figure_db),
            cfg,
            cells,
            ues,
            traces,
            gains: Vec::new(),
            tcp_samples: Vec::new(),
            sinr_samples: Vec::new(),
            channel_events: Vec::new(),
            error: None,
        })
    }

    /// Runs to the configured duration and writes the summary files.
    pub fn run(mut self) -> Result<SimOutput> {
        let mut sched: Scheduler<Event> = Scheduler::new();
        sched.schedule(SimTime::ZERO, Event::Geometry)?;
        sched.schedule(SimTime::ZERO, Event::Subframe(0))?;
        sched.schedule(SimTime::ZERO, Event::SinrSample)?;
        sched.schedule(self.cfg.trace.bin, Event::TraceSample)?;
        if !matches!(self.cfg.traffic, Traffic::FullBuffer | Traffic::None) {
            sched.schedule(SimTime::ZERO, Event::AppTick)?;
        }
        // Horizon is exclusive so a run of N frames holds N * 10 subframes.
        let until = SimTime::from_nanos(self.cfg.duration.as_nanos() - 1);
        let stats = run(&mut sched, &mut self, until);
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.finish(stats.events_executed)
    }

    fn finish(mut self, events_executed: u64) -> Result<SimOutput> {
        let end = self.cfg.duration;
        self.flush_bins(end)?;
        self.write_headers()?;
        if self.traces.enabled() {
            let users: Vec<UserStats> = self.ues.iter().map(|u| u.stats.clone()).collect();
            let dir = self.cfg.trace.dir.clone().expect("enabled");
            let write = |name: &str, body: String| -> Result<()> {
                let p = dir.join(name);
                fs::write(&p, body).map_err(|e| Error::io(&p, e))
            };
            write("summary.csv", format_summary(&users, end))?;
            write(
                "run.csv",
                format!(
                    "{RUN_HEADER}\n{},{},{},{}\n",
                    self.cfg.name.replace(',', "_"),
                    self.cfg.seed,
                    fmt_time(end),
                    users.len()
                ),
            )?;
        }
        self.traces.flush()?;
        let mut harq_ignored = 0;
        let mut drops = 0;
        let mut arq = 0;
        for u in &self.ues {
            for f in [&u.dl, &u.ul] {
                harq_ignored += f.harq_tx.ignored_feedback();
                drops += f.rlc_tx.drops;
                arq += f.rlc_tx.arq_retransmissions;
            }
        }
        Ok(SimOutput {
            seed: self.cfg.seed,
            duration: end,
            users: self.ues.iter().map(|u| u.stats.clone()).collect(),
            tcp: self.tcp_samples,
            sinr: self.sinr_samples,
            channel_events: self.channel_events,
            events_executed,
            harq_ignored_feedback: harq_ignored,
            rlc_drops: drops,
            arq_retransmissions: arq,
        })
    }

    /// Makes sure every standard trace exists even when it stayed empty.
    fn write_headers(&mut self) -> Result<()> {
        // Without the TB trace the summary cannot be recomputed, so leave the
        // file out rather than write an empty one that would disagree.
        if self.cfg.trace.phy_tb {
            self.traces.touch("phy_tb.csv", trace::PHY_TB_HEADER)?;
        }
        self.traces.touch("rlc_rx.csv", trace::RLC_RX_HEADER)?;
        self.traces.touch("sinr.csv", trace::SINR_HEADER)?;
        self.traces.touch("channel.csv", trace::CHANNEL_HEADER)?;
        self.traces.touch("rlc.csv", trace::RLC_HEADER)?;
        if self.cfg.trace.alloc {
            for c in 0..self.cells.len() {
                self.traces.touch(&alloc_file(c), trace::ALLOC_HEADER)?;
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, sched: &mut Scheduler<Event>, ev: Event) -> Result<()> {
        let now = sched.now();
        match ev {
            Event::Geometry => {
                self.geometry(sched, now)?;
                sched.schedule_in(self.cfg.geometry_period, Event::Geometry);
            }
            Event::LongTerm { ue, link, id } => self.long_term(sched, now, ue, link, id)?,
            Event::Subframe(k) => self.subframe(sched, now, k)?,
            Event::SlotEnd { cell, slot } => self.slot_end(sched, now, cell, slot)?,
            Event::UlCtrl { cell } => self.ul_ctrl(now, cell)?,
            Event::SinrSample => {
                self.sinr_sample(now)?;
                sched.schedule_in(self.cfg.trace.sinr_period, Event::SinrSample);
            }
            Event::TraceSample => {
                self.flush_bins(now)?;
                sched.schedule_in(self.cfg.trace.bin, Event::TraceSample);
            }
            Event::AppTick => {
                self.app_tick(sched, now)?;
                sched.schedule_in(self.cfg.app_tick, Event::AppTick);
            }
            Event::DlArrival { ue, tag, bytes } => {
                self.ues[ue].dl.rlc_tx.enqueue(bytes, tag, now);
            }
            Event::AckArrival { ue, ack } => self.tcp_ack(sched, now, ue, ack)?,
            Event::Rto { ue } => self.rto(sched, now, ue)?,
        }
        Ok(())
    }

    fn geometry(&mut self, sched: &mut Scheduler<Event>, now: SimTime) -> Result<()> {
        for i in 0..self.ues.len() {
            let pos = self.ues[i].track.position_at(now);
            let vel = self.ues[i].track.velocity_at(now);
            for l in 0..self.ues[i].links.len() {
                let cell = self.link_cell(i, l);
                let enb = self.cells[cell].position;
                let link = &mut self.ues[i].links[l];
                if link.update_geometry(now, &enb, &pos, vel, &self.cfg.buildings)? {
                    self.record_channel_event(now, i, l, ChannelEventReason::Geometry)?;
                    self.arm_long_term(sched, i, l);
                }
            }
        }
        Ok(())
    }

    fn link_cell(&self, _ue: usize, link: usize) -> usize {
        if self.cells.len() > 1 {
            link
        } else {
            0
        }
    }

    fn arm_long_term(&mut self, sched: &mut Scheduler<Event>, ue: usize, link: usize) {
        let l = &self.ues[ue].links[link];
        if let Some(t) = l.next_update_time() {
            let id = l.realization_id();
            sched
                .schedule(t.max(sched.now()), Event::LongTerm { ue, link, id })
                .expect("not in the past");
        }
    }

    fn long_term(
        &mut self,
        sched: &mut Scheduler<Event>,
        now: SimTime,
        ue: usize,
        link: usize,
        id: u64,
    ) -> Result<()> {
        let l = &mut self.ues[ue].links[link];
        if l.realization_id() != id {
            return Ok(());
        }
        if l.long_term_update(now)? {
            self.record_channel_event(now, ue, link, ChannelEventReason::Timer)?;
            self.arm_long_term(sched, ue, link);
        }
        Ok(())
    }

    fn record_channel_event(
        &mut self,
        now: SimTime,
        ue: usize,
        link: usize,
        reason: ChannelEventReason,
    ) -> Result<()> {
        let cell = self.link_cell(ue, link);
        let l = &self.ues[ue].links[link];
        let ev = ChannelEvent {
            time: now,
            user: ue as u32,
            cell,
            reason,
            state: l.state(),
            pathloss_db: l.pathloss_db(),
            realization_id: l.realization_id(),
        };
        self.channel_events.push(ev);
        let line = format!(
            "{},{},{},{},{},{:.4},{}",
            fmt_time(now),
            ue,
            cell,
            match reason {
                ChannelEventReason::Geometry => "geometry",
                ChannelEventReason::Timer => "timer",
            },
            ev.state,
            ev.pathloss_db,
            ev.realization_id
        );
        self.traces.row("channel.csv", trace::CHANNEL_HEADER, &line)
    }

    fn subframe(&mut self, sched: &mut Scheduler<Event>, now: SimTime, k: u64) -> Result<()> {
        for c in 0..self.cells.len() {
            while let Some(d) = self.cells[c].deliveries.front().copied() {
                if d.due > k {
                    break;
                }
                self.cells[c].deliveries.pop_front();
                self.deliver(sched, now, d)?;
            }
        }
        let spf = self.cfg.phy.subframes_per_frame as u64;
        let target = k + self.cfg.phy.mac_phy_data_latency as u64;
        for c in 0..self.cells.len() {
            let alloc = self.schedule_cell(now, c, target / spf, (target % spf) as u32)?;
            alloc.validate(&self.cfg.phy)?;
            if self.cells[c].pending.insert(target, alloc).is_some() {
                return Err(Error::violation(format!(
                    "subframe {target} scheduled twice"
                )));
            }
        }
        let sym = self.cfg.phy.symbol_length;
        for c in 0..self.cells.len() {
            let alloc = match self.cells[c].pending.remove(&k) {
                Some(a) => a,
                None => SubframeAllocation::control_only(k / spf, (k % spf) as u32, &self.cfg.phy),
            };
            if self.cfg.trace.alloc && self.traces.enabled() {
                let file = alloc_file(c);
                for s in &alloc.slots {
                    let line = format!(
                        "{},{},{},{},{},{},{},{},{}",
                        alloc.frame,
                        alloc.subframe,
                        s.start_symbol,
                        s.num_symbols,
                        s.direction,
                        s.kind,
                        s.user.map(|u| u.to_string()).unwrap_or_default(),
                        s.mcs,
                        s.is_retx as u8
                    );
                    self.traces.row(&file, trace::ALLOC_HEADER, &line)?;
                }
            }
            for (i, s) in alloc.slots.iter().enumerate() {
                let end = now + SimTime::from_nanos(sym.as_nanos() * s.end_symbol() as u64);
                match s.kind {
                    SlotKind::Data => {
                        sched.schedule(end, Event::SlotEnd { cell: c, slot: i })?;
                    }
                    SlotKind::Ctrl if s.direction == Direction::Ul => {
                        sched.schedule(end, Event::UlCtrl { cell: c })?;
                    }
                    SlotKind::Ctrl => {}
                }
            }
            self.cells[c].current = alloc;
            self.cells[c].current_index = k;
        }
        let next = SimTime::from_nanos(self.cfg.phy.subframe_length().as_nanos() * (k + 1));
        sched.schedule(next, Event::Subframe(k + 1))?;
        Ok(())
    }

    fn schedule_cell(
        &mut self,
        now: SimTime,
        c: usize,
        frame: u64,
        subframe: u32,
    ) -> Result<SubframeAllocation> {
        let mut flows = Vec::new();
        let mut retx = Vec::new();
        for &i in &self.cells[c].ues {
            let ue = &self.ues[i];
            for d in [Direction::Dl, Direction::Ul] {
                let f = ue.flow(d);
                for p in f.harq_tx.pending_retx() {
                    let tb = p.stored.as_ref().expect("pending retx keeps its TB");
                    retx.push(RetxRequest {
                        user: i as u32,
                        direction: d,
                        process: p.id,
                        num_symbols: tb.num_symbols,
                        mcs: tb.mcs,
                    });
                }
                let (buffer, hol, cqi) = match d {
                    Direction::Dl => (f.rlc_tx.buffer_status(), f.rlc_tx.head_arrival(), ue.dl_cqi),
                    Direction::Ul => (ue.bsr, ue.ul_hol, ue.ul_cqi),
                };
                if buffer > 0 {
                    flows.push(FlowState {
                        user: i as u32,
                        direction: d,
                        buffer_bytes: buffer,
                        header_bytes: MAC_HEADER_BYTES,
                        cqi,
                        delay_budget: self.cfg.delay_budget,
                        hol_arrival: hol,
                        free_process: f.harq_tx.free_process(),
                    });
                }
            }
        }
        let input = ScheduleInput {
            frame,
            subframe,
            now,
            flows: &flows,
            retx: &retx,
            cfg: &self.cfg.phy,
        };
        let alloc = self.cells[c].scheduler.schedule(&input);
        for s in alloc.data_slots() {
            let ue = s.user.expect("data slots name a user") as usize;
            let f = self.ues[ue].flow_mut(s.direction);
            if s.is_retx {
                let tb = f.harq_tx.retransmitted(s.harq_process)?;
                if tb.num_symbols != s.num_symbols || tb.mcs != s.mcs {
                    return Err(Error::violation("retransmission changed its allocation"));
                }
            } else {
                let tb_bits = self.amc.tb_size_bits(&mcs_entry(s.mcs)?, s.num_symbols);
                let grant = (tb_bits / 8).saturating_sub(MAC_HEADER_BYTES);
                let payload = f.rlc_tx.dequeue_for_grant(grant, now);
                f.harq_tx.start(
                    s.harq_process,
                    StoredTb {
                        num_symbols: s.num_symbols,
                        mcs: s.mcs,
                        tb_bits,
                        payload,
                    },
                )?;
            }
        }
        Ok(alloc)
    }

    /// Signal gains of `ue`'s serving link into `self.gains`.
    fn serving_gains(&mut self, ue: usize, t: SimTime) {
        let u = &self.ues[ue];
        u.serving().subband_gains(t, &mut self.gains);
    }

    fn interferers(&self, now: SimTime, cell: usize, slot: usize) -> Vec<(f64, Vec<f64>, f64)> {
        let mut out = Vec::new();
        if self.cells.len() < 2 {
            return out;
        }
        let victim = &self.cells[cell].current.slots[slot];
        let vu = victim.user.expect("data slot") as usize;
        for (c2, other) in self.cells.iter().enumerate() {
            if c2 == cell {
                continue;
            }
            for s in other.current.data_slots() {
                if s.direction != victim.direction {
                    continue;
                }
                let ov = slot_overlap(s.symbols(), victim.symbols());
                if ov == 0 {
                    continue;
                }
                let ou = s.user.expect("data slot") as usize;
                let mut g = Vec::new();
                match victim.direction {
                    Direction::Dl => {
                        let (Some(w_enb), Some(w_ue)) = (
                            self.ues[ou].links[c2].enb_beam(),
                            self.ues[vu].links[cell].ue_beam(),
                        ) else {
                            continue;
                        };
                        self.ues[vu].links[c2].subband_gains_with(w_enb, w_ue, now, &mut g);
                        out.push((self.enb_power_sub, g, ov as f64 / victim.num_symbols as f64));
                    }
                    Direction::Ul => {
                        let (Some(w_enb), Some(w_ue)) = (
                            self.ues[vu].links[cell].enb_beam(),
                            self.ues[ou].links[c2].ue_beam(),
                        ) else {
                            continue;
                        };
                        self.ues[ou].links[cell].subband_gains_with(w_enb, w_ue, now, &mut g);
                        out.push((self.ue_power_sub, g, ov as f64 / victim.num_symbols as f64));
                    }
                }
            }
        }
        out
    }

    fn slot_end(
        &mut self,
        sched: &mut Scheduler<Event>,
        now: SimTime,
        cell: usize,
        slot: usize,
    ) -> Result<()> {
        let s = self.cells[cell].current.slots[slot];
        let ue = s.user.expect("data slot") as usize;
        let interf = self.interferers(now, cell, slot);
        self.serving_gains(ue, now);
        let (p, noise) = match s.direction {
            Direction::Dl => (self.enb_power_sub, self.ue_noise_sub),
            Direction::Ul => (self.ue_power_sub, self.enb_noise_sub),
        };
        let list: Vec<Interferer<'_>> = interf
            .iter()
            .map(|(pw, g, ov)| Interferer {
                power_per_subband_w: *pw,
                gains: g,
                overlap: *ov,
            })
            .collect();
        let report = compute_sinr(p, &self.gains, noise, &list, now)?;
        let eff = effective_sinr_for_mcs(&report, s.mcs)?;
        let u = &mut self.ues[ue];
        let f = u.flow_mut(s.direction);
        let res = f
            .harq_rx
            .decode(s.harq_process, s.mcs, eff, &mut f.decode_rng)?;
        let proc_ = f.harq_tx.process(s.harq_process)?;
        let tb_bits = proc_.stored.as_ref().map_or(0, |t| t.tb_bits);
        let retx_count = proc_.tx_count.saturating_sub(1);
        let ok = res.outcome == DecodeOutcome::Decoded;

        let st = u.stats.dir_mut(s.direction);
        st.tb_count += 1;
        if ok {
            st.phy_bits += tb_bits;
        } else {
            st.tb_errors += 1;
        }
        if retx_count == 0 {
            st.first_tx += 1;
            if !ok {
                st.first_tx_errors += 1;
            }
            st.mcs_hist[s.mcs as usize] += 1;
        }
        if self.cfg.trace.phy_tb && self.traces.enabled() {
            let line = format!(
                "{},{},{},{},{},{:.4},{},{}",
                fmt_time(now),
                ue,
                s.direction,
                s.mcs,
                tb_bits,
                linear_to_db(eff.max(MIN_SINR_LINEAR)),
                if ok { "ok" } else { "error" },
                retx_count
            );
            self.traces.row("phy_tb.csv", trace::PHY_TB_HEADER, &line)?;
        }
        let d = Delivery {
            due: self.cells[cell].current_index + self.cfg.phy.phy_mac_data_latency as u64,
            ue,
            direction: s.direction,
            process: s.harq_process,
            ok,
        };
        if self.cfg.phy.phy_mac_data_latency == 0 {
            self.deliver(sched, now, d)?;
        } else {
            self.cells[cell].deliveries.push_back(d);
        }
        Ok(())
    }
    fn deliver(&mut self, sched: &mut Scheduler<Event>, now: SimTime, d: Delivery) -> Result<()> {
        let f = self.ues[d.ue].flow_mut(d.direction);
        let mut sdus = Vec::new();
        match f.harq_tx.feedback(d.process, d.ok)? {
            FeedbackResult::Acked(payload) => {
                for seg in &payload {
                    sdus.extend(f.rlc_rx.receive(seg));
                }
            }
            FeedbackResult::Dropped(payload) => {
                f.harq_rx.reset(d.process)?;
                for sn in f.rlc_tx.harq_drop_notification(&payload) {
                    sdus.extend(f.rlc_rx.skip(sn));
                }
            }
            FeedbackResult::Retx | FeedbackResult::Ignored => {}
        }
        for sdu in sdus {
            self.on_sdu(sched, now, d.ue, d.direction, sdu)?;
        }
        Ok(())
    }

    /// An RLC SDU has been reassembled at the receiving side.
    fn on_sdu(
        &mut self,
        sched: &mut Scheduler<Event>,
        now: SimTime,
        ue: usize,
        dir: Direction,
        sdu: DeliveredSdu,
    ) -> Result<()> {
        let u = &mut self.ues[ue];
        u.stats.dir_mut(dir).rlc_bytes += sdu.bytes;
        u.flow_mut(dir).bin_bytes += sdu.bytes;
        let Some(tcp) = u.tcp.as_mut() else {
            return Ok(());
        };
        match dir {
            Direction::Dl => {
                let len = sdu.bytes.saturating_sub(TCP_IP_HEADER_BYTES);
                let ack = tcp.receiver.on_segment(sdu.tag, len);
                u.ul.rlc_tx.enqueue(TCP_IP_HEADER_BYTES, ack, now);
            }
            Direction::Ul => {
                let at = tcp.uplink.transmit(now, sdu.bytes);
                sched.schedule(at, Event::AckArrival { ue, ack: sdu.tag })?;
            }
        }
        Ok(())
    }

    /// UL control symbol: users report CQI and buffer status.
    fn ul_ctrl(&mut self, now: SimTime, cell: usize) -> Result<()> {
        for idx in 0..self.cells[cell].ues.len() {
            let i = self.cells[cell].ues[idx];
            self.serving_gains(i, now);
            let dl = compute_sinr(self.enb_power_sub, &self.gains, self.ue_noise_sub, &[], now)?;
            let ul = compute_sinr(self.ue_power_sub, &self.gains, self.enb_noise_sub, &[], now)?;
            let u = &mut self.ues[i];
            u.dl_cqi = Some(generate_cqi(&dl)?);
            u.ul_cqi = Some(generate_cqi(&ul)?);
            u.bsr = u.ul.rlc_tx.buffer_status();
            u.ul_hol = u.ul.rlc_tx.head_arrival();
        }
        Ok(())
    }

    fn sinr_sample(&mut self, now: SimTime) -> Result<()> {
        for i in 0..self.ues.len() {
            self.serving_gains(i, now);
            let mean = |r: &SinrReport| round4(linear_to_db(r.mean_linear().max(MIN_SINR_LINEAR)));
            let dl = mean(&compute_sinr(
                self.enb_power_sub,
                &self.gains,
                self.ue_noise_sub,
                &[],
                now,
            )?);
            let ul = mean(&compute_sinr(
                self.ue_power_sub,
                &self.gains,
                self.enb_noise_sub,
                &[],
                now,
            )?);
            let u = &mut self.ues[i];
            let link = u.serving();
            let sample = SinrSample {
                time: now,
                user: i as u32,
                cell: u.cell,
                state: link.state(),
                dl_sinr_db: dl,
                ul_sinr_db: ul,
                pathloss_db: link.pathloss_db(),
                realization_id: link.realization_id(),
            };
            u.stats.sinr_samples += 1;
            if sample.state == ChannelState::LoS {
                u.stats.los_samples += 1;
            }
            u.stats.dl.sinr_sum_db += dl;
            u.stats.ul.sinr_sum_db += ul;
            self.sinr_samples.push(sample);
            let line = format!(
                "{},{},{},{},{:.4},{:.4},{:.4},{}",
                fmt_time(now),
                i,
                sample.cell,
                sample.state,
                dl,
                ul,
                sample.pathloss_db,
                sample.realization_id
            );
            self.traces.row("sinr.csv", trace::SINR_HEADER, &line)?;
        }
        Ok(())
    }

    /// Closes the current trace bin at `now`.
    fn flush_bins(&mut self, now: SimTime) -> Result<()> {
        let bin_s = self.cfg.trace.bin.as_secs_f64();
        for i in 0..self.ues.len() {
            for d in [Direction::Dl, Direction::Ul] {
                let f = self.ues[i].flow_mut(d);
                let bytes = std::mem::take(&mut f.bin_bytes);
                if bytes > 0 {
                    let line = format!("{},{},{},{}", fmt_time(now), i, d, bytes);
                    self.traces.row("rlc_rx.csv", trace::RLC_RX_HEADER, &line)?;
                }
                let f = self.ues[i].flow(d);
                let tx = &f.rlc_tx;
                if tx.enqueued_bytes > 0 || tx.dequeued_bytes > 0 {
                    let line = format!(
                        "{},ue{}-{},{},{},{},{:.3},{}",
                        fmt_time(now),
                        i,
                        d,
                        tx.enqueued_bytes,
                        tx.dequeued_bytes,
                        tx.occupancy(),
                        tx.hol_delay(now).as_millis_f64(),
                        tx.drops
                    );
                    self.traces.row("rlc.csv", trace::RLC_HEADER, &line)?;
                }
            }
            let serving_state = self.ues[i].serving().state();
            let Some(tcp) = self.ues[i].tcp.as_mut() else {
                continue;
            };
            let delivered = tcp.receiver.delivered_bytes;
            let goodput = (delivered - tcp.delivered_at_bin) as f64 * 8.0 / bin_s / 1e6;
            tcp.delivered_at_bin = delivered;
            let rtt = (tcp.bin_rtt_n > 0).then(|| {
                (
                    tcp.bin_rtt_sum / tcp.bin_rtt_n as f64,
                    tcp.bin_rtt_min,
                    tcp.bin_rtt_max,
                )
            });
            tcp.bin_rtt_sum = 0.0;
            tcp.bin_rtt_n = 0;
            tcp.bin_rtt_min = f64::INFINITY;
            tcp.bin_rtt_max = 0.0;
            let s = &tcp.sender;
            let sample = TcpSample {
                time: now,
                user: i as u32,
                cwnd_bytes: s.cwnd,
                ssthresh_bytes: s.ssthresh,
                rtt_ms: rtt,
                goodput_mbps: goodput,
                state: s.phase,
                retransmissions: s.retransmissions,
                timeouts: s.timeouts,
                serving_state,
            };
            self.tcp_samples.push(sample);
            let line = format!(
                "{},{},{},{},{:.6},{}",
                fmt_time(now),
                sample.cwnd_bytes,
                sample.ssthresh_bytes,
                rtt.map(|r| format!("{:.3}", r.0)).unwrap_or_default(),
                goodput,
                sample.state
            );
            self.traces
                .row(&format!("tcp-ue{i}.csv"), trace::TCP_HEADER, &line)?;
        }
        Ok(())
    }

    fn app_tick(&mut self, sched: &mut Scheduler<Event>, now: SimTime) -> Result<()> {
        for i in 0..self.ues.len() {
            if self.ues[i].tcp.is_some() {
                self.tcp_pump(sched, now, i)?;
            }
            let u = &mut self.ues[i];
            if let Some(udp) = u.udp_dl.as_mut() {
                let mut avail = udp.source.generate(now);
                while avail >= udp.packet_bytes {
                    let at = udp.downlink.transmit(now, udp.packet_bytes);
                    sched.schedule(
                        at,
                        Event::DlArrival {
                            ue: i,
                            tag: udp.next_tag,
                            bytes: udp.packet_bytes,
                        },
                    )?;
                    udp.next_tag += 1;
                    udp.source.accept(udp.packet_bytes);
                    avail -= udp.packet_bytes;
                }
            }
            if let Some(src) = u.udp_ul.as_mut() {
                let pkt = match self.cfg.traffic {
                    Traffic::Udp { packet_bytes, .. } => packet_bytes,
                    _ => unreachable!("uplink source only exists for datagram traffic"),
                };
                let mut avail = src.generate(now);
                while avail >= pkt {
                    // A full buffer drops the datagram.
                    u.ul.rlc_tx.enqueue(pkt, 0, now);
                    src.accept(pkt);
                    avail -= pkt;
                }
            }
        }
        Ok(())
    }

    /// Moves application data into TCP and sends what the window allows.
    fn tcp_pump(&mut self, sched: &mut Scheduler<Event>, now: SimTime, ue: usize) -> Result<()> {
        let tcp = self.ues[ue].tcp.as_mut().expect("tcp flow");
        let pending = tcp.source.generate(now);
        let taken = tcp.sender.write(pending);
        tcp.source.accept(taken);
        for seg in tcp.sender.poll_send(now) {
            let at = tcp.downlink.transmit(now, seg.wire_bytes());
            sched.schedule(
                at,
                Event::DlArrival {
                    ue,
                    tag: seg.seq,
                    bytes: seg.wire_bytes(),
                },
            )?;
        }
        self.arm_rto(sched, ue)
    }

    fn arm_rto(&mut self, sched: &mut Scheduler<Event>, ue: usize) -> Result<()> {
        let tcp = self.ues[ue].tcp.as_mut().expect("tcp flow");
        if let Some(d) = tcp.sender.rto_deadline() {
            if tcp.rto_armed.is_none_or(|a| d < a) {
                tcp.rto_armed = Some(d);
                sched.schedule(d.max(sched.now()), Event::Rto { ue })?;
            }
        }
        Ok(())
    }

    fn tcp_ack(
        &mut self,
        sched: &mut Scheduler<Event>,
        now: SimTime,
        ue: usize,
        ack: u64,
    ) -> Result<()> {
        let tcp = self.ues[ue].tcp.as_mut().expect("tcp flow");
        if let Some(seg) = tcp.sender.on_ack(ack, now) {
            let at = tcp.downlink.transmit(now, seg.wire_bytes());
            sched.schedule(
                at,
                Event::DlArrival {
                    ue,
                    tag: seg.seq,
                    bytes: seg.wire_bytes(),
                },
            )?;
        }
        if tcp.sender.rtt_samples != tcp.seen_samples {
            tcp.seen_samples = tcp.sender.rtt_samples;
            let ms = tcp.sender.last_rtt.expect("sampled").as_millis_f64();
            tcp.bin_rtt_sum += ms;
            tcp.bin_rtt_n += 1;
            tcp.bin_rtt_min = tcp.bin_rtt_min.min(ms);
            tcp.bin_rtt_max = tcp.bin_rtt_max.max(ms);
        }
        self.tcp_pump(sched, now, ue)
    }

    fn rto(&mut self, sched: &mut Scheduler<Event>, now: SimTime, ue: usize) -> Result<()> {
        let tcp = self.ues[ue].tcp.as_mut().expect("tcp flow");
        if tcp.rto_armed != Some(now) {
            return Ok(());
        }
        tcp.rto_armed = None;
        match tcp.sender.rto_deadline() {
            Some(d) if d <= now => {
                tcp.sender.on_timeout(now);
                self.tcp_pump(sched, now, ue)
            }
            _ => self.arm_rto(sched, ue),
        }
    }
}

impl Handler<Event> for Simulation {
    fn handle(&mut self, sched: &mut Scheduler<Event>, event: Event) {
        if self.error.is_some() {
            return;
        }
        if let Err(e) = self.dispatch(sched, event) {
            self.error = Some(e);
        }
    }
}

fn alloc_file(cell: usize) -> String {
    if cell == 0 {
        "alloc.csv".to_string()
    } else {
        format!("alloc-cell{cell}.csv")
    }
}
