use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phy::Direction;
use crate::sim::{empirical_cdf, DropSummary, SimConfig, SimOutput, Simulation};

use super::file::Scenario;

pub const DROPS_HEADER: &str = "drop,seed,userId,rateMbps,losFraction";
pub const CELLS_HEADER: &str = "drop,seed,cellThroughputMbps";
pub const CDF_HEADER: &str = "rateMbps,cdf";
pub const SWEEP_HEADER: &str =
    "offsetDb,avgSinrDb,phyRateMbps,rlcRateMbps,modalMcs,tbCount,tbError";

/// Direction whose rates a scenario reports: downlink unless it is uplink only.
pub fn report_direction(cfg: &SimConfig) -> Direction {
    if cfg.direction.dl() {
        Direction::Dl
    } else {
        Direction::Ul
    }
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub output: SimOutput,
    pub summary: DropSummary,
    pub dir: Option<PathBuf>,
}

/// One run at the scenario seed. With `out` set, every trace plus
/// `summary.csv` is written there.
pub fn run_scenario(s: &Scenario, out: Option<&Path>) -> Result<RunReport> {
    let mut cfg = s.build(s.seed())?;
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    cfg.trace.dir = out.map(Path::to_path_buf);
    let dir = report_direction(&cfg);
    let output = Simulation::new(cfg)?.run()?;
    Ok(RunReport {
        summary: output.drop_summary(dir),
        output,
        dir: out.map(Path::to_path_buf),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropsReport {
    pub drops: Vec<DropSummary>,
    pub cdf: Vec<(f64, f64)>,
    pub mean_cell_throughput_bps: f64,
}

/// `n` independent drops with seeds `seed + i`, run in parallel. With `out`
/// set, drop `i` traces go to `out/drop-i` and the aggregate files to `out`.
pub fn run_drops(s: &Scenario, n: usize, out: Option<&Path>) -> Result<DropsReport> {
    if n == 0 {
        return Err(Error::violation("at least one drop is required"));
    }
    let base = s.seed();
    let drops = (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = base.wrapping_add(i as u64);
            let mut cfg = s.build(seed)?;
            if let Some(o) = out {
                let d = o.join(format!("drop-{i}"));
                create_dir(&d)?;
                cfg.trace.dir = Some(d);
            }
            let dir = report_direction(&cfg);
            Ok(Simulation::new(cfg)?.run()?.drop_summary(dir))
        })
        .collect::<Result<Vec<_>>>()?;
    let cdf = empirical_cdf(&drops);
    let mean_cell_throughput_bps =
        drops.iter().map(|d| d.cell_throughput_bps).sum::<f64>() / n as f64;
    let report = DropsReport {
        drops,
        cdf,
        mean_cell_throughput_bps,
    };
    if let Some(o) = out {
        create_dir(o)?;
        write(&o.join("drops.csv"), &format_drops(&report.drops))?;
        write(&o.join("cells.csv"), &format_cells(&report.drops))?;
        write(&o.join("cdf.csv"), &format_cdf(&report.cdf))?;
    }
    Ok(report)
}

pub fn format_drops(drops: &[DropSummary]) -> String {
    let mut s = format!("{DROPS_HEADER}\n");
    for (i, d) in drops.iter().enumerate() {
        for (u, (r, los)) in d.per_user_rate_bps.iter().zip(&d.los_fraction).enumerate() {
            let _ = writeln!(s, "{i},{},{u},{:.6},{:.4}", d.seed, r / 1e6, los);
        }
    }
    s
}

pub fn format_cells(drops: &[DropSummary]) -> String {
    let mut s = format!("{CELLS_HEADER}\n");
    for (i, d) in drops.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{:.6}", d.seed, d.cell_throughput_bps / 1e6);
    }
    s
}

pub fn format_cdf(cdf: &[(f64, f64)]) -> String {
    let mut s = format!("{CDF_HEADER}\n");
    for (r, p) in cdf {
        let _ = writeln!(s, "{:.6},{:.6}", r / 1e6, p);
    }
    s
}

/// One operating point of a pathloss sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub offset_db: f64,
    pub avg_sinr_db: Option<f64>,
    /// Decoded TB bits per second.
    pub phy_rate_bps: f64,
    pub rlc_rate_bps: f64,
    pub modal_mcs: Option<u8>,
    pub tb_count: u64,
    /// Error rate of first transmissions.
    pub tb_error: f64,
}

/// Reruns a single-user scenario with extra pathloss at each offset, keeping
/// position and seed fixed.
pub fn sweep_pathloss(
    s: &Scenario,
    offsets: &[f64],
    out: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    let cfg = s.build(s.seed())?;
    if cfg.ues.len() != 1 {
        return Err(Error::violation(format!(
            "pathloss sweep needs exactly one user, scenario has {}",
            cfg.ues.len()
        )));
    }
    let dir = report_direction(&cfg);
    let points = offsets
        .par_iter()
        .map(|&offset| {
            let mut c = cfg.clone();
            c.link.pathloss_offset_db += offset;
            c.trace.dir = None;
            let o = Simulation::new(c)?.run()?;
            let u = &o.users[0];
            let st = u.dir(dir);
            Ok(SweepPoint {
                offset_db: offset,
                avg_sinr_db: u.avg_sinr_db(dir),
                phy_rate_bps: u.phy_rate_bps(dir, o.duration),
                rlc_rate_bps: u.rlc_rate_bps(dir, o.duration),
                modal_mcs: st.modal_mcs(),
                tb_count: st.tb_count,
                tb_error: st.first_tx_error_rate(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(o) = out {
        create_dir(o)?;
        write(&o.join("sweep.csv"), &format_sweep(&points))?;
    }
    Ok(points)
}

pub fn format_sweep(points: &[SweepPoint]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for p in points {
        let sinr = p.avg_sinr_db.map_or(String::new(), |v| format!("{v:.4}"));
        let mcs = p.modal_mcs.map_or(String::new(), |m| m.to_string());
        let _ = writeln!(
            s,
            "{},{sinr},{:.6},{:.6},{mcs},{},{:.6}",
            p.offset_db,
            p.phy_rate_bps / 1e6,
            p.rlc_rate_bps / 1e6,
            p.tb_count,
            p.tb_error
        );
    }
    s
}
