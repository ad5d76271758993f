use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::engine::SimTime;
use crate::error::{Error, Result};
use crate::mac::amc::MAX_MCS;
use crate::phy::Direction;

use super::trace::fmt_time;

pub const SUMMARY_HEADER: &str =
    "userId,direction,durationS,rlcBytes,rlcRateMbps,phyBits,phyRateMbps,tbCount,tbErrors,\
firstTx,firstTxErrors,modalMcs,avgSinrDb,losFraction";
pub const RUN_HEADER: &str = "name,seed,durationS,users";

/// Counters for one direction of one user.
#[derive(Clone, Debug, PartialEq)]
pub struct DirStats {
    pub rlc_bytes: u64,
    pub phy_bits: u64,
    pub tb_count: u64,
    pub tb_errors: u64,
    pub first_tx: u64,
    pub first_tx_errors: u64,
    /// MCS of first transmissions.
    pub mcs_hist: [u64; MAX_MCS as usize + 1],
    /// Sum of rounded wideband SINR samples in dB.
    pub sinr_sum_db: f64,
}

impl Default for DirStats {
    fn default() -> Self {
        DirStats {
            rlc_bytes: 0,
            phy_bits: 0,
            tb_count: 0,
            tb_errors: 0,
            first_tx: 0,
            first_tx_errors: 0,
            mcs_hist: [0; MAX_MCS as usize + 1],
            sinr_sum_db: 0.0,
        }
    }
}

impl DirStats {
    /// Most frequent first-transmission MCS, lowest index on ties.
    pub fn modal_mcs(&self) -> Option<u8> {
        let best = *self.mcs_hist.iter().max()?;
        if best == 0 {
            return None;
        }
        self.mcs_hist
            .iter()
            .position(|&c| c == best)
            .map(|i| i as u8)
    }

    pub fn first_tx_error_rate(&self) -> f64 {
        if self.first_tx == 0 {
            0.0
        } else {
            self.first_tx_errors as f64 / self.first_tx as f64
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct UserStats {
    pub user: u32,
    pub dl: DirStats,
    pub ul: DirStats,
    pub sinr_samples: u64,
    pub los_samples: u64,
}

impl UserStats {
    pub fn dir(&self, d: Direction) -> &DirStats {
        match d {
            Direction::Dl => &self.dl,
            Direction::Ul => &self.ul,
        }
    }

    pub fn dir_mut(&mut self, d: Direction) -> &mut DirStats {
        match d {
            Direction::Dl => &mut self.dl,
            Direction::Ul => &mut self.ul,
        }
    }

    pub fn avg_sinr_db(&self, d: Direction) -> Option<f64> {
        (self.sinr_samples > 0).then(|| self.dir(d).sinr_sum_db / self.sinr_samples as f64)
    }

    pub fn los_fraction(&self) -> f64 {
        if self.sinr_samples == 0 {
            0.0
        } else {
            self.los_samples as f64 / self.sinr_samples as f64
        }
    }

    pub fn rlc_rate_bps(&self, d: Direction, duration: SimTime) -> f64 {
        self.dir(d).rlc_bytes as f64 * 8.0 / duration.as_secs_f64()
    }

    pub fn phy_rate_bps(&self, d: Direction, duration: SimTime) -> f64 {
        self.dir(d).phy_bits as f64 / duration.as_secs_f64()
    }
}

/// Formats the summary file body (header included).
pub fn format_summary(users: &[UserStats], duration: SimTime) -> String {
    let mut out = String::new();
    writeln!(out, "{SUMMARY_HEADER}").expect("string write");
    let secs = fmt_time(duration);
    for u in users {
        for d in [Direction::Dl, Direction::Ul] {
            let s = u.dir(d);
            writeln!(
                out,
                "{},{},{},{},{:.6},{},{:.6},{},{},{},{},{},{},{:.6}",
                u.user,
                d,
                secs,
                s.rlc_bytes,
                u.rlc_rate_bps(d, duration) / 1e6,
                s.phy_bits,
                u.phy_rate_bps(d, duration) / 1e6,
                s.tb_count,
                s.tb_errors,
                s.first_tx,
                s.first_tx_errors,
                s.modal_mcs().map(|m| m.to_string()).unwrap_or_default(),
                u.avg_sinr_db(d)
                    .map(|x| format!("{x:.4}"))
                    .unwrap_or_default(),
                u.los_fraction(),
            )
            .expect("string write");
        }
    }
    out
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Splits a CSV file after checking its header.
fn read_rows(path: &Path, header: &str) -> Result<Vec<(usize, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == header => {}
        Some(h) => return Err(parse_err(path, 1, format!("unexpected header `{h}`"))),
        None => return Err(parse_err(path, 1, "empty file")),
    }
    Ok(lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| (i + 2, l.split(',').map(str::to_string).collect()))
        .collect())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, row: &[String], i: usize) -> Result<T> {
    row.get(i)
        .ok_or_else(|| parse_err(path, line, format!("missing column {i}")))?
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad value `{}` in column {i}", row[i])))
}

fn parse_direction(path: &Path, line: usize, s: &str) -> Result<Direction> {
    match s {
        "DL" => Ok(Direction::Dl),
        "UL" => Ok(Direction::Ul),
        _ => Err(parse_err(path, line, format!("bad direction `{s}`"))),
    }
}

fn parse_seconds(path: &Path, line: usize, s: &str) -> Result<SimTime> {
    let (a, b) = s.split_once('.').unwrap_or((s, "0"));
    let whole: u64 = a
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad time `{s}`")))?;
    let mut frac = b.to_string();
    frac.truncate(9);
    while frac.len() < 9 {
        frac.push('0');
    }
    let frac: u64 = frac
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad time `{s}`")))?;
    Ok(SimTime::from_nanos(whole * 1_000_000_000 + frac))
}

/// Rebuilds per-user statistics from the raw traces of one run.
pub fn recompute_from_traces(dir: &Path) -> Result<(Vec<UserStats>, SimTime)> {
    let run = dir.join("run.csv");
    let rows = read_rows(&run, RUN_HEADER)?;
    let (line, row) = rows
        .first()
        .ok_or_else(|| parse_err(&run, 2, "missing run row"))?;
    let duration = parse_seconds(&run, *line, &row[2])?;
    let n: usize = field(&run, *line, row, 3)?;
    let mut users: Vec<UserStats> = (0..n)
        .map(|i| UserStats {
            user: i as u32,
            ..Default::default()
        })
        .collect();
    let get = |users: &mut Vec<UserStats>, path: &Path, line: usize, id: usize| -> Result<usize> {
        if id < users.len() {
            Ok(id)
        } else {
            Err(parse_err(path, line, format!("unknown user {id}")))
        }
    };

    let tb = dir.join("phy_tb.csv");
    for (line, row) in read_rows(&tb, super::trace::PHY_TB_HEADER)? {
        let u = get(&mut users, &tb, line, field(&tb, line, &row, 1)?)?;
        let d = parse_direction(&tb, line, &row[2])?;
        let mcs: usize = field(&tb, line, &row, 3)?;
        let bits: u64 = field(&tb, line, &row, 4)?;
        let ok = match row.get(6).map(String::as_str) {
            Some("ok") => true,
            Some("error") => false,
            _ => return Err(parse_err(&tb, line, "bad outcome")),
        };
        let retx: u32 = field(&tb, line, &row, 7)?;
        let s = users[u].dir_mut(d);
        s.tb_count += 1;
        if ok {
            s.phy_bits += bits;
        } else {
            s.tb_errors += 1;
        }
        if retx == 0 {
            s.first_tx += 1;
            if !ok {
                s.first_tx_errors += 1;
            }
            if mcs < s.mcs_hist.len() {
                s.mcs_hist[mcs] += 1;
            }
        }
    }

    let rx = dir.join("rlc_rx.csv");
    for (line, row) in read_rows(&rx, super::trace::RLC_RX_HEADER)? {
        let u = get(&mut users, &rx, line, field(&rx, line, &row, 1)?)?;
        let d = parse_direction(&rx, line, &row[2])?;
        let b: u64 = field(&rx, line, &row, 3)?;
        users[u].dir_mut(d).rlc_bytes += b;
    }

    let sinr = dir.join("sinr.csv");
    for (line, row) in read_rows(&sinr, super::trace::SINR_HEADER)? {
        let u = get(&mut users, &sinr, line, field(&sinr, line, &row, 1)?)?;
        let dl: f64 = field(&sinr, line, &row, 4)?;
        let ul: f64 = field(&sinr, line, &row, 5)?;
        let us = &mut users[u];
        us.sinr_samples += 1;
        if row[3] == "LoS" {
            us.los_samples += 1;
        }
        us.dl.sinr_sum_db += dl;
        us.ul.sinr_sum_db += ul;
    }
    Ok((users, duration))
}

/// Recomputes the summary from the traces in `dir` and compares it with
/// the stored `summary.csv`. Returns the recomputed text.
pub fn verify_summary(dir: &Path) -> Result<String> {
    let (users, duration) = recompute_from_traces(dir)?;
    let text = format_summary(&users, duration);
    let path = dir.join("summary.csv");
    let stored = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    if stored != text {
        let line = stored
            .lines()
            .zip(text.lines())
            .position(|(a, b)| a != b)
            .map_or(stored.lines().count().min(text.lines().count()) + 1, |i| {
                i + 1
            });
        return Err(parse_err(&path, line, "summary does not match the traces"));
    }
    Ok(text)
}

/// Per-drop result: one rate per user in the traffic direction.
#[derive(Clone, Debug, PartialEq)]
pub struct DropSummary {
    pub seed: u64,
    pub per_user_rate_bps: Vec<f64>,
    pub cell_throughput_bps: f64,
    pub los_fraction: Vec<f64>,
}

impl DropSummary {
    pub fn from_stats(seed: u64, users: &[UserStats], duration: SimTime, dir: Direction) -> Self {
        let per_user_rate_bps: Vec<f64> = users
            .iter()
            .map(|u| u.rlc_rate_bps(dir, duration))
            .collect();
        DropSummary {
            seed,
            cell_throughput_bps: per_user_rate_bps.iter().sum(),
            los_fraction: users.iter().map(UserStats::los_fraction).collect(),
            per_user_rate_bps,
        }
    }
}

/// Empirical CDF points `(rate, F(rate))` over all users of all drops.
pub fn empirical_cdf(drops: &[DropSummary]) -> Vec<(f64, f64)> {
    let mut rates: Vec<f64> = drops
        .iter()
        .flat_map(|d| d.per_user_rate_bps.iter().copied())
        .collect();
    rates.sort_by(f64::total_cmp);
    let n = rates.len() as f64;
    rates
        .iter()
        .enumerate()
        .map(|(i, &r)| (r, (i + 1) as f64 / n))
        .collect()
}
