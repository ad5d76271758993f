use std::sync::OnceLock;

use crate::error::{Error, Result};

const MI_CSV: &str = include_str!("../../data/bicm_mi.csv");

/// Tabulated per-bit BICM mutual information against SNR in dB.
#[derive(Debug)]
pub struct MiTable {
    snr_db: Vec<f64>,
    /// Columns for modulation orders 2, 4 and 6.
    mi: [Vec<f64>; 3],
}

fn column(order: u8) -> Result<usize> {
    match order {
        2 => Ok(0),
        4 => Ok(1),
        6 => Ok(2),
        _ => Err(Error::violation(format!(
            "unsupported modulation order {order}"
        ))),
    }
}

impl MiTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut snr_db = Vec::new();
        let mut mi: [Vec<f64>; 3] = Default::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    path: "bicm_mi.csv".into(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if vals.len() != 4 {
                return Err(Error::Parse {
                    path: "bicm_mi.csv".into(),
                    line: i + 1,
                    message: "expected 4 columns".into(),
                });
            }
            snr_db.push(vals[0]);
            for k in 0..3 {
                mi[k].push(vals[k + 1].clamp(0.0, 1.0));
            }
        }
        if snr_db.len() < 2 {
            return Err(Error::violation("mutual information table too short"));
        }
        // Enforce monotonicity so the inverse is well defined.
        for col in &mut mi {
            for j in 1..col.len() {
                col[j] = col[j].max(col[j - 1]);
            }
        }
        Ok(MiTable { snr_db, mi })
    }

    pub fn builtin() -> &'static MiTable {
        static TABLE: OnceLock<MiTable> = OnceLock::new();
        TABLE.get_or_init(|| MiTable::parse(MI_CSV).expect("bundled MI table parses"))
    }

    /// Per-bit mutual information at linear SINR `sinr`.
    ///
    /// Below the table the curve is continued linearly in the linear SINR,
    /// which is the small-SNR behavior of capacity.
    pub fn mi(&self, order: u8, sinr: f64) -> Result<f64> {
        let col = &self.mi[column(order)?];
        if !(sinr > 0.0) {
            return Ok(0.0);
        }
        let db = 10.0 * sinr.log10();
        let lo = self.snr_db[0];
        if db <= lo {
            return Ok(col[0] * sinr / 10f64.powf(lo / 10.0));
        }
        let n = self.snr_db.len();
        if db >= self.snr_db[n - 1] {
            return Ok(col[n - 1]);
        }
        let j = self.snr_db.partition_point(|&x| x <= db) - 1;
        let f = (db - self.snr_db[j]) / (self.snr_db[j + 1] - self.snr_db[j]);
        Ok(col[j] + f * (col[j + 1] - col[j]))
    }

    /// Smallest linear SINR whose MI reaches `target`.
    pub fn inverse(&self, order: u8, target: f64) -> Result<f64> {
        let col = &self.mi[column(order)?];
        let target = target.clamp(0.0, 1.0);
        let lo_lin = 10f64.powf(self.snr_db[0] / 10.0);
        if target <= col[0] {
            return Ok(if col[0] > 0.0 {
                lo_lin * target / col[0]
            } else {
                0.0
            });
        }
        let n = col.len();
        if target >= col[n - 1] {
            let first = col.partition_point(|&x| x < col[n - 1]);
            return Ok(10f64.powf(self.snr_db[first.min(n - 1)] / 10.0));
        }
        let j = col.partition_point(|&x| x < target);
        // col[j-1] < target <= col[j]
        let (a, b) = (col[j - 1], col[j]);
        let f = if b > a { (target - a) / (b - a) } else { 1.0 };
        let db = self.snr_db[j - 1] + f * (self.snr_db[j] - self.snr_db[j - 1]);
        Ok(10f64.powf(db / 10.0))
    }
}

/// MIESM effective SINR: the SINR whose MI equals the mean MI over subbands.
/// The result is clamped to the range of the inputs.
pub fn miesm_effective_sinr(sinrs: &[f64], order: u8) -> Result<f64> {
    if sinrs.is_empty() {
        return Err(Error::violation("empty SINR report"));
    }
    let table = MiTable::builtin();
    let mut sum = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &s in sinrs {
        sum += table.mi(order, s)?;
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let eff = table.inverse(order, sum / sinrs.len() as f64)?;
    Ok(eff.clamp(lo.max(0.0), hi))
}
