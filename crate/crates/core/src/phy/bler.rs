use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::mac::amc::{McsEntry, MCS_TABLE};

const BLER_CSV: &str = include_str!("../../data/bler_table.csv");

/// Logistic AWGN block-error curve for one MCS.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlerCurve {
    pub thresh_db: f64,
    pub slope_db: f64,
}

impl BlerCurve {
    /// Values under this are treated as error-free.
    const FLOOR: f64 = 1e-10;

    pub fn bler(&self, sinr_db: f64) -> f64 {
        if sinr_db.is_nan() {
            return 1.0;
        }
        let p = 1.0 / (1.0 + ((sinr_db - self.thresh_db) / self.slope_db).exp());
        if p < Self::FLOOR {
            0.0
        } else {
            p
        }
    }

    /// SINR (dB) at which the curve equals `target`.
    pub fn sinr_db_for(&self, target: f64) -> f64 {
        self.thresh_db + self.slope_db * ((1.0 - target) / target).ln()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlerTable {
    curves: Vec<BlerCurve>,
}

impl BlerTable {
    pub fn parse(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| Error::Parse {
            path: "bler_table.csv".into(),
            line,
            message,
        };
        let mut curves = Vec::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(perr(i + 1, "expected 5 columns".into()));
            }
            let idx: usize = f[0]
                .parse()
                .map_err(|_| perr(i + 1, format!("bad mcs `{}`", f[0])))?;
            let order: u8 = f[1]
                .parse()
                .map_err(|_| perr(i + 1, format!("bad order `{}`", f[1])))?;
            let rate: u16 = f[2]
                .strip_suffix("/1024")
                .and_then(|n| n.parse().ok())
                .ok_or_else(|| perr(i + 1, format!("bad code rate `{}`", f[2])))?;
            let expect: Option<&McsEntry> = MCS_TABLE.get(idx);
            if idx != curves.len()
                || expect.is_none_or(|m| m.modulation_order != order || m.rate_x1024 != rate)
            {
                return Err(perr(
                    i + 1,
                    format!("row for MCS {idx} disagrees with the MCS table"),
                ));
            }
            let num = |k: usize| {
                f[k].parse::<f64>()
                    .map_err(|_| perr(i + 1, format!("bad number `{}`", f[k])))
            };
            let slope = num(4)?;
            if !(slope > 0.0) {
                return Err(perr(i + 1, "slope must be positive".into()));
            }
            curves.push(BlerCurve {
                thresh_db: num(3)?,
                slope_db: slope,
            });
        }
        if curves.len() != MCS_TABLE.len() {
            return Err(Error::violation(format!(
                "BLER table has {} rows, expected {}",
                curves.len(),
                MCS_TABLE.len()
            )));
        }
        Ok(BlerTable { curves })
    }

    pub fn builtin() -> &'static BlerTable {
        static TABLE: OnceLock<BlerTable> = OnceLock::new();
        TABLE.get_or_init(|| BlerTable::parse(BLER_CSV).expect("bundled BLER table parses"))
    }

    pub fn curve(&self, mcs: u8) -> Result<&BlerCurve> {
        self.curves
            .get(mcs as usize)
            .ok_or_else(|| Error::violation(format!("no BLER curve for MCS {mcs}")))
    }

    pub fn bler(&self, mcs: u8, sinr_db: f64) -> Result<f64> {
        Ok(self.curve(mcs)?.bler(sinr_db))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_loads_and_is_ordered() {
        let t = BlerTable::builtin();
        for m in 1..=28u8 {
            assert!(t.curve(m).unwrap().thresh_db > t.curve(m - 1).unwrap().thresh_db);
        }
    }

    #[test]
    fn ten_percent_point() {
        let c = BlerTable::builtin().curve(10).unwrap();
        let x = c.sinr_db_for(0.1);
        assert!((c.bler(x) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_sinr_and_mcs() {
        let t = BlerTable::builtin();
        let mut x = -15.0;
        while x < 30.0 {
            for m in 0..=28u8 {
                let b = t.bler(m, x).unwrap();
                assert!(b <= t.bler(m, x - 0.1).unwrap());
                if m > 0 {
                    assert!(b >= t.bler(m - 1, x).unwrap());
                }
            }
            x += 0.1;
        }
    }

    #[test]
    fn far_above_threshold_is_error_free() {
        assert_eq!(BlerTable::builtin().bler(28, 40.0).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_row_rejected() {
        let bad = "mcs,modulation_order,code_rate,thresh_db,slope_db\n0,4,78/1024,-7.8,0.4\n";
        assert!(BlerTable::parse(bad).is_err());
    }
}
