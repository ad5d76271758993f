use super::bler::BlerTable;
use super::mi::miesm_effective_sinr;
use super::sinr::{linear_to_db, SinrReport};
use crate::error::Result;
use crate::mac::amc::{MAX_MCS, MCS_TABLE};

pub const TARGET_BLER: f64 = 0.1;

/// Wideband CQI: the highest MCS whose BLER at its MIESM effective SINR
/// stays within the target. CQI and MCS share one index space.
pub fn generate_cqi(report: &SinrReport) -> Result<u8> {
    let table = BlerTable::builtin();
    // One effective SINR per modulation order.
    let mut eff_db = [f64::NAN; 7];
    for m in (0..=MAX_MCS).rev() {
        let order = MCS_TABLE[m as usize].modulation_order as usize;
        if eff_db[order].is_nan() {
            eff_db[order] = linear_to_db(miesm_effective_sinr(&report.sinr, order as u8)?);
        }
        if table.bler(m, eff_db[order])? <= TARGET_BLER {
            return Ok(m);
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SimTime;

    fn flat(db: f64) -> SinrReport {
        SinrReport {
            sinr: vec![10f64.powf(db / 10.0); 72],
            time: SimTime::ZERO,
        }
    }

    #[test]
    fn extremes() {
        assert_eq!(generate_cqi(&flat(40.0)).unwrap(), 28);
        assert_eq!(generate_cqi(&flat(-20.0)).unwrap(), 0);
    }

    #[test]
    fn monotone_in_sinr() {
        let mut prev = 0;
        let mut x = -15.0;
        while x < 35.0 {
            let c = generate_cqi(&flat(x)).unwrap();
            assert!(c >= prev);
            prev = c;
            x += 0.05;
        }
    }
}
