use super::bler::BlerTable;
use super::mi::{miesm_effective_sinr, MiTable};
use super::sinr::{linear_to_db, SinrReport};
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::mac::amc::{mcs as mcs_entry, MAX_MCS};

/// Soft buffer of one receive-side HARQ process.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SoftBuffer {
    pub accumulated_mi: f64,
    pub transmissions: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeOutcome {
    Decoded,
    Corrupted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeResult {
    pub outcome: DecodeOutcome,
    pub bler: f64,
    /// SINR equivalent to the combined mutual information, dB.
    pub combined_sinr_db: f64,
}

/// BLER of `mcs` after combining the transmissions in `buf` plus one more
/// at `eff_sinr` (linear). Does not modify the buffer.
pub fn combined_bler(mcs: u8, eff_sinr: f64, buf: &SoftBuffer) -> Result<(f64, f64, f64)> {
    let m = mcs_entry(mcs)?;
    let table = MiTable::builtin();
    let mi = buf.accumulated_mi + table.mi(m.modulation_order, eff_sinr)?;
    let eq = if buf.transmissions == 0 {
        eff_sinr
    } else {
        table
            .inverse(m.modulation_order, mi.min(1.0))?
            .max(eff_sinr)
    };
    let db = linear_to_db(eq);
    Ok((BlerTable::builtin().bler(mcs, db)?, db, mi))
}

/// Receive-side HARQ entity: one soft buffer per process id.
#[derive(Clone, Debug, PartialEq)]
pub struct HarqReceiver {
    buffers: Vec<SoftBuffer>,
}

impl HarqReceiver {
    pub fn new(num_processes: usize) -> Self {
        HarqReceiver {
            buffers: vec![SoftBuffer::default(); num_processes],
        }
    }

    pub fn buffer(&self, process: u8) -> Result<&SoftBuffer> {
        self.buffers
            .get(process as usize)
            .ok_or_else(|| Error::violation(format!("HARQ process {process} out of range")))
    }

    pub fn reset(&mut self, process: u8) -> Result<()> {
        let b = self
            .buffers
            .get_mut(process as usize)
            .ok_or_else(|| Error::violation(format!("HARQ process {process} out of range")))?;
        *b = SoftBuffer::default();
        Ok(())
    }

    /// Combines one reception into the soft buffer and draws the outcome.
    /// A decoded block clears the process; a corrupted one keeps its soft bits.
    pub fn decode(
        &mut self,
        process: u8,
        mcs: u8,
        eff_sinr: f64,
        rng: &mut RngStream,
    ) -> Result<DecodeResult> {
        if mcs > MAX_MCS {
            return Err(Error::violation(format!("MCS {mcs} out of range")));
        }
        let buf = *self.buffer(process)?;
        let (bler, db, mi) = combined_bler(mcs, eff_sinr, &buf)?;
        let corrupted = rng.bernoulli(bler);
        let slot = &mut self.buffers[process as usize];
        let outcome = if corrupted {
            slot.accumulated_mi = mi;
            slot.transmissions += 1;
            DecodeOutcome::Corrupted
        } else {
            *slot = SoftBuffer::default();
            DecodeOutcome::Decoded
        };
        Ok(DecodeResult {
            outcome,
            bler,
            combined_sinr_db: db,
        })
    }
}

/// Effective SINR of a report for the modulation order of `mcs`.
pub fn effective_sinr_for_mcs(report: &SinrReport, mcs: u8) -> Result<f64> {
    miesm_effective_sinr(&report.sinr, mcs_entry(mcs)?.modulation_order)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_sinr_always_decodes() {
        let mut rx = HarqReceiver::new(4);
        let mut rng = RngStream::new(1, "err");
        for _ in 0..1000 {
            let r = rx.decode(0, 28, 1e4, &mut rng).unwrap();
            assert_eq!(r.outcome, DecodeOutcome::Decoded);
        }
    }

    #[test]
    fn retransmission_lowers_bler() {
        for mcs in [0u8, 9, 16, 28] {
            let thr = BlerTable::builtin().curve(mcs).unwrap().thresh_db;
            let s = 10f64.powf((thr - 0.5) / 10.0);
            let first = combined_bler(mcs, s, &SoftBuffer::default()).unwrap();
            let one = SoftBuffer {
                accumulated_mi: first.2,
                transmissions: 1,
            };
            let second = combined_bler(mcs, s, &one).unwrap();
            assert!(second.1 > first.1, "mcs {mcs}");
            assert!(second.0 < first.0, "mcs {mcs}");
        }
    }

    #[test]
    fn bad_process_rejected() {
        let mut rx = HarqReceiver::new(2);
        let mut rng = RngStream::new(1, "err");
        assert!(rx.decode(2, 0, 1.0, &mut rng).is_err());
    }
}
