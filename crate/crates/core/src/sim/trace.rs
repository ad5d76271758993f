use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::engine::SimTime;
use crate::error::{Error, Result};

pub const PHY_TB_HEADER: &str = "time,userId,direction,mcs,tbBits,effSinrDb,outcome,retxCount";
pub const ALLOC_HEADER: &str = "frame,subframe,startSym,numSym,dir,kind,userId,mcs,retx";
pub const RLC_HEADER: &str = "time,flow,enqueued,dequeued,occupancyBytes,holDelayMs,drops";
pub const RLC_RX_HEADER: &str = "time,userId,direction,bytes";
pub const TCP_HEADER: &str = "time,cwndBytes,ssthreshBytes,rttMs,goodputMbps,state";
pub const SINR_HEADER: &str = "time,userId,cell,state,dlSinrDb,ulSinrDb,pathlossDb,realizationId";
pub const CHANNEL_HEADER: &str = "time,userId,cell,reason,state,pathlossDb,realizationId";

/// Exact decimal seconds for a nanosecond clock.
pub fn fmt_time(t: SimTime) -> String {
    let ns = t.as_nanos();
    format!("{}.{:09}", ns / 1_000_000_000, ns % 1_000_000_000)
}

/// Rounds to the precision the traces print with, so in-memory
/// aggregates match what can be recomputed from the files.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Lazily opened CSV files under one output directory. With no
/// directory every write is a no-op.
#[derive(Debug, Default)]
pub struct TraceSink {
    dir: Option<PathBuf>,
    files: BTreeMap<String, BufWriter<File>>,
}

impl TraceSink {
    pub fn disabled() -> Self {
        TraceSink::default()
    }

    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(TraceSink {
            dir: Some(dir.to_path_buf()),
            files: BTreeMap::new(),
        })
    }

    pub fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    pub fn row(&mut self, file: &str, header: &str, line: &str) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        if !self.files.contains_key(file) {
            let path = dir.join(file);
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{header}").map_err(|e| Error::io(&path, e))?;
            self.files.insert(file.to_string(), w);
        }
        let w = self.files.get_mut(file).expect("inserted above");
        writeln!(w, "{line}").map_err(|e| Error::io(dir.join(file), e))
    }

    /// Creates the file with only its header if nothing was written yet.
    pub fn touch(&mut self, file: &str, header: &str) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        if !self.files.contains_key(file) {
            let path = dir.join(file);
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{header}").map_err(|e| Error::io(&path, e))?;
            self.files.insert(file.to_string(), w);
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        for (name, w) in &mut self.files {
            w.flush().map_err(|e| Error::io(dir.join(name), e))?;
        }
        Ok(())
    }
}
