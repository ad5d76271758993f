use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HarqStatus {
    Idle,
    AwaitingFeedback,
    PendingRetx,
}

/// What a process must resend: same symbol count, same MCS.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTb<P> {
    pub num_symbols: u32,
    pub mcs: u8,
    pub tb_bits: u64,
    pub payload: P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HarqProcess<P> {
    pub id: u8,
    pub status: HarqStatus,
    pub stored: Option<StoredTb<P>>,
    pub tx_count: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeedbackResult<P> {
    /// Delivered; the payload is returned to the caller.
    Acked(P),
    /// Scheduled for retransmission.
    Retx,
    /// Retransmissions exhausted; the payload is handed back for ARQ.
    Dropped(P),
    /// Feedback for a process that was not waiting for any.
    Ignored,
}

/// Transmit-side stop-and-wait HARQ processes for one (user, direction).
#[derive(Clone, Debug, PartialEq)]
pub struct HarqEntity<P> {
    processes: Vec<HarqProcess<P>>,
    max_retx: u32,
    ignored_feedback: u64,
}

impl<P> HarqEntity<P> {
    pub fn new(num_processes: usize, max_retx: u32) -> Self {
        HarqEntity {
            processes: (0..num_processes)
                .map(|i| HarqProcess {
                    id: i as u8,
                    status: HarqStatus::Idle,
                    stored: None,
                    tx_count: 0,
                })
                .collect(),
            max_retx,
            ignored_feedback: 0,
        }
    }

    pub fn max_retx(&self) -> u32 {
        self.max_retx
    }

    pub fn ignored_feedback(&self) -> u64 {
        self.ignored_feedback
    }

    pub fn process(&self, id: u8) -> Result<&HarqProcess<P>> {
        self.processes
            .get(id as usize)
            .ok_or_else(|| Error::violation(format!("HARQ process {id} out of range")))
    }

    fn process_mut(&mut self, id: u8) -> Result<&mut HarqProcess<P>> {
        self.processes
            .get_mut(id as usize)
            .ok_or_else(|| Error::violation(format!("HARQ process {id} out of range")))
    }

    /// Lowest-numbered idle process.
    pub fn free_process(&self) -> Option<u8> {
        self.processes
            .iter()
            .find(|p| p.status == HarqStatus::Idle)
            .map(|p| p.id)
    }

    pub fn pending_retx(&self) -> impl Iterator<Item = &HarqProcess<P>> {
        self.processes
            .iter()
            .filter(|p| p.status == HarqStatus::PendingRetx)
    }

    /// Starts a new TB on an idle process.
    pub fn start(&mut self, id: u8, tb: StoredTb<P>) -> Result<()> {
        let p = self.process_mut(id)?;
        if p.status != HarqStatus::Idle {
            return Err(Error::violation(format!("HARQ process {id} is busy")));
        }
        p.status = HarqStatus::AwaitingFeedback;
        p.stored = Some(tb);
        p.tx_count = 1;
        Ok(())
    }

    /// Records that a pending retransmission went out.
    pub fn retransmitted(&mut self, id: u8) -> Result<&StoredTb<P>> {
        let p = self.process_mut(id)?;
        if p.status != HarqStatus::PendingRetx {
            return Err(Error::violation(format!(
                "HARQ process {id} has no pending retransmission"
            )));
        }
        p.status = HarqStatus::AwaitingFeedback;
        p.tx_count += 1;
        Ok(p.stored.as_ref().expect("pending retx keeps its TB"))
    }

    pub fn feedback(&mut self, id: u8, ack: bool) -> Result<FeedbackResult<P>> {
        let max_retx = self.max_retx;
        let p = self.process_mut(id)?;
        if p.status != HarqStatus::AwaitingFeedback {
            self.ignored_feedback += 1;
            return Ok(FeedbackResult::Ignored);
        }
        if !ack && p.tx_count <= max_retx {
            p.status = HarqStatus::PendingRetx;
            return Ok(FeedbackResult::Retx);
        }
        let tb = p.stored.take().expect("active process keeps its TB");
        p.status = HarqStatus::Idle;
        p.tx_count = 0;
        Ok(if ack {
            FeedbackResult::Acked(tb.payload)
        } else {
            FeedbackResult::Dropped(tb.payload)
        })
    }
}
