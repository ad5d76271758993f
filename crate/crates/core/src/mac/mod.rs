//! Adaptive modulation and coding, TDMA schedulers and HARQ processes.

pub mod amc;
mod harq;
mod scheduler;

pub use amc::{Amc, McsEntry, MCS_TABLE};
pub use harq::{FeedbackResult, HarqEntity, HarqProcess, HarqStatus, StoredTb};
pub use scheduler::{
    greedy_shares, make_scheduler, round_robin_shares, EdfScheduler, FlowState, MacScheduler,
    RetxRequest, RoundRobinScheduler, ScheduleInput, SchedulerKind,
};
