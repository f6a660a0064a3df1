//! Stateless remote compaction worker.
//!
//! A compaction job is self-contained: input object ids with their StoC
//! addresses, the merge parameters, and a reserved block of output file
//! numbers. Any worker can execute any job with no other state, and
//! because the merge is deterministic a retried job writes byte-identical
//! outputs under the same ids, which makes at-least-once dispatch safe.

pub mod client;
pub mod execute;
pub mod job;
pub mod server;

pub use client::WorkerClient;
pub use execute::{execute_job, ExecuteError, ExecuteOutcome};
pub use job::{CompactionJob, CompactionResult, JobId, JobInput, OutputInfo, OutputPolicy};
pub use server::{CompactorConfig, CompactorServer, WorkerStatus};
