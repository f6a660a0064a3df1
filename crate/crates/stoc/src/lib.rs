//! Storage component (StoC): stores, retrieves, and manages immutable
//! objects and append-only logs, and exposes the load statistics that
//! drive power-of-d placement.
//!
//! The server never interprets object contents. Reads are raw
//! offset/length fetches, which is what lets any component read any
//! object: all stored objects are write-once.

pub mod client;
pub mod log_store;
pub mod messages;
pub mod object_store;
pub mod server;
pub mod stats;

pub use client::{StatsBoard, StocClient};
pub use messages::*;
pub use object_store::{BackingTier, ObjectStore};
pub use server::{StocConfig, StocServer};
pub use stats::{select_power_of_d, StoCStats};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StocError {
    #[error("object or log not found")]
    NotFound,
    #[error("object already exists")]
    AlreadyExists,
    #[error("read out of range: offset {offset} + len {len} > {object_len}")]
    OutOfRange { offset: u64, len: u64, object_len: u64 },
    #[error("out of space: {0}")]
    OutOfSpace(String),
    #[error("append fenced: epoch {got} below fence {fence}")]
    Fenced { got: u64, fence: u64 },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for StocError {
    fn from(e: std::io::Error) -> Self {
        if e.raw_os_error() == Some(28) {
            StocError::OutOfSpace(e.to_string())
        } else {
            StocError::Io(e.to_string())
        }
    }
}

impl From<StocError> for dlsm_transport::WireError {
    fn from(e: StocError) -> Self {
        use dlsm_transport::WireError as W;
        match e {
            StocError::NotFound => W::NotFound,
            StocError::AlreadyExists => W::AlreadyExists,
            StocError::OutOfRange { offset, len, object_len } => {
                W::OutOfRange { offset, len, object_len }
            }
            StocError::OutOfSpace(_) => W::OutOfSpace,
            StocError::Fenced { got, fence } => W::StaleEpoch { got, current: fence },
            StocError::Io(m) => W::Internal(m),
        }
    }
}
