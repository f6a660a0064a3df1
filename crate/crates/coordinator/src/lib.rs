//! Coordinator: maintains the range-to-LTC assignment, plans and executes
//! elasticity (add/remove LTC), detects dead LTCs, and routes keys.
//!
//! Deliberately a single process at this scale; its state is persisted to
//! a storage component object so a restart can resume the last view.

pub mod client;
pub mod messages;
pub mod plan;
pub mod server;
pub mod view;

pub use client::{CoordClient, LtcAdminClient};
pub use messages::*;
pub use plan::{plan_add, plan_remove, Move};
pub use server::{Coordinator, CoordinatorConfig};
pub use view::{ClusterView, LtcInfo, StocInfo};

use thiserror::Error;

/// Range id reserved for the coordinator's own persisted state.
pub const COORD_STATE_RANGE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoordError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("LTC already a member")]
    AlreadyMember,
    #[error("unknown LTC")]
    UnknownLtc,
    #[error("cannot remove the last LTC")]
    LastLtc,
    #[error("migration failed: {0}")]
    MigrationFailed(String),
}

impl From<CoordError> for dlsm_transport::WireError {
    fn from(e: CoordError) -> Self {
        use dlsm_transport::WireError as W;
        match e {
            CoordError::InvalidConfig(m) => W::InvalidConfig(m),
            CoordError::AlreadyMember => W::AlreadyMember,
            CoordError::UnknownLtc => W::UnknownLtc,
            CoordError::LastLtc => W::LastLtc,
            CoordError::MigrationFailed(m) => W::Internal(m),
        }
    }
}
