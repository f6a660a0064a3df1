//! Shared framed request/response protocol with two interchangeable
//! backings: real stream sockets and a deterministic in-process simulator
//! with injectable latency and partitions.
//!
//! One duplex protocol carries client traffic, LTC-to-StoC traffic,
//! compaction dispatch, and coordinator control. The frame layout is
//! documented bit-exactly in docs/protocol.md.

pub mod frame;
pub mod opcode;
pub mod rpc;
pub mod sim;
pub mod sync;
pub mod tcp;
pub mod wire;

pub use frame::{Frame, FrameError, FRAME_MAGIC, HEADER_LEN, MAX_FRAME_LEN};
pub use rpc::{call, err_response, ok_response, Handler, RpcError};
pub use sim::{SimNet, SimNetConfig};
pub use tcp::{TcpServer, TcpTransport};
pub use wire::WireError;

use std::sync::Arc;
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    ConnectionFailed(String),
    #[error("frame exceeds maximum size")]
    Oversize,
    #[error("protocol violation: {0}")]
    Protocol(String),
}

/// A request/response channel to named endpoints. Implementations multiplex
/// many in-flight requests and match responses by request id.
pub trait Transport: Send + Sync {
    fn call(
        &self,
        endpoint: &str,
        frame: Frame,
        timeout: Duration,
    ) -> Result<Frame, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Arc<T> {
    fn call(
        &self,
        endpoint: &str,
        frame: Frame,
        timeout: Duration,
    ) -> Result<Frame, TransportError> {
        (**self).call(endpoint, frame, timeout)
    }
}
