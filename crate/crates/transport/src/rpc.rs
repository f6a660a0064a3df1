//! Typed request/response helpers over raw frames.
//!
//! Response payloads carry one status byte (0 ok, 1 error) followed by a
//! bincode body: the typed response on success, a [`WireError`] otherwise.

use crate::frame::Frame;
use crate::wire::WireError;
use crate::{Transport, TransportError};
use bytes::{BufMut, Bytes, BytesMut};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::time::Duration;
use thiserror::Error;

/// Server-side request handler. Implementations must be safe to call from
/// many threads at once; request handling must not block unrelated
/// requests.
pub trait Handler: Send + Sync {
    fn handle(&self, frame: Frame) -> Frame;
}

impl<F> Handler for F
where
    F: Fn(Frame) -> Frame + Send + Sync,
{
    fn handle(&self, frame: Frame) -> Frame {
        self(frame)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RpcError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("remote error: {0}")]
    Remote(WireError),
    #[error("malformed response: {0}")]
    Decode(String),
}

impl RpcError {
    /// The remote error, if this failure came from the peer rather than the
    /// transport.
    pub fn remote(&self) -> Option<&WireError> {
        match self {
            RpcError::Remote(e) => Some(e),
            _ => None,
        }
    }
}

pub fn encode_request<T: Serialize>(kind: u16, epoch: u64, body: &T) -> Frame {
    let payload = bincode::serialize(body).expect("request bodies always serialize");
    Frame::new(kind, epoch, Bytes::from(payload))
}

pub fn decode_request<T: DeserializeOwned>(frame: &Frame) -> Result<T, WireError> {
    bincode::deserialize(&frame.payload)
        .map_err(|e| WireError::BadRequest(format!("payload decode: {e}")))
}

pub fn ok_response<T: Serialize>(req: &Frame, body: &T) -> Frame {
    let encoded = bincode::serialize(body).expect("response bodies always serialize");
    let mut payload = BytesMut::with_capacity(1 + encoded.len());
    payload.put_u8(0);
    payload.put_slice(&encoded);
    Frame {
        request_id: req.request_id,
        kind: req.response_kind(),
        epoch: req.epoch,
        payload: payload.freeze(),
    }
}

pub fn err_response(req: &Frame, err: &WireError) -> Frame {
    let encoded = bincode::serialize(err).expect("errors always serialize");
    let mut payload = BytesMut::with_capacity(1 + encoded.len());
    payload.put_u8(1);
    payload.put_slice(&encoded);
    Frame {
        request_id: req.request_id,
        kind: req.response_kind(),
        epoch: req.epoch,
        payload: payload.freeze(),
    }
}

pub fn decode_response<T: DeserializeOwned>(frame: &Frame) -> Result<T, RpcError> {
    match frame.payload.first() {
        Some(0) => bincode::deserialize(&frame.payload[1..])
            .map_err(|e| RpcError::Decode(e.to_string())),
        Some(1) => {
            let err: WireError = bincode::deserialize(&frame.payload[1..])
                .map_err(|e| RpcError::Decode(e.to_string()))?;
            Err(RpcError::Remote(err))
        }
        _ => Err(RpcError::Decode("empty response payload".into())),
    }
}

/// One typed round trip.
pub fn call<Req: Serialize, Resp: DeserializeOwned>(
    transport: &dyn Transport,
    endpoint: &str,
    kind: u16,
    epoch: u64,
    body: &Req,
    timeout: Duration,
) -> Result<Resp, RpcError> {
    let frame = encode_request(kind, epoch, body);
    let resp = transport.call(endpoint, frame, timeout)?;
    decode_response(&resp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ok_and_err_envelopes() {
        let req = encode_request(7, 3, &("hi".to_string(), 4u32));
        let ok = ok_response(&req, &42u64);
        assert!(ok.is_response());
        assert_eq!(decode_response::<u64>(&ok).unwrap(), 42);

        let err = err_response(&req, &WireError::NotFound);
        match decode_response::<u64>(&err).unwrap_err() {
            RpcError::Remote(WireError::NotFound) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
