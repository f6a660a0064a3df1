//! Frame codec.
//!
//! Every message is one frame (all integers little-endian):
//!
//! ```text
//! magic      u32   0x4E564C53
//! frame_len  u32   header + payload length
//! request_id u64   matches responses to callers
//! kind       u16   opcode; responses set the top bit
//! epoch      u64   range epoch for fencing (0 when not applicable)
//! payload    bytes
//! ```

use bytes::{BufMut, Bytes, BytesMut};
use std::io::{Read, Write};
use thiserror::Error;

pub const FRAME_MAGIC: u32 = 0x4E564C53;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 2 + 8;
pub const MAX_FRAME_LEN: u32 = 8 * 1024 * 1024;

/// Set on `kind` to mark a response frame.
pub const RESPONSE_BIT: u16 = 0x8000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad magic {0:#010x}")]
    BadMagic(u32),
    #[error("frame length {0} out of bounds")]
    BadLength(u32),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for FrameError {
    fn from(e: std::io::Error) -> Self {
        FrameError::Io(e.to_string())
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frame {
    pub request_id: u64,
    pub kind: u16,
    pub epoch: u64,
    pub payload: Bytes,
}

impl Frame {
    pub fn new(kind: u16, epoch: u64, payload: Bytes) -> Self {
        Frame { request_id: 0, kind, epoch, payload }
    }

    pub fn is_response(&self) -> bool {
        self.kind & RESPONSE_BIT != 0
    }

    pub fn response_kind(&self) -> u16 {
        self.kind | RESPONSE_BIT
    }

    pub fn len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn oversize(&self) -> bool {
        self.len() > MAX_FRAME_LEN as usize
    }

    pub fn encode(&self) -> Bytes {
        let mut buf = BytesMut::with_capacity(self.len());
        buf.put_u32_le(FRAME_MAGIC);
        buf.put_u32_le(self.len() as u32);
        buf.put_u64_le(self.request_id);
        buf.put_u16_le(self.kind);
        buf.put_u64_le(self.epoch);
        buf.put_slice(&self.payload);
        buf.freeze()
    }

    pub fn decode(bytes: &[u8]) -> Result<Frame, FrameError> {
        if bytes.len() < HEADER_LEN {
            return Err(FrameError::BadLength(bytes.len() as u32));
        }
        let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        if magic != FRAME_MAGIC {
            return Err(FrameError::BadMagic(magic));
        }
        let frame_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if frame_len as usize != bytes.len() || frame_len > MAX_FRAME_LEN {
            return Err(FrameError::BadLength(frame_len));
        }
        Ok(Frame {
            request_id: u64::from_le_bytes(bytes[8..16].try_into().unwrap()),
            kind: u16::from_le_bytes(bytes[16..18].try_into().unwrap()),
            epoch: u64::from_le_bytes(bytes[18..26].try_into().unwrap()),
            payload: Bytes::copy_from_slice(&bytes[HEADER_LEN..]),
        })
    }

    /// Read one frame off a stream. Returns Ok(None) on clean EOF at a
    /// frame boundary.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Option<Frame>, FrameError> {
        let mut header = [0u8; HEADER_LEN];
        match r.read_exact(&mut header) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let magic = u32::from_le_bytes(header[0..4].try_into().unwrap());
        if magic != FRAME_MAGIC {
            return Err(FrameError::BadMagic(magic));
        }
        let frame_len = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if frame_len > MAX_FRAME_LEN || (frame_len as usize) < HEADER_LEN {
            return Err(FrameError::BadLength(frame_len));
        }
        let mut payload = vec![0u8; frame_len as usize - HEADER_LEN];
        r.read_exact(&mut payload)?;
        Ok(Some(Frame {
            request_id: u64::from_le_bytes(header[8..16].try_into().unwrap()),
            kind: u16::from_le_bytes(header[16..18].try_into().unwrap()),
            epoch: u64::from_le_bytes(header[18..26].try_into().unwrap()),
            payload: Bytes::from(payload),
        }))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), FrameError> {
        w.write_all(&self.encode())?;
        Ok(())
    }
}
