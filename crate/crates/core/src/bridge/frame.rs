// SPDX-License-Identifier: Apache-2.0

use std::io::{self, Read, Write};

/// Largest payload a frame may carry.
pub const MAX_FRAME_BYTES: usize = 16 * 1024 * 1024;
/// Longest request id, in digits.
pub const MAX_ID_DIGITS: usize = 20;

/// `u32` little-endian payload length, then `<id>:<body>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    /// Decimal digits, echoed back verbatim.
    pub id: String,
    pub body: Vec<u8>,
}

#[derive(Debug, thiserror::Error)]
pub enum FrameError {
    #[error("frame payload of {0} bytes exceeds {MAX_FRAME_BYTES}")]
    TooLarge(usize),
    #[error("malformed frame: {0}")]
    Malformed(&'static str),
    #[error("stream ended inside a frame")]
    Truncated,
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn is_frame_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= MAX_ID_DIGITS && id.bytes().all(|b| b.is_ascii_digit())
}

impl Frame {
    pub fn new(id: impl Into<String>, body: impl Into<Vec<u8>>) -> Self {
        Self { id: id.into(), body: body.into() }
    }

    pub fn payload_len(&self) -> usize {
        self.id.len() + 1 + self.body.len()
    }

    pub fn encode(&self) -> Result<Vec<u8>, FrameError> {
        if !is_frame_id(&self.id) {
            return Err(FrameError::Malformed("id must be 1-20 decimal digits"));
        }
        let n = self.payload_len();
        if n > MAX_FRAME_BYTES {
            return Err(FrameError::TooLarge(n));
        }
        let mut out = Vec::with_capacity(4 + n);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(self.id.as_bytes());
        out.push(b':');
        out.extend_from_slice(&self.body);
        Ok(out)
    }

    fn from_payload(payload: &[u8]) -> Result<Self, FrameError> {
        let colon = payload
            .iter()
            .take(MAX_ID_DIGITS + 1)
            .position(|&b| b == b':')
            .ok_or(FrameError::Malformed("missing id separator"))?;
        let id = std::str::from_utf8(&payload[..colon]).map_err(|_| FrameError::Malformed("id is not ASCII"))?;
        if !is_frame_id(id) {
            return Err(FrameError::Malformed("id must be 1-20 decimal digits"));
        }
        Ok(Self { id: id.to_string(), body: payload[colon + 1..].to_vec() })
    }
}

fn check_len(n: usize) -> Result<usize, FrameError> {
    if n > MAX_FRAME_BYTES {
        Err(FrameError::TooLarge(n))
    } else {
        Ok(n)
    }
}

/// Incremental decoder for a byte stream of concatenated frames.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet returned as frames.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn next_frame(&mut self) -> Result<Option<Frame>, FrameError> {
        if self.buf.len() < 4 {
            return Ok(None);
        }
        let n = check_len(u32::from_le_bytes(self.buf[..4].try_into().unwrap()) as usize)?;
        if self.buf.len() < 4 + n {
            return Ok(None);
        }
        let frame = Frame::from_payload(&self.buf[4..4 + n]);
        self.buf.drain(..4 + n);
        frame.map(Some)
    }
}

/// Reads one frame. `Ok(None)` on a clean end of stream between frames.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Frame>, FrameError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(FrameError::Truncated),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let n = check_len(u32::from_le_bytes(len) as usize)?;
    let mut payload = vec![0u8; n];
    r.read_exact(&mut payload).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FrameError::Truncated,
        _ => FrameError::Io(e),
    })?;
    Frame::from_payload(&payload).map(Some)
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<(), FrameError> {
    w.write_all(&frame.encode()?)?;
    w.flush()?;
    Ok(())
}
