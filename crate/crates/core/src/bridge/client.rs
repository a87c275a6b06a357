// SPDX-License-Identifier: Apache-2.0

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::{read_frame, write_frame, Frame, FrameError, Reply};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("response id {got} does not match request id {sent}")]
    IdMismatch { sent: String, got: String },
    #[error("connection closed by server")]
    Closed,
    #[error("malformed reply: {0}")]
    Malformed(String),
}

/// Synchronous bridge client with one request in flight.
pub struct BridgeClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    next_id: u64,
}

impl BridgeClient {
    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self, BridgeError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(DEFAULT_TIMEOUT))?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream), next_id: 1 })
    }

    pub fn set_timeout(&mut self, t: Option<Duration>) -> Result<(), BridgeError> {
        self.reader.get_ref().set_read_timeout(t)?;
        Ok(())
    }

    /// Sends one command body and returns the raw reply body.
    pub fn request_raw(&mut self, body: &str) -> Result<Vec<u8>, BridgeError> {
        let id = self.next_id.to_string();
        self.next_id += 1;
        write_frame(&mut self.writer, &Frame::new(id.clone(), body))?;
        let frame = read_frame(&mut self.reader)?.ok_or(BridgeError::Closed)?;
        if frame.id != id {
            return Err(BridgeError::IdMismatch { sent: id, got: frame.id });
        }
        Ok(frame.body)
    }

    pub fn request(&mut self, body: &str) -> Result<Reply, BridgeError> {
        let raw = self.request_raw(body)?;
        Reply::decode(&raw).map_err(|e| BridgeError::Malformed(e.0))
    }

    /// Text of an `ok` reply; error replies become [`BridgeError::Malformed`].
    pub fn ok_text(&mut self, body: &str) -> Result<String, BridgeError> {
        match self.request(body)? {
            Reply::Text(t) => Ok(t),
            Reply::Error { code, message } => Err(BridgeError::Malformed(format!("{body}: error {code} {message}"))),
            Reply::Image { .. } => Err(BridgeError::Malformed(format!("{body}: unexpected image"))),
        }
    }
}
