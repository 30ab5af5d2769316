//! Client side of the prediction protocol: streaming segment files to a
//! server and collecting labeled predictions with per-segment timing.

use std::fs;
use std::io;
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use preictal_core::signal::{segment_from_bytes, Label, SignalError};
use thiserror::Error;

use crate::frame::{read_frame, write_frame, Frame, WireError};
use crate::server::resolve_addr;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("connection to {addr} refused")]
    Refused { addr: String },
    #[error("timed out waiting for {addr}")]
    Timeout { addr: String },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("server reported: {0}")]
    Server(String),
    #[error("cannot read segment file {path}: {source}")]
    SegmentFile { path: String, source: io::Error },
    #[error("segment file {path} is invalid: {source}")]
    SegmentFormat { path: String, source: SignalError },
    #[error(transparent)]
    Io(io::Error),
}

#[derive(Debug, Clone)]
pub struct StreamConfig {
    /// `host:port` of a running prediction server.
    pub server: String,
    /// Applied to connect, reads, and writes independently.
    pub timeout: Duration,
}

/// Outcome for one streamed segment.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamResult {
    pub segment_id: String,
    pub label: Label,
    /// Mean preictal probability the server computed across windows.
    pub probability: f64,
    /// Wall-clock send-to-reply time observed by the client.
    pub rtt_ms: f64,
}

/// Classifies an I/O failure against the address being talked to.
fn io_error(e: io::Error, addr: &str) -> ClientError {
    match e.kind() {
        io::ErrorKind::ConnectionRefused => ClientError::Refused { addr: addr.to_string() },
        io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => {
            ClientError::Timeout { addr: addr.to_string() }
        }
        _ => ClientError::Io(e),
    }
}

/// Connects with the configured timeout on every socket operation.
pub(crate) fn connect(cfg: &StreamConfig) -> Result<TcpStream, ClientError> {
    let addr = resolve_addr(&cfg.server).map_err(|e| io_error(e, &cfg.server))?;
    let stream =
        TcpStream::connect_timeout(&addr, cfg.timeout).map_err(|e| io_error(e, &cfg.server))?;
    stream.set_read_timeout(Some(cfg.timeout)).map_err(ClientError::Io)?;
    stream.set_write_timeout(Some(cfg.timeout)).map_err(ClientError::Io)?;
    Ok(stream)
}

pub(crate) fn send_and_receive(
    stream: &mut TcpStream,
    frame: &Frame,
    addr: &str,
) -> Result<Frame, ClientError> {
    write_frame(stream, frame).map_err(|e| io_error(e, addr))?;
    match read_frame(stream) {
        Ok(reply) => Ok(reply),
        Err(WireError::Io(e)) => Err(io_error(e, addr)),
        Err(WireError::Frame(e)) => Err(ClientError::Protocol(e.to_string())),
    }
}

/// Streams each file as a SegmentData frame over one connection and
/// returns the predictions in submission order.
pub fn stream_segments(
    cfg: &StreamConfig,
    paths: &[PathBuf],
) -> Result<Vec<StreamResult>, ClientError> {
    let mut results = Vec::with_capacity(paths.len());
    if paths.is_empty() {
        return Ok(results);
    }
    let mut stream = connect(cfg)?;

    for path in paths {
        let shown = path.display().to_string();
        let bytes = fs::read(path)
            .map_err(|source| ClientError::SegmentFile { path: shown.clone(), source })?;
        let segment = segment_from_bytes(&bytes)
            .map_err(|source| ClientError::SegmentFormat { path: shown.clone(), source })?;

        let start = Instant::now();
        let reply = send_and_receive(&mut stream, &Frame::SegmentData(bytes), &cfg.server)?;
        let rtt_ms = start.elapsed().as_secs_f64() * 1e3;

        match reply {
            Frame::Prediction { label, probability, .. } => {
                let label = Label::from_code(label).ok_or_else(|| {
                    ClientError::Protocol(format!("prediction carries unknown label code {label}"))
                })?;
                results.push(StreamResult {
                    segment_id: segment.segment_id.clone(),
                    label,
                    probability,
                    rtt_ms,
                });
            }
            Frame::Error(message) => {
                return Err(ClientError::Server(String::from_utf8_lossy(&message).into_owned()))
            }
            other => {
                return Err(ClientError::Protocol(format!(
                    "expected a prediction, got frame kind {}",
                    other.kind()
                )))
            }
        }
    }
    Ok(results)
}
