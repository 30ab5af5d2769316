//! Length-prefixed binary framing for the prediction service.
//!
//! Every frame starts with a 12-byte little-endian header: magic `EEGP`,
//! format version `u16`, kind `u8`, one reserved byte (zero on the wire),
//! and the payload length as `u32`. The payload layout depends on the
//! kind; encode followed by decode reproduces any valid frame exactly.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

pub const PROTOCOL_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 12;
/// Upper bound on a declared payload, so a corrupt header cannot make a
/// reader allocate gigabytes.
pub const MAX_PAYLOAD: u32 = 64 * 1024 * 1024;

const MAGIC: &[u8; 4] = b"EEGP";
const PREDICTION_PAYLOAD: usize = 17;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("bad frame magic {got:?}")]
    BadMagic { got: [u8; 4] },
    #[error("unsupported protocol version {got} (this build speaks {PROTOCOL_VERSION})")]
    VersionMismatch { got: u16 },
    #[error("unknown frame kind {kind}")]
    UnknownKind { kind: u8 },
    #[error("frame length mismatch: expected {expected} bytes, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("declared payload of {declared} bytes exceeds the {MAX_PAYLOAD}-byte cap")]
    Oversize { declared: u32 },
}

/// Either side of a reading or writing failure on a framed stream.
#[derive(Debug, Error)]
pub enum WireError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// One protocol message. `SegmentData`, `Echo`, and `Error` carry opaque
/// bytes; a `SegmentData` payload is a segment file image, and an `Error`
/// payload is a human-readable message.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Hello,
    SegmentData(Vec<u8>),
    Prediction { label: u8, probability: f64, elapsed_us: u64 },
    Echo(Vec<u8>),
    Error(Vec<u8>),
}

impl Frame {
    pub fn kind(&self) -> u8 {
        match self {
            Frame::Hello => 1,
            Frame::SegmentData(_) => 2,
            Frame::Prediction { .. } => 3,
            Frame::Echo(_) => 4,
            Frame::Error(_) => 5,
        }
    }

    fn payload(&self) -> Vec<u8> {
        match self {
            Frame::Hello => Vec::new(),
            Frame::SegmentData(b) | Frame::Echo(b) | Frame::Error(b) => b.clone(),
            Frame::Prediction { label, probability, elapsed_us } => {
                let mut p = Vec::with_capacity(PREDICTION_PAYLOAD);
                p.push(*label);
                p.write_f64::<LittleEndian>(*probability).expect("vec write");
                p.write_u64::<LittleEndian>(*elapsed_us).expect("vec write");
                p
            }
        }
    }

    fn from_parts(kind: u8, payload: Vec<u8>) -> Result<Frame, FrameError> {
        match kind {
            1 => {
                if !payload.is_empty() {
                    return Err(FrameError::LengthMismatch { expected: 0, got: payload.len() });
                }
                Ok(Frame::Hello)
            }
            2 => Ok(Frame::SegmentData(payload)),
            3 => {
                if payload.len() != PREDICTION_PAYLOAD {
                    return Err(FrameError::LengthMismatch {
                        expected: PREDICTION_PAYLOAD,
                        got: payload.len(),
                    });
                }
                let mut r = &payload[1..];
                Ok(Frame::Prediction {
                    label: payload[0],
                    probability: r.read_f64::<LittleEndian>().expect("sized slice"),
                    elapsed_us: r.read_u64::<LittleEndian>().expect("sized slice"),
                })
            }
            4 => Ok(Frame::Echo(payload)),
            5 => Ok(Frame::Error(payload)),
            kind => Err(FrameError::UnknownKind { kind }),
        }
    }
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let payload = frame.payload();
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(MAGIC);
    out.write_u16::<LittleEndian>(PROTOCOL_VERSION).expect("vec write");
    out.push(frame.kind());
    out.push(0);
    out.write_u32::<LittleEndian>(payload.len() as u32).expect("vec write");
    out.extend_from_slice(&payload);
    out
}

/// Parses one frame from a buffer that must contain exactly that frame.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, FrameError> {
    if bytes.len() < HEADER_LEN {
        return Err(FrameError::LengthMismatch { expected: HEADER_LEN, got: bytes.len() });
    }
    let (header, payload) = bytes.split_at(HEADER_LEN);
    let kind = parse_header(header.try_into().expect("sized split"))?;
    let declared = u32::from_le_bytes(header[8..12].try_into().expect("sized slice")) as usize;
    if payload.len() != declared {
        return Err(FrameError::LengthMismatch { expected: declared, got: payload.len() });
    }
    Frame::from_parts(kind, payload.to_vec())
}

/// Validates magic, version, kind, and the payload cap; returns the kind.
fn parse_header(header: &[u8; HEADER_LEN]) -> Result<u8, FrameError> {
    if &header[0..4] != MAGIC {
        return Err(FrameError::BadMagic { got: header[0..4].try_into().expect("sized slice") });
    }
    let version = u16::from_le_bytes(header[4..6].try_into().expect("sized slice"));
    if version != PROTOCOL_VERSION {
        return Err(FrameError::VersionMismatch { got: version });
    }
    let kind = header[6];
    if !(1..=5).contains(&kind) {
        return Err(FrameError::UnknownKind { kind });
    }
    let declared = u32::from_le_bytes(header[8..12].try_into().expect("sized slice"));
    if declared > MAX_PAYLOAD {
        return Err(FrameError::Oversize { declared });
    }
    Ok(kind)
}

pub fn write_frame(w: &mut impl Write, frame: &Frame) -> io::Result<()> {
    w.write_all(&encode_frame(frame))?;
    w.flush()
}

/// Reads exactly one frame off a reliable stream. Header problems are
/// reported before any payload bytes are consumed.
pub fn read_frame(r: &mut impl Read) -> Result<Frame, WireError> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)?;
    let kind = parse_header(&header)?;
    let declared = u32::from_le_bytes(header[8..12].try_into().expect("sized slice")) as usize;
    let mut payload = vec![0u8; declared];
    r.read_exact(&mut payload)?;
    Ok(Frame::from_parts(kind, payload)?)
}
