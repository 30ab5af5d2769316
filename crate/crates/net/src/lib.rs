//! Networked prediction service for the `preictal` workspace: a framed
//! TCP protocol, a serving loop around the persisted models, a streaming
//! client, and an echo round-trip benchmark.
//!
//! The wire format is bit-exact and little-endian throughout; a served
//! prediction is byte-for-byte the same answer the evaluation harness
//! computes locally from the same model files.

pub mod bench;
pub mod client;
pub mod frame;
pub mod server;

pub use bench::{rtt_bench, BenchError, RttConfig, RttStats, DEFAULT_ECHO_PAYLOAD};
pub use client::{stream_segments, ClientError, StreamConfig, StreamResult};
pub use frame::{
    decode_frame, encode_frame, read_frame, write_frame, Frame, FrameError, WireError,
    HEADER_LEN, MAX_PAYLOAD, PROTOCOL_VERSION,
};
pub use server::{serve, resolve_addr, ServeConfig, ServeError, Server};
