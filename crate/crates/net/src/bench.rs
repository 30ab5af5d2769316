//! Echo round-trip benchmark against a running prediction server.

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::client::{connect, send_and_receive, ClientError, StreamConfig};
use crate::frame::Frame;

/// Echo payload that makes the whole frame 64 bytes, a realistic size
/// for one pre-reduced EEG window message.
pub const DEFAULT_ECHO_PAYLOAD: usize = 52;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("repetition count must be at least 1")]
    ZeroRepetitions,
    #[error("echo reply did not match the probe payload")]
    EchoMismatch,
    #[error(transparent)]
    Client(#[from] ClientError),
}

#[derive(Debug, Clone)]
pub struct RttConfig {
    pub server: String,
    pub payload_len: usize,
    pub repetitions: usize,
    pub timeout: Duration,
}

impl RttConfig {
    pub fn new(server: impl Into<String>, repetitions: usize) -> Self {
        RttConfig {
            server: server.into(),
            payload_len: DEFAULT_ECHO_PAYLOAD,
            repetitions,
            timeout: Duration::from_secs(10),
        }
    }
}

/// Round-trip summary in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RttStats {
    pub samples_ms: Vec<f64>,
    pub min_ms: f64,
    pub mean_ms: f64,
    pub max_ms: f64,
    pub stddev_ms: f64,
}

impl RttStats {
    fn from_samples(samples_ms: Vec<f64>) -> RttStats {
        let n = samples_ms.len() as f64;
        let mean = samples_ms.iter().sum::<f64>() / n;
        let var = samples_ms.iter().map(|&s| (s - mean) * (s - mean)).sum::<f64>() / n;
        RttStats {
            min_ms: samples_ms.iter().copied().fold(f64::INFINITY, f64::min),
            max_ms: samples_ms.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_ms: mean,
            stddev_ms: var.sqrt(),
            samples_ms,
        }
    }

    /// Human-readable block, with typical WAN figures quoted so a local
    /// loopback number can be read in context.
    pub fn report_text(&self) -> String {
        format!(
            "echo round-trips: {}\n\
             min    {:.3} ms\n\
             mean   {:.3} ms\n\
             max    {:.3} ms\n\
             stddev {:.3} ms\n\
             reference WAN echo times: ~15 ms same-coast, ~97 ms cross-country\n",
            self.samples_ms.len(),
            self.min_ms,
            self.mean_ms,
            self.max_ms,
            self.stddev_ms
        )
    }
}

/// Measures `repetitions` echo round-trips of a fixed-pattern payload.
pub fn rtt_bench(cfg: &RttConfig) -> Result<RttStats, BenchError> {
    if cfg.repetitions == 0 {
        return Err(BenchError::ZeroRepetitions);
    }
    let probe: Vec<u8> = (0..cfg.payload_len).map(|i| (i % 251) as u8).collect();
    let stream_cfg = StreamConfig { server: cfg.server.clone(), timeout: cfg.timeout };
    let mut stream = connect(&stream_cfg)?;

    let mut samples_ms = Vec::with_capacity(cfg.repetitions);
    for _ in 0..cfg.repetitions {
        let start = Instant::now();
        let reply = send_and_receive(&mut stream, &Frame::Echo(probe.clone()), &cfg.server)?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        match reply {
            Frame::Echo(back) if back == probe => samples_ms.push(elapsed),
            Frame::Echo(_) => return Err(BenchError::EchoMismatch),
            other => {
                return Err(BenchError::Client(ClientError::Protocol(format!(
                    "expected an echo, got frame kind {}",
                    other.kind()
                ))))
            }
        }
    }
    Ok(RttStats::from_samples(samples_ms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_order_and_moments() {
        let s = RttStats::from_samples(vec![2.0, 4.0, 6.0]);
        assert_eq!(s.min_ms, 2.0);
        assert_eq!(s.mean_ms, 4.0);
        assert_eq!(s.max_ms, 6.0);
        let want = (8.0f64 / 3.0).sqrt();
        assert!((s.stddev_ms - want).abs() < 1e-12);
        assert!(s.min_ms <= s.mean_ms && s.mean_ms <= s.max_ms);
    }

    #[test]
    fn report_text_carries_all_figures() {
        let text = RttStats::from_samples(vec![1.5]).report_text();
        assert!(text.contains("round-trips: 1"));
        assert!(text.contains("mean   1.500 ms"));
        assert!(text.contains("reference WAN"));
    }
}
