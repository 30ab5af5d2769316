//! Streaming prediction server over plain TCP.
//!
//! Connections are handled one thread each; within a connection frames
//! are answered strictly in arrival order, so a pipelining client gets
//! its replies in submission order. The fitted models are immutable
//! shared state.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Instant;

use preictal_core::deepnet::load_network;
use preictal_core::dimred::load_pipeline;
use preictal_core::eval::predict_segment;
use preictal_core::signal::{segment_from_bytes, WindowSpec};
use preictal_core::store::StoreError;
use preictal_core::{Network, Pipeline};
use thiserror::Error;

use crate::frame::{read_frame, write_frame, Frame, WireError};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot load model from {path}: {source}")]
    ModelLoad { path: String, source: StoreError },
    #[error("model config echo is missing key {key:?}")]
    MissingEchoKey { key: &'static str },
    #[error("model config echo value {value:?} for {key:?} is not a positive integer")]
    BadEchoValue { key: &'static str, value: String },
    #[error("cannot listen on {listen}: {source}")]
    Bind { listen: String, source: io::Error },
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    /// `host:port`; port 0 binds an ephemeral port.
    pub listen: String,
    pub model_path: PathBuf,
    pub dimred_path: PathBuf,
}

/// Everything a connection handler needs, shared read-only.
struct Served {
    pipeline: Pipeline,
    network: Network,
    downsample_factor: usize,
    window: WindowSpec,
}

/// Handle to a running server; dropping it stops the accept loop.
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_loop: Option<JoinHandle<()>>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop_and_join();
    }

    /// Blocks until the accept loop exits, which only happens when
    /// another handle calls for a stop or the process dies.
    pub fn wait(mut self) {
        if let Some(handle) = self.accept_loop.take() {
            let _ = handle.join();
        }
    }

    fn stop_and_join(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // The accept loop only observes the flag when a connection
        // arrives, so poke it with one.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_loop.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        if self.accept_loop.is_some() {
            self.stop_and_join();
        }
    }
}

/// Loads the persisted models and starts accepting connections.
pub fn serve(cfg: &ServeConfig) -> Result<Server, ServeError> {
    let (network, echo) = load_network(&cfg.model_path).map_err(|source| {
        ServeError::ModelLoad { path: cfg.model_path.display().to_string(), source }
    })?;
    let (pipeline, _) = load_pipeline(&cfg.dimred_path).map_err(|source| {
        ServeError::ModelLoad { path: cfg.dimred_path.display().to_string(), source }
    })?;

    let downsample_factor = echo_count(&echo, "downsample_factor")?;
    let window = WindowSpec {
        window_len: echo_count(&echo, "window_len")?,
        hop: echo_count(&echo, "hop")?,
    };
    let served = Arc::new(Served { pipeline, network, downsample_factor, window });

    let listener = TcpListener::bind(&cfg.listen)
        .map_err(|source| ServeError::Bind { listen: cfg.listen.clone(), source })?;
    let addr = listener.local_addr().expect("bound listener has an address");

    let stop = Arc::new(AtomicBool::new(false));
    let stop_seen = Arc::clone(&stop);
    let accept_loop = std::thread::spawn(move || {
        for conn in listener.incoming() {
            if stop_seen.load(Ordering::SeqCst) {
                break;
            }
            let Ok(stream) = conn else { continue };
            let served = Arc::clone(&served);
            std::thread::spawn(move || handle_connection(stream, &served));
        }
    });

    Ok(Server { addr, stop, accept_loop: Some(accept_loop) })
}

/// Extracts a positive integer `key=value` line from a config echo.
fn echo_count(echo: &str, key: &'static str) -> Result<usize, ServeError> {
    let value = echo
        .lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
        .ok_or(ServeError::MissingEchoKey { key })?;
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(ServeError::BadEchoValue { key, value: value.to_string() }),
    }
}

/// Serial request-reply loop for one client. Any malformed frame or
/// failed prediction gets an Error frame back and closes the connection;
/// a clean end-of-stream just closes it.
fn handle_connection(mut stream: TcpStream, served: &Served) {
    loop {
        let reply = match read_frame(&mut stream) {
            Ok(Frame::Hello) => Frame::Hello,
            Ok(Frame::Echo(payload)) => Frame::Echo(payload),
            Ok(Frame::SegmentData(bytes)) => match predict_bytes(served, &bytes) {
                Ok(frame) => frame,
                Err(message) => {
                    respond_and_close(&mut stream, message);
                    return;
                }
            },
            Ok(other) => {
                respond_and_close(
                    &mut stream,
                    format!("clients may not send frame kind {}", other.kind()),
                );
                return;
            }
            Err(WireError::Frame(e)) => {
                respond_and_close(&mut stream, e.to_string());
                return;
            }
            Err(WireError::Io(_)) => return,
        };
        if write_frame(&mut stream, &reply).is_err() {
            return;
        }
    }
}

fn respond_and_close(stream: &mut TcpStream, message: String) {
    let _ = write_frame(stream, &Frame::Error(message.into_bytes()));
}

fn predict_bytes(served: &Served, bytes: &[u8]) -> Result<Frame, String> {
    let segment = segment_from_bytes(bytes).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let p = predict_segment(
        &served.pipeline,
        &served.network,
        &segment,
        served.downsample_factor,
        served.window,
    )
    .map_err(|e| e.to_string())?;
    Ok(Frame::Prediction {
        label: p.label.code(),
        probability: p.preictal_probability as f64,
        elapsed_us: start.elapsed().as_micros() as u64,
    })
}

/// Resolves `host:port` to the first address it names.
pub fn resolve_addr(addr: &str) -> io::Result<SocketAddr> {
    addr.to_socket_addrs()?.next().ok_or_else(|| {
        io::Error::new(io::ErrorKind::AddrNotAvailable, format!("{addr} names no address"))
    })
}
