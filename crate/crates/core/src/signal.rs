//! EEG segment storage, synthetic recordings, and time-domain
//! preprocessing (decimation and windowing).
//!
//! A segment is a `channels x samples` block of real-valued microvolt
//! readings with identity and label metadata. Segments round-trip through
//! a little-endian binary format; samples are stored at 32-bit precision
//! both on disk and in memory so a save/load cycle is bit-exact.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Cursor, Read, Write};
use std::path::Path;
use std::str::FromStr;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::mat::Mat;
use crate::num::{real, Real};

const MAGIC: &[u8; 4] = b"EEGS";
const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("cannot access segment file {path}: {source}")]
    MissingFile { path: String, source: io::Error },
    #[error("malformed segment header: {0}")]
    MalformedHeader(String),
    #[error("truncated segment payload: expected {expected} sample bytes, got {got}")]
    TruncatedPayload { expected: usize, got: usize },
    #[error("{found} bytes of trailing data after the sample payload")]
    TrailingData { found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("identifier {0:?} exceeds the 255-byte format limit")]
    IdTooLong(String),
    #[error("band {lo}-{hi} Hz exceeds the Nyquist frequency {nyquist} Hz")]
    BandAboveNyquist { lo: f64, hi: f64, nyquist: f64 },
    #[error("downsample factor must be at least 1")]
    ZeroFactor,
    #[error("window of {window} samples does not fit in {samples} samples")]
    WindowTooLong { window: usize, samples: usize },
    #[error("I/O failure on segment file {path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Clinical state of a segment. `Preictal` is the positive class the
/// pipeline predicts; its wire code doubles as the classifier index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Preictal,
    Interictal,
    Unlabeled,
}

impl Label {
    pub fn code(self) -> u8 {
        match self {
            Label::Preictal => 0,
            Label::Interictal => 1,
            Label::Unlabeled => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Label> {
        match code {
            0 => Some(Label::Preictal),
            1 => Some(Label::Interictal),
            2 => Some(Label::Unlabeled),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Preictal => "preictal",
            Label::Interictal => "interictal",
            Label::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "preictal" => Ok(Label::Preictal),
            "interictal" => Ok(Label::Interictal),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One multichannel recording clip.
#[derive(Debug, Clone, PartialEq)]
pub struct EegSegment {
    pub patient_id: String,
    pub segment_id: String,
    pub label: Label,
    pub sampling_rate_hz: f64,
    /// `channels x samples`, channel-major.
    pub data: Mat<f32>,
}

impl EegSegment {
    pub fn channels(&self) -> usize {
        self.data.rows()
    }

    pub fn samples(&self) -> usize {
        self.data.cols()
    }

    /// Copy of the sample block at the requested working precision.
    pub fn channels_matrix<F: Real>(&self) -> Mat<F> {
        Mat::from_fn(self.data.rows(), self.data.cols(), |r, c| real(self.data[(r, c)] as f64))
    }
}

/// Serializes a segment into the on-disk byte layout.
pub fn segment_to_bytes(seg: &EegSegment) -> Result<Vec<u8>, SignalError> {
    if seg.channels() == 0 || seg.samples() == 0 {
        return Err(SignalError::DimensionMismatch(format!(
            "segment must have at least one channel and one sample, got {}x{}",
            seg.channels(),
            seg.samples()
        )));
    }
    for id in [&seg.patient_id, &seg.segment_id] {
        if id.len() > u8::MAX as usize {
            return Err(SignalError::IdTooLong(id.clone()));
        }
    }
    if seg.channels() > u16::MAX as usize {
        return Err(SignalError::DimensionMismatch(format!(
            "channel count {} exceeds the format's u16 field",
            seg.channels()
        )));
    }

    let mut buf = Vec::with_capacity(32 + seg.data.as_slice().len() * 4);
    buf.write_all(MAGIC).expect("vec write");
    buf.write_u16::<LittleEndian>(FORMAT_VERSION).expect("vec write");
    buf.write_u8(seg.label.code()).expect("vec write");
    buf.write_u8(seg.patient_id.len() as u8).expect("vec write");
    buf.write_all(seg.patient_id.as_bytes()).expect("vec write");
    buf.write_u8(seg.segment_id.len() as u8).expect("vec write");
    buf.write_all(seg.segment_id.as_bytes()).expect("vec write");
    buf.write_u16::<LittleEndian>(seg.channels() as u16).expect("vec write");
    buf.write_u64::<LittleEndian>(seg.samples() as u64).expect("vec write");
    buf.write_f64::<LittleEndian>(seg.sampling_rate_hz).expect("vec write");
    for &x in seg.data.as_slice() {
        buf.write_f32::<LittleEndian>(x).expect("vec write");
    }
    Ok(buf)
}

/// Parses the on-disk byte layout back into a segment.
pub fn segment_from_bytes(bytes: &[u8]) -> Result<EegSegment, SignalError> {
    let mut cur = Cursor::new(bytes);
    let bad_header = |what: &str| SignalError::MalformedHeader(what.to_string());

    let mut magic = [0u8; 4];
    cur.read_exact(&mut magic).map_err(|_| bad_header("file shorter than the magic number"))?;
    if &magic != MAGIC {
        return Err(bad_header("magic number mismatch"));
    }
    let version =
        cur.read_u16::<LittleEndian>().map_err(|_| bad_header("missing version field"))?;
    if version != FORMAT_VERSION {
        return Err(SignalError::MalformedHeader(format!(
            "unsupported format version {version}"
        )));
    }
    let label_code = cur.read_u8().map_err(|_| bad_header("missing label byte"))?;
    let label = Label::from_code(label_code)
        .ok_or_else(|| SignalError::MalformedHeader(format!("unknown label code {label_code}")))?;

    let read_id = |cur: &mut Cursor<&[u8]>, what: &str| -> Result<String, SignalError> {
        let len = cur.read_u8().map_err(|_| bad_header(&format!("missing {what} length")))? as usize;
        let mut raw = vec![0u8; len];
        cur.read_exact(&mut raw).map_err(|_| bad_header(&format!("{what} cut short")))?;
        String::from_utf8(raw)
            .map_err(|_| SignalError::MalformedHeader(format!("{what} is not UTF-8")))
    };
    let patient_id = read_id(&mut cur, "patient id")?;
    let segment_id = read_id(&mut cur, "segment id")?;

    let channels =
        cur.read_u16::<LittleEndian>().map_err(|_| bad_header("missing channel count"))? as usize;
    let samples =
        cur.read_u64::<LittleEndian>().map_err(|_| bad_header("missing sample count"))? as usize;
    let sampling_rate_hz =
        cur.read_f64::<LittleEndian>().map_err(|_| bad_header("missing sampling rate"))?;
    if channels == 0 || samples == 0 {
        return Err(SignalError::DimensionMismatch(format!(
            "header declares a {channels}x{samples} segment"
        )));
    }

    let expected = channels
        .checked_mul(samples)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| SignalError::DimensionMismatch("sample count overflows".to_string()))?;
    let remaining = bytes.len() - cur.position() as usize;
    if remaining < expected {
        return Err(SignalError::TruncatedPayload { expected, got: remaining });
    }
    if remaining > expected {
        return Err(SignalError::TrailingData { found: remaining - expected });
    }
    let mut data = Vec::with_capacity(channels * samples);
    for _ in 0..channels * samples {
        data.push(cur.read_f32::<LittleEndian>().expect("length checked above"));
    }

    Ok(EegSegment {
        patient_id,
        segment_id,
        label,
        sampling_rate_hz,
        data: Mat::from_vec(channels, samples, data),
    })
}

pub fn save_segment(seg: &EegSegment, path: &Path) -> Result<(), SignalError> {
    let bytes = segment_to_bytes(seg)?;
    std::fs::write(path, bytes)
        .map_err(|source| SignalError::Io { path: path.display().to_string(), source })
}

pub fn load_segment(path: &Path) -> Result<EegSegment, SignalError> {
    let bytes = std::fs::read(path)
        .map_err(|source| SignalError::MissingFile { path: path.display().to_string(), source })?;
    segment_from_bytes(&bytes)
}

/// Recipe for a synthetic two-class dataset.
///
/// Interictal segments carry a band-limited background oscillation plus
/// white noise; preictal segments add a second oscillation in a higher
/// band whose power is `preictal_power_gain` times a background source.
/// Sources are mixed across channels through a random matrix drawn once
/// per dataset, so the spatial structure is shared between segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGenConfig {
    pub n_interictal: usize,
    pub n_preictal: usize,
    pub channels: usize,
    pub duration_s: f64,
    pub sampling_rate_hz: f64,
    pub base_band_hz: (f64, f64),
    pub preictal_band_hz: (f64, f64),
    pub preictal_power_gain: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticGenConfig {
    fn default() -> Self {
        SyntheticGenConfig {
            n_interictal: 12,
            n_preictal: 12,
            channels: 8,
            duration_s: 2.0,
            sampling_rate_hz: 256.0,
            base_band_hz: (4.0, 12.0),
            preictal_band_hz: (18.0, 30.0),
            preictal_power_gain: 3.0,
            noise_std: 1.0,
            seed: 7,
        }
    }
}

const N_BASE_SOURCES: usize = 3;
const N_PREICTAL_SOURCES: usize = 2;
const BASE_AMPLITUDE: f64 = 1.5;

/// Deterministically expands a generator config into labeled segments:
/// interictal clips first, then preictal, ids numbered per class.
pub fn generate_synthetic_dataset(
    cfg: &SyntheticGenConfig,
) -> Result<Vec<EegSegment>, SignalError> {
    let nyquist = cfg.sampling_rate_hz / 2.0;
    for (lo, hi) in [cfg.base_band_hz, cfg.preictal_band_hz] {
        if !(0.0 <= lo && lo < hi) {
            return Err(SignalError::DimensionMismatch(format!(
                "band {lo}-{hi} Hz is not an increasing non-negative range"
            )));
        }
        if hi > nyquist {
            return Err(SignalError::BandAboveNyquist { lo, hi, nyquist });
        }
    }
    if cfg.channels == 0 {
        return Err(SignalError::DimensionMismatch("channel count must be positive".into()));
    }
    let samples = (cfg.duration_s * cfg.sampling_rate_hz).round() as usize;
    if samples == 0 {
        return Err(SignalError::DimensionMismatch(
            "duration times sampling rate yields zero samples".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let base_mix = unit_row_mixing(cfg.channels, N_BASE_SOURCES, &mut rng);
    let pre_mix = unit_row_mixing(cfg.channels, N_PREICTAL_SOURCES, &mut rng);
    let pre_amplitude = BASE_AMPLITUDE * cfg.preictal_power_gain.sqrt();

    let mut out = Vec::with_capacity(cfg.n_interictal + cfg.n_preictal);
    for (label, count) in
        [(Label::Interictal, cfg.n_interictal), (Label::Preictal, cfg.n_preictal)]
    {
        for idx in 0..count {
            let base =
                oscillation_block(N_BASE_SOURCES, samples, cfg.sampling_rate_hz, cfg.base_band_hz, &mut rng);
            let mut data = Mat::<f32>::zeros(cfg.channels, samples);
            mix_into(&mut data, &base_mix, &base, BASE_AMPLITUDE);
            if label == Label::Preictal {
                let pre = oscillation_block(
                    N_PREICTAL_SOURCES,
                    samples,
                    cfg.sampling_rate_hz,
                    cfg.preictal_band_hz,
                    &mut rng,
                );
                mix_into(&mut data, &pre_mix, &pre, pre_amplitude);
            }
            for x in data.as_mut_slice() {
                let noise: f64 = StandardNormal.sample(&mut rng);
                *x += (cfg.noise_std * noise) as f32;
            }
            out.push(EegSegment {
                patient_id: "synthetic".to_string(),
                segment_id: format!("{label}-{idx:03}"),
                label,
                sampling_rate_hz: cfg.sampling_rate_hz,
                data,
            });
        }
    }
    Ok(out)
}

/// Random mixing matrix with unit-norm rows, so every channel receives the
/// source block at a comparable power.
fn unit_row_mixing(channels: usize, sources: usize, rng: &mut ChaCha8Rng) -> Mat<f64> {
    let mut m = Mat::from_fn(channels, sources, |_, _| StandardNormal.sample(rng));
    for r in 0..channels {
        let norm = m.row(r).iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
        for x in m.row_mut(r) {
            *x /= norm;
        }
    }
    m
}

/// One sinusoid per row, frequency and phase drawn uniformly in the band.
fn oscillation_block(
    sources: usize,
    samples: usize,
    rate: f64,
    band: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Mat<f64> {
    let mut block = Mat::zeros(sources, samples);
    for s in 0..sources {
        let freq = rng.gen_range(band.0..band.1);
        let phase = rng.gen_range(0.0..2.0 * PI);
        let w = 2.0 * PI * freq / rate;
        for (t, x) in block.row_mut(s).iter_mut().enumerate() {
            *x = (w * t as f64 + phase).sin();
        }
    }
    block
}

fn mix_into(data: &mut Mat<f32>, mix: &Mat<f64>, sources: &Mat<f64>, amplitude: f64) {
    for c in 0..data.rows() {
        for s in 0..sources.rows() {
            let gain = amplitude * mix[(c, s)];
            let src = sources.row(s);
            for (x, &v) in data.row_mut(c).iter_mut().zip(src) {
                *x += (gain * v) as f32;
            }
        }
    }
}

/// Decimates a segment by an integer factor after an anti-alias low-pass.
///
/// The filter is a Hamming-windowed sinc with cutoff at 90% of the new
/// Nyquist frequency; edges are zero-padded. Samples past the last full
/// factor-sized block are dropped, and the sampling rate is divided by the
/// factor. A factor of 1 returns the segment unchanged with no filtering.
pub fn downsample(seg: &EegSegment, factor: usize) -> Result<EegSegment, SignalError> {
    if factor == 0 {
        return Err(SignalError::ZeroFactor);
    }
    if factor == 1 {
        return Ok(seg.clone());
    }
    let t_in = seg.samples();
    let t_out = t_in / factor;
    if t_out == 0 {
        return Err(SignalError::DimensionMismatch(format!(
            "{t_in} samples cannot be decimated by {factor}"
        )));
    }

    let kernel = lowpass_kernel(factor);
    let half = kernel.len() / 2;
    let mut out = Mat::<f32>::zeros(seg.channels(), t_out);
    for c in 0..seg.channels() {
        let row = seg.data.row(c);
        for t in 0..t_out {
            let center = t * factor;
            let mut acc = 0.0f64;
            for (j, &k) in kernel.iter().enumerate() {
                let idx = center as isize + j as isize - half as isize;
                if idx >= 0 && (idx as usize) < t_in {
                    acc += k * row[idx as usize] as f64;
                }
            }
            out[(c, t)] = acc as f32;
        }
    }
    Ok(EegSegment {
        patient_id: seg.patient_id.clone(),
        segment_id: seg.segment_id.clone(),
        label: seg.label,
        sampling_rate_hz: seg.sampling_rate_hz / factor as f64,
        data: out,
    })
}

/// Hamming-windowed sinc, cutoff 0.45/factor in cycles per input sample,
/// normalized to unit DC gain. Length grows with the factor so the
/// transition band stays proportionally narrow.
fn lowpass_kernel(factor: usize) -> Vec<f64> {
    let cutoff = 0.45 / factor as f64;
    let taps = 33 * factor + 1;
    let half = (taps / 2) as isize;
    let mut kernel = Vec::with_capacity(taps);
    for i in -half..=half {
        let sinc = if i == 0 {
            2.0 * cutoff
        } else {
            (2.0 * PI * cutoff * i as f64).sin() / (PI * i as f64)
        };
        let window = 0.54 + 0.46 * (PI * i as f64 / half as f64).cos();
        kernel.push(sinc * window);
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    kernel
}

/// Sliding-window plan over a sample axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub window_len: usize,
    pub hop: usize,
}

impl WindowSpec {
    /// Number of windows cut from `samples`: floor((T - window)/hop) + 1.
    pub fn count(&self, samples: usize) -> Option<usize> {
        if self.window_len == 0 || self.hop == 0 || self.window_len > samples {
            return None;
        }
        Some((samples - self.window_len) / self.hop + 1)
    }
}

/// Cuts a `rows x samples` matrix into flattened channel-major window
/// vectors of length `rows * window_len`. Every window inherits whatever
/// label the source segment carries; bookkeeping stays with the caller.
pub fn windowize<F: Real>(
    channels: &Mat<F>,
    spec: WindowSpec,
) -> Result<Vec<Vec<F>>, SignalError> {
    let samples = channels.cols();
    let count = spec
        .count(samples)
        .ok_or(SignalError::WindowTooLong { window: spec.window_len, samples })?;
    let mut windows = Vec::with_capacity(count);
    for w in 0..count {
        let start = w * spec.hop;
        let mut flat = Vec::with_capacity(channels.rows() * spec.window_len);
        for r in 0..channels.rows() {
            flat.extend_from_slice(&channels.row(r)[start..start + spec.window_len]);
        }
        windows.push(flat);
    }
    Ok(windows)
}
