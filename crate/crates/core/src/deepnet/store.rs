//! Binary persistence of a trained classifier network.
//!
//! Layout, all little-endian, reals as 64-bit IEEE-754 regardless of the
//! in-memory scalar: magic `SAEN`, version u16, input scaler, layer
//! dimensions, per-layer encoder and decoder parameters, head
//! parameters, then a length-prefixed copy of the run configuration
//! that produced the fit.

use std::path::Path;

use crate::mat::Mat;
use crate::num::{real, Real};
use crate::store::{read_file, write_file, Reader, StoreError, Writer};

use super::{AutoencoderLayer, InputScaler, SoftmaxHead, StackedNetwork};

const MAGIC: &[u8; 4] = b"SAEN";
const VERSION: u16 = 1;

pub fn network_to_bytes<F: Real>(net: &StackedNetwork<F>, config_echo: &str) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    w.f64(net.scaler.gain.to_f64().expect("finite"));
    w.f64(net.scaler.offset.to_f64().expect("finite"));

    w.u16(net.layers.len() as u16);
    w.u32(net.input_dim() as u32);
    for layer in &net.layers {
        w.u32(layer.hidden_dim() as u32);
    }
    w.u32(net.head.classes() as u32);

    for layer in &net.layers {
        w.f64_all(layer.w_enc.as_slice().iter().map(|v| v.to_f64().expect("finite")));
        w.f64_all(layer.b_enc.iter().map(|v| v.to_f64().expect("finite")));
        w.f64_all(layer.w_dec.as_slice().iter().map(|v| v.to_f64().expect("finite")));
        w.f64_all(layer.b_dec.iter().map(|v| v.to_f64().expect("finite")));
    }
    w.f64_all(net.head.w.as_slice().iter().map(|v| v.to_f64().expect("finite")));
    w.f64_all(net.head.b.iter().map(|v| v.to_f64().expect("finite")));

    w.text(config_echo);
    w.finish()
}

pub fn network_from_bytes<F: Real>(
    bytes: &[u8],
) -> Result<(StackedNetwork<F>, String), StoreError> {
    let mut r = Reader::new(bytes, MAGIC, VERSION)?;
    let gain = r.f64("scaler gain")?;
    let offset = r.f64("scaler offset")?;

    let n_layers = r.u16("layer count")? as usize;
    let mut dims = Vec::with_capacity(n_layers + 1);
    dims.push(r.u32("input dimension")? as usize);
    for i in 0..n_layers {
        let d = r.u32("hidden dimension")? as usize;
        if d == 0 {
            return Err(StoreError::Malformed(format!("layer {i} has zero width")));
        }
        dims.push(d);
    }
    if dims[0] == 0 {
        return Err(StoreError::Malformed("zero input dimension".into()));
    }
    let classes = r.u32("class count")? as usize;
    if classes != 2 {
        return Err(StoreError::Malformed(format!(
            "expected a two-class head, found {classes}"
        )));
    }

    let mut layers = Vec::with_capacity(n_layers);
    for i in 0..n_layers {
        let (d_in, d_hid) = (dims[i], dims[i + 1]);
        let w_enc = r.f64_vec(d_hid * d_in, "encoder weights")?;
        let b_enc = r.f64_vec(d_hid, "encoder bias")?;
        let w_dec = r.f64_vec(d_in * d_hid, "decoder weights")?;
        let b_dec = r.f64_vec(d_in, "decoder bias")?;
        layers.push(AutoencoderLayer {
            w_enc: Mat::from_vec(d_hid, d_in, w_enc.into_iter().map(real).collect()),
            b_enc: b_enc.into_iter().map(real).collect(),
            w_dec: Mat::from_vec(d_in, d_hid, w_dec.into_iter().map(real).collect()),
            b_dec: b_dec.into_iter().map(real).collect(),
        });
    }

    let feat = *dims.last().unwrap();
    let head_w = r.f64_vec(classes * feat, "head weights")?;
    let head_b = r.f64_vec(classes, "head bias")?;
    let config_echo = r.text("config echo")?;
    r.finish()?;

    let net = StackedNetwork {
        scaler: InputScaler { gain: real(gain), offset: real(offset) },
        layers,
        head: SoftmaxHead {
            w: Mat::from_vec(classes, feat, head_w.into_iter().map(real).collect()),
            b: head_b.into_iter().map(real).collect(),
        },
    };
    Ok((net, config_echo))
}

pub fn save_network<F: Real>(
    net: &StackedNetwork<F>,
    config_echo: &str,
    path: &Path,
) -> Result<(), StoreError> {
    write_file(&network_to_bytes(net, config_echo), path)
}

pub fn load_network<F: Real>(path: &Path) -> Result<(StackedNetwork<F>, String), StoreError> {
    let bytes = read_file(path)?;
    network_from_bytes(&bytes)
}
