//! Binary persistence of a fitted reduction pipeline.
//!
//! Layout, all little-endian, reals as 64-bit IEEE-754 regardless of the
//! in-memory scalar: magic `DRED`, version u16, PCA dimensions and
//! fields, sampler dimensions and fields, output selection, then a
//! length-prefixed copy of the run configuration that produced the fit.

use std::path::Path;

use crate::mat::Mat;
use crate::num::{real, Real};
use crate::store::{read_file, write_file, Reader, StoreError, Writer};

use super::{BinMat, DimredPipeline, IicaState, PcaModel};

const MAGIC: &[u8; 4] = b"DRED";
const VERSION: u16 = 1;

pub fn pipeline_to_bytes<F: Real>(pipe: &DimredPipeline<F>, config_echo: &str) -> Vec<u8> {
    let mut w = Writer::new(MAGIC, VERSION);
    let pca = &pipe.pca;
    w.u32(pca.d_in as u32);
    w.u32(pca.p_out as u32);
    w.f64_all(pca.mean.iter().map(|v| v.to_f64().expect("finite")));
    w.f64_all(pca.eigenvalues.iter().map(|v| v.to_f64().expect("finite")));
    w.f64_all(pca.projection_w.as_slice().iter().map(|v| v.to_f64().expect("finite")));

    let ica = &pipe.iica;
    w.u32(ica.k_trunc as u32);
    w.u64(ica.n as u64);
    w.f64_all(ica.g.as_slice().iter().map(|v| v.to_f64().expect("finite")));
    w.f64_all(ica.x_src.as_slice().iter().map(|v| v.to_f64().expect("finite")));
    w.raw(ica.z.as_slice());
    w.f64_all(ica.pi.iter().map(|v| v.to_f64().expect("finite")));
    w.f64(ica.sigma_e2.to_f64().expect("finite"));
    w.f64(ica.alpha.to_f64().expect("finite"));

    w.u32(pipe.m_out as u32);
    for &s in &pipe.source_order {
        w.u32(s as u32);
    }
    w.text(config_echo);
    w.finish()
}

pub fn pipeline_from_bytes<F: Real>(
    bytes: &[u8],
) -> Result<(DimredPipeline<F>, String), StoreError> {
    let mut r = Reader::new(bytes, MAGIC, VERSION)?;
    let d_in = r.u32("input dimension")? as usize;
    let p_out = r.u32("retained components")? as usize;
    if p_out == 0 || p_out > d_in {
        return Err(StoreError::Malformed(format!(
            "retained components {p_out} out of range for input dimension {d_in}"
        )));
    }
    let mean = r.f64_vec(d_in, "mean")?;
    let eigenvalues = r.f64_vec(p_out, "eigenvalues")?;
    let projection = r.f64_vec(p_out * d_in, "projection")?;

    let k_trunc = r.u32("truncation")? as usize;
    let n = r.u64("sample count")? as usize;
    if k_trunc == 0 || k_trunc > p_out {
        return Err(StoreError::Malformed(format!(
            "truncation {k_trunc} out of range for {p_out} components"
        )));
    }
    let g = r.f64_vec(p_out * k_trunc, "mixing matrix")?;
    let x_src = r.f64_vec(k_trunc * n, "source amplitudes")?;
    let z_raw = r.raw(k_trunc * n, "activation mask")?;
    if z_raw.iter().any(|&b| b > 1) {
        return Err(StoreError::Malformed("activation mask byte outside {0,1}".into()));
    }
    let pi = r.f64_vec(k_trunc, "activation rates")?;
    let sigma_e2 = r.f64("noise variance")?;
    let alpha = r.f64("concentration")?;

    let m_out = r.u32("output count")? as usize;
    let mut source_order = Vec::with_capacity(k_trunc);
    for _ in 0..k_trunc {
        let s = r.u32("source order")? as usize;
        if s >= k_trunc {
            return Err(StoreError::Malformed(format!("source index {s} out of range")));
        }
        source_order.push(s);
    }
    if m_out == 0 || m_out > k_trunc {
        return Err(StoreError::Malformed(format!(
            "output count {m_out} out of range for truncation {k_trunc}"
        )));
    }
    let config_echo = r.text("config echo")?;
    r.finish()?;

    let pipe = DimredPipeline {
        pca: PcaModel {
            d_in,
            p_out,
            mean: mean.into_iter().map(real).collect(),
            eigenvalues: eigenvalues.into_iter().map(real).collect(),
            projection_w: Mat::from_vec(p_out, d_in, projection.into_iter().map(real).collect()),
        },
        iica: IicaState {
            k_trunc,
            n,
            g: Mat::from_vec(p_out, k_trunc, g.into_iter().map(real).collect()),
            x_src: Mat::from_vec(k_trunc, n, x_src.into_iter().map(real).collect()),
            z: BinMat::from_raw(k_trunc, n, z_raw),
            pi: pi.into_iter().map(real).collect(),
            sigma_e2: real(sigma_e2),
            alpha: real(alpha),
        },
        m_out,
        source_order,
    };
    Ok((pipe, config_echo))
}

pub fn save_pipeline<F: Real>(
    pipe: &DimredPipeline<F>,
    config_echo: &str,
    path: &Path,
) -> Result<(), StoreError> {
    write_file(&pipeline_to_bytes(pipe, config_echo), path)
}

pub fn load_pipeline<F: Real>(path: &Path) -> Result<(DimredPipeline<F>, String), StoreError> {
    pipeline_from_bytes(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimred::{fit_pipeline, DimredConfig};

    fn fitted() -> DimredPipeline<f64> {
        let data: Mat<f64> = Mat::from_fn(4, 60, |r, c| {
            ((r + 1) as f64 * 0.3 + c as f64 * 0.11).sin() + (c % (r + 2)) as f64 * 0.05
        });
        let cfg = DimredConfig {
            sweeps: 8,
            burn_in: 2,
            ..DimredConfig::defaults_for(4, 5)
        };
        fit_pipeline(&data, &cfg).unwrap().0
    }

    #[test]
    fn roundtrip_is_exact_and_deterministic() {
        let pipe = fitted();
        let bytes = pipeline_to_bytes(&pipe, "seed=5\n");
        assert_eq!(bytes, pipeline_to_bytes(&pipe, "seed=5\n"));
        let (back, echo) = pipeline_from_bytes::<f64>(&bytes).unwrap();
        assert_eq!(back, pipe);
        assert_eq!(echo, "seed=5\n");
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let pipe = fitted();
        let bytes = pipeline_to_bytes(&pipe, "");

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            pipeline_from_bytes::<f64>(&bad_magic),
            Err(StoreError::Malformed(_))
        ));

        let truncated = &bytes[..bytes.len() / 2];
        assert!(matches!(
            pipeline_from_bytes::<f64>(truncated),
            Err(StoreError::Truncated(_))
        ));

        let mut trailing = bytes.clone();
        trailing.push(7);
        assert!(matches!(
            pipeline_from_bytes::<f64>(&trailing),
            Err(StoreError::TrailingData { .. })
        ));

        assert!(matches!(
            load_pipeline::<f64>(Path::new("/no/such/file.dred")),
            Err(StoreError::MissingFile { .. })
        ));
    }
}
