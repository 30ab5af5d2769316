//! Spatial dimensionality reduction: PCA whitening followed by a sparse
//! linear source model fitted by Gibbs sampling.
//!
//! The source model explains whitened data as `Y = G (X ⊙ Z) + E`, where
//! `G` mixes `K` candidate sources, `Z` is a binary mask with
//! Beta-Bernoulli activation rates (a finite truncation of an
//! Indian-buffet-process prior), `X` holds signed amplitudes under a
//! unit-rate Laplace prior, and `E` is isotropic Gaussian noise. After
//! fitting, new data is unmixed against the learned `G` and the most
//! active sources are kept.

mod gibbs;
mod pca;
mod store;

pub use gibbs::{
    amplitude_posterior, fit_iica, gibbs_sweep, sample_two_piece, IicaConfig, IicaDiagnostics,
};
pub use pca::{fit_pca, whiten};
pub use store::{load_pipeline, pipeline_from_bytes, pipeline_to_bytes, save_pipeline};

use thiserror::Error;

use crate::mat::{solve_spd, Mat};
use crate::num::Real;

/// Eigenvalues below this are treated as a rank deficiency.
pub const EIGENVALUE_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DimredError {
    #[error("component {component} is rank deficient: eigenvalue {eigenvalue:e} below {floor:e}")]
    RankDeficient { component: usize, eigenvalue: f64, floor: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unmixing system was not positive definite")]
    SingularUnmix,
}

/// PCA projection fitted to training data. Rows of `projection_w` are
/// unit eigenvectors scaled by the inverse square root of their
/// eigenvalue, so projecting the fitting data yields identity covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<F> {
    pub d_in: usize,
    pub p_out: usize,
    /// Per-input-dimension mean of the fitting data.
    pub mean: Vec<F>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<F>,
    /// `p_out x d_in` whitening projection.
    pub projection_w: Mat<F>,
}

/// Binary mask matrix stored one byte per entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinMat {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinMat { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_raw(rows: usize, cols: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|&b| b <= 1));
        BinMat { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r * self.cols + c] != 0
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.data[r * self.cols + c] = v as u8;
    }

    pub fn row(&self, r: usize) -> &[u8] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    /// Number of active entries per row.
    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.rows).map(|r| self.row(r).iter().filter(|&&b| b != 0).count()).collect()
    }

    pub fn fill_row(&mut self, r: usize, v: bool) {
        let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
        row.fill(v as u8);
    }
}

/// Sampler state for the sparse source model over `n` whitened samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IicaState<F> {
    pub k_trunc: usize,
    pub n: usize,
    /// `p x k` mixing matrix.
    pub g: Mat<F>,
    /// `k x n` source amplitudes; zero wherever the mask is inactive.
    pub x_src: Mat<F>,
    /// `k x n` activation mask.
    pub z: BinMat,
    /// Per-source Beta-Bernoulli activation rates.
    pub pi: Vec<F>,
    pub sigma_e2: F,
    pub alpha: F,
}

impl<F: Real> IicaState<F> {
    /// Active source signals `X ⊙ Z`.
    pub fn sources(&self) -> Mat<F> {
        Mat::from_fn(self.k_trunc, self.n, |k, i| {
            if self.z.get(k, i) {
                self.x_src[(k, i)]
            } else {
                F::zero()
            }
        })
    }

    /// Number of samples each source is active in.
    pub fn activity_counts(&self) -> Vec<usize> {
        self.z.row_counts()
    }
}

/// Fitted reduction chain: whiten, unmix, keep the `m_out` most active
/// sources.
#[derive(Debug, Clone, PartialEq)]
pub struct DimredPipeline<F> {
    pub pca: PcaModel<F>,
    pub iica: IicaState<F>,
    pub m_out: usize,
    /// Source indices ordered by descending activity.
    pub source_order: Vec<usize>,
}

/// Tunables for fitting the full reduction pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct DimredConfig {
    pub p_out: usize,
    pub k_trunc: usize,
    pub m_out: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub sigma_e2: f64,
    pub seed: u64,
}

impl DimredConfig {
    /// Defaults for `d` input channels: retain every component, one
    /// candidate source per retained component, keep half of them.
    pub fn defaults_for(d: usize, seed: u64) -> Self {
        DimredConfig {
            p_out: d,
            k_trunc: d,
            m_out: d.div_ceil(2),
            sweeps: 200,
            burn_in: 50,
            alpha: 2.0,
            sigma_e2: 0.01,
            seed,
        }
    }
}

/// Fits PCA whitening and the source model on `data` (`d x n`,
/// observations as columns), then ranks sources by how often they were
/// active across post-burn-in sweeps (ties broken by index).
pub fn fit_pipeline<F: Real>(
    data: &Mat<F>,
    cfg: &DimredConfig,
) -> Result<(DimredPipeline<F>, IicaDiagnostics), DimredError> {
    let d = data.rows();
    if !(1 <= cfg.m_out && cfg.m_out <= cfg.k_trunc && cfg.k_trunc <= cfg.p_out && cfg.p_out <= d)
    {
        return Err(DimredError::InvalidConfig(format!(
            "need 1 <= m ({}) <= k ({}) <= p ({}) <= input dim ({d})",
            cfg.m_out, cfg.k_trunc, cfg.p_out
        )));
    }
    let pca = fit_pca(data, cfg.p_out)?;
    let y = whiten(&pca, data)?;
    let iica_cfg = IicaConfig {
        k_trunc: cfg.k_trunc,
        alpha: cfg.alpha,
        sigma_e2: cfg.sigma_e2,
        sweeps: cfg.sweeps,
        burn_in: cfg.burn_in,
        seed: cfg.seed,
    };
    let (iica, diag) = fit_iica(&y, &iica_cfg)?;

    let mut source_order: Vec<usize> = (0..cfg.k_trunc).collect();
    source_order.sort_by(|&a, &b| {
        diag.mean_activity[b]
            .partial_cmp(&diag.mean_activity[a])
            .expect("activity counts are finite")
            .then(a.cmp(&b))
    });

    Ok((DimredPipeline { pca, iica, m_out: cfg.m_out, source_order }, diag))
}

/// Ridge least-squares source estimate holding the fitted mixing matrix
/// fixed: `(GᵀG + σ_e² I)⁻¹ Gᵀ y`.
pub fn unmix<F: Real>(state: &IicaState<F>, y: &Mat<F>) -> Result<Mat<F>, DimredError> {
    if y.rows() != state.g.rows() {
        return Err(DimredError::DimensionMismatch(format!(
            "unmix expects {} rows, got {}",
            state.g.rows(),
            y.rows()
        )));
    }
    let mut gtg = state.g.matmul_tn(&state.g);
    for k in 0..state.k_trunc {
        gtg[(k, k)] += state.sigma_e2;
    }
    let gty = state.g.matmul_tn(y);
    solve_spd(&gtg, &gty).ok_or(DimredError::SingularUnmix)
}

/// Projects new data through the fitted pipeline: whiten, unmix, then
/// keep the `m_out` top-ranked sources as rows.
pub fn transform<F: Real>(
    pipe: &DimredPipeline<F>,
    data: &Mat<F>,
) -> Result<Mat<F>, DimredError> {
    if pipe.m_out > pipe.source_order.len() {
        return Err(DimredError::InvalidConfig(format!(
            "m_out {} exceeds the {} ranked sources",
            pipe.m_out,
            pipe.source_order.len()
        )));
    }
    let y = whiten(&pipe.pca, data)?;
    let s = unmix(&pipe.iica, &y)?;
    let mut out = Mat::zeros(pipe.m_out, s.cols());
    for (r, &src) in pipe.source_order[..pipe.m_out].iter().enumerate() {
        out.row_mut(r).copy_from_slice(s.row(src));
    }
    Ok(out)
}

/// Gaussian log-likelihood of residuals under the model's noise variance;
/// the per-sweep trace of this is the convergence diagnostic.
pub(crate) fn residual_loglik(resid2: f64, entries: usize, sigma_e2: f64) -> f64 {
    let n = entries as f64;
    -0.5 * n * (2.0 * std::f64::consts::PI * sigma_e2).ln() - resid2 / (2.0 * sigma_e2)
}

pub(crate) fn to_f64_mat<F: Real>(m: &Mat<F>) -> Mat<f64> {
    Mat::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)].to_f64().expect("finite"))
}
