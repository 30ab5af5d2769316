//! Gibbs sampler for the masked sparse source model `Y = G (X ⊙ Z) + E`.
//!
//! One sweep resamples, in order: every mask/amplitude pair `(z_ki,
//! x_ki)`, then every mixing column `g_k`, then every activation rate
//! `π_k`. The amplitude conditional under the unit-rate Laplace prior is
//! a two-piece truncated Gaussian whose piece means differ by
//! `±σ_e²/gᵀg`; the mask conditional weighs the marginal likelihood of
//! the sample's residual with the source integrated out against the
//! source being silent.
//!
//! All sampling arithmetic runs at `f64` regardless of the state's scalar
//! type, so instantiations at different precisions replay the same chain.

use std::f64::consts::{LN_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use crate::mat::Mat;
use crate::num::{real, Real};

use super::{residual_loglik, to_f64_mat, BinMat, DimredError, IicaState};

/// Mixing columns whose squared norm falls below this are resampled from
/// the prior (their source is cleared), and the event is counted in the
/// fit diagnostics.
pub const DEGENERATE_COLUMN_FLOOR: f64 = 1e-12;

/// Tunables for [`fit_iica`].
#[derive(Debug, Clone, PartialEq)]
pub struct IicaConfig {
    /// Truncation level: number of candidate sources.
    pub k_trunc: usize,
    /// Concentration of the truncated buffet prior.
    pub alpha: f64,
    /// Fixed isotropic noise variance.
    pub sigma_e2: f64,
    /// Total Gibbs sweeps to run.
    pub sweeps: usize,
    /// Sweeps ignored by the activity ranking.
    pub burn_in: usize,
    pub seed: u64,
}

impl IicaConfig {
    pub fn defaults_for(p: usize, seed: u64) -> Self {
        IicaConfig { k_trunc: p, alpha: 2.0, sigma_e2: 0.01, sweeps: 200, burn_in: 50, seed }
    }
}

/// Trace information from a fit.
#[derive(Debug, Clone)]
pub struct IicaDiagnostics {
    /// Gaussian residual log-likelihood after each sweep.
    pub loglik_per_sweep: Vec<f64>,
    /// Degenerate mixing columns reinitialized across the whole fit.
    pub column_reinits: usize,
    /// Average per-sweep active-sample count of each source, taken over
    /// post-burn-in sweeps; this drives the source ranking.
    pub mean_activity: Vec<f64>,
}

/// Means and variance of the two-piece amplitude conditional, given the
/// projection of the source-free residual on the mixing column:
/// `((gᵀe − σ_e²)/gᵀg, (gᵀe + σ_e²)/gᵀg, σ_e²/gᵀg)`.
#[inline]
pub fn amplitude_posterior(g_dot_e: f64, sigma_e2: f64, gtg: f64) -> (f64, f64, f64) {
    ((g_dot_e - sigma_e2) / gtg, (g_dot_e + sigma_e2) / gtg, sigma_e2 / gtg)
}

/// Draws from the normalized two-piece density proportional to
/// `N(x; mu_minus, sigma2)` on `x > 0` and `N(x; mu_plus, sigma2)` on
/// `x < 0`, including the Laplace-prior tilt between the pieces.
pub fn sample_two_piece(
    mu_minus: f64,
    mu_plus: f64,
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let sigma = sigma2.sqrt();
    let (log_w_pos, log_w_neg) = piece_log_weights(mu_minus, mu_plus, sigma2);
    draw_two_piece(mu_minus, mu_plus, sigma, log_w_pos, log_w_neg, rng)
}

/// Log masses of the positive and negative pieces up to a shared
/// constant: `mu²/(2σ²) + ln Φ(±mu/σ)` from completing the square.
fn piece_log_weights(mu_minus: f64, mu_plus: f64, sigma2: f64) -> (f64, f64) {
    let sigma = sigma2.sqrt();
    let log_w_pos = mu_minus * mu_minus / (2.0 * sigma2) + log_norm_cdf(mu_minus / sigma);
    let log_w_neg = mu_plus * mu_plus / (2.0 * sigma2) + log_norm_cdf(-mu_plus / sigma);
    (log_w_pos, log_w_neg)
}

fn draw_two_piece(
    mu_minus: f64,
    mu_plus: f64,
    sigma: f64,
    log_w_pos: f64,
    log_w_neg: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let p_pos = sigmoid(log_w_pos - log_w_neg);
    if rng.gen::<f64>() < p_pos {
        truncated_normal_positive(mu_minus, sigma, rng)
    } else {
        -truncated_normal_positive(-mu_plus, sigma, rng)
    }
}

/// Sample from `N(mean, sigma²)` conditioned on the value being positive.
/// Near-certain regions use plain rejection; far tails use the
/// exponential-envelope rejection of Robert (1995).
fn truncated_normal_positive(mean: f64, sigma: f64, rng: &mut ChaCha8Rng) -> f64 {
    let a = -mean / sigma;
    let z = if a <= 0.3 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= a {
                break z;
            }
        }
    } else {
        let lambda = (a + (a * a + 4.0).sqrt()) / 2.0;
        loop {
            let u1: f64 = rng.gen();
            let z = a - (1.0 - u1).ln() / lambda;
            let d = z - lambda;
            let u2: f64 = rng.gen();
            if u2 <= (-0.5 * d * d).exp() {
                break z;
            }
        }
    };
    mean + sigma * z
}

/// `ln Φ(z)`, switching to the asymptotic tail expansion where `erfc`
/// loses precision.
pub(crate) fn log_norm_cdf(z: f64) -> f64 {
    if z < -30.0 {
        let z2 = z * z;
        -0.5 * z2 - 0.5 * (2.0 * PI).ln() - (-z).ln() + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    } else {
        (0.5 * libm::erfc(-z / SQRT_2)).ln()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Working copy of the state with layouts chosen for the sweep: mixing
/// columns contiguous, residual sample-major.
struct StateF64 {
    p: usize,
    k: usize,
    n: usize,
    g_cols: Vec<Vec<f64>>,
    x: Mat<f64>,
    z: BinMat,
    pi: Vec<f64>,
    sigma_e2: f64,
    alpha: f64,
}

#[derive(Default)]
struct SweepStats {
    reinits: usize,
    resid2: f64,
}

impl StateF64 {
    fn from_state<F: Real>(state: &IicaState<F>) -> StateF64 {
        let p = state.g.rows();
        let g_cols = (0..state.k_trunc)
            .map(|k| (0..p).map(|r| state.g[(r, k)].to_f64().expect("finite")).collect())
            .collect();
        StateF64 {
            p,
            k: state.k_trunc,
            n: state.n,
            g_cols,
            x: to_f64_mat(&state.x_src),
            z: state.z.clone(),
            pi: state.pi.iter().map(|v| v.to_f64().expect("finite")).collect(),
            sigma_e2: state.sigma_e2.to_f64().expect("finite"),
            alpha: state.alpha.to_f64().expect("finite"),
        }
    }

    fn into_state<F: Real>(self) -> IicaState<F> {
        let g = Mat::from_fn(self.p, self.k, |r, c| real(self.g_cols[c][r]));
        IicaState {
            k_trunc: self.k,
            n: self.n,
            g,
            x_src: Mat::from_fn(self.k, self.n, |r, c| real(self.x[(r, c)])),
            z: self.z,
            pi: self.pi.iter().map(|&v| real(v)).collect(),
            sigma_e2: real(self.sigma_e2),
            alpha: real(self.alpha),
        }
    }
}

/// `y` transposed into a flat sample-major buffer: `yt[i*p + r] = y[r, i]`.
fn sample_major(y: &Mat<f64>) -> Vec<f64> {
    let (p, n) = (y.rows(), y.cols());
    let mut yt = vec![0.0; n * p];
    for r in 0..p {
        for (i, &v) in y.row(r).iter().enumerate() {
            yt[i * p + r] = v;
        }
    }
    yt
}

fn sweep(st: &mut StateF64, yt: &[f64], rng: &mut ChaCha8Rng) -> SweepStats {
    let (p, k_n, n) = (st.p, st.k, st.n);
    let mut stats = SweepStats::default();

    // Residual with every source's contribution removed.
    let mut r = yt.to_vec();
    for k in 0..k_n {
        let g = &st.g_cols[k];
        for i in 0..n {
            if st.z.get(k, i) {
                let s = st.x[(k, i)];
                for (rp, &gp) in r[i * p..(i + 1) * p].iter_mut().zip(g) {
                    *rp -= gp * s;
                }
            }
        }
    }

    // Mask and amplitude conditionals for every (source, sample) pair.
    for k in 0..k_n {
        let gtg: f64 = st.g_cols[k].iter().map(|g| g * g).sum();
        if gtg < DEGENERATE_COLUMN_FLOOR {
            for i in 0..n {
                if st.z.get(k, i) {
                    let s = st.x[(k, i)];
                    for (rp, &gp) in r[i * p..(i + 1) * p].iter_mut().zip(&st.g_cols[k]) {
                        *rp += gp * s;
                    }
                }
            }
            for g in &mut st.g_cols[k] {
                *g = StandardNormal.sample(rng);
            }
            st.z.fill_row(k, false);
            st.x.row_mut(k).fill(0.0);
            stats.reinits += 1;
        }

        let g = st.g_cols[k].clone();
        let gtg: f64 = g.iter().map(|x| x * x).sum();
        let sigma2 = st.sigma_e2 / gtg;
        let sigma = sigma2.sqrt();
        let pi_k = st.pi[k].clamp(1e-12, 1.0 - 1e-12);
        let log_prior_odds = (pi_k / (1.0 - pi_k)).ln();
        // Normalizer of the active marginal: (1/2)·√(2πσ²) times the piece
        // weights, against the silent alternative.
        let log_norm_const = sigma.ln() + 0.5 * (2.0 * PI).ln() - LN_2;

        for i in 0..n {
            let ri = &mut r[i * p..(i + 1) * p];
            if st.z.get(k, i) {
                let s = st.x[(k, i)];
                for (rp, &gp) in ri.iter_mut().zip(&g) {
                    *rp += gp * s;
                }
            }
            // ri now holds e°_ki, the residual without source k.
            let g_dot_e: f64 = g.iter().zip(ri.iter()).map(|(&a, &b)| a * b).sum();
            let (mu_minus, mu_plus, _) = amplitude_posterior(g_dot_e, st.sigma_e2, gtg);
            let (log_w_pos, log_w_neg) = piece_log_weights(mu_minus, mu_plus, sigma2);
            let log_ratio = log_norm_const + log_sum_exp(log_w_pos, log_w_neg);
            let p_active = sigmoid(log_prior_odds + log_ratio);

            if rng.gen::<f64>() < p_active {
                let x_new = draw_two_piece(mu_minus, mu_plus, sigma, log_w_pos, log_w_neg, rng);
                st.z.set(k, i, true);
                st.x[(k, i)] = x_new;
                for (rp, &gp) in ri.iter_mut().zip(&g) {
                    *rp -= gp * x_new;
                }
            } else {
                st.z.set(k, i, false);
                st.x[(k, i)] = 0.0;
            }
        }
    }

    // Mixing column conditionals under the standard-normal prior. A
    // silent source falls back to a pure prior draw.
    for k in 0..k_n {
        let mut sk2 = 0.0;
        let mut num = vec![0.0; p];
        for i in 0..n {
            if st.z.get(k, i) {
                let s = st.x[(k, i)];
                sk2 += s * s;
                for (np, &rp) in num.iter_mut().zip(&r[i * p..(i + 1) * p]) {
                    *np += rp * s;
                }
            }
        }
        let denom = sk2 + st.sigma_e2;
        let sd = (st.sigma_e2 / denom).sqrt();
        let g_old = std::mem::take(&mut st.g_cols[k]);
        let mut g_new = Vec::with_capacity(p);
        for p_i in 0..p {
            let mean = (num[p_i] + g_old[p_i] * sk2) / denom;
            let eps: f64 = StandardNormal.sample(rng);
            g_new.push(mean + sd * eps);
        }
        for i in 0..n {
            if st.z.get(k, i) {
                let s = st.x[(k, i)];
                let ri = &mut r[i * p..(i + 1) * p];
                for ((rp, &go), &gn) in ri.iter_mut().zip(&g_old).zip(&g_new) {
                    *rp += (go - gn) * s;
                }
            }
        }
        st.g_cols[k] = g_new;
    }

    // Activation rate conditionals.
    for k in 0..k_n {
        let m_k = st.z.row(k).iter().filter(|&&b| b != 0).count() as f64;
        let a = m_k + st.alpha / k_n as f64;
        let b = n as f64 - m_k + 1.0;
        st.pi[k] = Beta::new(a, b).expect("Beta parameters stay positive").sample(rng);
    }

    stats.resid2 = r.iter().map(|x| x * x).sum();
    stats
}

/// One full sweep as a pure function of the previous state. `y` is the
/// whitened data the state was fitted against (`p x n`).
pub fn gibbs_sweep<F: Real>(
    state: &IicaState<F>,
    y: &Mat<F>,
    rng: &mut ChaCha8Rng,
) -> Result<IicaState<F>, DimredError> {
    if y.rows() != state.g.rows() || y.cols() != state.n {
        return Err(DimredError::DimensionMismatch(format!(
            "state covers {}x{} data, got {}x{}",
            state.g.rows(),
            state.n,
            y.rows(),
            y.cols()
        )));
    }
    let mut st = StateF64::from_state(state);
    let yt = sample_major(&to_f64_mat(y));
    sweep(&mut st, &yt, rng);
    Ok(st.into_state())
}

/// Fits the source model to whitened data (`p x n`) by running
/// `cfg.sweeps` Gibbs sweeps from a seeded random initialization. The
/// returned state is the final sweep's sample; the diagnostics carry the
/// residual log-likelihood trace and the post-burn-in activity averages.
pub fn fit_iica<F: Real>(
    y: &Mat<F>,
    cfg: &IicaConfig,
) -> Result<(IicaState<F>, IicaDiagnostics), DimredError> {
    let p = y.rows();
    let n = y.cols();
    if cfg.k_trunc == 0 || cfg.k_trunc > p {
        return Err(DimredError::InvalidConfig(format!(
            "truncation {} must lie in 1..={p}",
            cfg.k_trunc
        )));
    }
    if cfg.sweeps == 0 || cfg.burn_in >= cfg.sweeps {
        return Err(DimredError::InvalidConfig(format!(
            "need sweeps ({}) > burn_in ({})",
            cfg.sweeps, cfg.burn_in
        )));
    }
    if !(cfg.sigma_e2 > 0.0) || !(cfg.alpha > 0.0) {
        return Err(DimredError::InvalidConfig(
            "sigma_e2 and alpha must be positive".to_string(),
        ));
    }
    if n == 0 {
        return Err(DimredError::DimensionMismatch("no samples to fit".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.k_trunc;
    let g_cols: Vec<Vec<f64>> =
        (0..k).map(|_| (0..p).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
    let mut z = BinMat::zeros(k, n);
    for r in 0..k {
        for c in 0..n {
            z.set(r, c, rng.gen::<f64>() < 0.5);
        }
    }
    let x = Mat::from_fn(k, n, |r, c| {
        let draw: f64 = StandardNormal.sample(&mut rng);
        if z.get(r, c) {
            draw
        } else {
            0.0
        }
    });
    let mut st = StateF64 {
        p,
        k,
        n,
        g_cols,
        x,
        z,
        pi: vec![0.5; k],
        sigma_e2: cfg.sigma_e2,
        alpha: cfg.alpha,
    };

    let yt = sample_major(&to_f64_mat(y));
    let mut diag = IicaDiagnostics {
        loglik_per_sweep: Vec::with_capacity(cfg.sweeps),
        column_reinits: 0,
        mean_activity: vec![0.0; k],
    };
    let mut activity_acc = vec![0.0f64; k];
    for sweep_idx in 0..cfg.sweeps {
        let stats = sweep(&mut st, &yt, &mut rng);
        diag.loglik_per_sweep.push(residual_loglik(stats.resid2, p * n, cfg.sigma_e2));
        diag.column_reinits += stats.reinits;
        if sweep_idx >= cfg.burn_in {
            for (acc, count) in activity_acc.iter_mut().zip(st.z.row_counts()) {
                *acc += count as f64;
            }
        }
    }
    let kept = (cfg.sweeps - cfg.burn_in) as f64;
    diag.mean_activity = activity_acc.into_iter().map(|a| a / kept).collect();

    Ok((st.into_state(), diag))
}
