//! PCA fitting and whitening projection.

use crate::mat::{sym_eigen, Mat};
use crate::num::{real, Real};

use super::{DimredError, PcaModel, EIGENVALUE_FLOOR};

/// Fits a whitening PCA to `data` (`d x n`, observations as columns),
/// retaining the `p_out` leading components.
///
/// The covariance uses the unbiased `n - 1` normalization; any retained
/// eigenvalue below [`EIGENVALUE_FLOOR`] is reported as a rank deficiency
/// naming the offending component.
pub fn fit_pca<F: Real>(data: &Mat<F>, p_out: usize) -> Result<PcaModel<F>, DimredError> {
    let d = data.rows();
    let n = data.cols();
    if p_out == 0 || p_out > d {
        return Err(DimredError::DimensionMismatch(format!(
            "cannot retain {p_out} components of {d}-dimensional data"
        )));
    }
    if n < 2 {
        return Err(DimredError::DimensionMismatch(
            "covariance estimation needs at least two observations".to_string(),
        ));
    }

    let inv_n = F::one() / real::<F>(n as f64);
    let mean: Vec<F> = (0..d).map(|r| data.row(r).iter().copied().sum::<F>() * inv_n).collect();
    let mut centered = data.clone();
    for r in 0..d {
        let m = mean[r];
        for x in centered.row_mut(r) {
            *x -= m;
        }
    }
    let mut cov = centered.matmul_nt(&centered);
    cov.scale(F::one() / real::<F>((n - 1) as f64));

    let eig = sym_eigen(&cov);
    let floor = real::<F>(EIGENVALUE_FLOOR);
    for (i, &lambda) in eig.values.iter().take(p_out).enumerate() {
        if lambda < floor {
            return Err(DimredError::RankDeficient {
                component: i,
                eigenvalue: lambda.to_f64().unwrap_or(f64::NAN),
                floor: EIGENVALUE_FLOOR,
            });
        }
    }

    let mut projection_w = Mat::zeros(p_out, d);
    for i in 0..p_out {
        let scale = F::one() / eig.values[i].sqrt();
        for (c, &v) in eig.vectors.row(i).iter().enumerate() {
            projection_w[(i, c)] = v * scale;
        }
    }
    Ok(PcaModel {
        d_in: d,
        p_out,
        mean,
        eigenvalues: eig.values[..p_out].to_vec(),
        projection_w,
    })
}

/// Centers `data` with the fitted mean and projects it to the whitened
/// space (`p_out x n`).
pub fn whiten<F: Real>(model: &PcaModel<F>, data: &Mat<F>) -> Result<Mat<F>, DimredError> {
    if data.rows() != model.d_in {
        return Err(DimredError::DimensionMismatch(format!(
            "whiten expects {} rows, got {}",
            model.d_in,
            data.rows()
        )));
    }
    let mut centered = data.clone();
    for r in 0..model.d_in {
        let m = model.mean[r];
        for x in centered.row_mut(r) {
            *x -= m;
        }
    }
    Ok(model.projection_w.matmul(&centered))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Deterministic pseudo-random fill, independent of the RNG crates.
    fn lcg_mat(rows: usize, cols: usize, mut state: u64) -> Mat<f64> {
        Mat::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    fn covariance(m: &Mat<f64>) -> Mat<f64> {
        let n = m.cols();
        let mut centered = m.clone();
        for r in 0..m.rows() {
            let mean: f64 = m.row(r).iter().sum::<f64>() / n as f64;
            for x in centered.row_mut(r) {
                *x -= mean;
            }
        }
        let mut cov = centered.matmul_nt(&centered);
        cov.scale(1.0 / (n - 1) as f64);
        cov
    }

    #[test]
    fn whitened_fit_data_has_identity_covariance() {
        // Correlated 2-D cloud: x2 = x1 + small noise.
        let base = lcg_mat(1, 400, 99);
        let data = Mat::from_fn(2, 400, |r, c| {
            if r == 0 {
                base[(0, c)]
            } else {
                base[(0, c)] * 0.9 + lcg_mat(1, 400, 7)[(0, c)] * 0.1
            }
        });
        let model = fit_pca(&data, 2).unwrap();
        let y = whiten(&model, &data).unwrap();
        let cov = covariance(&y);
        for r in 0..2 {
            for c in 0..2 {
                let want = if r == c { 1.0 } else { 0.0 };
                assert!((cov[(r, c)] - want).abs() < 1e-8, "cov[{r}{c}] = {}", cov[(r, c)]);
            }
        }
        assert!(model.eigenvalues[0] >= model.eigenvalues[1]);
    }

    #[test]
    fn constant_data_is_rank_deficient_and_centered_to_zero() {
        let data: Mat<f64> = Mat::from_fn(3, 20, |r, _| r as f64 + 1.0);
        let err = fit_pca(&data, 3).unwrap_err();
        match err {
            DimredError::RankDeficient { component, .. } => assert_eq!(component, 0),
            other => panic!("expected rank deficiency, got {other:?}"),
        }

        // A mean-repeated matrix whitens to exactly zero under any model.
        let spread = lcg_mat(3, 50, 3);
        let model = fit_pca(&spread, 2).unwrap();
        let repeated = Mat::from_fn(3, 6, |r, _| {
            spread.row(r).iter().sum::<f64>() / spread.cols() as f64
        });
        let y = whiten(&model, &repeated).unwrap();
        assert!(y.max_abs() < 1e-12);
    }

    #[test]
    fn dimension_errors_are_reported() {
        let data = lcg_mat(3, 10, 1);
        assert!(matches!(fit_pca(&data, 4), Err(DimredError::DimensionMismatch(_))));
        assert!(matches!(fit_pca(&data, 0), Err(DimredError::DimensionMismatch(_))));
        let narrow = lcg_mat(3, 1, 1);
        assert!(matches!(fit_pca(&narrow, 2), Err(DimredError::DimensionMismatch(_))));
        let model = fit_pca(&data, 2).unwrap();
        let wrong = lcg_mat(4, 10, 2);
        assert!(matches!(whiten(&model, &wrong), Err(DimredError::DimensionMismatch(_))));
    }
}
