//! Handcrafted spectral features for the comparison pipeline: the kind
//! of per-channel statistics a feature-engineering approach would feed
//! a classifier directly, computed from one multichannel window.

use crate::mat::Mat;
use crate::num::{real, Real};
use crate::spectral::{band_power, periodogram, Spectrum, BAND_EDGES_HZ};

use super::EvalError;

/// Floor under band energies before taking logarithms.
const LOG_ENERGY_FLOOR: f64 = 1e-12;

/// Length of the vector [`baseline_features`] produces for a window
/// with this many channels.
pub fn baseline_feature_count(channels: usize) -> usize {
    // Band powers, energy mean, energy spread, log band powers, then
    // one correlation per unordered channel pair.
    channels * BAND_EDGES_HZ.len() * 2 + channels * 2 + channels * (channels - 1) / 2
}

/// Flattens one `channels x samples` window into a fixed feature
/// vector, concatenated in this order:
///
/// 1. per-channel power in each frequency band (channel-major),
/// 2. per-channel mean squared amplitude,
/// 3. per-channel standard deviation of squared amplitude over time,
/// 4. per-channel log band powers, floored at ln(1e-12),
/// 5. correlation coefficients between channel power spectra, upper
///    triangle in row-major pair order.
///
/// A constant power spectrum has no defined correlation; such pairs
/// yield 1 when the two spectra are identical and 0 otherwise.
pub fn baseline_features<F: Real>(
    window: &Mat<F>,
    rate_hz: f64,
) -> Result<Vec<F>, EvalError> {
    let (channels, samples) = (window.rows(), window.cols());
    if samples < 2 {
        return Err(EvalError::WindowTooShort { samples });
    }

    let spectra: Vec<Spectrum<F>> =
        (0..channels).map(|c| periodogram(window.row(c), rate_hz)).collect();

    let mut features = Vec::with_capacity(baseline_feature_count(channels));
    let bands: Vec<Vec<F>> = spectra
        .iter()
        .map(|s| BAND_EDGES_HZ.iter().map(|&(lo, hi)| band_power(s, lo, hi)).collect())
        .collect();
    for ch in &bands {
        features.extend_from_slice(ch);
    }

    let inv_t = F::one() / real::<F>(samples as f64);
    let mut energy_means = Vec::with_capacity(channels);
    for c in 0..channels {
        let mean = window.row(c).iter().map(|&x| x * x).sum::<F>() * inv_t;
        energy_means.push(mean);
        features.push(mean);
    }
    for c in 0..channels {
        let mean = energy_means[c];
        let var = window
            .row(c)
            .iter()
            .map(|&x| {
                let e = x * x - mean;
                e * e
            })
            .sum::<F>()
            * inv_t;
        features.push(var.sqrt());
    }

    let floor = real::<F>(LOG_ENERGY_FLOOR);
    for ch in &bands {
        features.extend(ch.iter().map(|&p| p.max(floor).ln()));
    }

    for i in 0..channels {
        for j in i + 1..channels {
            features.push(spectrum_correlation(&spectra[i].power, &spectra[j].power));
        }
    }
    Ok(features)
}

fn spectrum_correlation<F: Real>(a: &[F], b: &[F]) -> F {
    let n = real::<F>(a.len() as f64);
    let mean = |v: &[F]| v.iter().copied().sum::<F>() / n;
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = F::zero();
    let mut va = F::zero();
    let mut vb = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    let denom = (va * vb).sqrt();
    if denom < real(1e-30) {
        return if a == b { F::one() } else { F::zero() };
    }
    cov / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feature_vector_has_documented_length() {
        let window: Mat<f64> = Mat::from_fn(4, 32, |r, c| ((r + 1) * c) as f64 * 0.01);
        let f = baseline_features(&window, 64.0).unwrap();
        assert_eq!(f.len(), baseline_feature_count(4));
        assert_eq!(f.len(), 4 * 5 + 4 + 4 + 4 * 5 + 6);
    }

    #[test]
    fn sine_power_lands_in_its_band()  {
        // 10 Hz unit sine sampled at 128 Hz for 64 samples: bin width
        // 2 Hz puts it exactly on a bin inside the 8-12 Hz band.
        let rate = 128.0;
        let window: Mat<f64> =
            Mat::from_fn(1, 64, |_, c| (2.0 * std::f64::consts::PI * 10.0 * c as f64 / rate).sin());
        let f = baseline_features(&window, rate).unwrap();
        let band_total: f64 = f[..5].iter().sum();
        assert!(f[2] / band_total >= 0.95, "8-12 Hz share {}", f[2] / band_total);
    }

    #[test]
    fn zero_window_floors_cleanly() {
        let window: Mat<f64> = Mat::zeros(2, 16);
        let f = baseline_features(&window, 64.0).unwrap();
        // Energy mean and spread are exactly zero.
        assert_eq!(f[10], 0.0);
        assert_eq!(f[12], 0.0);
        // Log band powers sit at the declared floor.
        for &v in &f[14..24] {
            assert_eq!(v, 1e-12f64.ln());
        }
        // Both spectra are identically zero, a matching degenerate pair.
        assert_eq!(f[24], 1.0);
    }

    #[test]
    fn identical_channels_correlate_perfectly() {
        let window: Mat<f64> = Mat::from_fn(2, 32, |_, c| (c as f64 * 0.4).sin() + 0.2);
        let f = baseline_features(&window, 64.0).unwrap();
        let corr = f[baseline_feature_count(2) - 1];
        assert!((corr - 1.0).abs() < 1e-9);
    }

    #[test]
    fn short_window_is_rejected() {
        let window: Mat<f64> = Mat::from_fn(2, 1, |_, _| 1.0);
        assert!(matches!(
            baseline_features(&window, 64.0),
            Err(EvalError::WindowTooShort { samples: 1 })
        ));
    }
}
