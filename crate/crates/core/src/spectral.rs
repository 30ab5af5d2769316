//! Frequency-domain helpers: a radix-2 FFT, one-sided periodograms, and
//! band-power integration.
//!
//! Signals are zero-padded to the next power of two. Periodogram bins are
//! scaled so that summing all of them recovers the mean-square power of
//! the original signal, which makes band powers directly comparable to
//! time-domain energy.

use crate::num::{real, Real};

/// Minimal complex value; only what the transform needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cx<F> {
    pub re: F,
    pub im: F,
}

impl<F: Real> Cx<F> {
    pub fn new(re: F, im: F) -> Self {
        Cx { re, im }
    }

    fn mul(self, other: Cx<F>) -> Cx<F> {
        Cx {
            re: self.re * other.re - self.im * other.im,
            im: self.re * other.im + self.im * other.re,
        }
    }

    fn add(self, other: Cx<F>) -> Cx<F> {
        Cx { re: self.re + other.re, im: self.im + other.im }
    }

    fn sub(self, other: Cx<F>) -> Cx<F> {
        Cx { re: self.re - other.re, im: self.im - other.im }
    }

    pub fn norm2(self) -> F {
        self.re * self.re + self.im * self.im
    }
}

pub fn next_pow2(n: usize) -> usize {
    n.next_power_of_two()
}

/// In-place iterative Cooley-Tukey FFT. Panics unless the length is a
/// power of two; callers zero-pad first.
pub fn fft<F: Real>(buf: &mut [Cx<F>]) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }

    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let angle = -2.0 * std::f64::consts::PI / len as f64;
        let w_len: Cx<F> = Cx::new(real(angle.cos()), real(angle.sin()));
        for chunk in buf.chunks_mut(len) {
            let mut w = Cx::new(F::one(), F::zero());
            let half = len / 2;
            for i in 0..half {
                let even = chunk[i];
                let odd = chunk[i + half].mul(w);
                chunk[i] = even.add(odd);
                chunk[i + half] = even.sub(odd);
                w = w.mul(w_len);
            }
        }
        len <<= 1;
    }
}

/// One-sided power spectrum. `power[k]` covers frequency `k * bin_hz`;
/// all bins summed equal the signal's mean-square power.
#[derive(Debug, Clone)]
pub struct Spectrum<F> {
    pub power: Vec<F>,
    pub bin_hz: f64,
}

impl<F: Real> Spectrum<F> {
    pub fn total_power(&self) -> F {
        self.power.iter().copied().sum()
    }
}

pub fn periodogram<F: Real>(signal: &[F], rate_hz: f64) -> Spectrum<F> {
    assert!(!signal.is_empty(), "periodogram needs at least one sample");
    let t = signal.len();
    let n = next_pow2(t);
    let mut buf: Vec<Cx<F>> = signal.iter().map(|&x| Cx::new(x, F::zero())).collect();
    buf.resize(n, Cx::new(F::zero(), F::zero()));
    fft(&mut buf);

    // Parseval with zero padding: sum_t x^2 = (1/N) sum_k |X_k|^2, so
    // |X_k|^2 / (N*T) summed over all k gives the mean-square power.
    // Folding the conjugate half doubles interior bins.
    let scale = real::<F>(1.0 / (n as f64 * t as f64));
    let half = n / 2;
    let mut power = Vec::with_capacity(half + 1);
    for k in 0..=half {
        let mut p = buf[k].norm2();
        if k != 0 && k != half {
            p += buf[n - k].norm2();
        }
        power.push(p * scale);
    }
    Spectrum { power, bin_hz: rate_hz / n as f64 }
}

/// Sums periodogram bins whose frequency falls in `[lo_hz, hi_hz)`.
/// Pass `f64::INFINITY` as the upper edge to take everything from `lo_hz`
/// up, Nyquist bin included.
pub fn band_power<F: Real>(spectrum: &Spectrum<F>, lo_hz: f64, hi_hz: f64) -> F {
    let mut acc = F::zero();
    for (k, &p) in spectrum.power.iter().enumerate() {
        let f = k as f64 * spectrum.bin_hz;
        if f >= lo_hz && f < hi_hz {
            acc += p;
        }
    }
    acc
}

/// The five analysis bands used by the handcrafted feature set, in Hz:
/// delta-ish 0-4, theta 4-8, alpha 8-12, beta 12-30, and everything from
/// 30 up to Nyquist.
pub const BAND_EDGES_HZ: [(f64, f64); 5] =
    [(0.0, 4.0), (4.0, 8.0), (8.0, 12.0), (12.0, 30.0), (30.0, f64::INFINITY)];

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_square(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let mut buf = vec![Cx::new(0.0f64, 0.0); 8];
        buf[0].re = 1.0;
        fft(&mut buf);
        for c in buf {
            assert!((c.re - 1.0).abs() < 1e-12 && c.im.abs() < 1e-12);
        }
    }

    #[test]
    fn on_bin_sine_concentrates_in_one_bin() {
        let rate = 256.0;
        let t = 256;
        let signal: Vec<f64> = (0..t)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 / rate).sin())
            .collect();
        let spec = periodogram(&signal, rate);
        let at_10 = band_power(&spec, 9.5, 10.5);
        assert!((at_10 - 0.5).abs() < 1e-9, "unit sine mean-square power is 1/2, got {at_10}");
        assert!(at_10 / spec.total_power() > 0.999);
    }

    #[test]
    fn spectrum_sums_to_mean_square_power() {
        // Length 100 forces zero padding to 128.
        let signal: Vec<f64> = (0..100)
            .map(|i| (i as f64 * 0.37).sin() + 0.25 * (i as f64 * 1.1).cos())
            .collect();
        let spec = periodogram(&signal, 200.0);
        assert!((spec.total_power() - mean_square(&signal)).abs() < 1e-9);
    }

    #[test]
    fn band_edges_partition_the_axis() {
        let signal: Vec<f64> = (0..64).map(|i| (i as f64 * 0.9).sin()).collect();
        let spec = periodogram(&signal, 128.0);
        let banded: f64 = BAND_EDGES_HZ
            .iter()
            .map(|&(lo, hi)| band_power(&spec, lo, hi))
            .sum();
        assert!((banded - spec.total_power()).abs() < 1e-12);
    }
}
