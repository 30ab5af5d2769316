//! Whitening checked against an eigensolver built on a different principle:
//! bisection over the eigenvalue counting function of `cov - x I` (Sylvester
//! inertia of the Gaussian elimination pivots), never shared with the library.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use preictal_core::dimred::{fit_pca, whiten};
use preictal_core::mat::Mat;

fn covariance(data: &Mat<f64>) -> Mat<f64> {
    let (d, n) = (data.rows(), data.cols());
    let mut means = vec![0.0; d];
    for r in 0..d {
        means[r] = data.row(r).iter().sum::<f64>() / n as f64;
    }
    Mat::from_fn(d, d, |i, j| {
        let mut acc = 0.0;
        for c in 0..n {
            acc += (data[(i, c)] - means[i]) * (data[(j, c)] - means[j]);
        }
        acc / (n as f64 - 1.0)
    })
}

/// Number of eigenvalues of `a` strictly below `x`, by counting negative
/// pivots of the elimination of `a - x I`.
fn eigen_count_below(a: &Mat<f64>, x: f64) -> usize {
    let d = a.rows();
    let mut m = a.clone();
    for k in 0..d {
        m[(k, k)] -= x;
    }
    let mut negatives = 0;
    for k in 0..d {
        let pivot = m[(k, k)];
        if pivot < 0.0 {
            negatives += 1;
        }
        if pivot == 0.0 {
            // x landed on an eigenvalue of a leading minor; the bisection
            // caller treats this as "below" and keeps shrinking the bracket.
            negatives += 1;
            continue;
        }
        for i in k + 1..d {
            let f = m[(i, k)] / pivot;
            for j in k..d {
                m[(i, j)] -= f * m[(k, j)];
            }
        }
    }
    negatives
}

/// All eigenvalues, ascending, via bisection on the counting function.
fn bisection_eigenvalues(a: &Mat<f64>) -> Vec<f64> {
    let d = a.rows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..d {
        let radius: f64 = (0..d).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
        lo = lo.min(a[(i, i)] - radius);
        hi = hi.max(a[(i, i)] + radius);
    }
    (0..d)
        .map(|k| {
            let (mut l, mut h) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + h);
                if eigen_count_below(a, mid) <= k {
                    l = mid;
                } else {
                    h = mid;
                }
            }
            0.5 * (l + h)
        })
        .collect()
}

fn random_dataset(rng: &mut ChaCha8Rng) -> Mat<f64> {
    let d = rng.gen_range(2..=6);
    let n = rng.gen_range(40..=120);
    // Mix independent noise through a random square matrix so every
    // direction carries variance and the covariance is full rank.
    let mix = Mat::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
    let raw = Mat::from_fn(d, n, |_, _| rng.gen::<f64>() * 4.0 - 2.0);
    let mut mixed = mix.matmul(&raw);
    for r in 0..d {
        let offset = rng.gen::<f64>() * 10.0 - 5.0;
        for c in 0..n {
            mixed[(r, c)] += offset;
        }
    }
    mixed
}

#[test]
fn whitened_covariance_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    for _ in 0..10 {
        let data = random_dataset(&mut rng);
        let d = data.rows();
        let model = fit_pca(&data, d).unwrap();
        let white = whiten(&model, &data).unwrap();
        let cov = covariance(&white);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov[(i, j)] - want).abs() < 1e-8,
                    "cov[{i},{j}] = {} off identity",
                    cov[(i, j)]
                );
            }
        }
    }
}

#[test]
fn eigenvalues_match_bisection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(402);
    for _ in 0..10 {
        let data = random_dataset(&mut rng);
        let d = data.rows();
        let model = fit_pca(&data, d).unwrap();
        let mut oracle = bisection_eigenvalues(&covariance(&data));
        oracle.reverse();
        assert_eq!(model.eigenvalues.len(), d);
        for (got, want) in model.eigenvalues.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-8, "eigenvalue {got} vs oracle {want}");
        }
    }
}

#[test]
fn rank_deficient_input_is_rejected() {
    // Two perfectly correlated rows give a singular covariance.
    let data: Mat<f64> =
        Mat::from_fn(3, 30, |r, c| if r < 2 { (c as f64 * 0.37).sin() } else { c as f64 * 0.11 });
    assert!(fit_pca(&data, 3).is_err());
}
