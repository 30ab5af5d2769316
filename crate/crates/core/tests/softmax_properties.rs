//! Probability-output properties of the classifier head over a large batch
//! of random inputs, including magnitudes that would overflow a naive
//! exponentiation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use preictal_core::deepnet::{softmax_columns, softmax_predict, SoftmaxHead};
use preictal_core::mat::Mat;

const CASES: usize = 1000;

fn random_logits(rng: &mut ChaCha8Rng) -> Mat<f64> {
    // Mix moderate values with near-overflow magnitudes.
    let scale = if rng.gen::<f64>() < 0.3 { 700.0 } else { 8.0 };
    Mat::from_fn(2, 1, |_, _| (rng.gen::<f64>() * 2.0 - 1.0) * scale)
}

#[test]
fn columns_always_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..CASES {
        let p = softmax_columns(&random_logits(&mut rng));
        let sum = p[(0, 0)] + p[(1, 0)];
        assert!((sum - 1.0).abs() < 1e-12, "column sum {sum}");
        assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}

#[test]
fn adding_a_constant_to_every_score_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    for _ in 0..CASES {
        let logits = random_logits(&mut rng);
        let shift = (rng.gen::<f64>() * 2.0 - 1.0) * 50.0;
        let shifted = logits.map(|v| v + shift);
        let p = softmax_columns(&logits);
        let q = softmax_columns(&shifted);
        for (a, b) in p.as_slice().iter().zip(q.as_slice()) {
            assert!((a - b).abs() < 1e-12, "shift by {shift} moved {a} to {b}");
        }
    }
}

#[test]
fn head_probabilities_agree_with_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    for _ in 0..CASES {
        let head = SoftmaxHead {
            w: Mat::from_fn(2, 3, |_, _| rng.gen::<f64>() * 4.0 - 2.0),
            b: vec![rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5],
        };
        let x = Mat::from_fn(3, 1, |_, _| rng.gen::<f64>() * 6.0 - 3.0);
        let p = softmax_predict(&head, &x);
        // Direct evaluation of the two class scores.
        let mut scores = [0.0f64; 2];
        for (r, s) in scores.iter_mut().enumerate() {
            *s = head.b[r];
            for j in 0..3 {
                *s += head.w[(r, j)] * x[(j, 0)];
            }
        }
        let z = scores[0].exp() + scores[1].exp();
        for r in 0..2 {
            assert!((p[(r, 0)] - scores[r].exp() / z).abs() < 1e-12);
        }
    }
}
