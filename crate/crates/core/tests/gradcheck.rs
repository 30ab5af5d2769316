//! Finite-difference verification of every analytic gradient the
//! trainers use. Central differences at f64 precision; the probe step
//! balances truncation against cancellation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use preictal_core::deepnet::{
    ae_loss_grad, softmax_loss_grad, stacked_loss_grad, AutoencoderLayer, SoftmaxHead,
    TrainConfig,
};
use preictal_core::mat::Mat;

const STEP: f64 = 1e-5;
const MAX_REL_ERR: f64 = 1e-6;

fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| scale * (2.0 * rng.gen::<f64>() - 1.0))
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0)).collect()
}

/// Relative error with an absolute floor so near-zero coordinates
/// compare on absolute terms.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Central-difference derivative of `loss` along one coordinate,
/// reached through `poke`.
fn central<P: Clone>(param: &P, poke: impl Fn(&mut P, f64), loss: impl Fn(&P) -> f64) -> f64 {
    let mut hi = param.clone();
    poke(&mut hi, STEP);
    let mut lo = param.clone();
    poke(&mut lo, -STEP);
    (loss(&hi) - loss(&lo)) / (2.0 * STEP)
}

fn check_mat<P: Clone>(
    name: &str,
    instance: usize,
    param: &P,
    analytic: &Mat<f64>,
    poke: impl Fn(&mut P, usize, usize, f64),
    loss: impl Fn(&P) -> f64,
) {
    for r in 0..analytic.rows() {
        for c in 0..analytic.cols() {
            let numeric = central(param, |p, d| poke(p, r, c, d), &loss);
            let err = rel_err(analytic[(r, c)], numeric);
            assert!(
                err < MAX_REL_ERR,
                "{name}[{r},{c}] instance {instance}: analytic {} vs numeric {numeric}, rel err {err}",
                analytic[(r, c)]
            );
        }
    }
}

#[test]
fn autoencoder_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for instance in 0..20 {
        let (d_in, d_hid, batch) =
            (2 + instance % 4, 1 + instance % 3, 1 + instance % 5);
        let layer = AutoencoderLayer {
            w_enc: rand_mat(&mut rng, d_hid, d_in, 0.8),
            b_enc: rand_vec(&mut rng, d_hid, 0.5),
            w_dec: rand_mat(&mut rng, d_in, d_hid, 0.8),
            b_dec: rand_vec(&mut rng, d_in, 0.5),
        };
        let data = rand_mat(&mut rng, d_in, batch, 1.0);
        let cfg = TrainConfig {
            l2_coeff: 0.013,
            sparsity_coeff: 0.7,
            sparsity_target: 0.2,
            ..TrainConfig::pretrain_defaults(0)
        };
        let loss = |l: &AutoencoderLayer<f64>| ae_loss_grad(l, &data, &cfg).0;
        let (_, g) = ae_loss_grad(&layer, &data, &cfg);

        check_mat("w_enc", instance, &layer, &g.w_enc, |l, r, c, d| l.w_enc[(r, c)] += d, loss);
        check_mat("w_dec", instance, &layer, &g.w_dec, |l, r, c, d| l.w_dec[(r, c)] += d, loss);
        for j in 0..d_hid {
            let numeric = central(&layer, |l, d| l.b_enc[j] += d, loss);
            assert!(rel_err(g.b_enc[j], numeric) < MAX_REL_ERR, "b_enc[{j}] instance {instance}");
        }
        for j in 0..d_in {
            let numeric = central(&layer, |l, d| l.b_dec[j] += d, loss);
            assert!(rel_err(g.b_dec[j], numeric) < MAX_REL_ERR, "b_dec[{j}] instance {instance}");
        }
    }
}

#[test]
fn softmax_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for instance in 0..20 {
        let (dim, batch) = (2 + instance % 5, 2 + instance % 6);
        let head = SoftmaxHead {
            w: rand_mat(&mut rng, 2, dim, 1.0),
            b: rand_vec(&mut rng, 2, 0.5),
        };
        let features = rand_mat(&mut rng, dim, batch, 1.5);
        let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..2)).collect();
        let l2 = 0.021;
        let loss = |h: &SoftmaxHead<f64>| softmax_loss_grad(h, &features, &labels, l2).0;
        let (_, g) = softmax_loss_grad(&head, &features, &labels, l2);

        check_mat("head w", instance, &head, &g.w, |h, r, c, d| h.w[(r, c)] += d, loss);
        for j in 0..2 {
            let numeric = central(&head, |h, d| h.b[j] += d, loss);
            assert!(rel_err(g.b[j], numeric) < MAX_REL_ERR, "head b[{j}] instance {instance}");
        }
    }
}

#[test]
fn stacked_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for instance in 0..20 {
        let d_in = 4 + instance % 3;
        let dims = [d_in, 3, 2];
        let batch = 2 + instance % 4;
        let layers: Vec<AutoencoderLayer<f64>> = (0..2)
            .map(|i| AutoencoderLayer {
                w_enc: rand_mat(&mut rng, dims[i + 1], dims[i], 0.9),
                b_enc: rand_vec(&mut rng, dims[i + 1], 0.5),
                w_dec: rand_mat(&mut rng, dims[i], dims[i + 1], 0.9),
                b_dec: rand_vec(&mut rng, dims[i], 0.5),
            })
            .collect();
        let head = SoftmaxHead {
            w: rand_mat(&mut rng, 2, 2, 1.0),
            b: rand_vec(&mut rng, 2, 0.5),
        };
        let data = rand_mat(&mut rng, d_in, batch, 1.2);
        let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..2)).collect();
        let l2 = 0.017;

        type Params = (Vec<AutoencoderLayer<f64>>, SoftmaxHead<f64>);
        let params: Params = (layers, head);
        let loss =
            |p: &Params| stacked_loss_grad(&p.0, &p.1, &data, &labels, l2).0;
        let (_, enc_g, head_g) = stacked_loss_grad(&params.0, &params.1, &data, &labels, l2);

        for (i, g) in enc_g.iter().enumerate() {
            check_mat(
                "stacked w_enc",
                instance,
                &params,
                &g.w,
                |p: &mut Params, r, c, d| p.0[i].w_enc[(r, c)] += d,
                loss,
            );
            for j in 0..g.b.len() {
                let numeric = central(&params, |p, d| p.0[i].b_enc[j] += d, loss);
                assert!(
                    rel_err(g.b[j], numeric) < MAX_REL_ERR,
                    "stacked b_enc layer {i}[{j}] instance {instance}"
                );
            }
        }
        check_mat(
            "stacked head w",
            instance,
            &params,
            &head_g.w,
            |p: &mut Params, r, c, d| p.1.w[(r, c)] += d,
            loss,
        );
        for j in 0..head_g.b.len() {
            let numeric = central(&params, |p, d| p.1.b[j] += d, loss);
            assert!(
                rel_err(head_g.b[j], numeric) < MAX_REL_ERR,
                "stacked head b[{j}] instance {instance}"
            );
        }
    }
}
