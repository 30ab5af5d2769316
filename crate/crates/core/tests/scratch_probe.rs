use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use preictal_core::deepnet::{train_stacked, TrainConfig};
use preictal_core::mat::Mat;

#[test]
#[ignore]
fn probe_stacked_training() {
    let n = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut data = Mat::zeros(6, n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..n {
        let y = c % 2;
        for r in 0..6 {
            let center = if y == 0 { 1.0 } else { -1.0 };
            data[(r, c)] = center + 0.3 * (rng.gen::<f64>() - 0.5);
        }
        labels.push(y);
    }
    let beta: f64 = std::env::var("PROBE_BETA").map(|v| v.parse().unwrap()).unwrap_or(3.0);
    let pre_epochs: usize =
        std::env::var("PROBE_PRE").map(|v| v.parse().unwrap()).unwrap_or(30);
    let fine_epochs: usize =
        std::env::var("PROBE_FINE").map(|v| v.parse().unwrap()).unwrap_or(60);
    let batch: usize =
        std::env::var("PROBE_BATCH").map(|v| v.parse().unwrap()).unwrap_or(32);
    let pre = TrainConfig {
        epochs: pre_epochs,
        sparsity_coeff: beta,
        batch_size: batch,
        ..TrainConfig::pretrain_defaults(17)
    };
    let fine = TrainConfig {
        epochs: fine_epochs,
        sparsity_coeff: beta,
        batch_size: batch,
        ..TrainConfig::finetune_defaults(18)
    };
    let (net, summary) = train_stacked(&data, &labels, &[4, 3], &pre, &fine).unwrap();
    for (i, r) in summary.pretrain.iter().enumerate() {
        eprintln!(
            "pretrain {i}: first {:.6} last {:.6} reverts {} lr {:.3e}",
            r.loss_trace[0],
            r.loss_trace.last().unwrap(),
            r.reverted_epochs,
            r.final_learning_rate
        );
    }
    eprintln!(
        "head: first {:.6} last {:.6} reverts {} lr {:.3e}",
        summary.head.loss_trace[0],
        summary.head.loss_trace.last().unwrap(),
        summary.head.reverted_epochs,
        summary.head.final_learning_rate
    );
    eprintln!(
        "fine: first {:.6} last {:.6} reverts {} lr {:.3e}",
        summary.finetune.loss_trace[0],
        summary.finetune.loss_trace.last().unwrap(),
        summary.finetune.reverted_epochs,
        summary.finetune.final_learning_rate
    );
    let h = net.encode(&data);
    let mut mins = vec![f64::INFINITY; h.rows()];
    let mut maxs = vec![f64::NEG_INFINITY; h.rows()];
    for r in 0..h.rows() {
        for c in 0..h.cols() {
            mins[r] = mins[r].min(h[(r, c)]);
            maxs[r] = maxs[r].max(h[(r, c)]);
        }
    }
    eprintln!("top code ranges: {:?}", mins.iter().zip(&maxs).collect::<Vec<_>>());
    let mut mean0 = vec![0.0; h.rows()];
    let mut mean1 = vec![0.0; h.rows()];
    for c in 0..h.cols() {
        let dst = if labels[c] == 0 { &mut mean0 } else { &mut mean1 };
        for r in 0..h.rows() {
            dst[r] += h[(r, c)] / (n as f64 / 2.0);
        }
    }
    eprintln!("class-0 code means: {mean0:?}");
    eprintln!("class-1 code means: {mean1:?}");
    let mut correct = 0;
    for c in 0..n {
        let col = data.col(c);
        let (label, _) = preictal_core::deepnet::predict_label(&net, &col);
        let want = if labels[c] == 0 {
            preictal_core::signal::Label::Preictal
        } else {
            preictal_core::signal::Label::Interictal
        };
        if label == want {
            correct += 1;
        }
    }
    eprintln!("train accuracy: {correct}/{n}");
}
