use std::time::Instant;

use preictal_core::eval::{fit_dataset, run_baseline, run_loocv, window_accuracy, HarnessConfig};
use preictal_core::signal::{generate_synthetic_dataset, SyntheticGenConfig, WindowSpec};

fn probe_config() -> HarnessConfig {
    let mut cfg = HarnessConfig::defaults(42);
    if let Ok(beta) = std::env::var("PROBE_BETA") {
        cfg.sparsity_coeff = beta.parse().unwrap();
    }
    if let Ok(e) = std::env::var("PROBE_STEPS") {
        let e: usize = e.parse().unwrap();
        cfg.pretrain_steps = e;
        cfg.finetune_steps = e;
    }
    if let Ok(b) = std::env::var("PROBE_BATCH") {
        cfg.batch_size = b.parse().unwrap();
    }
    if let Ok(m) = std::env::var("PROBE_M") {
        cfg.m_outputs = m.parse().unwrap();
    }
    if let Ok(w) = std::env::var("PROBE_WIN") {
        let w: usize = w.parse().unwrap();
        cfg.window = WindowSpec { window_len: w, hop: w / 2 };
    }
    if let Ok(h) = std::env::var("PROBE_HOP") {
        cfg.window.hop = h.parse().unwrap();
    }
    if let Ok(l) = std::env::var("PROBE_LAMBDA") {
        cfg.l2_coeff = l.parse().unwrap();
    }
    if let Ok(h) = std::env::var("PROBE_HIDDEN") {
        cfg.hidden = h.split(',').map(|x| x.parse().unwrap()).collect();
    }
    if let Ok(g) = std::env::var("PROBE_SIGMA") {
        cfg.scaler_spread = g.parse().unwrap();
    }
    cfg
}

#[test]
#[ignore]
fn probe_baseline_accuracy() {
    let segments = generate_synthetic_dataset(&SyntheticGenConfig::default()).unwrap();
    let cfg = HarnessConfig::defaults(42);
    let start = Instant::now();
    let (cm, report, records) = run_baseline::<f64>(&segments, &cfg).unwrap();
    let correct = records.iter().filter(|r| r.predicted == r.truth).count();
    eprintln!(
        "baseline accuracy {}/{} wall {:.1}s",
        correct,
        records.len(),
        start.elapsed().as_secs_f64()
    );
    eprintln!("{}", cm.table_text());
    eprintln!("{}", report.summary_text());
}

#[test]
#[ignore]
fn probe_training_fit() {
    let mut gen_cfg = SyntheticGenConfig::default();
    if let Ok(n) = std::env::var("PROBE_N") {
        let n: usize = n.parse().unwrap();
        gen_cfg.n_interictal = n;
        gen_cfg.n_preictal = n;
    }
    let segments = generate_synthetic_dataset(&gen_cfg).unwrap();
    let cfg = probe_config();
    let start = Instant::now();
    let (pipe, net, _, summary) = fit_dataset::<f64>(&segments, &cfg).unwrap();
    let acc = window_accuracy(&pipe, &net, &segments, &cfg).unwrap();
    eprintln!(
        "train window accuracy {acc:.3} wall {:.1}s  head last {:.4} reverts {}  fine last {:.4} reverts {}",
        start.elapsed().as_secs_f64(),
        summary.head.loss_trace.last().unwrap(),
        summary.head.reverted_epochs,
        summary.finetune.loss_trace.last().unwrap(),
        summary.finetune.reverted_epochs,
    );
}

#[test]
#[ignore]
fn probe_window_power_separation() {
    use preictal_core::dimred::transform;
    use preictal_core::signal::{downsample, windowize, Label};

    let segments = generate_synthetic_dataset(&SyntheticGenConfig::default()).unwrap();
    let cfg = probe_config();
    let (pipe, _, _, _) = fit_dataset::<f64>(&segments, &cfg).unwrap();
    let mut stats: [(Vec<f64>, &str); 2] =
        [(Vec::new(), "interictal"), (Vec::new(), "preictal")];
    for seg in &segments {
        let reduced = downsample(seg, cfg.downsample_factor).unwrap();
        let sources = transform(&pipe, &reduced.channels_matrix::<f64>()).unwrap();
        let windows = windowize(&sources, cfg.window).unwrap();
        let slot = if seg.label == Label::Preictal { 1 } else { 0 };
        for w in windows {
            let p = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
            stats[slot].0.push(p);
        }
    }
    for (values, name) in &stats {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        eprintln!(
            "{name}: mean window power {mean:.4} sd {:.4} range [{lo:.4}, {hi:.4}] over {} windows",
            var.sqrt(),
            values.len()
        );
    }
}

#[test]
#[ignore]
fn probe_loocv_accuracy() {
    let mut gen_cfg = SyntheticGenConfig::default();
    if let Ok(n) = std::env::var("PROBE_N") {
        let n: usize = n.parse().unwrap();
        gen_cfg.n_interictal = n;
        gen_cfg.n_preictal = n;
    }
    let segments = generate_synthetic_dataset(&gen_cfg).unwrap();
    let cfg = probe_config();
    let start = Instant::now();
    let (cm, report, records) = if std::env::var("PROBE_F32").is_ok() {
        run_loocv::<f32>(&segments, &cfg).unwrap()
    } else {
        run_loocv::<f64>(&segments, &cfg).unwrap()
    };
    let elapsed = start.elapsed();
    for r in &records {
        eprintln!("{r}");
    }
    let correct = records.iter().filter(|r| r.predicted == r.truth).count();
    eprintln!(
        "accuracy {}/{} folds, wall {:.1}s ({:.2}s/fold)",
        correct,
        records.len(),
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() / records.len() as f64
    );
    eprintln!("{}", cm.table_text());
    eprintln!("{}", report.summary_text());
}
