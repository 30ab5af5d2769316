//! End-to-end cross-validation drivers. Each fold refits the whole
//! chain (reduction pipeline, then the window classifier) on the
//! training segments only, and scores the held-out segment by majority
//! vote over its windows.

use std::fmt;

use crate::deepnet::{
    predict_label, softmax_predict, train_softmax, train_stacked_spread, StackedNetwork,
    TrainConfig, TrainSummary,
};
use crate::dimred::{fit_pipeline, transform, DimredConfig, DimredPipeline, IicaDiagnostics};
use crate::mat::Mat;
use crate::num::{real, Real};
use crate::signal::{downsample, windowize, EegSegment, Label, SignalError, WindowSpec};

use super::{
    baseline_features, confusion, loocv_folds, metrics, ConfusionMatrix, EvalError, MetricsReport,
};

/// All tunables of the evaluation chain. Zero for any of the component
/// counts means "derive from the data": every channel retained, one
/// candidate source per component, half the candidates kept.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub downsample_factor: usize,
    pub window: WindowSpec,
    pub p_components: usize,
    pub k_sources: usize,
    pub m_outputs: usize,
    pub sweeps: usize,
    pub burn_in: usize,
    pub alpha: f64,
    pub noise_var: f64,
    pub hidden: Vec<usize>,
    /// Optimizer steps per training stage. Epoch counts are derived from
    /// the fold's window count, so the compute budget stays flat as the
    /// dataset grows instead of scaling with it.
    pub pretrain_steps: usize,
    pub finetune_steps: usize,
    pub pretrain_rate: f64,
    pub finetune_rate: f64,
    pub l2_coeff: f64,
    pub sparsity_coeff: f64,
    pub sparsity_target: f64,
    pub batch_size: usize,
    /// Post-scaling standard deviation of the network inputs.
    pub scaler_spread: f64,
    pub seed: u64,
}

impl HarnessConfig {
    pub fn defaults(seed: u64) -> Self {
        HarnessConfig {
            downsample_factor: 2,
            window: WindowSpec { window_len: 16, hop: 4 },
            p_components: 0,
            k_sources: 0,
            m_outputs: 0,
            sweeps: 50,
            burn_in: 12,
            alpha: 2.0,
            noise_var: 0.01,
            hidden: vec![32, 16],
            pretrain_steps: 26_400,
            finetune_steps: 26_400,
            pretrain_rate: 0.1,
            finetune_rate: 0.01,
            l2_coeff: 1e-4,
            sparsity_coeff: 1.0,
            sparsity_target: 0.05,
            batch_size: 32,
            scaler_spread: 1.0,
            seed,
        }
    }

    pub fn dimred_config(&self, channels: usize, seed: u64) -> DimredConfig {
        let p = if self.p_components == 0 { channels } else { self.p_components };
        let k = if self.k_sources == 0 { p } else { self.k_sources };
        let m = if self.m_outputs == 0 { k.div_ceil(2) } else { self.m_outputs };
        DimredConfig {
            p_out: p,
            k_trunc: k,
            m_out: m,
            sweeps: self.sweeps,
            burn_in: self.burn_in,
            alpha: self.alpha,
            sigma_e2: self.noise_var,
            seed,
        }
    }

    /// Epochs that fit the step budget at this dataset size. Short tail
    /// batches are dropped during training, so a full epoch contributes
    /// `n_windows / batch_size` steps (at least one).
    fn epochs_for(&self, steps: usize, n_windows: usize) -> usize {
        let per_epoch = (n_windows / self.batch_size).max(1);
        steps.div_ceil(per_epoch)
    }

    pub fn pretrain_config(&self, n_windows: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs_for(self.pretrain_steps, n_windows),
            learning_rate: self.pretrain_rate,
            l2_coeff: self.l2_coeff,
            sparsity_coeff: self.sparsity_coeff,
            sparsity_target: self.sparsity_target,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn finetune_config(&self, n_windows: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs_for(self.finetune_steps, n_windows),
            learning_rate: self.finetune_rate,
            ..self.pretrain_config(n_windows, seed)
        }
    }

    /// Settings for the comparison classifier, which trains the softmax
    /// head directly on handcrafted features.
    pub fn baseline_config(&self, n_windows: usize, seed: u64) -> TrainConfig {
        self.pretrain_config(n_windows, seed)
    }

    /// Seed for the fine-tuning pass, placed after the per-layer and
    /// head seeds that pretraining consumes.
    fn finetune_seed(&self, base: u64) -> u64 {
        base.wrapping_add(self.hidden.len() as u64 + 1)
    }
}

/// Outcome of one fold: what the held-out segment was and how the
/// window votes fell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldRecord {
    pub fold: usize,
    pub segment_id: String,
    pub truth: Label,
    pub predicted: Label,
    pub preictal_votes: usize,
    pub windows: usize,
}

impl fmt::Display for FoldRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fold {:3}  {}  truth {}  predicted {}  preictal votes {}/{}",
            self.fold, self.segment_id, self.truth, self.predicted, self.preictal_votes,
            self.windows
        )
    }
}

/// Majority-vote verdict for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPrediction<F> {
    pub label: Label,
    /// Mean preictal probability across windows.
    pub preictal_probability: F,
    pub preictal_votes: usize,
    pub windows: usize,
}

/// Runs one segment through the fitted chain: downsample, reduce,
/// window, classify each window, then majority vote with ties going to
/// preictal. This is the single prediction path shared by evaluation
/// and the network service.
pub fn predict_segment<F: Real>(
    pipeline: &DimredPipeline<F>,
    net: &StackedNetwork<F>,
    segment: &EegSegment,
    downsample_factor: usize,
    window: WindowSpec,
) -> Result<SegmentPrediction<F>, EvalError> {
    let reduced = downsample(segment, downsample_factor)?;
    let sources = transform(pipeline, &reduced.channels_matrix::<F>())?;
    let windows = windowize(&sources, window)?;

    let mut votes = 0usize;
    let mut prob_sum = F::zero();
    for w in &windows {
        let (label, _) = predict_label(net, w);
        if label == Label::Preictal {
            votes += 1;
        }
        let input = Mat::from_vec(w.len(), 1, w.clone());
        prob_sum += net.predict_proba(&input)[(0, 0)];
    }
    let n = windows.len();
    let label = if votes * 2 >= n { Label::Preictal } else { Label::Interictal };
    Ok(SegmentPrediction {
        label,
        preictal_probability: prob_sum / real(n as f64),
        preictal_votes: votes,
        windows: n,
    })
}

fn validate_dataset(segments: &[EegSegment]) -> Result<(), EvalError> {
    for (i, s) in segments.iter().enumerate() {
        if s.label == Label::Unlabeled {
            return Err(EvalError::UnlabeledSegment { index: i });
        }
        if s.channels() != segments[0].channels()
            || s.sampling_rate_hz != segments[0].sampling_rate_hz
        {
            return Err(EvalError::Signal(SignalError::DimensionMismatch(format!(
                "segment {i} has {} channels at {} Hz, expected {} at {} Hz",
                s.channels(),
                s.sampling_rate_hz,
                segments[0].channels(),
                segments[0].sampling_rate_hz
            ))));
        }
    }
    if !segments.iter().any(|s| s.label == Label::Preictal)
        || !segments.iter().any(|s| s.label == Label::Interictal)
    {
        return Err(EvalError::SingleClass);
    }
    Ok(())
}

fn pooled_columns<F: Real>(mats: &[Mat<F>], idx: &[usize]) -> Mat<F> {
    let rows = mats[idx[0]].rows();
    let total = idx.iter().map(|&i| mats[i].cols()).sum();
    let mut out = Mat::zeros(rows, total);
    let mut at = 0;
    for &i in idx {
        let m = &mats[i];
        for r in 0..rows {
            out.row_mut(r)[at..at + m.cols()].copy_from_slice(m.row(r));
        }
        at += m.cols();
    }
    out
}

fn columns_matrix<F: Real>(cols: &[Vec<F>]) -> Mat<F> {
    let mut out = Mat::zeros(cols[0].len(), cols.len());
    for (c, v) in cols.iter().enumerate() {
        out.set_col(c, v);
    }
    out
}

/// Cross-validates the full chain. Fold `i` derives its seed as the
/// run seed XOR `i`, so folds are reproducible independently of
/// execution order.
pub fn run_loocv<F: Real>(
    segments: &[EegSegment],
    cfg: &HarnessConfig,
) -> Result<(ConfusionMatrix, MetricsReport, Vec<FoldRecord>), EvalError> {
    let folds = loocv_folds(segments.len())?;
    validate_dataset(segments)?;

    let downsampled: Vec<EegSegment> = segments
        .iter()
        .map(|s| downsample(s, cfg.downsample_factor))
        .collect::<Result<_, _>>()?;
    let channel_mats: Vec<Mat<F>> =
        downsampled.iter().map(|s| s.channels_matrix()).collect();

    let mut records = Vec::with_capacity(folds.len());
    let mut pred = Vec::with_capacity(folds.len());
    let mut truth = Vec::with_capacity(folds.len());
    for fold in &folds {
        let fold_seed = cfg.seed ^ fold.test as u64;
        let pooled = pooled_columns(&channel_mats, &fold.train);
        let (pipe, _) = fit_pipeline(&pooled, &cfg.dimred_config(pooled.rows(), fold_seed))?;

        let mut cols = Vec::new();
        let mut labels = Vec::new();
        for &i in &fold.train {
            let sources = transform(&pipe, &channel_mats[i])?;
            for w in windowize(&sources, cfg.window)? {
                cols.push(w);
                labels.push(downsampled[i].label.code() as usize);
            }
        }
        let train_mat = columns_matrix(&cols);

        let (net, _) = train_stacked_spread(
            &train_mat,
            &labels,
            &cfg.hidden,
            &cfg.pretrain_config(labels.len(), fold_seed),
            &cfg.finetune_config(labels.len(), cfg.finetune_seed(fold_seed)),
            cfg.scaler_spread,
        )?;

        let p =
            predict_segment(&pipe, &net, &segments[fold.test], cfg.downsample_factor, cfg.window)?;
        pred.push(p.label);
        truth.push(segments[fold.test].label);
        records.push(FoldRecord {
            fold: fold.test,
            segment_id: segments[fold.test].segment_id.clone(),
            truth: segments[fold.test].label,
            predicted: p.label,
            preictal_votes: p.preictal_votes,
            windows: p.windows,
        });
    }

    let cm = confusion(&pred, &truth)?;
    Ok((cm, metrics(&cm), records))
}

/// Same cross-validation protocol with handcrafted features feeding
/// the softmax classifier alone; isolates what the learned features
/// contribute.
pub fn run_baseline<F: Real>(
    segments: &[EegSegment],
    cfg: &HarnessConfig,
) -> Result<(ConfusionMatrix, MetricsReport, Vec<FoldRecord>), EvalError> {
    let folds = loocv_folds(segments.len())?;
    validate_dataset(segments)?;

    let downsampled: Vec<EegSegment> = segments
        .iter()
        .map(|s| downsample(s, cfg.downsample_factor))
        .collect::<Result<_, _>>()?;

    // Features depend only on the segment, so compute them once.
    let mut feats: Vec<Vec<Vec<F>>> = Vec::with_capacity(downsampled.len());
    for s in &downsampled {
        let m = s.channels_matrix::<F>();
        let mut per_window = Vec::new();
        for flat in windowize(&m, cfg.window)? {
            let w = Mat::from_vec(m.rows(), cfg.window.window_len, flat);
            per_window.push(baseline_features(&w, s.sampling_rate_hz)?);
        }
        feats.push(per_window);
    }

    let dim = feats[0][0].len();
    let mut records = Vec::with_capacity(folds.len());
    let mut pred = Vec::with_capacity(folds.len());
    let mut truth = Vec::with_capacity(folds.len());
    for fold in &folds {
        let fold_seed = cfg.seed ^ fold.test as u64;

        // Feature standardization from training statistics only.
        let train_windows: Vec<&Vec<F>> =
            fold.train.iter().flat_map(|&i| feats[i].iter()).collect();
        let labels: Vec<usize> = fold
            .train
            .iter()
            .flat_map(|&i| {
                std::iter::repeat(downsampled[i].label.code() as usize).take(feats[i].len())
            })
            .collect();
        let inv_n = F::one() / real::<F>(train_windows.len() as f64);
        let mut mean = vec![F::zero(); dim];
        for w in &train_windows {
            for (m, &v) in mean.iter_mut().zip(w.iter()) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m *= inv_n;
        }
        let mut scale = vec![F::zero(); dim];
        for w in &train_windows {
            for (s, (&v, &m)) in scale.iter_mut().zip(w.iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut scale {
            let sd = (*s * inv_n).sqrt();
            *s = if sd < real(1e-12) { F::zero() } else { F::one() / sd };
        }
        let standardize = |w: &Vec<F>| -> Vec<F> {
            w.iter().zip(mean.iter().zip(&scale)).map(|(&v, (&m, &s))| (v - m) * s).collect()
        };

        let train_cols: Vec<Vec<F>> = train_windows.iter().map(|w| standardize(w)).collect();
        let train_mat = columns_matrix(&train_cols);
        let (head, _) =
            train_softmax(&train_mat, &labels, 2, &cfg.baseline_config(labels.len(), fold_seed))?;

        let test_cols: Vec<Vec<F>> = feats[fold.test].iter().map(standardize).collect();
        let test_mat = columns_matrix(&test_cols);
        let probs = softmax_predict(&head, &test_mat);
        let votes = (0..probs.cols()).filter(|&c| probs[(0, c)] >= probs[(1, c)]).count();
        let n = probs.cols();
        let label = if votes * 2 >= n { Label::Preictal } else { Label::Interictal };

        pred.push(label);
        truth.push(segments[fold.test].label);
        records.push(FoldRecord {
            fold: fold.test,
            segment_id: segments[fold.test].segment_id.clone(),
            truth: segments[fold.test].label,
            predicted: label,
            preictal_votes: votes,
            windows: n,
        });
    }

    let cm = confusion(&pred, &truth)?;
    Ok((cm, metrics(&cm), records))
}

/// Fits the reduction pipeline and classifier on the whole dataset,
/// the artifact-producing counterpart of one cross-validation fold.
pub fn fit_dataset<F: Real>(
    segments: &[EegSegment],
    cfg: &HarnessConfig,
) -> Result<(DimredPipeline<F>, StackedNetwork<F>, IicaDiagnostics, TrainSummary), EvalError> {
    if segments.is_empty() {
        return Err(EvalError::TooFewSegments { got: 0 });
    }
    validate_dataset(segments)?;

    let downsampled: Vec<EegSegment> = segments
        .iter()
        .map(|s| downsample(s, cfg.downsample_factor))
        .collect::<Result<_, _>>()?;
    let channel_mats: Vec<Mat<F>> =
        downsampled.iter().map(|s| s.channels_matrix()).collect();

    let all: Vec<usize> = (0..segments.len()).collect();
    let pooled = pooled_columns(&channel_mats, &all);
    let (pipe, diag) = fit_pipeline(&pooled, &cfg.dimred_config(pooled.rows(), cfg.seed))?;

    let mut cols = Vec::new();
    let mut labels = Vec::new();
    for (i, m) in channel_mats.iter().enumerate() {
        let sources = transform(&pipe, m)?;
        for w in windowize(&sources, cfg.window)? {
            cols.push(w);
            labels.push(downsampled[i].label.code() as usize);
        }
    }
    let train_mat = columns_matrix(&cols);
    let (net, summary) = train_stacked_spread(
        &train_mat,
        &labels,
        &cfg.hidden,
        &cfg.pretrain_config(labels.len(), cfg.seed),
        &cfg.finetune_config(labels.len(), cfg.finetune_seed(cfg.seed)),
        cfg.scaler_spread,
    )?;
    Ok((pipe, net, diag, summary))
}

/// Fraction of individual windows the fitted chain classifies
/// correctly, labels taken from their source segments.
pub fn window_accuracy<F: Real>(
    pipeline: &DimredPipeline<F>,
    net: &StackedNetwork<F>,
    segments: &[EegSegment],
    cfg: &HarnessConfig,
) -> Result<f64, EvalError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for seg in segments {
        let reduced = downsample(seg, cfg.downsample_factor)?;
        let sources = transform(pipeline, &reduced.channels_matrix::<F>())?;
        for w in windowize(&sources, cfg.window)? {
            let (label, _) = predict_label(net, &w);
            if label == seg.label {
                correct += 1;
            }
            total += 1;
        }
    }
    Ok(correct as f64 / total as f64)
}
