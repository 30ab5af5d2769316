//! Gradient computation and minibatch descent for the autoencoder
//! stack. All losses are written as closed-form functions of the
//! parameters so finite-difference checks can probe them directly.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mat::Mat;
use crate::num::{real, Real};

use super::{
    softmax_columns, AutoencoderLayer, InputScaler, SoftmaxHead, StackedNetwork, TrainConfig,
    TrainError,
};

/// Activation means are clamped to this margin before entering the
/// sparsity penalty so its logarithms stay finite.
const ACTIVATION_CLAMP: f64 = 1e-8;

/// Learning rates below this abort the halving schedule.
const LEARNING_RATE_FLOOR: f64 = 1e-12;

/// Gradients of an autoencoder loss with respect to all four parameter
/// blocks.
#[derive(Debug, Clone)]
pub struct AeGrads<F> {
    pub w_enc: Mat<F>,
    pub b_enc: Vec<F>,
    pub w_dec: Mat<F>,
    pub b_dec: Vec<F>,
}

/// Weight and bias gradient for one linear-plus-activation block.
#[derive(Debug, Clone)]
pub struct LayerGrads<F> {
    pub w: Mat<F>,
    pub b: Vec<F>,
}

/// Loss trajectory of one descent run. `loss_trace[0]` is the loss at
/// initialization; each accepted epoch appends its post-step loss, and
/// a rejected epoch repeats the previous value.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
    pub final_learning_rate: f64,
    pub reverted_epochs: usize,
}

/// Reports from the full stacked-training recipe, in execution order.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub pretrain: Vec<TrainReport>,
    pub head: TrainReport,
    pub finetune: TrainReport,
}

fn kl_bernoulli<F: Real>(rho: F, q: F) -> F {
    rho * (rho / q).ln() + (F::one() - rho) * ((F::one() - rho) / (F::one() - q)).ln()
}

/// Reconstruction loss of one autoencoder on a batch of input columns,
/// with its gradients.
///
/// The loss is the mean squared reconstruction error per column, plus
/// `l2_coeff` times the squared Frobenius norm of both weight matrices,
/// plus `sparsity_coeff` times the summed KL divergence between
/// `sparsity_target` and each hidden unit's mean activation over the
/// batch. Mean activations are clamped away from 0 and 1; a clamped
/// unit contributes no sparsity gradient.
pub fn ae_loss_grad<F: Real>(
    layer: &AutoencoderLayer<F>,
    data: &Mat<F>,
    cfg: &TrainConfig,
) -> (F, AeGrads<F>) {
    let batch = data.cols();
    debug_assert!(batch > 0 && data.rows() == layer.input_dim());
    let inv_b = F::one() / real::<F>(batch as f64);
    let lambda = real::<F>(cfg.l2_coeff);
    let beta = real::<F>(cfg.sparsity_coeff);
    let rho = real::<F>(cfg.sparsity_target);
    let clamp_lo = real::<F>(ACTIVATION_CLAMP);
    let clamp_hi = F::one() - clamp_lo;

    let hidden = layer.encode(data);
    let recon = layer.decode(&hidden);
    let diff = recon.sub(data);

    let mut loss = diff.frob2() * inv_b
        + lambda * (layer.w_enc.frob2() + layer.w_dec.frob2());

    // Per-unit mean activations and the sparsity penalty.
    let mut q = hidden.row_sums();
    let mut sparsity_delta = vec![F::zero(); q.len()];
    for (j, qj) in q.iter_mut().enumerate() {
        *qj *= inv_b;
        let clamped = *qj < clamp_lo || *qj > clamp_hi;
        let qc = qj.max(clamp_lo).min(clamp_hi);
        loss += beta * kl_bernoulli(rho, qc);
        if !clamped {
            sparsity_delta[j] = beta * inv_b * (-(rho / qc) + (F::one() - rho) / (F::one() - qc));
        }
    }

    // delta_out = (2/B) (recon - data) .* recon .* (1 - recon)
    let two_inv_b = real::<F>(2.0) * inv_b;
    let mut delta_out = diff;
    for (d, &r) in delta_out.as_mut_slice().iter_mut().zip(recon.as_slice()) {
        *d *= two_inv_b * r * (F::one() - r);
    }

    let mut g_w_dec = delta_out.matmul_nt(&hidden);
    g_w_dec.axpy(lambda + lambda, &layer.w_dec);
    let g_b_dec = delta_out.row_sums();

    let mut back = layer.w_dec.matmul_tn(&delta_out);
    for j in 0..back.rows() {
        let s = sparsity_delta[j];
        for (bk, &h) in back.row_mut(j).iter_mut().zip(hidden.row(j)) {
            *bk = (*bk + s) * h * (F::one() - h);
        }
    }

    let mut g_w_enc = back.matmul_nt(data);
    g_w_enc.axpy(lambda + lambda, &layer.w_enc);
    let g_b_enc = back.row_sums();

    (loss, AeGrads { w_enc: g_w_enc, b_enc: g_b_enc, w_dec: g_w_dec, b_dec: g_b_dec })
}

/// Cross-entropy of the softmax read-out on a feature batch, with
/// gradients. Labels are class indices per column. The loss adds
/// `l2` times the squared Frobenius norm of the weight matrix.
pub fn softmax_loss_grad<F: Real>(
    head: &SoftmaxHead<F>,
    features: &Mat<F>,
    labels: &[usize],
    l2: F,
) -> (F, LayerGrads<F>) {
    let batch = features.cols();
    debug_assert!(batch == labels.len() && features.rows() == head.feature_dim());
    let inv_b = F::one() / real::<F>(batch as f64);

    let logits = head.logits(features);
    let mut ce = F::zero();
    for (c, &y) in labels.iter().enumerate() {
        let mut maxv = logits[(0, c)];
        for r in 1..logits.rows() {
            maxv = maxv.max(logits[(r, c)]);
        }
        let mut sum = F::zero();
        for r in 0..logits.rows() {
            sum += (logits[(r, c)] - maxv).exp();
        }
        ce += maxv + sum.ln() - logits[(y, c)];
    }
    let loss = ce * inv_b + l2 * head.w.frob2();

    let mut delta = softmax_columns(&logits);
    for (c, &y) in labels.iter().enumerate() {
        delta[(y, c)] -= F::one();
    }
    delta.scale(inv_b);

    let mut g_w = delta.matmul_nt(features);
    g_w.axpy(l2 + l2, &head.w);
    let g_b = delta.row_sums();
    (loss, LayerGrads { w: g_w, b: g_b })
}

/// Cross-entropy of the whole encoder chain plus head, with gradients
/// for every encoder and the head. Decoder halves do not appear in the
/// prediction path, so they get no gradient and no penalty here; the L2
/// term covers the encoder weights and the head weights.
pub fn stacked_loss_grad<F: Real>(
    layers: &[AutoencoderLayer<F>],
    head: &SoftmaxHead<F>,
    data: &Mat<F>,
    labels: &[usize],
    l2: F,
) -> (F, Vec<LayerGrads<F>>, LayerGrads<F>) {
    let batch = data.cols();
    debug_assert!(batch == labels.len());
    let inv_b = F::one() / real::<F>(batch as f64);

    // Forward pass keeping every activation; acts[0] is the input.
    let mut acts: Vec<Mat<F>> = Vec::with_capacity(layers.len() + 1);
    acts.push(data.clone());
    for layer in layers {
        let next = layer.encode(acts.last().unwrap());
        acts.push(next);
    }

    let logits = head.logits(acts.last().unwrap());
    let mut ce = F::zero();
    for (c, &y) in labels.iter().enumerate() {
        let mut maxv = logits[(0, c)];
        for r in 1..logits.rows() {
            maxv = maxv.max(logits[(r, c)]);
        }
        let mut sum = F::zero();
        for r in 0..logits.rows() {
            sum += (logits[(r, c)] - maxv).exp();
        }
        ce += maxv + sum.ln() - logits[(y, c)];
    }
    let mut loss = ce * inv_b + l2 * head.w.frob2();
    for layer in layers {
        loss += l2 * layer.w_enc.frob2();
    }

    let mut delta = softmax_columns(&logits);
    for (c, &y) in labels.iter().enumerate() {
        delta[(y, c)] -= F::one();
    }
    delta.scale(inv_b);

    let mut g_w = delta.matmul_nt(acts.last().unwrap());
    g_w.axpy(l2 + l2, &head.w);
    let head_grads = LayerGrads { w: g_w, b: delta.row_sums() };

    // Backpropagate through the encoders, deepest first.
    let mut enc_grads: Vec<LayerGrads<F>> = Vec::with_capacity(layers.len());
    let mut back = head.w.matmul_tn(&delta);
    for (i, layer) in layers.iter().enumerate().rev() {
        let h = &acts[i + 1];
        for (bk, &hv) in back.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *bk *= hv * (F::one() - hv);
        }
        let mut g_w = back.matmul_nt(&acts[i]);
        g_w.axpy(l2 + l2, &layer.w_enc);
        enc_grads.push(LayerGrads { w: g_w, b: back.row_sums() });
        if i > 0 {
            back = layer.w_enc.matmul_tn(&back);
        }
    }
    enc_grads.reverse();

    (loss, enc_grads, head_grads)
}

fn glorot<F: Real>(rows: usize, cols: usize, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Mat<F> {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| real(a * (2.0 * rng.gen::<f64>() - 1.0)))
}

fn step_mat<F: Real>(w: &mut Mat<F>, g: &Mat<F>, lr: F) {
    w.axpy(-lr, g);
}

fn step_vec<F: Real>(b: &mut [F], g: &[F], lr: F) {
    for (bv, &gv) in b.iter_mut().zip(g) {
        *bv -= lr * gv;
    }
}

fn validate_descent(cfg: &TrainConfig) -> Result<(), TrainError> {
    if cfg.batch_size == 0 {
        return Err(TrainError::InvalidConfig("batch_size must be at least 1".into()));
    }
    if !(cfg.learning_rate.is_finite() && cfg.learning_rate > 0.0) {
        return Err(TrainError::InvalidConfig("learning_rate must be positive".into()));
    }
    if !(cfg.l2_coeff.is_finite() && cfg.l2_coeff >= 0.0) {
        return Err(TrainError::InvalidConfig("l2_coeff must be non-negative".into()));
    }
    if !(cfg.sparsity_coeff.is_finite() && cfg.sparsity_coeff >= 0.0) {
        return Err(TrainError::InvalidConfig("sparsity_coeff must be non-negative".into()));
    }
    if !(cfg.sparsity_target > 0.0 && cfg.sparsity_target < 1.0) {
        return Err(TrainError::InvalidConfig("sparsity_target must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Minibatch descent with a monotone guard: after every epoch the loss
/// is measured on the full data; an epoch that raised it is undone and
/// the learning rate halved. A non-finite loss aborts with the epoch
/// index (counted from zero) that produced it.
fn run_epochs<F, P, L, S>(
    params: &mut P,
    cfg: &TrainConfig,
    n_samples: usize,
    full_loss: L,
    mut batch_step: S,
) -> Result<TrainReport, TrainError>
where
    F: Real,
    P: Clone,
    L: Fn(&P) -> F,
    S: FnMut(&mut P, &[usize], F),
{
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..n_samples).collect();
    let mut lr = cfg.learning_rate;
    let mut reverted = 0usize;

    let mut prev = full_loss(params);
    if !prev.is_finite() {
        return Err(TrainError::Diverged { epoch: 0 });
    }
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    trace.push(prev.to_f64().unwrap_or(f64::NAN));

    for epoch in 0..cfg.epochs {
        let snapshot = params.clone();
        indices.shuffle(&mut rng);
        // A short tail batch weights its samples more than a full one, which
        // skews the epoch direction; drop it unless it is the only batch.
        for chunk in indices.chunks(cfg.batch_size) {
            if chunk.len() < cfg.batch_size && n_samples >= cfg.batch_size {
                continue;
            }
            batch_step(params, chunk, real(lr));
        }
        let loss = full_loss(params);
        if !loss.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        if loss > prev {
            *params = snapshot;
            lr *= 0.5;
            reverted += 1;
        } else {
            prev = loss;
        }
        trace.push(prev.to_f64().unwrap_or(f64::NAN));
        if lr < LEARNING_RATE_FLOOR {
            break;
        }
    }

    Ok(TrainReport { loss_trace: trace, final_learning_rate: lr, reverted_epochs: reverted })
}

/// Trains one sparse autoencoder on the given input columns.
pub fn train_autoencoder<F: Real>(
    data: &Mat<F>,
    hidden_dim: usize,
    cfg: &TrainConfig,
) -> Result<(AutoencoderLayer<F>, TrainReport), TrainError> {
    validate_descent(cfg)?;
    let (input_dim, n) = (data.rows(), data.cols());
    if input_dim == 0 || n == 0 {
        return Err(TrainError::DimensionMismatch("training data is empty".into()));
    }
    if hidden_dim == 0 {
        return Err(TrainError::InvalidConfig("hidden_dim must be at least 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layer = AutoencoderLayer {
        w_enc: glorot(hidden_dim, input_dim, input_dim, hidden_dim, &mut rng),
        b_enc: vec![F::zero(); hidden_dim],
        w_dec: glorot(input_dim, hidden_dim, hidden_dim, input_dim, &mut rng),
        b_dec: vec![F::zero(); input_dim],
    };

    let report = run_epochs(
        &mut layer,
        cfg,
        n,
        |l: &AutoencoderLayer<F>| ae_loss_grad(l, data, cfg).0,
        |l, chunk, lr| {
            let batch = data.select_cols(chunk);
            let (_, g) = ae_loss_grad(l, &batch, cfg);
            step_mat(&mut l.w_enc, &g.w_enc, lr);
            step_vec(&mut l.b_enc, &g.b_enc, lr);
            step_mat(&mut l.w_dec, &g.w_dec, lr);
            step_vec(&mut l.b_dec, &g.b_dec, lr);
        },
    )?;
    Ok((layer, report))
}

/// Trains the softmax read-out on fixed features. Requires at least two
/// distinct classes among the labels.
pub fn train_softmax<F: Real>(
    features: &Mat<F>,
    labels: &[usize],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(SoftmaxHead<F>, TrainReport), TrainError> {
    validate_descent(cfg)?;
    if classes < 2 {
        return Err(TrainError::InvalidConfig("need at least two classes".into()));
    }
    let (dim, n) = (features.rows(), features.cols());
    if dim == 0 || n == 0 {
        return Err(TrainError::DimensionMismatch("training data is empty".into()));
    }
    if labels.len() != n {
        return Err(TrainError::DimensionMismatch(format!(
            "{} labels for {} feature columns",
            labels.len(),
            n
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(TrainError::InvalidConfig(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(TrainError::SingleClass);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut head = SoftmaxHead {
        w: glorot(classes, dim, dim, classes, &mut rng),
        b: vec![F::zero(); classes],
    };
    let l2 = real::<F>(cfg.l2_coeff);

    let report = run_epochs(
        &mut head,
        cfg,
        n,
        |h: &SoftmaxHead<F>| softmax_loss_grad(h, features, labels, l2).0,
        |h, chunk, lr| {
            let batch = features.select_cols(chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, g) = softmax_loss_grad(h, &batch, &batch_labels, l2);
            step_mat(&mut h.w, &g.w, lr);
            step_vec(&mut h.b, &g.b, lr);
        },
    )?;
    Ok((head, report))
}

/// Assembles pretrained layers under a head and fine-tunes the whole
/// chain on cross-entropy. The returned network carries an identity
/// input scaler; callers that scaled the data themselves should install
/// the matching scaler afterwards.
pub fn stack_and_finetune<F: Real>(
    layers: Vec<AutoencoderLayer<F>>,
    head: SoftmaxHead<F>,
    data: &Mat<F>,
    labels: &[usize],
    cfg: &TrainConfig,
) -> Result<(StackedNetwork<F>, TrainReport), TrainError> {
    validate_descent(cfg)?;
    let n = data.cols();
    if n == 0 || labels.len() != n {
        return Err(TrainError::DimensionMismatch(format!(
            "{} labels for {} data columns",
            labels.len(),
            n
        )));
    }
    let mut dim = data.rows();
    for (i, layer) in layers.iter().enumerate() {
        if layer.input_dim() != dim {
            return Err(TrainError::DimensionMismatch(format!(
                "layer {i} expects {} inputs, got {dim}",
                layer.input_dim()
            )));
        }
        dim = layer.hidden_dim();
    }
    if head.feature_dim() != dim {
        return Err(TrainError::DimensionMismatch(format!(
            "head expects {} features, got {dim}",
            head.feature_dim()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= head.classes()) {
        return Err(TrainError::InvalidConfig(format!(
            "label {bad} out of range for {} classes",
            head.classes()
        )));
    }

    let l2 = real::<F>(cfg.l2_coeff);
    let mut net =
        StackedNetwork { scaler: InputScaler::identity(), layers, head };

    let report = run_epochs(
        &mut net,
        cfg,
        n,
        |m: &StackedNetwork<F>| stacked_loss_grad(&m.layers, &m.head, data, labels, l2).0,
        |m, chunk, lr| {
            let batch = data.select_cols(chunk);
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, enc_g, head_g) =
                stacked_loss_grad(&m.layers, &m.head, &batch, &batch_labels, l2);
            for (layer, g) in m.layers.iter_mut().zip(&enc_g) {
                step_mat(&mut layer.w_enc, &g.w, lr);
                step_vec(&mut layer.b_enc, &g.b, lr);
            }
            step_mat(&mut m.head.w, &head_g.w, lr);
            step_vec(&mut m.head.b, &head_g.b, lr);
        },
    )?;
    Ok((net, report))
}

/// Full training recipe: fit the input scaler, pretrain each layer
/// greedily on the previous layer's codes, fit the softmax on the top
/// codes, then fine-tune end to end. Hidden sizes must shrink strictly
/// from the input dimension. Layer `i` pretrains with seed
/// `pretrain.seed + i`; the head uses the next seed in that row.
pub fn train_stacked<F: Real>(
    data: &Mat<F>,
    labels: &[usize],
    hidden_dims: &[usize],
    pretrain: &TrainConfig,
    finetune: &TrainConfig,
) -> Result<(StackedNetwork<F>, TrainSummary), TrainError> {
    train_stacked_spread(data, labels, hidden_dims, pretrain, finetune, 0.15)
}

/// `train_stacked` with an explicit input spread (see
/// [`InputScaler::fit_with_spread`]).
pub fn train_stacked_spread<F: Real>(
    data: &Mat<F>,
    labels: &[usize],
    hidden_dims: &[usize],
    pretrain: &TrainConfig,
    finetune: &TrainConfig,
    sigma_target: f64,
) -> Result<(StackedNetwork<F>, TrainSummary), TrainError> {
    if hidden_dims.is_empty() {
        return Err(TrainError::InvalidConfig("need at least one hidden layer".into()));
    }
    let mut dim = data.rows();
    for &h in hidden_dims {
        if h == 0 || h >= dim {
            return Err(TrainError::InvalidConfig(format!(
                "hidden sizes must shrink strictly: {h} does not fit under {dim}"
            )));
        }
        dim = h;
    }

    let scaler = InputScaler::fit_with_spread(data, sigma_target);
    let scaled = scaler.apply(data);

    let mut layers = Vec::with_capacity(hidden_dims.len());
    let mut reports = Vec::with_capacity(hidden_dims.len());
    let mut current = scaled.clone();
    for (i, &h) in hidden_dims.iter().enumerate() {
        let cfg = TrainConfig { seed: pretrain.seed.wrapping_add(i as u64), ..pretrain.clone() };
        let (layer, report) = train_autoencoder(&current, h, &cfg)?;
        current = layer.encode(&current);
        layers.push(layer);
        reports.push(report);
    }

    let head_cfg = TrainConfig {
        seed: pretrain.seed.wrapping_add(hidden_dims.len() as u64),
        ..pretrain.clone()
    };
    let (head, head_report) = train_softmax(&current, labels, 2, &head_cfg)?;

    let (mut net, finetune_report) = stack_and_finetune(layers, head, &scaled, labels, finetune)?;
    net.scaler = scaler;
    Ok((net, TrainSummary { pretrain: reports, head: head_report, finetune: finetune_report }))
}
