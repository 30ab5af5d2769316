//! Stacked sparse autoencoders with a softmax read-out.
//!
//! Layers use the logistic sigmoid on both the encoding and decoding
//! half. Pretraining is greedy and layer-wise on a reconstruction loss
//! with an L2 weight penalty and a KL sparsity penalty; the encoders are
//! then stacked under a two-class softmax and fine-tuned end to end on
//! cross-entropy. Class index 0 is preictal, index 1 interictal.

mod store;
mod train;

pub use store::{load_network, network_from_bytes, network_to_bytes, save_network};
pub use train::{
    ae_loss_grad, softmax_loss_grad, stack_and_finetune, stacked_loss_grad, train_autoencoder,
    train_softmax, train_stacked, train_stacked_spread, AeGrads, LayerGrads, TrainReport,
    TrainSummary,
};

use thiserror::Error;

use crate::mat::Mat;
use crate::num::{real, Real};
use crate::signal::Label;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged at epoch {epoch}: loss became non-finite")]
    Diverged { epoch: usize },
    #[error("training data contains a single class")]
    SingleClass,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Gradient-descent settings shared by pretraining, the softmax fit, and
/// fine-tuning. The sparsity fields only act on autoencoder losses.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// L2 penalty weight on weight matrices (not biases).
    pub l2_coeff: f64,
    /// Weight of the KL sparsity penalty.
    pub sparsity_coeff: f64,
    /// Target mean hidden activation.
    pub sparsity_target: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn pretrain_defaults(seed: u64) -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            l2_coeff: 1e-4,
            sparsity_coeff: 3.0,
            sparsity_target: 0.05,
            batch_size: 32,
            seed,
        }
    }

    pub fn finetune_defaults(seed: u64) -> Self {
        TrainConfig { epochs: 100, learning_rate: 0.01, ..TrainConfig::pretrain_defaults(seed) }
    }
}

/// One autoencoder: encode `input -> hidden`, decode back, logistic
/// sigmoid on both halves. The decoder is kept after stacking as the
/// pretraining record even though prediction only runs the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderLayer<F> {
    /// `hidden x input`.
    pub w_enc: Mat<F>,
    pub b_enc: Vec<F>,
    /// `input x hidden`.
    pub w_dec: Mat<F>,
    pub b_dec: Vec<F>,
}

impl<F: Real> AutoencoderLayer<F> {
    pub fn input_dim(&self) -> usize {
        self.w_enc.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_enc.rows()
    }

    /// `sigmoid(w_enc * data + b_enc)`, columns are samples.
    pub fn encode(&self, data: &Mat<F>) -> Mat<F> {
        let mut a = self.w_enc.matmul(data);
        a.add_col_broadcast(&self.b_enc);
        a.map_inplace(sigmoid);
        a
    }

    pub fn decode(&self, hidden: &Mat<F>) -> Mat<F> {
        let mut a = self.w_dec.matmul(hidden);
        a.add_col_broadcast(&self.b_dec);
        a.map_inplace(sigmoid);
        a
    }
}

#[inline]
pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Two-class linear read-out; row 0 scores preictal, row 1 interictal.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxHead<F> {
    /// `2 x features`.
    pub w: Mat<F>,
    pub b: Vec<F>,
}

impl<F: Real> SoftmaxHead<F> {
    pub fn classes(&self) -> usize {
        self.w.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn logits(&self, features: &Mat<F>) -> Mat<F> {
        let mut a = self.w.matmul(features);
        a.add_col_broadcast(&self.b);
        a
    }
}

/// Column-wise softmax with max subtraction for overflow safety.
pub fn softmax_columns<F: Real>(logits: &Mat<F>) -> Mat<F> {
    let mut out = logits.clone();
    for c in 0..out.cols() {
        let mut maxv = out[(0, c)];
        for r in 1..out.rows() {
            maxv = maxv.max(out[(r, c)]);
        }
        let mut sum = F::zero();
        for r in 0..out.rows() {
            let e = (out[(r, c)] - maxv).exp();
            out[(r, c)] = e;
            sum += e;
        }
        for r in 0..out.rows() {
            out[(r, c)] /= sum;
        }
    }
    out
}

/// Class probabilities for a feature batch.
pub fn softmax_predict<F: Real>(head: &SoftmaxHead<F>, features: &Mat<F>) -> Mat<F> {
    softmax_columns(&head.logits(features))
}

/// Global affine map applied to network inputs: `y = gain * x + offset`.
/// Fitted so the training windows land in the sigmoid decoder's range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputScaler<F> {
    pub gain: F,
    pub offset: F,
}

impl<F: Real> InputScaler<F> {
    pub fn identity() -> Self {
        InputScaler { gain: F::one(), offset: F::zero() }
    }

    /// Centers the pooled values at 0.5 and maps three standard
    /// deviations to the interval edges 0.05 and 0.95. Degenerate
    /// (constant) data collapses to the midpoint.
    pub fn fit(data: &Mat<F>) -> Self {
        Self::fit_with_spread(data, 0.15)
    }

    /// Same centering with a chosen post-scaling standard deviation.
    /// Spreads past ~0.5 drive the sigmoid into its saturating range,
    /// which trades reconstruction fidelity for amplitude sensitivity.
    pub fn fit_with_spread(data: &Mat<F>, sigma_target: f64) -> Self {
        let n = real::<F>((data.rows() * data.cols()) as f64);
        let mean = data.as_slice().iter().copied().sum::<F>() / n;
        let var = data.as_slice().iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n;
        let sd = var.sqrt();
        if sd < real(1e-9) {
            return InputScaler { gain: F::zero(), offset: real(0.5) };
        }
        let gain = real::<F>(sigma_target) / sd;
        InputScaler { gain, offset: real::<F>(0.5) - gain * mean }
    }

    pub fn apply(&self, data: &Mat<F>) -> Mat<F> {
        data.map(|x| self.gain * x + self.offset)
    }

    pub fn apply_vec(&self, v: &[F]) -> Vec<F> {
        v.iter().map(|&x| self.gain * x + self.offset).collect()
    }
}

/// Trained classifier: input scaling, the pretrained encoder stack, and
/// the softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedNetwork<F> {
    pub scaler: InputScaler<F>,
    pub layers: Vec<AutoencoderLayer<F>>,
    pub head: SoftmaxHead<F>,
}

impl<F: Real> StackedNetwork<F> {
    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(self.head.feature_dim(), |l| l.input_dim())
    }

    /// Scales inputs and runs the encoder chain.
    pub fn encode(&self, data: &Mat<F>) -> Mat<F> {
        let mut h = self.scaler.apply(data);
        for layer in &self.layers {
            h = layer.encode(&h);
        }
        h
    }

    /// Class probabilities for a batch of input columns.
    pub fn predict_proba(&self, data: &Mat<F>) -> Mat<F> {
        softmax_predict(&self.head, &self.encode(data))
    }
}

/// Classifies one flattened window. Returns the label and its
/// probability; an exact tie goes to preictal, the class it is safer to
/// overcall.
pub fn predict_label<F: Real>(net: &StackedNetwork<F>, window: &[F]) -> (Label, F) {
    let input = Mat::from_vec(window.len(), 1, window.to_vec());
    let probs = net.predict_proba(&input);
    debug_assert_eq!(probs.rows(), 2, "classifier head must be two-class");
    let p_pre = probs[(0, 0)];
    let p_inter = probs[(1, 0)];
    if p_pre >= p_inter {
        (Label::Preictal, p_pre)
    } else {
        (Label::Interictal, p_inter)
    }
}
