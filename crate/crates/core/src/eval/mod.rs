//! Leave-one-out cross-validation, confusion-matrix accounting, and the
//! handcrafted-feature comparison pipeline.

mod features;
mod harness;

pub use features::{baseline_feature_count, baseline_features};
pub use harness::{
    fit_dataset, predict_segment, run_baseline, run_loocv, window_accuracy, FoldRecord,
    HarnessConfig, SegmentPrediction,
};

use thiserror::Error;

use crate::deepnet::TrainError;
use crate::dimred::DimredError;
use crate::signal::{Label, SignalError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least two segments, got {got}")]
    TooFewSegments { got: usize },
    #[error("prediction and truth lists differ in length: {pred} vs {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("segment {index} carries no class label")]
    UnlabeledSegment { index: usize },
    #[error("dataset contains a single class")]
    SingleClass,
    #[error("feature window needs at least 2 samples, got {samples}")]
    WindowTooShort { samples: usize },
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Dimred(#[from] DimredError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

/// Two-class decision counts with preictal as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    /// Text table with target classes as rows and predicted classes as
    /// columns; the diagonal holds the correct decisions.
    pub fn table_text(&self) -> String {
        let rows = [
            ("target interictal", self.true_neg, self.false_pos),
            ("target preictal", self.false_neg, self.true_pos),
            ("total", self.true_neg + self.false_neg, self.false_pos + self.true_pos),
        ];
        let mut out = format!(
            "{:<18}{:>18}{:>17}{:>7}\n",
            "", "output interictal", "output preictal", "total"
        );
        for (name, inter, pre) in rows {
            out.push_str(&format!("{:<18}{:>18}{:>17}{:>7}\n", name, inter, pre, inter + pre));
        }
        out
    }
}

/// Rate summary of a confusion matrix. A field is `None` when its
/// denominator is zero; it renders as an `n/a` marker, never as 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

impl MetricsReport {
    fn fields(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
            ("fpr", self.fpr),
            ("fnr", self.fnr),
        ]
    }

    /// Line-oriented view at two decimals.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.fields() {
            let shown = match v {
                Some(v) => format!("{:.2}", two_decimals(v)),
                None => "n/a".to_string(),
            };
            out.push_str(&format!("{name:<12} {shown}\n"));
        }
        out
    }

    /// Flat key=value view at full precision.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.fields() {
            match v {
                Some(v) => out.push_str(&format!("{name}={v}\n")),
                None => out.push_str(&format!("{name}=n/a\n")),
            }
        }
        out
    }
}

/// Two-decimal display value for a nonnegative rate. Truncates toward
/// zero rather than rounding: a rate of 4/61 must display as 0.06. The
/// nudge absorbs representation error just under an exact hundredth.
pub fn two_decimals(v: f64) -> f64 {
    (v * 100.0 + 1e-9).floor() / 100.0
}

/// One cross-validation fold: hold out `test`, fit on `train`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: usize,
}

/// Exhaustive leave-one-out plan: fold `i` tests segment `i` and trains
/// on the rest, in index order.
pub fn loocv_folds(n: usize) -> Result<Vec<Fold>, EvalError> {
    if n < 2 {
        return Err(EvalError::TooFewSegments { got: n });
    }
    Ok((0..n)
        .map(|i| Fold { train: (0..n).filter(|&j| j != i).collect(), test: i })
        .collect())
}

/// Counts decisions with preictal as the positive class. Both lists
/// must be fully labeled and equally long.
pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch { pred: pred.len(), truth: truth.len() });
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &t)) in pred.iter().zip(truth).enumerate() {
        if p == Label::Unlabeled || t == Label::Unlabeled {
            return Err(EvalError::UnlabeledSegment { index: i });
        }
        match (t, p) {
            (Label::Preictal, Label::Preictal) => cm.true_pos += 1,
            (Label::Interictal, Label::Preictal) => cm.false_pos += 1,
            (Label::Preictal, Label::Interictal) => cm.false_neg += 1,
            (Label::Interictal, Label::Interictal) => cm.true_neg += 1,
            _ => unreachable!("unlabeled entries were rejected above"),
        }
    }
    Ok(cm)
}

/// Rates from counts. False rates are defined as complements of the
/// matching true rates, the same floating expression the identity tests
/// use, so `fpr + specificity` and `fnr + sensitivity` recover 1.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    let sensitivity = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
    let specificity = ratio(cm.true_neg, cm.true_neg + cm.false_pos);
    MetricsReport {
        accuracy: ratio(cm.true_pos + cm.true_neg, cm.total()),
        precision: ratio(cm.true_pos, cm.true_pos + cm.false_pos),
        sensitivity,
        specificity,
        fpr: specificity.map(|s| 1.0 - s),
        fnr: sensitivity.map(|s| 1.0 - s),
    }
}
