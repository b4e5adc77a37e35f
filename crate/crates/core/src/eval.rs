//! Leakage and utility metrics.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelPrior};
use crate::error::{invalid, Result};
use crate::nn::MlpModel;
use crate::numerics::prob::cross_entropy_raw;
use crate::numerics::{optimal_assignment_accuracy, softmax_rows, Matrix};

/// Metrics for one run; each is present only when it was measured.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub leak_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub nce: Option<f64>,
    pub n_eval: usize,
}

/// Clustering accuracy of recovered labels: the best accuracy over all
/// one-to-one relabellings of the predicted ids.
pub fn leak_accuracy(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    optimal_assignment_accuracy(pred, truth, num_classes)
}

/// Class probabilities of the composed model `g ∘ f`.
pub fn predict_proba(f: &MlpModel, g: &MlpModel, inputs: &Matrix) -> Result<Matrix> {
    if f.output_dim() != g.input_dim() {
        return invalid(format!("f outputs {} dims but g expects {}", f.output_dim(), g.input_dim()));
    }
    Ok(softmax_rows(&g.forward(&f.forward(inputs)?)?))
}

pub fn test_accuracy(f: &MlpModel, g: &MlpModel, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return invalid("held-out set is empty");
    }
    let pred = predict_proba(f, g, data.inputs())?.row_argmax();
    let hits = pred.iter().zip(data.labels()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / data.len() as f64)
}

/// Mean cross-entropy against the one-hot labels, divided by the prior's
/// entropy. 1.0 is what always predicting the prior scores.
pub fn nce(f: &MlpModel, g: &MlpModel, data: &Dataset, prior: &LabelPrior) -> Result<f64> {
    let h = prior.entropy();
    if !(h > 0.0) {
        return invalid("label prior has zero entropy");
    }
    if data.is_empty() {
        return invalid("held-out set is empty");
    }
    let p = predict_proba(f, g, data.inputs())?;
    nce_from_probs(&p, data.labels(), prior)
}

pub fn nce_from_probs(probs: &Matrix, labels: &[usize], prior: &LabelPrior) -> Result<f64> {
    let h = prior.entropy();
    if !(h > 0.0) {
        return invalid("label prior has zero entropy");
    }
    if probs.rows() != labels.len() || probs.rows() == 0 {
        return invalid(format!("{} prediction rows for {} labels", probs.rows(), labels.len()));
    }
    let k = probs.cols();
    let mut one_hot = vec![0.0; k];
    let mut total = 0.0;
    for (row, &l) in probs.iter_rows().zip(labels) {
        if l >= k {
            return invalid(format!("label {l} outside [0, {k})"));
        }
        one_hot.iter_mut().for_each(|v| *v = 0.0);
        one_hot[l] = 1.0;
        total += cross_entropy_raw(&one_hot, row);
    }
    Ok(total / labels.len() as f64 / h)
}
