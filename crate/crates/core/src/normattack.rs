//! Norm-based baseline attack for imbalanced binary tasks: records whose
//! embedding gradient is larger than a threshold are labelled positive.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::experiment::fmt_float;
use crate::gia::AttackSlice;
use crate::numerics::{l2_norm, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormAttackResult {
    pub ids: Vec<u64>,
    /// `labels[i] == 1` iff `norms[i] > threshold`.
    pub labels: Vec<usize>,
    pub threshold: f64,
    pub norms: Vec<f64>,
    pub best_accuracy: Option<f64>,
}

/// Euclidean norm of every gradient row.
pub fn gradient_norms(grads: &Matrix) -> Result<Vec<f64>> {
    if grads.rows() == 0 {
        return invalid("no gradients to measure");
    }
    Ok(grads.iter_rows().map(l2_norm).collect())
}

/// Threshold with the highest accuracy against `truth`, swept over `-∞`,
/// the midpoints between consecutive distinct norms, and `+∞`.
///
/// This reads the true labels, so it measures how separable the norms are in
/// the best case rather than what a deployed attacker would achieve.
pub fn best_threshold(norms: &[f64], truth: &[usize]) -> Result<(f64, f64)> {
    if norms.is_empty() {
        return invalid("no norms to threshold");
    }
    if norms.len() != truth.len() {
        return invalid(format!("{} norms but {} truth labels", norms.len(), truth.len()));
    }
    if let Some(t) = truth.iter().find(|&&t| t > 1) {
        return invalid(format!("truth label {t} is not binary"));
    }
    if norms.iter().any(|x| !x.is_finite()) {
        return invalid("norms must be finite");
    }
    let mut pairs: Vec<(f64, usize)> = norms.iter().copied().zip(truth.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();

    // At T = -inf everything is predicted positive.
    let mut correct = pairs.iter().filter(|p| p.1 == 1).count();
    let mut best = (correct, f64::NEG_INFINITY);
    let mut i = 0;
    while i < n {
        let v = pairs[i].0;
        while i < n && pairs[i].0 == v {
            // Moving T past v flips this record to negative.
            if pairs[i].1 == 1 {
                correct -= 1;
            } else {
                correct += 1;
            }
            i += 1;
        }
        let t = if i < n { 0.5 * (v + pairs[i].0) } else { f64::INFINITY };
        if correct > best.0 {
            best = (correct, t);
        }
    }
    Ok((best.1, best.0 as f64 / n as f64))
}

/// Runs the threshold sweep on a slice.
pub fn norm_attack_best_threshold(slice: &AttackSlice, truth: &[usize]) -> Result<NormAttackResult> {
    let norms = gradient_norms(&slice.grads)?;
    let (threshold, acc) = best_threshold(&norms, truth)?;
    Ok(NormAttackResult {
        ids: slice.ids.clone(),
        labels: norms.iter().map(|&x| usize::from(x > threshold)).collect(),
        threshold,
        norms,
        best_accuracy: Some(acc),
    })
}

/// Columns `input_id, predicted_label, gradient_norm`.
pub fn write_norm_attack_csv(result: &NormAttackResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["input_id", "predicted_label", "gradient_norm"])?;
    for ((id, label), norm) in result.ids.iter().zip(&result.labels).zip(&result.norms) {
        w.write_record([id.to_string(), label.to_string(), fmt_float(*norm)])?;
    }
    w.flush()?;
    Ok(())
}
