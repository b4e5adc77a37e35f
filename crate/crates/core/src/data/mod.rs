//! Datasets: synthetic generators, IDX ingestion, label priors and the
//! dataset cache file.

mod idx;
mod store;
mod synth;

pub use idx::{dataset_from_idx, encode_idx_images, encode_idx_labels, parse_idx, IdxData, IdxError};
pub use store::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use synth::{generate_blobs, generate_imbalanced_binary, IMBALANCED_SEPARATION};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{entropy, Matrix, ProbVector};

/// Inputs, labels and record ids for one task.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    labels: Vec<usize>,
    ids: Vec<u64>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Vec<usize>, ids: Vec<u64>, num_classes: usize) -> Result<Self> {
        if labels.len() != inputs.rows() || ids.len() != inputs.rows() {
            return invalid(format!(
                "dataset has {} rows, {} labels and {} ids",
                inputs.rows(),
                labels.len(),
                ids.len()
            ));
        }
        if num_classes == 0 {
            return invalid("dataset needs at least one class");
        }
        if let Some(l) = labels.iter().find(|&&l| l >= num_classes) {
            return invalid(format!("label {l} outside [0, {num_classes})"));
        }
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return invalid("dataset ids are not unique");
        }
        Ok(Self { inputs, labels, ids, num_classes })
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            inputs: self.inputs.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            ids: rows.iter().map(|&r| self.ids[r]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// First `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.subset(&head), self.subset(&tail))
    }

    /// Label of a record by id.
    pub fn label_of(&self, id: u64) -> Option<usize> {
        self.ids.iter().position(|&x| x == id).map(|i| self.labels[i])
    }

    /// One-hot label rows.
    pub fn one_hot(&self) -> Matrix {
        let mut m = Matrix::zeros(self.len(), self.num_classes);
        for (r, &l) in self.labels.iter().enumerate() {
            m.set(r, l, 1.0);
        }
        m
    }
}

/// Class distribution the attacker is assumed to know.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelPrior {
    pub probs: ProbVector,
}

impl LabelPrior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        Ok(Self { probs: ProbVector::new(probs)? })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Ok(Self { probs: ProbVector::uniform(k)? })
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.probs.as_slice()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

/// Class frequencies of `labels`.
pub fn empirical_prior(labels: &[usize], k: usize) -> Result<LabelPrior> {
    if labels.is_empty() {
        return invalid("cannot estimate a prior from no labels");
    }
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return invalid(format!("label {l} outside [0, {k})"));
        }
        counts[l] += 1;
    }
    let n = labels.len() as f64;
    LabelPrior::new(counts.into_iter().map(|c| c as f64 / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prior_counts() {
        assert_eq!(empirical_prior(&[0, 1, 0, 1], 2).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(empirical_prior(&[0, 0, 0, 1], 2).unwrap().as_slice(), &[0.75, 0.25]);
        assert!(empirical_prior(&[], 2).is_err());
        assert!(empirical_prior(&[3], 2).is_err());
    }

    #[test]
    fn blobs_prior_is_uniform() {
        let ds = generate_blobs(4, 2000, 2, 0.5, 1).unwrap();
        let p = empirical_prior(ds.labels(), 4).unwrap();
        assert!(p.as_slice().iter().all(|&x| (x - 0.25).abs() <= 1e-3));
    }

    #[test]
    fn dataset_validation() {
        let x = Matrix::zeros(2, 1);
        assert!(Dataset::new(x.clone(), vec![0, 1], vec![1, 1], 2).is_err());
        assert!(Dataset::new(x.clone(), vec![0, 2], vec![1, 2], 2).is_err());
        assert!(Dataset::new(x.clone(), vec![0], vec![1, 2], 2).is_err());
        assert!(Dataset::new(x, vec![0, 1], vec![1, 2], 2).is_ok());
    }
}
