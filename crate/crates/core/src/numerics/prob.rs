use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Lower clip applied to probabilities before every logarithm.
pub const LOG_EPS: f64 = 1e-12;

/// Allowed deviation of a simplex point's sum from 1.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("probability vector is empty");
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return invalid(format!("probability entry {v} outside [0, 1]"));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return invalid(format!("probabilities sum to {sum}, not 1"));
        }
        Ok(Self(values))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("uniform distribution needs at least one class");
        }
        Ok(Self(vec![1.0 / k as f64; k]))
    }

    pub fn one_hot(k: usize, class: usize) -> Result<Self> {
        if class >= k {
            return invalid(format!("class {class} out of range for K={k}"));
        }
        let mut v = vec![0.0; k];
        v[class] = 1.0;
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = crate::Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

impl AsRef<[f64]> for ProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Index of the maximum; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[inline]
pub fn clipped_ln(p: f64) -> f64 {
    p.max(LOG_EPS).ln()
}

pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    if logits.is_empty() {
        return invalid("softmax of an empty vector");
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return invalid("softmax input contains non-finite values");
    }
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out);
    Ok(ProbVector(out))
}

/// Max-subtracted softmax written into `out`. Inputs are assumed finite.
pub(crate) fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &x) in out.iter_mut().zip(logits) {
        *o = (x - max).exp();
        sum += *o;
    }
    out.iter_mut().for_each(|o| *o /= sum);
}

/// Row-wise softmax of a logit matrix.
pub fn softmax_rows(logits: &super::Matrix) -> super::Matrix {
    let mut out = super::Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        softmax_into(logits.row(r), out.row_mut(r));
    }
    out
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &ProbVector) -> f64 {
    entropy_raw(&p.0)
}

pub(crate) fn entropy_raw(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// `KL(p || q)` with `q` clipped below by [`LOG_EPS`].
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.len() != q.len() {
        return invalid(format!("KL length mismatch: {} vs {}", p.len(), q.len()));
    }
    Ok(kl_raw(&p.0, &q.0))
}

pub(crate) fn kl_raw(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pk, _)| pk > 0.0)
        .map(|(&pk, &qk)| pk * (pk.ln() - clipped_ln(qk)))
        .sum();
    // rounding can leave a tiny negative value when p == q
    kl.max(0.0)
}

/// `H(y, p) = -Σ y_k ln p_k` with `p` clipped below by [`LOG_EPS`].
pub fn cross_entropy(y: &ProbVector, p: &ProbVector) -> Result<f64> {
    if y.len() != p.len() {
        return invalid(format!("cross-entropy length mismatch: {} vs {}", y.len(), p.len()));
    }
    Ok(cross_entropy_raw(&y.0, &p.0))
}

pub(crate) fn cross_entropy_raw(y: &[f64], p: &[f64]) -> f64 {
    -y.iter()
        .zip(p)
        .filter(|(&yk, _)| yk > 0.0)
        .map(|(&yk, &pk)| yk * clipped_ln(pk))
        .sum::<f64>()
}
