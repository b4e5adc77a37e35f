use crate::data::LabelPrior;
use crate::error::{invalid, Result};
use crate::nn::{backward, grad_of_input_grad, MlpModel, ParamGrads};
use crate::numerics::prob::kl_raw;
use crate::numerics::{clipped_ln, dot, l2_norm, softmax_rows, Matrix, LOG_EPS};

use super::state::{AttackSlice, SurrogateState};
use super::{GiaHyperParams, PriorScope, Regularizers};

/// Value and gradients of the attack loss on one batch.
#[derive(Clone, Debug)]
pub struct GiaLoss {
    pub total: f64,
    /// Mean L2 distance between recorded and replayed embedding gradients.
    pub grad_match: f64,
    /// Unweighted `E[H(y', p')] / H(P_y)`.
    pub cer: f64,
    /// Unweighted `KL(P_y ‖ P_y')`.
    pub lpr: f64,
    pub g_grads: ParamGrads,
    /// Gradient with respect to every row of `ŷ`; rows outside the batch are
    /// zero unless the prior term is taken over the full slice.
    pub y_grads: Matrix,
}

/// Replays `z` through `g'` against soft labels `y'`.
///
/// Returns `p' = softmax(g'(z))` and the per-example gradients of
/// `H(y'_i, p'_i)` with respect to `z_i`.
pub fn replay_forward_backward(g_prime: &MlpModel, z: &Matrix, y_prime: &Matrix) -> Result<(Matrix, Matrix)> {
    let (_, bundle) = backward(g_prime, z, y_prime)?;
    let p = softmax_rows(&g_prime.forward(z)?);
    Ok((p, bundle.inputs))
}

/// `E_i ‖a_i − b_i‖₂` over rows.
pub fn gradient_match_term(recorded: &Matrix, replayed: &Matrix) -> Result<f64> {
    if recorded.shape() != replayed.shape() {
        return invalid(format!("gradient shapes differ: {:?} vs {:?}", recorded.shape(), replayed.shape()));
    }
    if recorded.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = recorded
        .iter_rows()
        .zip(replayed.iter_rows())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .sum();
    Ok(total / recorded.rows() as f64)
}

fn column_mean(m: &Matrix) -> Vec<f64> {
    let mut mean = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    let n = m.rows().max(1) as f64;
    mean.iter_mut().for_each(|a| *a /= n);
    mean
}

/// Attack loss on the records at `rows` of `slice`, with gradients for `g'`
/// and `ŷ`.
pub fn gia_loss(
    state: &SurrogateState,
    slice: &AttackSlice,
    rows: &[usize],
    prior: &LabelPrior,
    hp: &GiaHyperParams,
    regularizers: Regularizers,
    scope: PriorScope,
) -> Result<GiaLoss> {
    let k = state.num_classes();
    if prior.num_classes() != k {
        return invalid(format!("prior has {} classes, surrogate has {k}", prior.num_classes()));
    }
    if state.num_records() != slice.len() {
        return invalid(format!("{} label rows for {} records", state.num_records(), slice.len()));
    }
    if state.g_prime.input_dim() != slice.embedding_dim() {
        return invalid(format!(
            "g' expects {} inputs, embeddings have {}",
            state.g_prime.input_dim(),
            slice.embedding_dim()
        ));
    }
    if rows.is_empty() {
        return invalid("empty batch");
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= slice.len()) {
        return invalid(format!("row {r} outside slice of {}", slice.len()));
    }
    let h_prior = prior.entropy();
    if !(h_prior > 0.0) {
        return invalid("label prior has zero entropy");
    }

    let n = rows.len();
    let inv_n = 1.0 / n as f64;
    let z = slice.z.select_rows(rows);
    let recorded = slice.grads.select_rows(rows);
    let y_hat = state.y_hat.select_rows(rows);
    let y = softmax_rows(&y_hat);

    let (ce_mean, bundle) = backward(&state.g_prime, &z, &y)?;
    let replayed = bundle.inputs;

    // d/dr'_i of the mean norm is the unit residual scaled by 1/n.
    let mut cotangent = Matrix::zeros(n, slice.embedding_dim());
    let mut grad_match = 0.0;
    for i in 0..n {
        let diff: Vec<f64> = replayed.row(i).iter().zip(recorded.row(i)).map(|(a, b)| a - b).collect();
        let norm = l2_norm(&diff);
        grad_match += norm;
        if norm > 0.0 {
            for (c, d) in cotangent.row_mut(i).iter_mut().zip(&diff) {
                *c = d / (norm * n as f64);
            }
        }
    }
    grad_match *= inv_n;

    let second = grad_of_input_grad(&state.g_prime, &z, &y, &cotangent)?;
    let mut g_grads = second.params;
    // Gradient of the loss with respect to y' for the batch rows.
    let mut y_bar = second.targets;
    let mut total = grad_match;

    let mut cer = 0.0;
    if regularizers.use_cer {
        cer = ce_mean / h_prior;
        let w = hp.lambda_ce / h_prior;
        total += hp.lambda_ce * cer;
        for (g, b) in g_grads.iter_mut().zip(&bundle.params) {
            g.weight.as_mut_slice().iter_mut().zip(b.weight.as_slice()).for_each(|(x, y)| *x += w * y);
            g.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += w * y);
        }
        let p = softmax_rows(&state.g_prime.forward(&z)?);
        for (yb, pv) in y_bar.as_mut_slice().iter_mut().zip(p.as_slice()) {
            *yb -= w * inv_n * clipped_ln(*pv);
        }
    }

    let mut y_grads = Matrix::zeros(state.num_records(), k);
    let mut lpr = 0.0;
    if regularizers.use_lpr {
        let p_y = prior.as_slice();
        match scope {
            PriorScope::Batch => {
                let q = column_mean(&y);
                lpr = kl_raw(p_y, &q);
                total += hp.lambda_p * lpr;
                let dq = kl_grad_q(p_y, &q);
                for i in 0..n {
                    for (yb, d) in y_bar.row_mut(i).iter_mut().zip(&dq) {
                        *yb += hp.lambda_p * inv_n * d;
                    }
                }
            }
            PriorScope::Full => {
                let all = state.y_prime();
                let q = column_mean(&all);
                lpr = kl_raw(p_y, &q);
                total += hp.lambda_p * lpr;
                let dq = kl_grad_q(p_y, &q);
                let inv_all = 1.0 / all.rows() as f64;
                for r in 0..all.rows() {
                    let ybar: Vec<f64> = dq.iter().map(|d| hp.lambda_p * inv_all * d).collect();
                    add_softmax_vjp(y_grads.row_mut(r), all.row(r), &ybar);
                }
            }
        }
    }

    for (i, &r) in rows.iter().enumerate() {
        add_softmax_vjp(y_grads.row_mut(r), y.row(i), y_bar.row(i));
    }

    Ok(GiaLoss { total, grad_match, cer, lpr, g_grads, y_grads })
}

/// `∂ KL(p ‖ q) / ∂q_k = −p_k / q_k`, zero where the clip is active.
fn kl_grad_q(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().zip(q).map(|(&pk, &qk)| if qk > LOG_EPS { -pk / qk } else { 0.0 }).collect()
}

/// `out += J_softmax(s)ᵀ ḡ` where `s = softmax(logits)`.
fn add_softmax_vjp(out: &mut [f64], s: &[f64], g_bar: &[f64]) {
    let mean = dot(s, g_bar);
    for ((o, &sk), &gk) in out.iter_mut().zip(s).zip(g_bar) {
        *o += sk * (gk - mean);
    }
}
