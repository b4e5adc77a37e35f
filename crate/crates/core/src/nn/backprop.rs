use crate::error::{invalid, Result};
use crate::numerics::matrix::dot;
use crate::numerics::prob::{cross_entropy_raw, softmax_into};
use crate::numerics::Matrix;

use super::model::{Dense, ForwardCache, MlpModel, ParamGrads};

/// First-order gradients of a softmax cross-entropy loss.
///
/// `params` are gradients of the batch-mean loss. Row `i` of `inputs` is the
/// gradient of the *per-example* loss `L_i` with respect to input row `i`,
/// which is what the label owner transmits in split learning.
#[derive(Clone, Debug)]
pub struct GradientBundle {
    pub params: ParamGrads,
    pub inputs: Matrix,
}

/// Vector-Jacobian product through the per-example input gradient.
///
/// For cotangent rows `c_i`, these are the gradients of
/// `S = Σ_i ⟨c_i, ∇_{x_i} L_i⟩` with respect to the parameters, the target
/// probabilities and the inputs.
#[derive(Clone, Debug)]
pub struct SecondOrderGrads {
    pub params: ParamGrads,
    pub targets: Matrix,
    pub inputs: Matrix,
}

fn check_targets(model: &MlpModel, inputs: &Matrix, targets: &Matrix) -> Result<()> {
    model.check_input(inputs)?;
    if targets.rows() != inputs.rows() || targets.cols() != model.output_dim() {
        return invalid(format!(
            "targets are {}x{}, expected {}x{}",
            targets.rows(),
            targets.cols(),
            inputs.rows(),
            model.output_dim()
        ));
    }
    Ok(())
}

/// Mean softmax cross-entropy over the batch and its gradients.
pub fn backward(model: &MlpModel, inputs: &Matrix, targets: &Matrix) -> Result<(f64, GradientBundle)> {
    check_targets(model, inputs, targets)?;
    let n = inputs.rows();
    let cache = model.forward_cached(inputs)?;
    let logits = cache.logits();
    let k = model.output_dim();

    let mut delta = Matrix::zeros(n, k);
    let mut loss = 0.0;
    let mut probs = vec![0.0; k];
    for i in 0..n {
        softmax_into(logits.row(i), &mut probs);
        loss += cross_entropy_raw(targets.row(i), &probs);
        for ((d, p), y) in delta.row_mut(i).iter_mut().zip(&probs).zip(targets.row(i)) {
            *d = p - y;
        }
    }
    let (mut params, input_grads) = backprop(model, &cache, delta);
    if n > 0 {
        let inv = 1.0 / n as f64;
        scale_grads(&mut params, inv);
        loss *= inv;
    }
    Ok((loss, GradientBundle { params, inputs: input_grads }))
}

/// Parameter gradients of `Σ_i ⟨upstream_i, model(x_i)⟩`.
///
/// The input owner uses this to push received embedding gradients through `f`.
pub fn backward_from_upstream(model: &MlpModel, inputs: &Matrix, upstream: &Matrix) -> Result<ParamGrads> {
    model.check_input(inputs)?;
    if upstream.shape() != (inputs.rows(), model.output_dim()) {
        return invalid(format!(
            "upstream gradient is {:?}, expected {:?}",
            upstream.shape(),
            (inputs.rows(), model.output_dim())
        ));
    }
    let cache = model.forward_cached(inputs)?;
    Ok(backprop(model, &cache, upstream.clone()).0)
}

/// Reverse pass from output cotangents; returns summed parameter gradients
/// and per-row input gradients.
pub(crate) fn backprop(model: &MlpModel, cache: &ForwardCache, mut delta: Matrix) -> (ParamGrads, Matrix) {
    let layers = model.layers();
    let mut grads: ParamGrads = model.zero_grads();
    for l in (0..layers.len()).rev() {
        let a_prev = &cache.activations[l];
        accumulate_layer_grad(&mut grads[l], &delta, a_prev);
        let mut g_prev = propagate_down(&layers[l], &delta);
        if l > 0 {
            mask_relu(&mut g_prev, &cache.pre[l - 1]);
        }
        delta = g_prev;
    }
    (grads, delta)
}

/// `dW += Δᵀ A`, `db += Σ_rows Δ`.
fn accumulate_layer_grad(grad: &mut Dense, delta: &Matrix, a_prev: &Matrix) {
    for (d, a) in delta.iter_rows().zip(a_prev.iter_rows()) {
        grad.weight.add_outer(1.0, d, a);
        grad.bias.iter_mut().zip(d).for_each(|(b, x)| *b += x);
    }
}

/// Row-wise `Wᵀ δ_i`.
fn propagate_down(layer: &Dense, delta: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(delta.rows(), layer.input_dim());
    for (i, d) in delta.iter_rows().enumerate() {
        out.row_mut(i).copy_from_slice(&layer.weight.matvec_t(d));
    }
    out
}

/// Row-wise `W g_i`.
fn propagate_up(layer: &Dense, g: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(g.rows(), layer.output_dim());
    for (i, row) in g.iter_rows().enumerate() {
        out.row_mut(i).copy_from_slice(&layer.weight.matvec(row));
    }
    out
}

fn mask_relu(g: &mut Matrix, pre: &Matrix) {
    for (x, &h) in g.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if h <= 0.0 {
            *x = 0.0;
        }
    }
}

pub(crate) fn scale_grads(grads: &mut ParamGrads, alpha: f64) {
    for g in grads {
        g.weight.scale(alpha);
        g.bias.iter_mut().for_each(|b| *b *= alpha);
    }
}

pub(crate) fn add_grads(acc: &mut ParamGrads, other: &ParamGrads) {
    for (a, o) in acc.iter_mut().zip(other) {
        a.weight.as_mut_slice().iter_mut().zip(o.weight.as_slice()).for_each(|(x, y)| *x += y);
        a.bias.iter_mut().zip(&o.bias).for_each(|(x, y)| *x += y);
    }
}

/// Differentiates the input gradient of softmax cross-entropy.
///
/// The per-example input gradient is `g_i = J_iᵀ (p_i − y_i)` where `J_i` is
/// the Jacobian of the logits with respect to `x_i`. This runs the backward
/// pass as a linear chain in the output error and then reverses it, so the
/// result is exact (ReLU masks are locally constant).
pub fn grad_of_input_grad(
    model: &MlpModel,
    inputs: &Matrix,
    targets: &Matrix,
    cotangent: &Matrix,
) -> Result<SecondOrderGrads> {
    check_targets(model, inputs, targets)?;
    if cotangent.shape() != inputs.shape() {
        return invalid(format!(
            "cotangent is {:?} but input gradients are {:?}",
            cotangent.shape(),
            inputs.shape()
        ));
    }
    let n = inputs.rows();
    let k = model.output_dim();
    let layers = model.layers();
    let depth = layers.len();
    let cache = model.forward_cached(inputs)?;

    let mut probs = Matrix::zeros(n, k);
    for i in 0..n {
        softmax_into(cache.logits().row(i), probs.row_mut(i));
    }

    // Backward chain, keeping every layer's output error:
    // deltas[l] is the error at layer l's output.
    let mut deltas: Vec<Matrix> = vec![Matrix::zeros(0, 0); depth];
    let mut d = probs.clone();
    d.as_mut_slice().iter_mut().zip(targets.as_slice()).for_each(|(p, y)| *p -= y);
    for l in (0..depth).rev() {
        let mut g_prev = propagate_down(&layers[l], &d);
        deltas[l] = d;
        if l > 0 {
            mask_relu(&mut g_prev, &cache.pre[l - 1]);
        }
        d = g_prev;
    }

    // Reverse the chain, from the input gradient back to the output error.
    let mut grads = model.zero_grads();
    let mut g_bar = cotangent.clone();
    for l in 0..depth {
        // g_{l} = W_lᵀ δ_l  =>  W̄_l += δ_l ḡᵀ,  δ̄_l = W_l ḡ
        for (dl, gb) in deltas[l].iter_rows().zip(g_bar.iter_rows()) {
            grads[l].weight.add_outer(1.0, dl, gb);
        }
        let mut d_bar = propagate_up(&layers[l], &g_bar);
        if l + 1 < depth {
            mask_relu(&mut d_bar, &cache.pre[l]);
        }
        g_bar = d_bar;
    }
    let d_bar_out = g_bar;

    // δ_out = p − y: ȳ = −δ̄, s̄ = (diag p − p pᵀ) δ̄
    let mut target_grads = d_bar_out.clone();
    target_grads.scale(-1.0);
    let mut s_bar = Matrix::zeros(n, k);
    for i in 0..n {
        let p = probs.row(i);
        let db = d_bar_out.row(i);
        let mean = dot(p, db);
        for ((s, &pk), &dk) in s_bar.row_mut(i).iter_mut().zip(p).zip(db) {
            *s = pk * (dk - mean);
        }
    }

    let (forward_grads, input_grads) = backprop(model, &cache, s_bar);
    add_grads(&mut grads, &forward_grads);

    Ok(SecondOrderGrads { params: grads, targets: target_grads, inputs: input_grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::*;
    use crate::numerics::Rng;

    #[test]
    fn two_class_single_layer_loss_gradient() {
        // logits [0, 0], target [1, 0] => dL/dlogits = [-0.5, 0.5]
        let layer = Dense { weight: Matrix::from_vec(2, 1, vec![0.0, 0.0]).unwrap(), bias: vec![0.0, 0.0] };
        let m = MlpModel::from_layers(vec![layer]).unwrap();
        let x = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let y = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        let (loss, g) = backward(&m, &x, &y).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g.params[0].bias, vec![-0.5, 0.5]);
    }

    #[test]
    fn stationary_target_has_zero_gradient() {
        let mut rng = Rng::new(2);
        let m = MlpModel::new(&[3, 5, 4], &mut rng).unwrap();
        let x = random_matrix(&mut rng, 6, 3, 1.0);
        let targets = crate::numerics::softmax_rows(&m.forward(&x).unwrap());
        let (_, g) = backward(&m, &x, &targets).unwrap();
        assert!(g.inputs.as_slice().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn per_example_input_gradient_is_batch_independent() {
        let mut rng = Rng::new(3);
        let m = MlpModel::new(&[2, 6, 3], &mut rng).unwrap();
        let x = random_matrix(&mut rng, 5, 2, 1.0);
        let y = random_simplex_rows(&mut rng, 5, 3);
        let (_, full) = backward(&m, &x, &y).unwrap();
        let (_, single) = backward(&m, &x.select_rows(&[2]), &y.select_rows(&[2])).unwrap();
        assert_eq!(full.inputs.row(2), single.inputs.row(0));
    }

    #[test]
    fn zero_cotangent_gives_zero() {
        let mut rng = Rng::new(4);
        let m = MlpModel::new(&[3, 4, 3], &mut rng).unwrap();
        let x = random_matrix(&mut rng, 4, 3, 1.0);
        let y = random_simplex_rows(&mut rng, 4, 3);
        let out = grad_of_input_grad(&m, &x, &y, &Matrix::zeros(4, 3)).unwrap();
        assert!(out.params.iter().all(|l| l.weight.as_slice().iter().all(|&v| v == 0.0)
            && l.bias.iter().all(|&v| v == 0.0)));
        assert!(out.targets.as_slice().iter().all(|&v| v == 0.0));
        assert!(out.inputs.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cotangent_shape_checked() {
        let m = MlpModel::zeros(&[3, 2]).unwrap();
        let x = Matrix::zeros(2, 3);
        let y = Matrix::from_vec(2, 2, vec![0.5; 4]).unwrap();
        assert!(grad_of_input_grad(&m, &x, &y, &Matrix::zeros(2, 2)).is_err());
        assert!(backward(&m, &x, &Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn linear_softmax_closed_form_hvp() {
        // Single layer, K = 2, one example: g = Wᵀ(p − y),
        // S = cᵀ Wᵀ (p − y)
        // dS/dW = (p − y) cᵀ + (diag p − p pᵀ)(W c) zᵀ
        // dS/db = (diag p − p pᵀ)(W c),  dS/dy = −W c,  dS/dz = Wᵀ (diag p − p pᵀ) W c
        let mut rng = Rng::new(21);
        for _ in 0..20 {
            let d = 3;
            let mut layer = Dense::zeros(d, 2);
            layer.weight.as_mut_slice().iter_mut().for_each(|w| *w = rng.normal(0.0, 1.0));
            layer.bias.iter_mut().for_each(|b| *b = rng.normal(0.0, 1.0));
            let m = MlpModel::from_layers(vec![layer.clone()]).unwrap();
            let z: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 1.0)).collect();
            let c: Vec<f64> = (0..d).map(|_| rng.normal(0.0, 1.0)).collect();
            let t = rng.uniform();
            let y = [t, 1.0 - t];

            let s = layer.weight.matvec(&z);
            let s: Vec<f64> = s.iter().zip(&layer.bias).map(|(a, b)| a + b).collect();
            let e0 = (s[0] - s[1]).exp();
            let p = [e0 / (1.0 + e0), 1.0 / (1.0 + e0)];
            let wc = layer.weight.matvec(&c);
            let jac = [[p[0] * (1.0 - p[0]), -p[0] * p[1]], [-p[0] * p[1], p[1] * (1.0 - p[1])]];
            let sbar = [jac[0][0] * wc[0] + jac[0][1] * wc[1], jac[1][0] * wc[0] + jac[1][1] * wc[1]];

            let out = grad_of_input_grad(
                &m,
                &Matrix::from_vec(1, d, z.clone()).unwrap(),
                &Matrix::from_vec(1, 2, y.to_vec()).unwrap(),
                &Matrix::from_vec(1, d, c.clone()).unwrap(),
            )
            .unwrap();
            for o in 0..2 {
                for i in 0..d {
                    let expect = (p[o] - y[o]) * c[i] + sbar[o] * z[i];
                    assert!((out.params[0].weight.get(o, i) - expect).abs() < 1e-10);
                }
                assert!((out.params[0].bias[o] - sbar[o]).abs() < 1e-10);
                assert!((out.targets.get(0, o) + wc[o]).abs() < 1e-10);
            }
            let zbar = layer.weight.matvec_t(&sbar);
            for i in 0..d {
                assert!((out.inputs.get(0, i) - zbar[i]).abs() < 1e-10);
            }
        }
    }
}
