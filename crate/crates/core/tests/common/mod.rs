//! Oracles shared by the integration tests: finite differences, brute-force
//! assignment and oracle-initialised attack state.
#![allow(dead_code)]

use splitleak_core::data::LabelPrior;
use splitleak_core::gia::{
    gia_loss, AttackConfig, AttackSlice, GiaHyperParams, PriorScope, Regularizers, SurrogateInit, SurrogateState,
};
use splitleak_core::nn::{backward, grad_of_input_grad, Dense, MlpModel};
use splitleak_core::numerics::{Matrix, Rng};

pub const H: f64 = 1e-5;

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| scale * rng.standard_normal()).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_simplex(rng: &mut Rng, rows: usize, k: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, k);
    for r in 0..rows {
        let w: Vec<f64> = (0..k).map(|_| -rng.uniform().max(1e-12).ln()).collect();
        let s: f64 = w.iter().sum();
        for (c, v) in w.iter().enumerate() {
            m.set(r, c, v / s);
        }
    }
    m
}

/// Straight-line forward pass, written independently of the library.
pub fn naive_forward(model: &MlpModel, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = x.to_vec();
    let mut pre_all = Vec::new();
    let n = model.layers().len();
    for (l, layer) in model.layers().iter().enumerate() {
        let mut h = layer.bias.clone();
        for (o, hv) in h.iter_mut().enumerate() {
            for (i, av) in a.iter().enumerate() {
                *hv += layer.weight.get(o, i) * av;
            }
        }
        pre_all.push(h.clone());
        a = if l + 1 < n { h.iter().map(|v| v.max(0.0)).collect() } else { h };
    }
    (a, pre_all)
}

/// Random dims with at most three layers and widths at most 16.
pub fn random_dims(rng: &mut Rng) -> Vec<usize> {
    let depth = 1 + (rng.next_u64() % 3) as usize;
    let mut dims = vec![1 + (rng.next_u64() % 6) as usize];
    for _ in 0..depth - 1 {
        dims.push(2 + (rng.next_u64() % 15) as usize);
    }
    dims.push(2 + (rng.next_u64() % 4) as usize);
    dims
}

/// Random model and inputs whose hidden pre-activations all stay at least
/// `1e-3` away from the ReLU kink.
pub fn random_case(rng: &mut Rng, n: usize) -> (MlpModel, Matrix) {
    loop {
        let dims = random_dims(rng);
        let mut model = MlpModel::new(&dims, rng).unwrap();
        for layer in model.layers_mut() {
            layer.bias.iter_mut().for_each(|b| *b = 0.3 * rng.standard_normal());
        }
        let x = random_matrix(rng, n, dims[0], 1.0);
        let depth = model.layers().len();
        let clear = x.iter_rows().all(|row| {
            let (_, pre) = naive_forward(&model, row);
            pre[..depth - 1].iter().flatten().all(|h| h.abs() >= 1e-3)
        });
        if clear {
            return (model, x);
        }
    }
}

pub fn close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    (analytic - numeric).abs() <= rel * analytic.abs().max(numeric.abs()) + abs
}

/// Visits every parameter of `model` mutably, with its flat index.
pub fn for_each_param(model: &mut MlpModel, mut f: impl FnMut(usize, &mut f64)) {
    let mut i = 0;
    for layer in model.layers_mut() {
        for w in layer.weight.as_mut_slice() {
            f(i, w);
            i += 1;
        }
        for b in layer.bias.iter_mut() {
            f(i, b);
            i += 1;
        }
    }
}

pub fn flatten(grads: &[Dense]) -> Vec<f64> {
    grads.iter().flat_map(|g| g.weight.as_slice().iter().chain(&g.bias).copied()).collect()
}

fn central(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

/// Perturbs parameter `idx` by `d`, evaluates `eval`, and restores it.
fn with_param(model: &MlpModel, idx: usize, d: f64, eval: impl Fn(&MlpModel) -> f64) -> f64 {
    let mut m = model.clone();
    for_each_param(&mut m, |i, p| {
        if i == idx {
            *p += d;
        }
    });
    eval(&m)
}

fn with_entry(x: &Matrix, idx: usize, d: f64, eval: impl Fn(&Matrix) -> f64) -> f64 {
    let mut y = x.clone();
    y.as_mut_slice()[idx] += d;
    eval(&y)
}

/// First-order check of `backward` against central differences.
pub fn check_first_order(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let n = 1 + (rng.next_u64() % 4) as usize;
    let (model, x) = random_case(&mut rng, n);
    let y = random_simplex(&mut rng, n, model.output_dim());
    let (_, g) = backward(&model, &x, &y).unwrap();
    let loss = |m: &MlpModel, x: &Matrix| backward(m, x, &y).unwrap().0;

    let analytic = flatten(&g.params);
    for (idx, &a) in analytic.iter().enumerate() {
        let num = central(|d| with_param(&model, idx, d, |m| loss(m, &x)), H);
        if !close(a, num, 1e-4, 1e-8) {
            return Err(format!("seed {seed}: param {idx} analytic {a} numeric {num}"));
        }
    }
    // Row i of the input gradient is d L_i / d x_i, so scale the mean loss by n.
    for idx in 0..x.as_slice().len() {
        let a = g.inputs.as_slice()[idx];
        let num = n as f64 * central(|d| with_entry(&x, idx, d, |xx| loss(&model, xx)), H);
        if !close(a, num, 1e-4, 1e-8) {
            return Err(format!("seed {seed}: input {idx} analytic {a} numeric {num}"));
        }
    }
    Ok(())
}

/// Second-order check of `grad_of_input_grad`: central differences of
/// `S = Σ_i ⟨c_i, ∇_{x_i} L_i⟩` computed from the first-order pass.
pub fn check_second_order(seed: u64) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let n = 1 + (rng.next_u64() % 3) as usize;
    let (model, x) = random_case(&mut rng, n);
    let y = random_simplex(&mut rng, n, model.output_dim());
    let c = random_matrix(&mut rng, n, model.input_dim(), 1.0);
    let s = |m: &MlpModel, x: &Matrix, y: &Matrix| -> f64 {
        let gi = backward(m, x, y).unwrap().1.inputs;
        gi.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
    };
    let so = grad_of_input_grad(&model, &x, &y, &c).unwrap();
    let (rel, abs) = (1e-3, 1e-7);
    for (idx, &a) in flatten(&so.params).iter().enumerate() {
        let num = central(|d| with_param(&model, idx, d, |m| s(m, &x, &y)), H);
        if !close(a, num, rel, abs) {
            return Err(format!("seed {seed}: param {idx} analytic {a} numeric {num}"));
        }
    }
    for idx in 0..y.as_slice().len() {
        let a = so.targets.as_slice()[idx];
        let num = central(|d| with_entry(&y, idx, d, |yy| s(&model, &x, yy)), H);
        if !close(a, num, rel, abs) {
            return Err(format!("seed {seed}: target {idx} analytic {a} numeric {num}"));
        }
    }
    for idx in 0..x.as_slice().len() {
        let a = so.inputs.as_slice()[idx];
        let num = central(|d| with_entry(&x, idx, d, |xx| s(&model, xx, &y)), H);
        if !close(a, num, rel, abs) {
            return Err(format!("seed {seed}: input {idx} analytic {a} numeric {num}"));
        }
    }
    Ok(())
}

/// Random attack problem: slice, state, prior and hyperparameters.
pub fn random_attack_problem(rng: &mut Rng) -> (AttackSlice, SurrogateState, LabelPrior, GiaHyperParams) {
    let n = 3 + (rng.next_u64() % 5) as usize;
    let (g_prime, z) = random_case(rng, n);
    let k = g_prime.output_dim();
    let grads = random_matrix(rng, n, g_prime.input_dim(), 0.3);
    let slice = AttackSlice::new((0..n as u64).collect(), z, grads).unwrap();
    let y_hat = random_matrix(rng, n, k, 1.0);
    let state = SurrogateState::new(g_prime, y_hat).unwrap();
    let p = random_simplex(rng, 1, k);
    let prior = LabelPrior::new(p.row(0).to_vec()).unwrap();
    let hp = GiaHyperParams {
        lambda_ce: rng.uniform_range(0.1, 3.0),
        lambda_p: rng.uniform_range(0.1, 3.0),
        eta_g: 1e-4,
        eta_y: 1e-2,
    };
    (slice, state, prior, hp)
}

/// Gradient check of the full attack loss with respect to `g'` and `ŷ`.
pub fn check_gia_loss(seed: u64, scope: PriorScope) -> Result<(), String> {
    let mut rng = Rng::new(seed);
    let (slice, state, prior, hp) = random_attack_problem(&mut rng);
    let mut rows: Vec<usize> = (0..slice.len()).collect();
    rng.shuffle(&mut rows);
    rows.truncate(2.max(slice.len() - 1));
    let regs = Regularizers::default();
    let value = |st: &SurrogateState| gia_loss(st, &slice, &rows, &prior, &hp, regs, scope).unwrap().total;
    let loss = gia_loss(&state, &slice, &rows, &prior, &hp, regs, scope).unwrap();
    let (rel, abs) = (1e-3, 1e-7);

    for (idx, &a) in flatten(&loss.g_grads).iter().enumerate() {
        let num = central(
            |d| {
                let mut st = state.clone();
                for_each_param(&mut st.g_prime, |i, p| {
                    if i == idx {
                        *p += d;
                    }
                });
                value(&st)
            },
            H,
        );
        if !close(a, num, rel, abs) {
            return Err(format!("seed {seed}: g' param {idx} analytic {a} numeric {num}"));
        }
    }
    for idx in 0..state.y_hat.as_slice().len() {
        let a = loss.y_grads.as_slice()[idx];
        let num = central(
            |d| {
                let mut st = state.clone();
                st.y_hat.as_mut_slice()[idx] += d;
                value(&st)
            },
            H,
        );
        if !close(a, num, rel, abs) {
            return Err(format!("seed {seed}: y_hat {idx} analytic {a} numeric {num}"));
        }
    }
    Ok(())
}

/// Brute force over all `k!` relabellings.
pub fn brute_force_accuracy(pred: &[usize], truth: &[usize], k: usize) -> f64 {
    fn permute(perm: &mut Vec<usize>, used: &mut Vec<bool>, pred: &[usize], truth: &[usize], best: &mut usize) {
        let k = used.len();
        if perm.len() == k {
            let hits = pred.iter().zip(truth).filter(|(p, t)| perm[**p] == **t).count();
            *best = (*best).max(hits);
            return;
        }
        for c in 0..k {
            if !used[c] {
                used[c] = true;
                perm.push(c);
                permute(perm, used, pred, truth, best);
                perm.pop();
                used[c] = false;
            }
        }
    }
    let mut best = 0;
    permute(&mut Vec::new(), &mut vec![false; k], pred, truth, &mut best);
    best as f64 / pred.len() as f64
}

/// Starts every trial from the true label model and near one-hot true labels.
pub struct OracleInit {
    pub g: MlpModel,
    pub labels: Vec<usize>,
    pub logit_scale: f64,
}

impl SurrogateInit for OracleInit {
    fn init(
        &self,
        slice: &AttackSlice,
        num_classes: usize,
        _config: &AttackConfig,
        _rng: &mut Rng,
    ) -> splitleak_core::Result<SurrogateState> {
        let mut y_hat = Matrix::zeros(slice.len(), num_classes);
        for (r, &l) in self.labels.iter().enumerate() {
            y_hat.set(r, l, self.logit_scale);
        }
        SurrogateState::new(self.g.clone(), y_hat)
    }
}

/// Exact `f64` slice produced by a frozen label model on one-hot labels.
pub fn oracle_slice(g: &MlpModel, z: &Matrix, labels: &[usize]) -> AttackSlice {
    let k = g.output_dim();
    let mut y = Matrix::zeros(z.rows(), k);
    for (r, &l) in labels.iter().enumerate() {
        y.set(r, l, 1.0);
    }
    let grads = backward(g, z, &y).unwrap().1.inputs;
    AttackSlice::new((0..z.rows() as u64).collect(), z.clone(), grads).unwrap()
}
