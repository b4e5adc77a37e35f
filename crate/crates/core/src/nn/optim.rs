use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::Matrix;

use super::model::{MlpModel, ParamGrads};

/// Adam moments for a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self { m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn for_model(model: &MlpModel) -> Self {
        Self::new(model.num_params())
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn num_params(&self) -> usize {
        self.m.len()
    }

    /// One Adam update over `params` in-place. Parameter order must be stable
    /// between calls.
    fn update<'a>(&mut self, params: impl Iterator<Item = (&'a mut f64, f64)>, lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, (p, g)) in params.enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }

    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return invalid(format!(
                "adam shape mismatch: {} params, {} grads, state for {}",
                params.len(),
                grads.len(),
                self.m.len()
            ));
        }
        self.update(params.iter_mut().zip(grads.iter().copied()), lr);
        Ok(())
    }

    pub fn step_matrix(&mut self, params: &mut Matrix, grads: &Matrix, lr: f64) -> Result<()> {
        if params.shape() != grads.shape() {
            return invalid(format!("adam shape mismatch: {:?} vs {:?}", params.shape(), grads.shape()));
        }
        self.step_slice(params.as_mut_slice(), grads.as_slice(), lr)
    }

    pub fn step_model(&mut self, model: &mut MlpModel, grads: &ParamGrads, lr: f64) -> Result<()> {
        check_grads(model, grads)?;
        if model.num_params() != self.m.len() {
            return invalid(format!(
                "adam state sized for {} params, model has {}",
                self.m.len(),
                model.num_params()
            ));
        }
        let params = model.layers_mut().iter_mut().zip(grads).flat_map(|(layer, g)| {
            layer
                .weight
                .as_mut_slice()
                .iter_mut()
                .zip(g.weight.as_slice().iter().copied())
                .chain(layer.bias.iter_mut().zip(g.bias.iter().copied()))
        });
        self.update(params, lr);
        Ok(())
    }
}

fn check_grads(model: &MlpModel, grads: &ParamGrads) -> Result<()> {
    let ok = grads.len() == model.layers().len()
        && model
            .layers()
            .iter()
            .zip(grads)
            .all(|(l, g)| l.weight.shape() == g.weight.shape() && l.bias.len() == g.bias.len());
    if ok {
        Ok(())
    } else {
        invalid("gradient layout does not mirror the model")
    }
}

/// Plain gradient descent: `θ ← θ − lr · g`.
pub fn sgd_step(model: &mut MlpModel, grads: &ParamGrads, lr: f64) -> Result<()> {
    check_grads(model, grads)?;
    for (layer, g) in model.layers_mut().iter_mut().zip(grads) {
        for (p, d) in layer.weight.as_mut_slice().iter_mut().zip(g.weight.as_slice()) {
            *p -= lr * d;
        }
        for (p, d) in layer.bias.iter_mut().zip(&g.bias) {
            *p -= lr * d;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::Adam, lr: 0.001 }
    }
}

/// A configured optimizer bound to one model.
#[derive(Clone, Debug)]
pub enum Optimizer {
    Adam { state: AdamState, lr: f64 },
    Sgd { lr: f64 },
}

impl Optimizer {
    pub fn new(cfg: OptimizerConfig, model: &MlpModel) -> Self {
        match cfg.kind {
            OptimizerKind::Adam => Optimizer::Adam { state: AdamState::for_model(model), lr: cfg.lr },
            OptimizerKind::Sgd => Optimizer::Sgd { lr: cfg.lr },
        }
    }

    pub fn step(&mut self, model: &mut MlpModel, grads: &ParamGrads) -> Result<()> {
        match self {
            Optimizer::Adam { state, lr } => state.step_model(model, grads, *lr),
            Optimizer::Sgd { lr } => sgd_step(model, grads, *lr),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{backward, Dense};
    use crate::numerics::Rng;

    fn scalar_model(w: f64) -> MlpModel {
        MlpModel::from_layers(vec![Dense { weight: Matrix::from_vec(1, 1, vec![w]).unwrap(), bias: vec![0.0] }])
            .unwrap()
    }

    #[test]
    fn adam_first_step() {
        let mut p = [1.0];
        let mut st = AdamState::new(1);
        st.step_slice(&mut p, &[0.5], 0.001).unwrap();
        let expect = 1.0 - 0.001 * 0.5 / (0.5 + 1e-8);
        assert!((p[0] - expect).abs() < 1e-15);
        assert!((p[0] - 0.999).abs() < 1e-8);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut model = scalar_model(2.0);
        let mut st = AdamState::for_model(&model);
        let g = model.zero_grads();
        for _ in 0..3 {
            st.step_model(&mut model, &g, 0.1).unwrap();
        }
        assert_eq!(model, scalar_model(2.0));
        assert_eq!(st.step_count(), 3);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut st = AdamState::new(2);
        assert!(st.step_slice(&mut [0.0], &[1.0], 0.1).is_err());
        let mut model = scalar_model(1.0);
        let zeros = model.zero_grads();
        let mut wrong = AdamState::new(model.num_params() + 1);
        assert!(wrong.step_model(&mut model, &zeros, 0.1).is_err());
    }

    #[test]
    fn sgd_examples() {
        let mut model = scalar_model(2.0);
        let mut g = model.zero_grads();
        g[0].weight.set(0, 0, 1.0);
        sgd_step(&mut model, &g, 0.0).unwrap();
        assert_eq!(model.layers()[0].weight.get(0, 0), 2.0);
        sgd_step(&mut model, &g, 0.1).unwrap();
        assert!((model.layers()[0].weight.get(0, 0) - 1.9).abs() < 1e-15);
    }

    #[test]
    fn adam_is_not_sgd() {
        // Adam normalises per coordinate, so one step generally differs from SGD.
        let mut rng = Rng::new(9);
        let model = MlpModel::new(&[3, 4, 2], &mut rng).unwrap();
        let x = crate::nn::testutil::random_matrix(&mut rng, 5, 3, 1.0);
        let y = crate::nn::testutil::random_simplex_rows(&mut rng, 5, 2);
        let (_, g) = backward(&model, &x, &y).unwrap();
        let mut a = model.clone();
        let mut s = model.clone();
        AdamState::for_model(&a).step_model(&mut a, &g.params, 0.01).unwrap();
        sgd_step(&mut s, &g.params, 0.01).unwrap();
        assert_ne!(a, s);
    }

    #[test]
    fn adam_deterministic() {
        let run = || {
            let mut rng = Rng::new(77);
            let mut model = MlpModel::new(&[2, 3, 2], &mut rng).unwrap();
            let mut st = AdamState::for_model(&model);
            let x = crate::nn::testutil::random_matrix(&mut rng, 8, 2, 1.0);
            let y = crate::nn::testutil::random_simplex_rows(&mut rng, 8, 2);
            for _ in 0..10 {
                let (_, g) = backward(&model, &x, &y).unwrap();
                st.step_model(&mut model, &g.params, 0.01).unwrap();
            }
            model
        };
        assert_eq!(run(), run());
    }
}
