use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{Matrix, Rng};

/// One affine layer: `weight` is `[out x in]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self { weight: Matrix::zeros(output, input), bias: vec![0.0; output] }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn num_params(&self) -> usize {
        self.weight.as_slice().len() + self.bias.len()
    }

    /// `out[i] = W a_i + b` for each row `a_i`.
    pub(crate) fn apply(&self, inputs: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(inputs.rows(), self.output_dim());
        for (i, a) in inputs.iter_rows().enumerate() {
            let row = out.row_mut(i);
            for (o, (w, b)) in row.iter_mut().zip(self.weight.iter_rows().zip(&self.bias)) {
                *o = b + crate::numerics::matrix::dot(w, a);
            }
        }
        out
    }
}

/// Gradients with the same layout as an [`MlpModel`].
pub type ParamGrads = Vec<Dense>;

/// Fully-connected network: ReLU between layers, raw logits out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

impl MlpModel {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return invalid("model needs at least one layer");
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.bias.len() != layer.output_dim() {
                return invalid(format!("layer {l}: bias length does not match output dim"));
            }
            if l > 0 && layers[l - 1].output_dim() != layer.input_dim() {
                return invalid(format!(
                    "layer {l}: input dim {} does not chain from previous output {}",
                    layer.input_dim(),
                    layers[l - 1].output_dim()
                ));
            }
            if !layer.weight.is_finite() || layer.bias.iter().any(|b| !b.is_finite()) {
                return invalid(format!("layer {l}: non-finite parameters"));
            }
        }
        Ok(Self { layers })
    }

    /// Glorot-uniform weights, zero biases. `dims = [in, hidden..., out]`.
    pub fn new(dims: &[usize], rng: &mut Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return invalid(format!("invalid layer dims {dims:?}"));
        }
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Dense::zeros(fan_in, fan_out);
                layer.weight.as_mut_slice().iter_mut().for_each(|x| *x = rng.uniform_range(-a, a));
                layer
            })
            .collect();
        Self::from_layers(layers)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return invalid(format!("invalid layer dims {dims:?}"));
        }
        Self::from_layers(dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect())
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// `[in, hidden..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Dense::output_dim)).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn zero_grads(&self) -> ParamGrads {
        self.layers.iter().map(|l| Dense::zeros(l.input_dim(), l.output_dim())).collect()
    }

    pub(crate) fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.input_dim() {
            return invalid(format!(
                "input has {} columns but the model expects {}",
                inputs.cols(),
                self.input_dim()
            ));
        }
        Ok(())
    }

    pub fn forward(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_input(inputs)?;
        let mut a = inputs.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            a = layer.apply(&a);
            if l + 1 < self.layers.len() {
                relu_in_place(&mut a);
            }
        }
        Ok(a)
    }

    pub fn forward_cached(&self, inputs: &Matrix) -> Result<ForwardCache> {
        self.check_input(inputs)?;
        let mut activations = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        activations.push(inputs.clone());
        for (l, layer) in self.layers.iter().enumerate() {
            let h = layer.apply(&activations[l]);
            if l + 1 < self.layers.len() {
                let mut a = h.clone();
                relu_in_place(&mut a);
                activations.push(a);
            }
            pre.push(h);
        }
        Ok(ForwardCache { activations, pre })
    }
}

/// Intermediate values of a forward pass.
///
/// `activations[l]` is the input to layer `l` (so `activations[0]` is the
/// batch itself); `pre[l]` is layer `l`'s affine output. The last entry of
/// `pre` holds the logits.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub activations: Vec<Matrix>,
    pub pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Matrix {
        self.pre.last().expect("model has at least one layer")
    }
}

fn relu_in_place(m: &mut Matrix) {
    m.as_mut_slice().iter_mut().for_each(|x| *x = x.max(0.0));
}
