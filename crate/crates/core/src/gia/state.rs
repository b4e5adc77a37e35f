use crate::error::{invalid, Result};
use crate::nn::{AdamState, MlpModel};
use crate::numerics::{softmax_rows, Matrix, Rng};
use crate::protocol::Transcript;

use super::{AttackConfig, EpochChoice};

/// The recorded embeddings and gradients under attack, one row per record.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackSlice {
    pub ids: Vec<u64>,
    pub z: Matrix,
    pub grads: Matrix,
}

impl AttackSlice {
    pub fn new(ids: Vec<u64>, z: Matrix, grads: Matrix) -> Result<Self> {
        if z.shape() != grads.shape() || ids.len() != z.rows() {
            return invalid(format!(
                "slice has {} ids, z {:?}, grads {:?}",
                ids.len(),
                z.shape(),
                grads.shape()
            ));
        }
        Ok(Self { ids, z, grads })
    }

    pub fn from_transcript(t: &Transcript, epoch: EpochChoice) -> Result<Self> {
        let Some(last) = t.last_epoch() else {
            return invalid("transcript is empty");
        };
        let e = match epoch {
            EpochChoice::Last => last,
            EpochChoice::Index(i) => i,
        };
        let (ids, z, grads) = t.epoch_matrices(e);
        if ids.is_empty() {
            return invalid(format!("transcript has no records for epoch {e}"));
        }
        Self::new(ids, z, grads)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn embedding_dim(&self) -> usize {
        self.z.cols()
    }
}

/// The attack's learnable variables: `g'` and the label logits `ŷ`, each
/// with its own Adam state.
#[derive(Clone, Debug)]
pub struct SurrogateState {
    pub g_prime: MlpModel,
    pub y_hat: Matrix,
    pub g_adam: AdamState,
    pub y_adam: AdamState,
}

impl SurrogateState {
    pub fn new(g_prime: MlpModel, y_hat: Matrix) -> Result<Self> {
        if y_hat.cols() != g_prime.output_dim() {
            return invalid(format!(
                "label logits have {} classes but g' outputs {}",
                y_hat.cols(),
                g_prime.output_dim()
            ));
        }
        if !y_hat.is_finite() {
            return invalid("label logits must be finite");
        }
        Ok(Self {
            g_adam: AdamState::for_model(&g_prime),
            y_adam: AdamState::new(y_hat.as_slice().len()),
            g_prime,
            y_hat,
        })
    }

    pub fn num_records(&self) -> usize {
        self.y_hat.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.y_hat.cols()
    }

    /// Surrogate labels `y' = softmax(ŷ)`.
    pub fn y_prime(&self) -> Matrix {
        softmax_rows(&self.y_hat)
    }
}

/// Builds the starting state of each outer-loop trial.
pub trait SurrogateInit: Sync {
    fn init(&self, slice: &AttackSlice, num_classes: usize, config: &AttackConfig, rng: &mut Rng) -> Result<SurrogateState>;
}

/// Glorot-initialised `g'` and `ŷ ~ N(0, y_init_std²)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct RandomInit;

impl SurrogateInit for RandomInit {
    fn init(&self, slice: &AttackSlice, num_classes: usize, config: &AttackConfig, rng: &mut Rng) -> Result<SurrogateState> {
        let mut dims = vec![slice.embedding_dim()];
        dims.extend(&config.surrogate_hidden);
        dims.push(num_classes);
        let g_prime = MlpModel::new(&dims, rng)?;
        let mut y_hat = Matrix::zeros(slice.len(), num_classes);
        y_hat.as_mut_slice().iter_mut().for_each(|v| *v = rng.normal(0.0, config.y_init_std));
        SurrogateState::new(g_prime, y_hat)
    }
}
