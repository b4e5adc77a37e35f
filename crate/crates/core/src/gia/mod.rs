//! Gradient inversion attack.
//!
//! The attacker replaces the label owner's model and labels with a
//! surrogate network `g'` and free label logits `ŷ`, replays the recorded
//! embeddings through them, and trains both so the replayed embedding
//! gradients match the recorded ones. An outer search over the loss weights
//! and learning rates keeps the trial with the smallest gradient mismatch.

mod export;
mod loss;
mod search;
mod state;
mod train;

pub use export::{write_attack_csv, write_attack_json, AttackSidecar};
pub use loss::{gia_loss, gradient_match_term, replay_forward_backward, GiaLoss};
pub use search::{GiaHyperParams, RandomSearch, SearchRanges, SearchStrategy};
pub use state::{AttackSlice, RandomInit, SurrogateInit, SurrogateState};
pub use train::{inner_train, run_gia, run_gia_with, selection_objective, AttackResult, InnerOutcome, TrialSummary};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which loss terms besides gradient matching are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Regularizers {
    /// Label-prior KL term.
    pub use_lpr: bool,
    /// Normalised cross-entropy term.
    pub use_cer: bool,
}

impl Default for Regularizers {
    fn default() -> Self {
        Self { use_lpr: true, use_cer: true }
    }
}

/// Objective used to rank outer-loop trials.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionObjective {
    /// Mean gradient mismatch only.
    GradLoss,
    /// Full attack loss with both weights fixed to 1; used against noisy gradients.
    FullLossUnitLambdas,
}

/// Where the surrogate label distribution `P_y'` is averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorScope {
    Batch,
    /// Over every record of the attacked slice, recomputed before each batch.
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochChoice {
    Last,
    Index(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub n_outer: usize,
    pub inner_epochs: usize,
    pub batch_size: usize,
    /// Hidden widths of `g'`; the output width is the class count.
    pub surrogate_hidden: Vec<usize>,
    pub ranges: SearchRanges,
    pub regularizers: Regularizers,
    pub seed: u64,
    pub objective: SelectionObjective,
    pub prior_scope: PriorScope,
    pub epoch: EpochChoice,
    /// Early stop when the epoch-mean loss improves by less than this fraction.
    pub tolerance: f64,
    /// Standard deviation of the initial label logits.
    pub y_init_std: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            n_outer: 20,
            inner_epochs: 30,
            batch_size: 64,
            surrogate_hidden: vec![64, 32],
            ranges: SearchRanges::default(),
            regularizers: Regularizers::default(),
            seed: 0,
            objective: SelectionObjective::GradLoss,
            prior_scope: PriorScope::Batch,
            epoch: EpochChoice::Last,
            tolerance: 1e-4,
            y_init_std: 0.1,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_outer == 0 || self.inner_epochs == 0 || self.batch_size == 0 {
            return invalid("n_outer, inner_epochs and batch_size must be positive");
        }
        if self.surrogate_hidden.contains(&0) {
            return invalid("surrogate hidden widths must be positive");
        }
        if !(self.tolerance >= 0.0) || !(self.y_init_std >= 0.0) {
            return invalid("tolerance and y_init_std must be non-negative");
        }
        self.ranges.validate()
    }
}
