use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LabelPrior;
use crate::error::{invalid, Result};
use crate::numerics::{derive_seed, Matrix, Rng};
use crate::protocol::Transcript;

use super::loss::{gia_loss, gradient_match_term, replay_forward_backward};
use super::search::{GiaHyperParams, RandomSearch, SearchStrategy};
use super::state::{AttackSlice, RandomInit, SurrogateInit, SurrogateState};
use super::{AttackConfig, PriorScope, Regularizers, SelectionObjective};

#[derive(Clone, Debug, PartialEq)]
pub struct InnerOutcome {
    /// Epoch-mean attack loss, one entry per completed epoch.
    pub epoch_losses: Vec<f64>,
    /// Gradient-match term over the whole slice after training.
    pub grad_loss: f64,
}

/// One outer-loop trial as recorded in the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub hparams: GiaHyperParams,
    pub objective: f64,
    pub grad_loss: f64,
    pub epochs_run: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub ids: Vec<u64>,
    /// Row-argmax of `y_prime`.
    pub labels: Vec<usize>,
    pub y_prime: Matrix,
    pub best_hparams: GiaHyperParams,
    pub best_objective: f64,
    pub best_trial: usize,
    pub trace: Vec<TrialSummary>,
}

/// Minibatch Adam on the attack loss until the epoch budget runs out or the
/// epoch-mean loss stops improving by at least `config.tolerance` (relative).
pub fn inner_train(
    state: &mut SurrogateState,
    slice: &AttackSlice,
    prior: &LabelPrior,
    hp: &GiaHyperParams,
    config: &AttackConfig,
    rng: &mut Rng,
) -> Result<InnerOutcome> {
    if slice.is_empty() {
        return invalid("attack slice is empty");
    }
    let mut order: Vec<usize> = (0..slice.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.inner_epochs);
    for _ in 0..config.inner_epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for rows in order.chunks(config.batch_size) {
            let loss = gia_loss(state, slice, rows, prior, hp, config.regularizers, config.prior_scope)?;
            state.g_adam.step_model(&mut state.g_prime, &loss.g_grads, hp.eta_g)?;
            state.y_adam.step_matrix(&mut state.y_hat, &loss.y_grads, hp.eta_y)?;
            sum += loss.total;
            batches += 1;
        }
        let mean = sum / batches as f64;
        let prev = epoch_losses.last().copied();
        epoch_losses.push(mean);
        if let Some(prev) = prev {
            let improvement = (prev - mean) / prev.abs().max(f64::MIN_POSITIVE);
            if !(improvement >= config.tolerance) {
                break;
            }
        }
    }
    let grad_loss = full_grad_loss(state, slice)?;
    Ok(InnerOutcome { epoch_losses, grad_loss })
}

fn full_grad_loss(state: &SurrogateState, slice: &AttackSlice) -> Result<f64> {
    let (_, replayed) = replay_forward_backward(&state.g_prime, &slice.z, &state.y_prime())?;
    gradient_match_term(&slice.grads, &replayed)
}

/// Trial ranking score. Never looks at true labels: only the slice, the
/// prior and the surrogate state enter.
pub fn selection_objective(
    state: &SurrogateState,
    slice: &AttackSlice,
    prior: &LabelPrior,
    config: &AttackConfig,
) -> Result<f64> {
    match config.objective {
        SelectionObjective::GradLoss => full_grad_loss(state, slice),
        SelectionObjective::FullLossUnitLambdas => {
            let unit = GiaHyperParams { lambda_ce: 1.0, lambda_p: 1.0, eta_g: 0.0, eta_y: 0.0 };
            let rows: Vec<usize> = (0..slice.len()).collect();
            let loss = gia_loss(state, slice, &rows, prior, &unit, Regularizers::default(), PriorScope::Batch)?;
            Ok(loss.total)
        }
    }
}

/// Attacks the configured epoch of `transcript` with random search and
/// random initialisation.
pub fn run_gia(transcript: &Transcript, prior: &LabelPrior, config: &AttackConfig) -> Result<AttackResult> {
    let slice = AttackSlice::from_transcript(transcript, config.epoch)?;
    run_gia_with(&slice, prior, config, &RandomInit, &RandomSearch { ranges: config.ranges })
}

struct TrialOutput {
    summary: TrialSummary,
    y_prime: Matrix,
}

fn run_trial(
    t: usize,
    history: &[TrialSummary],
    slice: &AttackSlice,
    prior: &LabelPrior,
    config: &AttackConfig,
    init: &dyn SurrogateInit,
    search: &dyn SearchStrategy,
) -> Result<TrialOutput> {
    let rng = Rng::new(derive_seed(config.seed, t as u64));
    let hp = search.propose(t, history, &mut rng.fork(0));
    let mut state = init.init(slice, prior.num_classes(), config, &mut rng.fork(1))?;
    let inner = inner_train(&mut state, slice, prior, &hp, config, &mut rng.fork(2))?;
    let objective = match config.objective {
        SelectionObjective::GradLoss => inner.grad_loss,
        SelectionObjective::FullLossUnitLambdas => selection_objective(&state, slice, prior, config)?,
    };
    Ok(TrialOutput {
        summary: TrialSummary {
            trial: t,
            hparams: hp,
            objective,
            grad_loss: inner.grad_loss,
            epochs_run: inner.epoch_losses.len(),
        },
        y_prime: state.y_prime(),
    })
}

/// The outer loop with pluggable initialisation and search. Trials are run
/// concurrently when the search strategy ignores history; the result is the
/// same either way.
pub fn run_gia_with(
    slice: &AttackSlice,
    prior: &LabelPrior,
    config: &AttackConfig,
    init: &dyn SurrogateInit,
    search: &dyn SearchStrategy,
) -> Result<AttackResult> {
    config.validate()?;
    if slice.is_empty() {
        return invalid("attack slice is empty");
    }
    let outputs: Vec<TrialOutput> = if search.uses_history() {
        let mut out: Vec<TrialOutput> = Vec::with_capacity(config.n_outer);
        let mut history = Vec::with_capacity(config.n_outer);
        for t in 0..config.n_outer {
            let o = run_trial(t, &history, slice, prior, config, init, search)?;
            history.push(o.summary.clone());
            out.push(o);
        }
        out
    } else {
        (0..config.n_outer)
            .into_par_iter()
            .map(|t| run_trial(t, &[], slice, prior, config, init, search))
            .collect::<Result<_>>()?
    };

    let rank = |x: f64| if x.is_nan() { f64::INFINITY } else { x };
    let mut best = 0;
    for (i, o) in outputs.iter().enumerate() {
        if rank(o.summary.objective) < rank(outputs[best].summary.objective) {
            best = i;
        }
    }
    let trace: Vec<TrialSummary> = outputs.iter().map(|o| o.summary.clone()).collect();
    let winner = outputs.into_iter().nth(best).expect("n_outer > 0");
    Ok(AttackResult {
        ids: slice.ids.clone(),
        labels: winner.y_prime.row_argmax(),
        y_prime: winner.y_prime,
        best_hparams: winner.summary.hparams,
        best_objective: winner.summary.objective,
        best_trial: best,
        trace,
    })
}
