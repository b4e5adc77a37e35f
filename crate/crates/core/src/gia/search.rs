use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::Rng;

use super::train::TrialSummary;

/// Loss weights and learning rates for one outer-loop trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GiaHyperParams {
    pub lambda_ce: f64,
    pub lambda_p: f64,
    pub eta_g: f64,
    pub eta_y: f64,
}

/// Closed search intervals, each `(low, high)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchRanges {
    pub lambda_ce: (f64, f64),
    pub lambda_p: (f64, f64),
    pub eta_g: (f64, f64),
    pub eta_y: (f64, f64),
}

impl Default for SearchRanges {
    fn default() -> Self {
        Self { lambda_ce: (0.1, 3.0), lambda_p: (0.1, 3.0), eta_g: (1e-5, 1e-4), eta_y: (1e-2, 1e-1) }
    }
}

impl SearchRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lambda_ce", self.lambda_ce),
            ("lambda_p", self.lambda_p),
            ("eta_g", self.eta_g),
            ("eta_y", self.eta_y),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return invalid(format!("range {name} = [{lo}, {hi}] must satisfy 0 < low <= high"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, hp: &GiaHyperParams) -> bool {
        let within = |(lo, hi): (f64, f64), x: f64| x >= lo && x <= hi;
        within(self.lambda_ce, hp.lambda_ce)
            && within(self.lambda_p, hp.lambda_p)
            && within(self.eta_g, hp.eta_g)
            && within(self.eta_y, hp.eta_y)
    }
}

/// Proposes hyperparameters for outer-loop trials.
pub trait SearchStrategy: Sync {
    fn propose(&self, trial: usize, history: &[TrialSummary], rng: &mut Rng) -> GiaHyperParams;

    /// Strategies that ignore `history` let trials run concurrently.
    fn uses_history(&self) -> bool {
        true
    }
}

/// Independent log-uniform draws over the configured ranges.
#[derive(Clone, Copy, Debug)]
pub struct RandomSearch {
    pub ranges: SearchRanges,
}

impl SearchStrategy for RandomSearch {
    fn propose(&self, _trial: usize, _history: &[TrialSummary], rng: &mut Rng) -> GiaHyperParams {
        let r = &self.ranges;
        GiaHyperParams {
            lambda_ce: rng.log_uniform(r.lambda_ce.0, r.lambda_ce.1),
            lambda_p: rng.log_uniform(r.lambda_p.0, r.lambda_p.1),
            eta_g: rng.log_uniform(r.eta_g.0, r.eta_g.1),
            eta_y: rng.log_uniform(r.eta_y.0, r.eta_y.1),
        }
    }

    fn uses_history(&self) -> bool {
        false
    }
}
