//! Gaussian gradient-noise defense and the utility/privacy sweep.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::experiment::{fmt_float, median_gradient_norm, prepare_data, run_with, train_split, ExperimentConfig};
use crate::gia::SelectionObjective;
use crate::numerics::Rng;

/// Per-element noise standard deviation applied by the label owner, with the
/// seed of its noise stream.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(sigma: f64, seed: u64) -> Result<Self> {
        let cfg = Self { sigma, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return invalid(format!("noise sigma must be finite and non-negative, got {}", self.sigma));
        }
        Ok(())
    }
}

/// `grad + η` with `η ~ N(0, σ²)` i.i.d. per element. `σ = 0` returns the
/// input unchanged and draws nothing.
pub fn perturb_gradient(grad: &[f64], cfg: &NoiseConfig, rng: &mut Rng) -> Result<Vec<f64>> {
    cfg.validate()?;
    if grad.iter().any(|g| !g.is_finite()) {
        return invalid("gradient contains non-finite values");
    }
    let mut out = grad.to_vec();
    perturb_gradient_in_place(&mut out, cfg.sigma, rng);
    Ok(out)
}

pub(crate) fn perturb_gradient_in_place(grad: &mut [f64], sigma: f64, rng: &mut Rng) {
    if sigma == 0.0 {
        return;
    }
    grad.iter_mut().for_each(|g| *g += sigma * rng.standard_normal());
}

/// One point of the utility/privacy trade-off.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub sigma: f64,
    pub test_accuracy: f64,
    pub leak_accuracy: f64,
    pub seed: u64,
}

/// Trains with each `σ` and attacks the resulting transcript, ranking attack
/// trials by the full loss with unit weights since the gradient-match term
/// alone is dominated by the noise. Rows are seed-major, `sigmas` in order.
pub fn noise_sweep(sigmas: &[f64], cfg: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<TradeoffRow>> {
    if sigmas.is_empty() || seeds.is_empty() {
        return invalid("noise sweep needs at least one sigma and one seed");
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return invalid(format!("sigma {s} must be finite and non-negative"));
    }
    let points: Vec<(u64, f64)> = seeds.iter().flat_map(|&seed| sigmas.iter().map(move |&s| (seed, s))).collect();
    points
        .par_iter()
        .map(|&(seed, sigma)| {
            let cfg = cfg.with_seed(seed);
            let (train, test) = prepare_data(&cfg)?;
            let mut attack = cfg.attack_config();
            attack.objective = SelectionObjective::FullLossUnitLambdas;
            let out = run_with(&cfg, &train, &test, sigma, &attack)?;
            Ok(TradeoffRow { sigma, test_accuracy: out.test_accuracy, leak_accuracy: out.leak_accuracy, seed })
        })
        .collect()
}

/// `[0, mid, large]` anchored to the undefended gradient scale:
/// `large = 10 · median‖∇z L‖ / √D_z` and `mid = large / 10`.
pub fn anchored_sigmas(cfg: &ExperimentConfig) -> Result<[f64; 3]> {
    let (train, _) = prepare_data(cfg)?;
    let clean = train_split(cfg, &train, 0.0)?;
    let per_element = median_gradient_norm(&clean.transcript)? / (cfg.embedding_dim as f64).sqrt();
    Ok([0.0, per_element, 10.0 * per_element])
}

/// Columns `sigma, test_accuracy, leak_accuracy, seed`.
pub fn write_tradeoff_csv(rows: &[TradeoffRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sigma", "test_accuracy", "leak_accuracy", "seed"])?;
    for r in rows {
        w.write_record([fmt_float(r.sigma), fmt_float(r.test_accuracy), fmt_float(r.leak_accuracy), r.seed.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
