use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::fmt_float;

use super::search::GiaHyperParams;
use super::train::{AttackResult, TrialSummary};

/// JSON companion of the label CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackSidecar {
    pub best_hparams: GiaHyperParams,
    pub best_objective: f64,
    pub best_trial: usize,
    pub trace: Vec<TrialSummary>,
}

impl From<&AttackResult> for AttackSidecar {
    fn from(r: &AttackResult) -> Self {
        Self {
            best_hparams: r.best_hparams,
            best_objective: r.best_objective,
            best_trial: r.best_trial,
            trace: r.trace.clone(),
        }
    }
}

/// Columns `input_id, predicted_label, max_confidence`.
pub fn write_attack_csv(result: &AttackResult, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["input_id", "predicted_label", "max_confidence"])?;
    for (i, (&id, &label)) in result.ids.iter().zip(&result.labels).enumerate() {
        let conf = result.y_prime.get(i, label);
        w.write_record([id.to_string(), label.to_string(), fmt_float(conf)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_attack_json(result: &AttackResult, path: impl AsRef<Path>) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, &AttackSidecar::from(result))?;
    Ok(())
}
