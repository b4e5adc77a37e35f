use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::defense::{perturb_gradient_in_place, NoiseConfig};
use crate::error::{invalid, Result};
use crate::nn::{backward, backward_from_upstream, MlpModel, Optimizer, OptimizerConfig};
use crate::numerics::{Matrix, Rng};

use super::transcript::{Transcript, TranscriptMeta, TranscriptRecord};
use super::transport::LabelLink;
use super::wire::{F32Matrix, WireMessage};
use super::ProtocolError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 10, batch_size: 64, optimizer: OptimizerConfig::default() }
    }
}

/// The party holding the inputs and `f`. It never sees labels or `g`.
pub struct InputOwner {
    f: MlpModel,
    optimizer: Optimizer,
    inputs: Matrix,
    ids: Vec<u64>,
    rng: Rng,
    config: TrainConfig,
    transcript: Transcript,
    last_completed: Option<u64>,
}

impl InputOwner {
    pub fn new(f: MlpModel, inputs: Matrix, ids: Vec<u64>, config: TrainConfig, rng: Rng) -> Result<Self> {
        if inputs.rows() != ids.len() {
            return invalid(format!("{} inputs but {} ids", inputs.rows(), ids.len()));
        }
        if config.batch_size == 0 {
            return invalid("batch size must be positive");
        }
        f.forward(&Matrix::zeros(0, inputs.cols()))?;
        let transcript = Transcript::new(TranscriptMeta {
            embedding_dim: f.output_dim(),
            num_epochs: config.epochs,
            batch_size: config.batch_size as u32,
            noise_sigma: None,
        });
        Ok(Self { optimizer: Optimizer::new(config.optimizer, &f), f, inputs, ids, rng, config, transcript, last_completed: None })
    }

    pub fn from_dataset(f: MlpModel, data: &Dataset, config: TrainConfig, rng: Rng) -> Result<Self> {
        Self::new(f, data.inputs().clone(), data.ids().to_vec(), config, rng)
    }

    pub fn embedding_dim(&self) -> usize {
        self.f.output_dim()
    }

    pub fn model(&self) -> &MlpModel {
        &self.f
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_parts(self) -> (MlpModel, Transcript) {
        (self.f, self.transcript)
    }

    /// Drives all epochs against the label owner behind `link`.
    pub fn run(&mut self, link: &mut dyn LabelLink) -> std::result::Result<(), ProtocolError> {
        let n = self.ids.len();
        let mut batch_id = 0u64;
        let mut order: Vec<usize> = (0..n).collect();
        for epoch in 0..self.config.epochs {
            self.rng.shuffle(&mut order);
            for rows in order.chunks(self.config.batch_size) {
                self.step(link, epoch, batch_id, rows)?;
                self.last_completed = Some(batch_id);
                batch_id += 1;
            }
            link.exchange(&WireMessage::EndEpoch { epoch }).map_err(|e| self.abort(e))?;
        }
        Ok(())
    }

    fn abort(&self, reason: ProtocolError) -> ProtocolError {
        match reason {
            ProtocolError::Aborted { reason, .. } => {
                ProtocolError::Aborted { last_completed_batch: self.last_completed, reason }
            }
            other => other,
        }
    }

    fn step(&mut self, link: &mut dyn LabelLink, epoch: u32, batch_id: u64, rows: &[usize]) -> std::result::Result<(), ProtocolError> {
        let x = self.inputs.select_rows(rows);
        let ids: Vec<u64> = rows.iter().map(|&r| self.ids[r]).collect();
        let z = self.f.forward(&x).map_err(internal)?;
        let z_wire = F32Matrix::quantize(&z);
        let reply = link
            .exchange(&WireMessage::ForwardBatch { batch_id, ids: ids.clone(), z: z_wire.clone() })
            .map_err(|e| self.abort(e))?;
        let grads = match reply {
            Some(WireMessage::BackwardBatch { batch_id: got, grads }) if got == batch_id => grads,
            Some(WireMessage::BackwardBatch { batch_id: got, .. }) => {
                return Err(ProtocolError::Violation(format!("expected backward for batch {batch_id}, got {got}")))
            }
            other => return Err(ProtocolError::Violation(format!("expected a backward batch, got {other:?}"))),
        };
        if (grads.rows, grads.cols) != (z_wire.rows, z_wire.cols) {
            return Err(ProtocolError::Violation(format!(
                "gradient shape {}x{} does not match embedding {}x{}",
                grads.rows, grads.cols, z_wire.rows, z_wire.cols
            )));
        }
        let grads = grads.to_f64();
        let z_sent = z_wire.to_f64();
        for (i, &id) in ids.iter().enumerate() {
            self.transcript
                .push(TranscriptRecord { input_id: id, epoch, z: z_sent.row(i).to_vec(), grad_z: grads.row(i).to_vec() })
                .map_err(internal)?;
        }
        // received rows are per-example gradients; f descends the batch mean
        let mut upstream = grads;
        upstream.scale(1.0 / rows.len() as f64);
        let param_grads = backward_from_upstream(&self.f, &x, &upstream).map_err(internal)?;
        self.optimizer.step(&mut self.f, &param_grads).map_err(internal)?;
        Ok(())
    }

    pub(crate) fn set_noise_sigma(&mut self, sigma: Option<f64>) {
        self.transcript.meta.noise_sigma = sigma;
    }
}

fn internal(e: crate::Error) -> ProtocolError {
    ProtocolError::Violation(e.to_string())
}

/// The party holding the labels and `g`.
pub struct LabelOwner {
    g: MlpModel,
    optimizer: Optimizer,
    labels: HashMap<u64, usize>,
    noise: Option<(NoiseConfig, Rng)>,
    epochs: u32,
    finished: bool,
    served: u64,
    disconnect_after: Option<u64>,
    epoch_losses: Vec<f64>,
    loss_acc: (f64, usize),
}

impl LabelOwner {
    pub fn new(g: MlpModel, ids: &[u64], labels: &[usize], config: TrainConfig, noise: Option<NoiseConfig>) -> Result<Self> {
        if ids.len() != labels.len() {
            return invalid(format!("{} ids but {} labels", ids.len(), labels.len()));
        }
        let k = g.output_dim();
        if let Some(l) = labels.iter().find(|&&l| l >= k) {
            return invalid(format!("label {l} outside [0, {k})"));
        }
        if let Some(cfg) = &noise {
            cfg.validate()?;
        }
        Ok(Self {
            optimizer: Optimizer::new(config.optimizer, &g),
            g,
            labels: ids.iter().copied().zip(labels.iter().copied()).collect(),
            noise: noise.filter(|c| c.sigma > 0.0).map(|c| (c, Rng::new(c.seed))),
            epochs: config.epochs,
            finished: config.epochs == 0,
            served: 0,
            disconnect_after: None,
            epoch_losses: Vec::new(),
            loss_acc: (0.0, 0),
        })
    }

    pub fn from_dataset(g: MlpModel, data: &Dataset, config: TrainConfig, noise: Option<NoiseConfig>) -> Result<Self> {
        Self::new(g, data.ids(), data.labels(), config, noise)
    }

    /// Fault injection: drop the connection once `batches` forward batches
    /// have been answered.
    pub fn disconnect_after(mut self, batches: u64) -> Self {
        self.disconnect_after = Some(batches);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.g.input_dim()
    }

    pub fn model(&self) -> &MlpModel {
        &self.g
    }

    pub fn into_model(self) -> MlpModel {
        self.g
    }

    /// Mean training loss per completed epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    pub(crate) fn noise_sigma(&self) -> Option<f64> {
        self.noise.as_ref().map(|(c, _)| c.sigma)
    }

    /// True once the final epoch has been closed.
    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// True when the fault-injection budget is spent.
    pub(crate) fn should_disconnect(&self) -> bool {
        self.disconnect_after.is_some_and(|n| self.served >= n)
    }

    /// Processes one incoming message, returning the reply if one is due.
    pub fn handle(&mut self, msg: WireMessage) -> std::result::Result<Option<WireMessage>, ProtocolError> {
        match msg {
            WireMessage::ForwardBatch { batch_id, ids, z } => {
                if z.cols != self.g.input_dim() || ids.len() != z.rows {
                    return Err(ProtocolError::Violation(format!(
                        "forward batch {batch_id} is {}x{} with {} ids; g expects {} columns",
                        z.rows,
                        z.cols,
                        ids.len(),
                        self.g.input_dim()
                    )));
                }
                let mut targets = Matrix::zeros(ids.len(), self.g.output_dim());
                for (r, id) in ids.iter().enumerate() {
                    let label = *self
                        .labels
                        .get(id)
                        .ok_or_else(|| ProtocolError::Violation(format!("unknown input id {id}")))?;
                    targets.set(r, label, 1.0);
                }
                let z = z.to_f64();
                let (loss, bundle) = backward(&self.g, &z, &targets).map_err(internal)?;
                let mut sent = bundle.inputs;
                if let Some((cfg, rng)) = &mut self.noise {
                    for r in 0..sent.rows() {
                        perturb_gradient_in_place(sent.row_mut(r), cfg.sigma, rng);
                    }
                }
                // g's own update never passes through the (noisy) wire
                self.optimizer.step(&mut self.g, &bundle.params).map_err(internal)?;
                self.loss_acc.0 += loss * ids.len() as f64;
                self.loss_acc.1 += ids.len();
                self.served += 1;
                Ok(Some(WireMessage::BackwardBatch { batch_id, grads: F32Matrix::quantize(&sent) }))
            }
            WireMessage::EndEpoch { epoch } => {
                let (sum, count) = std::mem::take(&mut self.loss_acc);
                self.epoch_losses.push(if count > 0 { sum / count as f64 } else { 0.0 });
                if epoch + 1 >= self.epochs {
                    self.finished = true;
                }
                Ok(None)
            }
            WireMessage::BackwardBatch { batch_id, .. } => {
                Err(ProtocolError::Violation(format!("label owner received a backward batch ({batch_id})")))
            }
        }
    }
}
