use std::io::{BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use crate::data::Dataset;
use crate::defense::NoiseConfig;
use crate::error::{invalid, Error, Result};
use crate::nn::MlpModel;
use crate::numerics::Rng;

use super::party::{InputOwner, LabelOwner, TrainConfig};
use super::transcript::Transcript;
use super::wire::{decode_message, encode_message, read_message, WireMessage};
use super::ProtocolError;

/// The input owner's view of the connection to the label owner.
pub trait LabelLink {
    /// Sends `msg`; returns the reply for forward batches, `None` otherwise.
    fn exchange(&mut self, msg: &WireMessage) -> std::result::Result<Option<WireMessage>, ProtocolError>;
}

fn closed(reason: impl Into<String>) -> ProtocolError {
    ProtocolError::Aborted { last_completed_batch: None, reason: reason.into() }
}

/// Same-process link. Every message still goes through the codec so the
/// numerics match a real byte stream.
pub struct InProcessLink<'a> {
    owner: &'a mut LabelOwner,
}

impl<'a> InProcessLink<'a> {
    pub fn new(owner: &'a mut LabelOwner) -> Self {
        Self { owner }
    }
}

impl LabelLink for InProcessLink<'_> {
    fn exchange(&mut self, msg: &WireMessage) -> std::result::Result<Option<WireMessage>, ProtocolError> {
        if self.owner.should_disconnect() {
            return Err(closed("label owner closed the connection"));
        }
        let incoming = decode_message(&encode_message(msg)).map_err(|e| ProtocolError::Violation(e.to_string()))?;
        match self.owner.handle(incoming)? {
            Some(reply) => Ok(Some(
                decode_message(&encode_message(&reply)).map_err(|e| ProtocolError::Violation(e.to_string()))?,
            )),
            None => Ok(None),
        }
    }
}

/// Link over a TCP byte stream.
pub struct TcpLink {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl TcpLink {
    pub fn connect(addr: std::net::SocketAddr) -> std::io::Result<Self> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: stream })
    }
}

impl LabelLink for TcpLink {
    fn exchange(&mut self, msg: &WireMessage) -> std::result::Result<Option<WireMessage>, ProtocolError> {
        self.writer.write_all(&encode_message(msg)).map_err(|e| closed(format!("send failed: {e}")))?;
        if !matches!(msg, WireMessage::ForwardBatch { .. }) {
            return Ok(None);
        }
        match read_message(&mut self.reader) {
            Ok(Some(Ok(reply))) => Ok(Some(reply)),
            Ok(Some(Err(e))) => Err(ProtocolError::Violation(e.to_string())),
            Ok(None) => Err(closed("label owner closed the connection")),
            Err(e) => Err(closed(format!("receive failed: {e}"))),
        }
    }
}

/// Serves one input owner over `stream` until the last epoch closes.
fn serve(mut owner: LabelOwner, stream: TcpStream) -> std::result::Result<LabelOwner, ProtocolError> {
    stream.set_nodelay(true).map_err(|e| closed(e.to_string()))?;
    let mut reader = BufReader::new(stream.try_clone().map_err(|e| closed(e.to_string()))?);
    let mut writer = stream;
    while !owner.is_finished() {
        if owner.should_disconnect() {
            return Ok(owner);
        }
        let msg = match read_message(&mut reader) {
            Ok(Some(Ok(m))) => m,
            Ok(Some(Err(e))) => return Err(ProtocolError::Violation(e.to_string())),
            Ok(None) => return Err(closed("input owner closed the connection early")),
            Err(e) => return Err(closed(e.to_string())),
        };
        if let Some(reply) = owner.handle(msg)? {
            writer.write_all(&encode_message(&reply)).map_err(|e| closed(e.to_string()))?;
        }
    }
    Ok(owner)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transport {
    InProcess,
    /// Localhost TCP with the label owner on its own thread.
    Tcp,
}

#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub f: MlpModel,
    pub g: MlpModel,
    pub transcript: Transcript,
    /// Label owner's mean training loss per epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn run_over_transport(mut input: InputOwner, label: LabelOwner, transport: Transport) -> Result<SplitOutcome> {
    if input.embedding_dim() != label.input_dim() {
        return invalid(format!(
            "f produces {}-dim embeddings but g expects {}",
            input.embedding_dim(),
            label.input_dim()
        ));
    }
    input.set_noise_sigma(label.noise_sigma());
    let label = match transport {
        Transport::InProcess => {
            let mut label = label;
            input.run(&mut InProcessLink::new(&mut label))?;
            label
        }
        Transport::Tcp => {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            let addr = listener.local_addr()?;
            let server = thread::spawn(move || -> std::result::Result<LabelOwner, ProtocolError> {
                let (stream, _) = listener.accept().map_err(|e| closed(e.to_string()))?;
                serve(label, stream)
            });
            let driven = TcpLink::connect(addr).map_err(Error::from).and_then(|mut link| {
                let r = input.run(&mut link);
                drop(link);
                r.map_err(Error::from)
            });
            let served = server.join().map_err(|_| closed("label owner thread panicked"))?;
            driven?;
            served?
        }
    };
    let epoch_losses = label.epoch_losses().to_vec();
    let (f, transcript) = input.into_parts();
    Ok(SplitOutcome { f, g: label.into_model(), transcript, epoch_losses })
}

/// Runs split learning in-process over `data`.
///
/// The input owner shuffles with `rng`; the label owner draws defense noise
/// from the seed in `defense`.
pub fn split_train(
    f: MlpModel,
    g: MlpModel,
    data: &Dataset,
    config: TrainConfig,
    defense: Option<NoiseConfig>,
    rng: Rng,
) -> Result<SplitOutcome> {
    if g.output_dim() != data.num_classes() {
        return invalid(format!("g has {} outputs but the task has {} classes", g.output_dim(), data.num_classes()));
    }
    let input = InputOwner::from_dataset(f, data, config, rng)?;
    let label = LabelOwner::from_dataset(g, data, config, defense)?;
    run_over_transport(input, label, Transport::InProcess)
}
