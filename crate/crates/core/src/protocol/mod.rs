//! Two-party split learning: the input owner (holding `f`) and the label
//! owner (holding `g`) exchanging embeddings and embedding gradients over a
//! binary wire format, with the input owner recording every exchange.

mod party;
mod transcript;
mod transport;
mod wire;

pub use party::{InputOwner, LabelOwner, TrainConfig};
pub use transcript::{
    decode_transcript, encode_transcript, read_transcript, write_transcript, Transcript, TranscriptMeta,
    TranscriptRecord,
};
pub use transport::{run_over_transport, split_train, InProcessLink, LabelLink, SplitOutcome, TcpLink, Transport};
pub use wire::{decode_message, encode_message, read_message, DecodeError, F32Matrix, WireMessage, WIRE_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProtocolError {
    /// The peer went away. `last_completed_batch` is the id of the last
    /// batch whose backward message was fully received.
    #[error("protocol aborted after batch {last_completed_batch:?}: {reason}")]
    Aborted { last_completed_batch: Option<u64>, reason: String },

    #[error("protocol violation: {0}")]
    Violation(String),
}
