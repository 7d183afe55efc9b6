use harmonia_kernel::KernelError;
use thiserror::Error;

use crate::composer::GenerationError;
use crate::conductor::ConductorError;
use crate::config::ConfigError;
use crate::chord::{ChordParseError, TheoryError, TokenizeError, VocabError};
use crate::event::EventError;
use crate::score::ScoreError;
use crate::weights::WeightsError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    ChordParse(#[from] ChordParseError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Conductor(#[from] ConductorError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Weights(#[from] WeightsError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
