//! Harmony generation: the transformer prior, the rhythm regressor and
//! chord-constrained decoding.

pub mod corpus;
pub mod decode;
pub mod gpt;
pub mod rhythm;

pub use decode::{
    allowed_pitches, mask_to_chord_tones, ChordFormerTheorist, Composer, ComposerConfig, HarmonyLine, HarmonyModel,
    OracleTheorist, RhythmModel, Sampling, StepDistribution, StepRecord, Theorist,
};
pub use gpt::{train_harmony_gpt, GptConfig, GptExample, GptInput, GptTrainConfig, GptTrainReport, HarmonyGpt};
pub use rhythm::{evaluate_rhythm_net, snap_and_clamp, train_rhythm_net, RhythmNet, RhythmSequence, RhythmState, RhythmTrainConfig};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenerationError {
    #[error("sequence needs {needed} positions but the model context is {context}")]
    ContextOverflow { needed: usize, context: usize },
    #[error("step {step}: no tone of `{chord}` above melody pitch {melody_pitch}")]
    NoAllowedPitch { step: usize, melody_pitch: u8, chord: String },
    #[error("invalid composer setting: {0}")]
    InvalidConfig(String),
    #[error("{0} harmony notes violate the chord-tone constraint")]
    ConstraintViolation(usize),
    #[error("no trained {model} weights at {path} (pass --allow-stub to run without them)")]
    MissingModel { model: String, path: String },
    #[error("model description {path}: {reason}")]
    ModelDescription { path: String, reason: String },
}
