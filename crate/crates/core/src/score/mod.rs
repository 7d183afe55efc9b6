//! MusicXML-subset ingestion and output.
//!
//! Supported: `score-partwise` with `part-list`, `part`, `measure`,
//! `attributes` (divisions, key, time, clef), `note` (pitch, rest,
//! duration, type, dot, tie, voice) and `harmony` (root, kind, degree).
//! Strict mode rejects anything else; lenient mode skips it and also
//! honours `backup`/`forward`, dropping chord tones and grace notes.

mod kinds;
mod parse;
mod serialize;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::event::{Beats, EventError, GridDuration, StandardizedScore};

pub use kinds::{kind_for_suffix, suffix_for_kind};
pub use parse::{filter_corpus, parse_harmonized, parse_score, FilterReport};
pub use serialize::serialize_score;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreDocument {
    pub text: String,
    pub source: Option<PathBuf>,
}

impl ScoreDocument {
    pub fn from_text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source: None,
        }
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            text: std::fs::read_to_string(path)?,
            source: Some(path.to_path_buf()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("malformed XML at {line}:{column}: {message}")]
    Xml { line: u32, column: u32, message: String },
    #[error("unsupported element `{element}` at {line}:{column}")]
    Unsupported { element: String, line: u32, column: u32 },
    #[error("invalid score content at {line}:{column}: {message}")]
    Malformed { line: u32, column: u32, message: String },
    #[error("score has no melody events")]
    EmptyMelody,
    #[error("cannot serialize: {0}")]
    Unrepresentable(String),
    #[error(transparent)]
    Event(#[from] EventError),
}

/// One note of the generated harmony voice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonyNote {
    pub pitch: u8,
    pub duration: GridDuration,
    pub onset: Beats,
}

/// A standardized score with one harmony note per melody event.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HarmonizedScore {
    score: StandardizedScore,
    harmony: Vec<HarmonyNote>,
}

impl HarmonizedScore {
    pub fn new(score: StandardizedScore, harmony: Vec<HarmonyNote>) -> Result<Self, EventError> {
        if harmony.len() != score.len() {
            return Err(EventError::Invariant(format!(
                "harmony has {} notes for {} melody events",
                harmony.len(),
                score.len()
            )));
        }
        if let Some(i) = score.melody().iter().zip(&harmony).position(|(m, h)| m.onset != h.onset) {
            return Err(EventError::Invariant(format!("harmony note {i} is not aligned with the melody")));
        }
        if let Some(h) = harmony.iter().find(|h| h.pitch > crate::event::REST) {
            return Err(EventError::PitchOutOfRange(h.pitch as i64));
        }
        Ok(Self { score, harmony })
    }

    pub fn score(&self) -> &StandardizedScore {
        &self.score
    }

    pub fn harmony(&self) -> &[HarmonyNote] {
        &self.harmony
    }

    /// End of the last melody or harmony note.
    pub fn length_beats(&self) -> Beats {
        let h = self.harmony.iter().map(|h| h.onset + h.duration.beats()).max();
        h.map_or(self.score.length_beats(), |h| h.max(self.score.length_beats()))
    }
}
