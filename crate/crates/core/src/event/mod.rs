//! Note events, the quantization grid, standardized scores and their
//! transposition and encoding.

mod encode;
mod score;
mod transpose;
mod tsv;

use std::fmt;

use num_rational::Rational64;
use num_traits::Zero;
use thiserror::Error;

pub use encode::{decode_sequence, encode_sequence, EncodedEvent, EncodedItem, NoteVocabulary};
pub use score::{ChordChange, StandardizedScore};
pub use transpose::{augment_corpus, transpose, Transposed};
pub use tsv::{read_scores_tsv, write_scores_tsv};

/// Quarter-note beats.
pub type Beats = Rational64;

/// Reserved pitch value for rests.
pub const REST: u8 = 128;
/// Grid steps per whole note.
pub const GRID: i64 = 16;
/// Distinct duration buckets; longer notes share the last bucket.
pub const DURATION_BUCKETS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EventError {
    #[error("duration {0} beats is not positive")]
    NonPositive(Beats),
    #[error("duration {0} beats rounds to zero on the sixteenth grid")]
    Underflow(Beats),
    #[error("pitch {0} is outside 0..=128")]
    PitchOutOfRange(i64),
    #[error("{0}")]
    Invariant(String),
    #[error("tsv line {line}: {reason}")]
    Format { line: usize, reason: String },
}

/// A duration on the sixteenth-note grid, at least one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridDuration(u32);

impl GridDuration {
    pub fn new(sixteenths: u32) -> Option<Self> {
        (sixteenths > 0).then_some(GridDuration(sixteenths))
    }

    pub fn sixteenths(self) -> u32 {
        self.0
    }

    /// Length as a fraction of a whole note.
    pub fn whole_notes(self) -> Rational64 {
        Rational64::new(self.0 as i64, GRID)
    }

    pub fn whole_notes_f32(self) -> f32 {
        self.0 as f32 / GRID as f32
    }

    pub fn beats(self) -> Beats {
        Rational64::new(self.0 as i64, 4)
    }

    /// Index into the duration buckets: one per sixteenth up to a whole note.
    pub fn bucket(self) -> usize {
        (self.0 as usize).min(DURATION_BUCKETS) - 1
    }

    /// Nearest grid value to a length in whole notes, ties rounding up,
    /// clamped below at one step.
    pub fn snap_whole_notes(value: f32) -> Self {
        let steps = (value * GRID as f32 + 0.5).floor();
        GridDuration(if steps.is_finite() && steps >= 1.0 { steps as u32 } else { 1 })
    }
}

impl fmt::Display for GridDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/16", self.0)
    }
}

/// Snaps a length in beats to the nearest sixteenth of a whole note; exact
/// halves round up.
pub fn quantize_duration(beats: Beats) -> Result<GridDuration, EventError> {
    if beats <= Beats::zero() {
        return Err(EventError::NonPositive(beats));
    }
    // One sixteenth of a whole note is a quarter of a beat.
    let steps = (beats * 4 + Rational64::new(1, 2)).floor().to_integer();
    if steps == 0 {
        return Err(EventError::Underflow(beats));
    }
    u32::try_from(steps)
        .map(GridDuration)
        .map_err(|_| EventError::Invariant(format!("duration {beats} beats is too long")))
}

/// One melody note or rest with the chord active at its onset.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub pitch: u8,
    pub duration: GridDuration,
    pub onset: Beats,
    /// Canonical chord text; `None` means no chord.
    pub chord: Option<String>,
}

impl Event {
    pub fn new(pitch: u8, duration: GridDuration, onset: Beats, chord: Option<String>) -> Result<Self, EventError> {
        if pitch > REST {
            return Err(EventError::PitchOutOfRange(pitch as i64));
        }
        if onset < Beats::zero() {
            return Err(EventError::Invariant(format!("negative onset {onset}")));
        }
        Ok(Event {
            pitch,
            duration,
            onset,
            chord,
        })
    }

    pub fn is_rest(&self) -> bool {
        self.pitch == REST
    }

    pub fn end(&self) -> Beats {
        self.onset + self.duration.beats()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Beats {
        Rational64::new(n, d)
    }

    #[test]
    fn quarter_and_whole() {
        assert_eq!(quantize_duration(r(1, 1)).unwrap().whole_notes(), r(1, 4));
        assert_eq!(quantize_duration(r(4, 1)).unwrap().whole_notes(), r(1, 1));
    }

    #[test]
    fn underflow_and_nonpositive() {
        // 0.013 of a whole note
        assert!(matches!(quantize_duration(r(13 * 4, 1000)), Err(EventError::Underflow(_))));
        assert!(matches!(quantize_duration(r(0, 1)), Err(EventError::NonPositive(_))));
        assert!(matches!(quantize_duration(r(-1, 1)), Err(EventError::NonPositive(_))));
    }

    #[test]
    fn ties_round_up() {
        // Exactly half a sixteenth rounds up to one step.
        assert_eq!(quantize_duration(r(1, 8)).unwrap().sixteenths(), 1);
        assert_eq!(quantize_duration(r(3, 8)).unwrap().sixteenths(), 2);
        assert_eq!(quantize_duration(r(1, 3)).unwrap().sixteenths(), 1);
    }

    #[test]
    fn buckets_saturate() {
        assert_eq!(GridDuration::new(1).unwrap().bucket(), 0);
        assert_eq!(GridDuration::new(16).unwrap().bucket(), 15);
        assert_eq!(GridDuration::new(40).unwrap().bucket(), 15);
        assert!(GridDuration::new(0).is_none());
    }

    #[test]
    fn snapping() {
        assert_eq!(GridDuration::snap_whole_notes(0.26).sixteenths(), 4);
        assert_eq!(GridDuration::snap_whole_notes(0.0).sixteenths(), 1);
        assert_eq!(GridDuration::snap_whole_notes(f32::NAN).sixteenths(), 1);
    }

    #[test]
    fn event_pitch_bounds() {
        let d = GridDuration::new(4).unwrap();
        assert!(Event::new(128, d, r(0, 1), None).unwrap().is_rest());
        assert!(Event::new(129, d, r(0, 1), None).is_err());
        assert!(Event::new(60, d, r(-1, 1), None).is_err());
    }
}
