use num_traits::Zero;

use super::{Beats, Event, EventError};

/// A chord annotation taking effect at `onset`; `None` is an explicit
/// no-chord marking.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChordChange {
    pub onset: Beats,
    pub chord: Option<String>,
}

/// Melody events plus the chord track they are aligned to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StandardizedScore {
    melody: Vec<Event>,
    chords: Vec<ChordChange>,
}

/// Latest change at or before `onset`.
fn active(chords: &[ChordChange], onset: Beats) -> Option<&str> {
    let idx = chords.partition_point(|c| c.onset <= onset);
    idx.checked_sub(1).and_then(|i| chords[i].chord.as_deref())
}

impl StandardizedScore {
    /// Checks ordering and that each event carries the chord active at its
    /// onset.
    pub fn new(melody: Vec<Event>, chords: Vec<ChordChange>) -> Result<Self, EventError> {
        let bad = |m: String| Err(EventError::Invariant(m));
        if melody.windows(2).any(|w| w[1].onset < w[0].onset) {
            return bad("melody onsets decrease".into());
        }
        if chords.windows(2).any(|w| w[1].onset <= w[0].onset) {
            return bad("chord onsets are not strictly increasing".into());
        }
        if chords.first().is_some_and(|c| c.onset < Beats::zero()) {
            return bad("negative chord onset".into());
        }
        for (i, e) in melody.iter().enumerate() {
            if e.chord.as_deref() != active(&chords, e.onset) {
                return bad(format!("event {i} chord {:?} differs from the active chord", e.chord));
            }
        }
        Ok(Self { melody, chords })
    }

    /// Builds a score from bare notes, filling each event's chord from the
    /// track.
    pub fn with_chords(mut melody: Vec<Event>, chords: Vec<ChordChange>) -> Result<Self, EventError> {
        for e in &mut melody {
            e.chord = active(&chords, e.onset).map(str::to_string);
        }
        Self::new(melody, chords)
    }

    pub fn melody(&self) -> &[Event] {
        &self.melody
    }

    pub fn chords(&self) -> &[ChordChange] {
        &self.chords
    }

    pub fn len(&self) -> usize {
        self.melody.len()
    }

    pub fn is_empty(&self) -> bool {
        self.melody.is_empty()
    }

    pub fn chord_at(&self, onset: Beats) -> Option<&str> {
        active(&self.chords, onset)
    }

    /// End of the last sounding event, in beats.
    pub fn length_beats(&self) -> Beats {
        self.melody.iter().map(Event::end).max().unwrap_or_else(Beats::zero)
    }

    pub fn pitched_count(&self) -> usize {
        self.melody.iter().filter(|e| !e.is_rest()).count()
    }

    pub fn into_parts(self) -> (Vec<Event>, Vec<ChordChange>) {
        (self.melody, self.chords)
    }
}
