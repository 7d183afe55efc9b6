use super::{Beats, Event, EventError, GridDuration, StandardizedScore, REST};
use crate::chord::{ChordVocabulary, VocabError};

/// Pitch tokens `0..=128` (128 is the rest) followed by control tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NoteVocabulary;

impl NoteVocabulary {
    pub const BOS: usize = 129;
    pub const EOS: usize = 130;
    pub const PAD: usize = 131;
    pub const SIZE: usize = 132;

    pub fn len(self) -> usize {
        Self::SIZE
    }

    pub fn is_empty(self) -> bool {
        false
    }

    pub fn token(self, pitch: u8) -> Result<usize, EventError> {
        if pitch > REST {
            return Err(EventError::PitchOutOfRange(pitch as i64));
        }
        Ok(pitch as usize)
    }

    /// `None` for control tokens and out-of-range ids.
    pub fn pitch(self, token: usize) -> Option<u8> {
        (token <= REST as usize).then_some(token as u8)
    }

    pub fn is_pitch_token(self, token: usize) -> bool {
        token < REST as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedEvent {
    pub pitch_token: usize,
    pub duration_bucket: usize,
    /// Exact length, kept so decoding is lossless past the last bucket.
    pub duration: GridDuration,
    pub onset: Beats,
    pub chord_token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncodedItem {
    Begin,
    Event(EncodedEvent),
    End,
}

impl EncodedItem {
    pub fn token(&self) -> usize {
        match self {
            EncodedItem::Begin => NoteVocabulary::BOS,
            EncodedItem::End => NoteVocabulary::EOS,
            EncodedItem::Event(e) => e.pitch_token,
        }
    }
}

/// Begin marker, one tuple per event, end marker.
pub fn encode_sequence(
    score: &StandardizedScore,
    vocab: NoteVocabulary,
    chord_vocab: &ChordVocabulary,
) -> Result<Vec<EncodedItem>, VocabError> {
    let mut out = Vec::with_capacity(score.len() + 2);
    out.push(EncodedItem::Begin);
    for e in score.melody() {
        out.push(EncodedItem::Event(EncodedEvent {
            pitch_token: vocab.token(e.pitch).expect("score pitches are validated"),
            duration_bucket: e.duration.bucket(),
            duration: e.duration,
            onset: e.onset,
            chord_token: chord_vocab.token(e.chord.as_deref())?,
        }));
    }
    out.push(EncodedItem::End);
    Ok(out)
}

pub fn decode_sequence(
    items: &[EncodedItem],
    vocab: NoteVocabulary,
    chord_vocab: &ChordVocabulary,
) -> Result<Vec<Event>, EventError> {
    let mut out = Vec::new();
    for item in items {
        if let EncodedItem::Event(e) = item {
            let pitch = vocab
                .pitch(e.pitch_token)
                .ok_or_else(|| EventError::Invariant(format!("token {} is not a pitch", e.pitch_token)))?;
            let chord = chord_vocab
                .chord(e.chord_token)
                .ok_or_else(|| EventError::Invariant(format!("chord token {} out of range", e.chord_token)))?;
            out.push(Event::new(pitch, e.duration, e.onset, chord.map(str::to_string))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::ChordChange;

    fn one_note() -> StandardizedScore {
        let e = Event::new(60, GridDuration::new(4).unwrap(), Beats::from(0), None).unwrap();
        StandardizedScore::with_chords(
            vec![e],
            vec![ChordChange {
                onset: Beats::from(0),
                chord: Some("C".into()),
            }],
        )
        .unwrap()
    }

    #[test]
    fn empty_melody_is_begin_end() {
        let cv = ChordVocabulary::from_symbols(["C"]);
        let seq = encode_sequence(&StandardizedScore::default(), NoteVocabulary, &cv).unwrap();
        assert_eq!(seq, vec![EncodedItem::Begin, EncodedItem::End]);
    }

    #[test]
    fn one_note_fixture_tokens() {
        let cv = ChordVocabulary::from_symbols(["C", "G7"]);
        let seq = encode_sequence(&one_note(), NoteVocabulary, &cv).unwrap();
        assert_eq!(seq.len(), 3);
        let expected = EncodedEvent {
            pitch_token: 60,
            duration_bucket: 3,
            duration: GridDuration::new(4).unwrap(),
            onset: Beats::from(0),
            chord_token: 1,
        };
        assert_eq!(seq[1], EncodedItem::Event(expected));
        assert_eq!(seq[0].token(), NoteVocabulary::BOS);
        assert_eq!(seq[2].token(), NoteVocabulary::EOS);
    }

    #[test]
    fn unknown_chord_is_an_error() {
        let cv = ChordVocabulary::from_symbols(["G7"]);
        assert!(matches!(
            encode_sequence(&one_note(), NoteVocabulary, &cv),
            Err(VocabError::OutOfVocabulary(_))
        ));
    }

    #[test]
    fn decode_inverts_encode() {
        let cv = ChordVocabulary::from_symbols(["C"]);
        let s = one_note();
        let seq = encode_sequence(&s, NoteVocabulary, &cv).unwrap();
        assert_eq!(decode_sequence(&seq, NoteVocabulary, &cv).unwrap(), s.melody());
    }

    #[test]
    fn control_tokens_are_not_pitches() {
        let v = NoteVocabulary;
        for t in [NoteVocabulary::BOS, NoteVocabulary::EOS, NoteVocabulary::PAD] {
            assert_eq!(v.pitch(t), None);
        }
        assert_eq!(v.pitch(128), Some(REST));
        assert_eq!(v.len(), 132);
    }
}
