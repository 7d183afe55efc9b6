use super::{ChordChange, Event, StandardizedScore, REST};
use crate::chord::ChordSymbol;
use crate::error::Result;

/// A transposed score and how many pitches had to be folded back into
/// MIDI range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transposed {
    pub score: StandardizedScore,
    pub octave_folds: usize,
}

fn shift_chord(chord: &Option<String>, semitones: i32) -> Result<Option<String>> {
    chord
        .as_deref()
        .map(|c| Ok(ChordSymbol::parse(c)?.transposed(semitones).canonical()))
        .transpose()
}

/// Shifts pitches and chord roots. Pitches leaving 0..=127 move back by
/// whole octaves; rests, onsets and durations are untouched.
pub fn transpose(score: &StandardizedScore, semitones: i32) -> Result<Transposed> {
    let mut folds = 0;
    let melody = score
        .melody()
        .iter()
        .map(|e| {
            let pitch = if e.pitch == REST {
                REST
            } else {
                let mut p = e.pitch as i32 + semitones;
                if !(0..=127).contains(&p) {
                    folds += 1;
                }
                while p > 127 {
                    p -= 12;
                }
                while p < 0 {
                    p += 12;
                }
                p as u8
            };
            Ok(Event {
                pitch,
                duration: e.duration,
                onset: e.onset,
                chord: shift_chord(&e.chord, semitones)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let chords = score
        .chords()
        .iter()
        .map(|c| {
            Ok(ChordChange {
                onset: c.onset,
                chord: shift_chord(&c.chord, semitones)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Transposed {
        score: StandardizedScore::new(melody, chords)?,
        octave_folds: folds,
    })
}

/// Each input score in all twelve keys, score-major.
pub fn augment_corpus(scores: &[StandardizedScore]) -> Result<Vec<StandardizedScore>> {
    let mut out = Vec::with_capacity(scores.len() * 12);
    for s in scores {
        for t in 0..12 {
            out.push(transpose(s, t)?.score);
        }
    }
    Ok(out)
}
