//! One event per line: `pitch<TAB>sixteenths<TAB>num/den<TAB>chord`.
//! Scores are separated by blank lines; `N.C.` marks no chord.

use std::fmt::Write as _;

use num_rational::Rational64;

use super::{ChordChange, Event, EventError, GridDuration, StandardizedScore};
use crate::chord::NO_CHORD;

pub fn write_scores_tsv(scores: &[StandardizedScore]) -> String {
    let mut out = String::new();
    for (i, s) in scores.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        for e in s.melody() {
            let _ = writeln!(
                out,
                "{}\t{}\t{}/{}\t{}",
                e.pitch,
                e.duration.sixteenths(),
                e.onset.numer(),
                e.onset.denom(),
                e.chord.as_deref().unwrap_or(NO_CHORD)
            );
        }
    }
    out
}

/// The chord track is rebuilt from the events: a change wherever an event's
/// chord differs from the previous one.
pub fn read_scores_tsv(text: &str) -> Result<Vec<StandardizedScore>, EventError> {
    let mut scores = Vec::new();
    let mut current: Vec<Event> = Vec::new();
    let finish = |events: &mut Vec<Event>, scores: &mut Vec<StandardizedScore>| -> Result<(), EventError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut chords: Vec<ChordChange> = Vec::new();
        let mut active: Option<String> = None;
        for e in events.iter() {
            if e.chord != active {
                chords.push(ChordChange {
                    onset: e.onset,
                    chord: e.chord.clone(),
                });
                active = e.chord.clone();
            }
        }
        scores.push(StandardizedScore::new(std::mem::take(events), chords)?);
        Ok(())
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            finish(&mut current, &mut scores)?;
            continue;
        }
        let err = |reason: &str| EventError::Format {
            line: i + 1,
            reason: reason.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        let [pitch, dur, onset, chord] = cols[..] else {
            return Err(err("expected four tab-separated columns"));
        };
        let pitch: u8 = pitch.parse().map_err(|_| err("bad pitch"))?;
        let dur = dur
            .parse()
            .ok()
            .and_then(GridDuration::new)
            .ok_or_else(|| err("bad duration"))?;
        let (n, d) = onset.split_once('/').ok_or_else(|| err("onset must be num/den"))?;
        let n: i64 = n.parse().map_err(|_| err("bad onset numerator"))?;
        let d: i64 = d.parse().map_err(|_| err("bad onset denominator"))?;
        if d <= 0 {
            return Err(err("bad onset denominator"));
        }
        let chord = (chord != NO_CHORD).then(|| chord.to_string());
        current.push(Event::new(pitch, dur, Rational64::new(n, d), chord)?);
    }
    finish(&mut current, &mut scores)?;
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Beats, REST};

    fn ev(pitch: u8, onset: (i64, i64), chord: Option<&str>) -> Event {
        Event::new(pitch, GridDuration::new(2).unwrap(), Rational64::new(onset.0, onset.1), chord.map(Into::into)).unwrap()
    }

    #[test]
    fn round_trip() {
        let a = StandardizedScore::new(
            vec![ev(60, (0, 1), Some("C")), ev(REST, (1, 2), Some("C")), ev(67, (1, 1), None)],
            vec![
                ChordChange {
                    onset: Beats::from(0),
                    chord: Some("C".into()),
                },
                ChordChange {
                    onset: Beats::from(1),
                    chord: None,
                },
            ],
        )
        .unwrap();
        let b = StandardizedScore::new(vec![ev(62, (0, 1), None), ev(64, (1, 2), Some("Dm7"))], vec![ChordChange {
            onset: Rational64::new(1, 2),
            chord: Some("Dm7".into()),
        }])
        .unwrap();
        let text = write_scores_tsv(&[a.clone(), b.clone()]);
        assert!(text.starts_with("60\t2\t0/1\tC\n"));
        assert_eq!(read_scores_tsv(&text).unwrap(), vec![a, b]);
    }

    #[test]
    fn bad_lines() {
        assert!(read_scores_tsv("60\t4\t0/1\n").is_err());
        assert!(read_scores_tsv("60\t0\t0/1\tC\n").is_err());
        assert!(read_scores_tsv("60\t4\t0\tC\n").is_err());
        assert!(read_scores_tsv("").unwrap().is_empty());
    }
}
