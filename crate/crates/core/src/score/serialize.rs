use std::fmt::Write as _;

use num_integer::Integer;
use num_traits::Zero;

use super::kinds::kind_for_suffix;
use super::{HarmonizedScore, ScoreDocument, ScoreError};
use crate::chord::symbol::{ChordSymbol, Extension};
use crate::event::{quantize_duration, Beats, GridDuration, REST};

const STEPS: [(&str, u8); 12] = [
    ("C", 0),
    ("C", 1),
    ("D", 0),
    ("D", 1),
    ("E", 0),
    ("F", 0),
    ("F", 1),
    ("G", 0),
    ("G", 1),
    ("A", 0),
    ("A", 1),
    ("B", 0),
];

const BAR: i64 = 4;

fn note_type(d: GridDuration) -> Option<(&'static str, bool)> {
    Some(match d.sixteenths() {
        1 => ("16th", false),
        2 => ("eighth", false),
        3 => ("eighth", true),
        4 => ("quarter", false),
        6 => ("quarter", true),
        8 => ("half", false),
        12 => ("half", true),
        16 => ("whole", false),
        24 => ("whole", true),
        _ => return None,
    })
}

struct Writer {
    out: String,
    divisions: i64,
}

impl Writer {
    fn ticks(&self, beats: Beats) -> i64 {
        (beats * self.divisions).to_integer()
    }

    fn note(&mut self, pitch: u8, written: Beats, grid: GridDuration) {
        let _ = write!(self.out, "      <note>\n");
        if pitch == REST {
            self.out.push_str("        <rest/>\n");
        } else {
            let (step, alter) = STEPS[(pitch % 12) as usize];
            let octave = pitch as i32 / 12 - 1;
            let _ = write!(self.out, "        <pitch>\n          <step>{step}</step>\n");
            if alter != 0 {
                let _ = writeln!(self.out, "          <alter>{alter}</alter>");
            }
            let _ = write!(self.out, "          <octave>{octave}</octave>\n        </pitch>\n");
        }
        let _ = writeln!(self.out, "        <duration>{}</duration>", self.ticks(written));
        let _ = writeln!(self.out, "        <voice>1</voice>");
        if let Some((name, dotted)) = note_type(grid) {
            let _ = writeln!(self.out, "        <type>{name}</type>");
            if dotted {
                self.out.push_str("        <dot/>\n");
            }
        }
        self.out.push_str("      </note>\n");
    }

    fn harmony(&mut self, chord: Option<&str>) -> Result<(), ScoreError> {
        let Some(text) = chord else {
            self.out
                .push_str("      <harmony>\n        <root>\n          <root-step>C</root-step>\n        </root>\n        <kind>none</kind>\n      </harmony>\n");
            return Ok(());
        };
        let sym = ChordSymbol::parse(text).map_err(|e| ScoreError::Unrepresentable(e.to_string()))?;
        let kind = kind_for_suffix(&sym.quality_suffix())
            .ok_or_else(|| ScoreError::Unrepresentable(format!("chord `{text}` has no MusicXML kind")))?;
        let (step, alter) = STEPS[sym.root() as usize];
        let _ = write!(self.out, "      <harmony>\n        <root>\n          <root-step>{step}</root-step>\n");
        if alter != 0 {
            let _ = writeln!(self.out, "          <root-alter>{alter}</root-alter>");
        }
        let _ = write!(self.out, "        </root>\n        <kind>{kind}</kind>\n");
        let top = match sym.extension() {
            None => 5,
            Some(Extension::Sixth) => 6,
            Some(Extension::Seventh | Extension::MajorSeventh) => 7,
            Some(Extension::Ninth) => 9,
            Some(Extension::Eleventh) => 11,
            Some(Extension::Thirteenth) => 13,
        };
        for a in sym.alterations() {
            let dtype = if a.degree <= top { "alter" } else { "add" };
            let _ = write!(
                self.out,
                "        <degree>\n          <degree-value>{}</degree-value>\n          <degree-alter>{}</degree-alter>\n          <degree-type>{dtype}</degree-type>\n        </degree>\n",
                a.degree, a.shift
            );
        }
        self.out.push_str("      </harmony>\n");
        Ok(())
    }

    fn open_measure(&mut self, number: usize, first: bool) {
        if number > 1 {
            self.out.push_str("    </measure>\n");
        }
        let _ = writeln!(self.out, "    <measure number=\"{number}\">");
        if first {
            let _ = write!(
                self.out,
                "      <attributes>\n        <divisions>{}</divisions>\n        <key>\n          <fifths>0</fifths>\n        </key>\n        <time>\n          <beats>4</beats>\n          <beat-type>4</beat-type>\n        </time>\n        <clef>\n          <sign>G</sign>\n          <line>2</line>\n        </clef>\n      </attributes>\n",
                self.divisions
            );
        }
    }
}

/// Opens a new measure before the first event at or past each barline.
struct Bars {
    number: usize,
    next: Beats,
}

impl Bars {
    fn new() -> Self {
        Self {
            number: 0,
            next: Beats::zero(),
        }
    }

    fn before(&mut self, w: &mut Writer, onset: Beats) {
        if onset >= self.next {
            self.number += 1;
            w.open_measure(self.number, self.number == 1);
            while self.next <= onset {
                self.next += BAR;
            }
        }
    }
}

/// Writes the melody as part `P1` (with chord annotations) and the harmony
/// as part `P2`. Each note's written length runs to the next onset, so
/// melody onsets must be contiguous from zero and each gap must quantize to
/// the stored duration.
pub fn serialize_score(s: &HarmonizedScore) -> Result<ScoreDocument, ScoreError> {
    let melody = s.score().melody();
    if melody.is_empty() {
        return Err(ScoreError::EmptyMelody);
    }
    if !melody[0].onset.is_zero() {
        return Err(ScoreError::Unrepresentable("melody does not start at beat 0".into()));
    }
    let mut written = Vec::with_capacity(melody.len());
    for (i, e) in melody.iter().enumerate() {
        let len = match melody.get(i + 1) {
            Some(next) => next.onset - e.onset,
            None => e.duration.beats(),
        };
        if len <= Beats::zero() || quantize_duration(len).ok() != Some(e.duration) {
            return Err(ScoreError::Unrepresentable(format!(
                "event {i} lasts {} but the next onset is {len} beats later",
                e.duration
            )));
        }
        written.push(len);
    }
    let mut divisions = 4i64;
    for e in melody {
        divisions = divisions.lcm(e.onset.denom());
    }
    let mut w = Writer {
        out: String::new(),
        divisions,
    };
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<score-partwise version=\"3.1\">\n  <part-list>\n    <score-part id=\"P1\">\n      <part-name>Melody</part-name>\n    </score-part>\n    <score-part id=\"P2\">\n      <part-name>Harmony</part-name>\n    </score-part>\n  </part-list>\n");

    w.out.push_str("  <part id=\"P1\">\n");
    let chords = s.score().chords();
    let mut ci = 0;
    let mut bars = Bars::new();
    for (e, &len) in melody.iter().zip(&written) {
        bars.before(&mut w, e.onset);
        if ci < chords.len() && chords[ci].onset < e.onset {
            return Err(ScoreError::Unrepresentable(format!(
                "chord change at beat {} falls inside a note",
                chords[ci].onset
            )));
        }
        if ci < chords.len() && chords[ci].onset == e.onset {
            w.harmony(chords[ci].chord.as_deref())?;
            ci += 1;
        }
        w.note(e.pitch, len, e.duration);
    }
    if ci < chords.len() {
        return Err(ScoreError::Unrepresentable(format!(
            "chord change at beat {} is after the last note",
            chords[ci].onset
        )));
    }
    w.out.push_str("    </measure>\n  </part>\n");

    w.out.push_str("  <part id=\"P2\">\n");
    let mut bars = Bars::new();
    for (i, (h, &len)) in s.harmony().iter().zip(&written).enumerate() {
        bars.before(&mut w, h.onset);
        let hl = h.duration.beats();
        let last = i + 1 == melody.len();
        if !last && hl > len {
            return Err(ScoreError::Unrepresentable(format!("harmony note {i} overlaps the next onset")));
        }
        w.note(h.pitch, hl, h.duration);
        if !last && hl < len {
            let pad = len - hl;
            bars.before(&mut w, h.onset + hl);
            let grid = GridDuration::new(((pad * 4).ceil().to_integer()).max(1) as u32).expect("positive");
            w.note(REST, pad, grid);
        }
    }
    w.out.push_str("    </measure>\n  </part>\n</score-partwise>\n");
    Ok(ScoreDocument::from_text(w.out))
}
