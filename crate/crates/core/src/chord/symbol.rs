//! Chord-symbol grammar.
//!
//! ```text
//! symbol  := root quality ext alt*
//! root    := [A-G] ("#" | "b")?
//! quality := "maj" | "m" | "dim" | "aug" | ""
//! ext     := "6" | "7" | "maj7" | "9" | "11" | "13" | ""
//! alt     := ("b" | "#") ("5" | "9" | "11" | "13")
//! ```
//!
//! The root accidental is read greedily; if the rest of the symbol then fails
//! to parse, the accidental is re-read as the first alteration (`Cb5` is C
//! with a flat fifth, `Cb9` is a dominant ninth on C-flat). A `maj` prefix
//! directly followed by `7` is the `maj7` extension, not the quality.
//!
//! Slash chords, polychords, inversions and non-letter note names are not
//! part of the grammar.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

pub const SHARP_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quality {
    Major,
    Minor,
    Diminished,
    Augmented,
    Dominant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Extension {
    Sixth,
    Seventh,
    MajorSeventh,
    Ninth,
    Eleventh,
    Thirteenth,
}

impl Extension {
    pub fn has_seventh(self) -> bool {
        !matches!(self, Extension::Sixth)
    }

    fn text(self) -> &'static str {
        match self {
            Extension::Sixth => "6",
            Extension::Seventh => "7",
            Extension::MajorSeventh => "maj7",
            Extension::Ninth => "9",
            Extension::Eleventh => "11",
            Extension::Thirteenth => "13",
        }
    }
}

/// A raised or lowered chord degree, e.g. `b5` or `#11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Alteration {
    pub degree: u8,
    pub shift: i8,
}

impl fmt::Display for Alteration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.shift < 0 { 'b' } else { '#' };
        write!(f, "{sign}{}", self.degree)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChordSymbol {
    root: u8,
    quality: Quality,
    extension: Option<Extension>,
    alterations: BTreeSet<Alteration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChordParseErrorKind {
    Empty,
    UnknownRoot,
    MalformedAlteration,
    TrailingGarbage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot parse chord symbol `{text}` at position {position}: {kind:?}")]
pub struct ChordParseError {
    pub text: String,
    pub position: usize,
    pub kind: ChordParseErrorKind,
}

fn letter_pc(c: u8) -> Option<u8> {
    Some(match c {
        b'C' => 0,
        b'D' => 2,
        b'E' => 4,
        b'F' => 5,
        b'G' => 7,
        b'A' => 9,
        b'B' => 11,
        _ => return None,
    })
}

impl ChordSymbol {
    pub fn root(&self) -> u8 {
        self.root
    }

    pub fn quality(&self) -> Quality {
        self.quality
    }

    pub fn extension(&self) -> Option<Extension> {
        self.extension
    }

    pub fn alterations(&self) -> &BTreeSet<Alteration> {
        &self.alterations
    }

    pub fn parse(text: &str) -> Result<Self, ChordParseError> {
        let bytes = text.as_bytes();
        let err = |position, kind| ChordParseError {
            text: text.to_string(),
            position,
            kind,
        };
        let Some(&first) = bytes.first() else {
            return Err(err(0, ChordParseErrorKind::Empty));
        };
        let Some(letter) = letter_pc(first) else {
            return Err(err(0, ChordParseErrorKind::UnknownRoot));
        };
        let accidental = match bytes.get(1) {
            Some(b'#') => Some(1i8),
            Some(b'b') => Some(-1i8),
            _ => None,
        };
        if let Some(acc) = accidental {
            let root = (letter as i8 + acc).rem_euclid(12) as u8;
            match parse_suffix(bytes, 2, root) {
                Ok(sym) => return Ok(sym),
                Err((pos, kind)) => {
                    // Retry with the accidental as an alteration.
                    return parse_suffix(bytes, 1, letter).map_err(|_| err(pos, kind));
                }
            }
        }
        parse_suffix(bytes, 1, letter).map_err(|(pos, kind)| err(pos, kind))
    }

    pub fn quality_suffix(&self) -> String {
        let ext = self.extension;
        let mut s = String::new();
        match self.quality {
            Quality::Major => match ext {
                None => {}
                Some(Extension::Sixth) | Some(Extension::MajorSeventh) => s.push_str(ext.unwrap().text()),
                Some(e) => {
                    s.push_str("maj");
                    s.push_str(e.text());
                }
            },
            Quality::Dominant => s.push_str(ext.map_or("", Extension::text)),
            Quality::Minor => {
                s.push('m');
                s.push_str(ext.map_or("", Extension::text));
            }
            Quality::Diminished => {
                s.push_str("dim");
                s.push_str(ext.map_or("", Extension::text));
            }
            Quality::Augmented => {
                s.push_str("aug");
                s.push_str(ext.map_or("", Extension::text));
            }
        }
        s
    }

    /// Suffix after the root: quality, extension, then alterations in
    /// degree order (flat before sharp).
    pub fn suffix(&self) -> String {
        let mut s = self.quality_suffix();
        for a in &self.alterations {
            s.push_str(&a.to_string());
        }
        s
    }

    /// Canonical surface form with a sharp-spelled root.
    pub fn canonical(&self) -> String {
        format!("{}{}", SHARP_NAMES[self.root as usize], self.suffix())
    }

    pub fn transposed(&self, semitones: i32) -> Self {
        let mut out = self.clone();
        out.root = (self.root as i32 + semitones).rem_euclid(12) as u8;
        out
    }

    pub fn with_root(&self, root: u8) -> Self {
        let mut out = self.clone();
        out.root = root % 12;
        out
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

impl std::str::FromStr for ChordSymbol {
    type Err = ChordParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ChordSymbol::parse(s)
    }
}

fn parse_suffix(bytes: &[u8], mut pos: usize, root: u8) -> Result<ChordSymbol, (usize, ChordParseErrorKind)> {
    let rest = |p: usize| &bytes[p.min(bytes.len())..];
    #[derive(PartialEq)]
    enum QText {
        None,
        Maj,
        Min,
        Dim,
        Aug,
    }
    let qtext = if rest(pos).starts_with(b"maj7") {
        QText::None
    } else if rest(pos).starts_with(b"maj") {
        pos += 3;
        QText::Maj
    } else if rest(pos).starts_with(b"m") {
        pos += 1;
        QText::Min
    } else if rest(pos).starts_with(b"dim") {
        pos += 3;
        QText::Dim
    } else if rest(pos).starts_with(b"aug") {
        pos += 3;
        QText::Aug
    } else {
        QText::None
    };
    let extension = [
        (&b"maj7"[..], Extension::MajorSeventh),
        (b"11", Extension::Eleventh),
        (b"13", Extension::Thirteenth),
        (b"6", Extension::Sixth),
        (b"7", Extension::Seventh),
        (b"9", Extension::Ninth),
    ]
    .into_iter()
    .find(|(t, _)| rest(pos).starts_with(t))
    .map(|(t, e)| {
        pos += t.len();
        e
    });
    let quality = match qtext {
        QText::Maj => Quality::Major,
        QText::Min => Quality::Minor,
        QText::Dim => Quality::Diminished,
        QText::Aug => Quality::Augmented,
        QText::None => match extension {
            Some(Extension::Seventh | Extension::Ninth | Extension::Eleventh | Extension::Thirteenth) => Quality::Dominant,
            _ => Quality::Major,
        },
    };
    let mut alterations = BTreeSet::new();
    while pos < bytes.len() {
        let shift = match bytes[pos] {
            b'b' => -1,
            b'#' => 1,
            _ => return Err((pos, ChordParseErrorKind::TrailingGarbage)),
        };
        let degree = [(&b"11"[..], 11u8), (b"13", 13), (b"5", 5), (b"9", 9)]
            .into_iter()
            .find(|(t, _)| rest(pos + 1).starts_with(t));
        let Some((t, degree)) = degree else {
            return Err((pos, ChordParseErrorKind::MalformedAlteration));
        };
        if !alterations.insert(Alteration { degree, shift }) {
            return Err((pos, ChordParseErrorKind::MalformedAlteration));
        }
        pos += 1 + t.len();
    }
    Ok(ChordSymbol {
        root,
        quality,
        extension,
        alterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alt(degree: u8, shift: i8) -> Alteration {
        Alteration { degree, shift }
    }

    #[test]
    fn cmaj7_structure() {
        let s = ChordSymbol::parse("Cmaj7").unwrap();
        assert_eq!(s.root(), 0);
        assert_eq!(s.quality(), Quality::Major);
        assert_eq!(s.extension(), Some(Extension::MajorSeventh));
        assert!(s.alterations().is_empty());
    }

    #[test]
    fn half_diminished_structure() {
        let s = ChordSymbol::parse("Am7b5").unwrap();
        assert_eq!(s.root(), 9);
        assert_eq!(s.quality(), Quality::Minor);
        assert_eq!(s.extension(), Some(Extension::Seventh));
        assert_eq!(s.alterations().iter().copied().collect::<Vec<_>>(), vec![alt(5, -1)]);
    }

    #[test]
    fn bad_root_letter() {
        let e = ChordSymbol::parse("H7").unwrap_err();
        assert_eq!(e.kind, ChordParseErrorKind::UnknownRoot);
        assert_eq!(e.position, 0);
        assert_eq!(ChordSymbol::parse("").unwrap_err().kind, ChordParseErrorKind::Empty);
        assert_eq!(ChordSymbol::parse("c7").unwrap_err().kind, ChordParseErrorKind::UnknownRoot);
    }

    #[test]
    fn malformed_alteration_and_garbage() {
        let e = ChordSymbol::parse("C7b4").unwrap_err();
        assert_eq!((e.kind, e.position), (ChordParseErrorKind::MalformedAlteration, 2));
        let e = ChordSymbol::parse("C7x").unwrap_err();
        assert_eq!((e.kind, e.position), (ChordParseErrorKind::TrailingGarbage, 2));
        let e = ChordSymbol::parse("C7b9b9").unwrap_err();
        assert_eq!(e.kind, ChordParseErrorKind::MalformedAlteration);
        assert!(ChordSymbol::parse("C/E").is_err());
    }

    #[test]
    fn dominant_inferred_from_bare_extension() {
        assert_eq!(ChordSymbol::parse("G7").unwrap().quality(), Quality::Dominant);
        assert_eq!(ChordSymbol::parse("G13").unwrap().quality(), Quality::Dominant);
        assert_eq!(ChordSymbol::parse("G6").unwrap().quality(), Quality::Major);
        assert_eq!(ChordSymbol::parse("Gmaj9").unwrap().quality(), Quality::Major);
        assert_eq!(ChordSymbol::parse("Gmaj9").unwrap().extension(), Some(Extension::Ninth));
    }

    #[test]
    fn flat_root_versus_flat_alteration() {
        let cb5 = ChordSymbol::parse("Cb5").unwrap();
        assert_eq!(cb5.root(), 0);
        assert_eq!(cb5.alterations().iter().next(), Some(&alt(5, -1)));
        let cb9 = ChordSymbol::parse("Cb9").unwrap();
        assert_eq!(cb9.root(), 11);
        assert_eq!(cb9.extension(), Some(Extension::Ninth));
        assert_eq!(ChordSymbol::parse("Bbm7").unwrap().root(), 10);
        assert_eq!(ChordSymbol::parse("C#5").unwrap().root(), 0);
        assert_eq!(ChordSymbol::parse("C##5").unwrap().root(), 1);
    }

    #[test]
    fn canonical_round_trip() {
        for text in [
            "C", "Cm", "C7", "Cmaj7", "Cm7b5", "F#m7b5", "A#dim7", "Gaug", "D9", "Dmaj9", "Em11", "B13#11",
            "C#mmaj7", "G7b9", "G7#5", "Cb5", "Am6", "Fmaj13b5",
        ] {
            assert_eq!(ChordSymbol::parse(text).unwrap().canonical(), text);
        }
        assert_eq!(ChordSymbol::parse("Dbmaj7").unwrap().canonical(), "C#maj7");
        assert_eq!(ChordSymbol::parse("Cmaj").unwrap().canonical(), "C");
        assert_eq!(ChordSymbol::parse("C7#9b9").unwrap().canonical(), "C7b9#9");
    }

    #[test]
    fn transposition_moves_root_only() {
        let s = ChordSymbol::parse("Cmaj7").unwrap();
        assert_eq!(s.transposed(2).canonical(), "Dmaj7");
        assert_eq!(s.transposed(12), s);
        assert_eq!(s.transposed(-1).canonical(), "Bmaj7");
    }
}
