//! Interval-table oracle mapping a chord symbol to its pitch classes.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::symbol::{ChordSymbol, Extension, Quality};

/// Twelve-bit chroma set; bit `p` is pitch class `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct PitchClassSet(u16);

impl PitchClassSet {
    pub const EMPTY: PitchClassSet = PitchClassSet(0);

    pub fn from_bits(bits: u16) -> Self {
        PitchClassSet(bits & 0x0fff)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn insert(&mut self, pc: u8) {
        self.0 |= 1 << (pc % 12);
    }

    pub fn remove(&mut self, pc: u8) {
        self.0 &= !(1 << (pc % 12));
    }

    pub fn contains(self, pc: u8) -> bool {
        self.0 & (1 << (pc % 12)) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = u8> {
        (0..12u8).filter(move |&p| self.contains(p))
    }

    pub fn transposed(self, semitones: i32) -> Self {
        self.iter().map(|p| (p as i32 + semitones).rem_euclid(12) as u8).collect()
    }

    /// Multi-hot vector, index = pitch class.
    pub fn to_multi_hot(self) -> [f32; 12] {
        let mut out = [0.0; 12];
        for p in self.iter() {
            out[p as usize] = 1.0;
        }
        out
    }
}

impl FromIterator<u8> for PitchClassSet {
    fn from_iter<I: IntoIterator<Item = u8>>(iter: I) -> Self {
        let mut s = PitchClassSet::EMPTY;
        for p in iter {
            s.insert(p);
        }
        s
    }
}

impl fmt::Display for PitchClassSet {
    /// Comma-separated ascending pitch classes, as in the corpus file.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TheoryError {
    #[error("chord `{chord}`: {reason}")]
    Contradictory { chord: String, reason: &'static str },
    #[error("register range {low}..={high} is invalid")]
    InvalidRange { low: u8, high: u8 },
    #[error("chord `{chord}` resolves to no pitch classes")]
    Unresolved { chord: String },
}

fn third(q: Quality) -> u8 {
    match q {
        Quality::Minor | Quality::Diminished => 3,
        _ => 4,
    }
}

fn fifth(q: Quality) -> u8 {
    match q {
        Quality::Diminished => 6,
        Quality::Augmented => 8,
        _ => 7,
    }
}

fn seventh(q: Quality, ext: Extension) -> u8 {
    if ext == Extension::MajorSeventh {
        return 11;
    }
    match q {
        Quality::Major => 11,
        Quality::Diminished => 9,
        _ => 10,
    }
}

/// Natural interval above the root for an alterable degree.
fn natural(degree: u8, q: Quality) -> u8 {
    match degree {
        5 => fifth(q),
        9 => 2,
        11 => 5,
        _ => 9,
    }
}

/// Chroma set of a chord, relative to its root, before transposition.
///
/// Extended chords stack the lower tensions: 9 adds the seventh and ninth,
/// 11 adds the eleventh as well, 13 adds the thirteenth on top. Major and
/// dominant thirteenths omit the eleventh, which clashes with the major
/// third.
pub fn oracle_pitch_classes(sym: &ChordSymbol) -> Result<PitchClassSet, TheoryError> {
    let contradiction = |reason| TheoryError::Contradictory {
        chord: sym.canonical(),
        reason,
    };
    let q = sym.quality();
    let ext = sym.extension();
    if matches!(q, Quality::Diminished | Quality::Augmented) && !matches!(ext, None | Some(Extension::Seventh)) {
        return Err(contradiction("diminished and augmented chords take only a plain seventh"));
    }
    let mut intervals: BTreeSet<u8> = [0, third(q), fifth(q)].into();
    if let Some(e) = ext {
        match e {
            Extension::Sixth => {
                intervals.insert(9);
            }
            Extension::Seventh | Extension::MajorSeventh => {
                intervals.insert(seventh(q, e));
            }
            Extension::Ninth => {
                intervals.extend([seventh(q, e), 2]);
            }
            Extension::Eleventh => {
                intervals.extend([seventh(q, e), 2, 5]);
            }
            Extension::Thirteenth => {
                intervals.extend([seventh(q, e), 2, 9]);
                if !matches!(q, Quality::Major | Quality::Dominant) {
                    intervals.insert(5);
                }
            }
        }
    }
    let has_seventh = ext.is_some_and(Extension::has_seventh);
    let mut fifth_altered = false;
    let mut removed = BTreeSet::new();
    let mut added = BTreeSet::new();
    for alt in sym.alterations() {
        if alt.degree == 5 {
            if matches!(q, Quality::Diminished | Quality::Augmented) {
                return Err(contradiction("fifth is already altered by the quality"));
            }
            if fifth_altered {
                return Err(contradiction("fifth altered twice"));
            }
            fifth_altered = true;
        } else if !has_seventh {
            return Err(contradiction("tension alteration without a seventh"));
        }
        let nat = natural(alt.degree, q);
        removed.insert(nat);
        added.insert((nat as i8 + alt.shift).rem_euclid(12) as u8);
    }
    for r in removed {
        intervals.remove(&r);
    }
    intervals.extend(added);
    Ok(intervals
        .into_iter()
        .map(|i| (i + sym.root()) % 12)
        .collect())
}

/// All MIDI pitches in `low..=high` whose pitch class is in `pcs`.
pub fn expand_to_register(pcs: PitchClassSet, low: u8, high: u8) -> Result<Vec<u8>, TheoryError> {
    if low > high || high > 127 {
        return Err(TheoryError::InvalidRange { low, high });
    }
    Ok((low..=high).filter(|&p| pcs.contains(p % 12)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pcs(text: &str) -> Vec<u8> {
        oracle_pitch_classes(&ChordSymbol::parse(text).unwrap()).unwrap().iter().collect()
    }

    #[test]
    fn seventh_chords() {
        assert_eq!(pcs("Cmaj7"), vec![0, 4, 7, 11]);
        assert_eq!(pcs("Am7b5"), vec![0, 3, 7, 9]);
        assert_eq!(pcs("C"), vec![0, 4, 7]);
        assert_eq!(pcs("G7"), vec![2, 5, 7, 11]);
        assert_eq!(pcs("Cdim7"), vec![0, 3, 6, 9]);
        assert_eq!(pcs("Caug7"), vec![0, 4, 8, 10]);
        assert_eq!(pcs("Cmmaj7"), vec![0, 3, 7, 11]);
        assert_eq!(pcs("Cm6"), vec![0, 3, 7, 9]);
    }

    #[test]
    fn extended_chords_stack() {
        assert_eq!(pcs("C9"), vec![0, 2, 4, 7, 10]);
        assert_eq!(pcs("Cm11"), vec![0, 2, 3, 5, 7, 10]);
        assert_eq!(pcs("C13"), vec![0, 2, 4, 7, 9, 10]);
        assert_eq!(pcs("Cmaj13"), vec![0, 2, 4, 7, 9, 11]);
        assert_eq!(pcs("Cm13"), vec![0, 2, 3, 5, 7, 9, 10]);
    }

    #[test]
    fn alterations_replace_natural_degrees() {
        assert_eq!(pcs("C7b9"), vec![0, 1, 4, 7, 10]);
        assert_eq!(pcs("C9#11"), vec![0, 2, 4, 6, 7, 10]);
        assert_eq!(pcs("C7#5"), vec![0, 4, 8, 10]);
        assert_eq!(pcs("C7b9#9"), vec![0, 1, 3, 4, 7, 10]);
    }

    #[test]
    fn contradictions_rejected() {
        for text in ["Cdimb5", "Caug#5", "C6b9", "Cb9", "Cdim9", "Cb5#5"] {
            let sym = ChordSymbol::parse(text).unwrap();
            if sym.root() == 0 {
                assert!(oracle_pitch_classes(&sym).is_err(), "{text}");
            }
        }
        assert!(oracle_pitch_classes(&ChordSymbol::parse("C#11").unwrap()).is_ok());
    }

    #[test]
    fn register_expansion() {
        let triad: PitchClassSet = [0, 4, 7].into_iter().collect();
        assert_eq!(expand_to_register(triad, 60, 72).unwrap(), vec![60, 64, 67, 72]);
        assert!(expand_to_register(triad, 60, 59).is_err());
        assert!(expand_to_register(triad, 60, 128).is_err());
        let c: PitchClassSet = [0].into_iter().collect();
        let all = expand_to_register(c, 0, 127).unwrap();
        assert_eq!(all.len(), 11);
        assert_eq!(all.last(), Some(&120));
    }

    #[test]
    fn display_is_ascending() {
        let s: PitchClassSet = [9, 0, 3, 7].into_iter().collect();
        assert_eq!(s.to_string(), "0,3,7,9");
    }
}
