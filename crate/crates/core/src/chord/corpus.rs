//! Enumerated chord corpus labelled by the oracle.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::oracle::{oracle_pitch_classes, PitchClassSet, TheoryError};
use super::symbol::{ChordSymbol, SHARP_NAMES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub symbol: String,
    pub pitch_classes: PitchClassSet,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChordCorpus {
    entries: Vec<CorpusEntry>,
}

const FIFTH_ALTS: [&str; 3] = ["", "b5", "#5"];
const DOMINANT_ALTS: [&str; 7] = ["", "b5", "#5", "b9", "#9", "#11", "b13"];

/// Per-root suffixes. Triads and the major/minor families take fifth
/// alterations; dominants also take the common tensions. Diminished and
/// augmented chords already fix their fifth, so they stay plain.
fn suffixes() -> Vec<String> {
    let mut out = Vec::new();
    let with = |out: &mut Vec<String>, bases: &[&str], alts: &[&str]| {
        for b in bases {
            for a in alts {
                out.push(format!("{b}{a}"));
            }
        }
    };
    with(&mut out, &["", "m", "6", "m6"], &FIFTH_ALTS);
    with(&mut out, &["dim", "aug", "dim7", "aug7"], &[""]);
    with(
        &mut out,
        &["maj7", "m7", "mmaj7", "maj9", "m9", "maj11", "m11", "maj13", "m13"],
        &FIFTH_ALTS,
    );
    // Dominants take one tension or any pair of distinct tensions, except
    // the contradictory b5#5.
    let mut alts: Vec<String> = DOMINANT_ALTS.iter().map(|s| s.to_string()).collect();
    for i in 1..DOMINANT_ALTS.len() {
        for j in i + 1..DOMINANT_ALTS.len() {
            if (i, j) != (1, 2) {
                alts.push(format!("{}{}", DOMINANT_ALTS[i], DOMINANT_ALTS[j]));
            }
        }
    }
    let alts: Vec<&str> = alts.iter().map(|s| s.as_str()).collect();
    with(&mut out, &["7", "9", "11", "13"], &alts);
    out
}

impl ChordCorpus {
    /// Every root times every suffix, deduplicated by canonical text.
    pub fn build() -> Result<Self, TheoryError> {
        let mut seen = BTreeSet::new();
        let mut entries = Vec::new();
        for root in SHARP_NAMES {
            for suffix in suffixes() {
                let sym = ChordSymbol::parse(&format!("{root}{suffix}")).expect("corpus symbols are grammatical");
                let text = sym.canonical();
                if seen.insert(text.clone()) {
                    entries.push(CorpusEntry {
                        pitch_classes: oracle_pitch_classes(&sym)?,
                        symbol: text,
                    });
                }
            }
        }
        Ok(ChordCorpus { entries })
    }

    pub fn from_entries(entries: Vec<CorpusEntry>) -> Self {
        ChordCorpus { entries }
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.symbol.as_str())
    }

    pub fn get(&self, symbol: &str) -> Option<&CorpusEntry> {
        self.entries.iter().find(|e| e.symbol == symbol)
    }

    /// `SYMBOL<TAB>pc,pc,...` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{}\t{}", e.symbol, e.pitch_classes);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, CorpusFormatError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: &str| CorpusFormatError {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (sym, pcs) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
            let mut set = PitchClassSet::EMPTY;
            for p in pcs.split(',') {
                let p: u8 = p.trim().parse().map_err(|_| err("bad pitch class"))?;
                if p > 11 {
                    return Err(err("pitch class out of range"));
                }
                set.insert(p);
            }
            if !seen.insert(sym.to_string()) {
                return Err(err("duplicate symbol"));
            }
            entries.push(CorpusEntry {
                symbol: sym.to_string(),
                pitch_classes: set,
            });
        }
        Ok(ChordCorpus { entries })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("corpus line {line}: {reason}")]
pub struct CorpusFormatError {
    pub line: usize,
    pub reason: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_and_root_balance() {
        let corpus = ChordCorpus::build().unwrap();
        assert!(corpus.len() >= 300);
        assert_eq!(corpus.len() % 12, 0);
        let per_root = corpus.len() / 12;
        for root in 0..12 {
            let n = corpus
                .symbols()
                .filter(|s| ChordSymbol::parse(s).unwrap().root() == root)
                .count();
            assert_eq!(n, per_root);
        }
    }

    #[test]
    fn contains_half_diminished_fsharp() {
        let corpus = ChordCorpus::build().unwrap();
        let e = corpus.get("F#m7b5").unwrap();
        assert_eq!(e.pitch_classes.iter().collect::<Vec<_>>(), vec![0, 4, 6, 9]);
    }

    #[test]
    fn entries_are_canonical_and_labelled() {
        let corpus = ChordCorpus::build().unwrap();
        for e in corpus.entries() {
            let sym = ChordSymbol::parse(&e.symbol).unwrap();
            assert_eq!(sym.canonical(), e.symbol);
            assert_eq!(oracle_pitch_classes(&sym).unwrap(), e.pitch_classes);
        }
    }

    #[test]
    fn tokenized_prefixes_stay_unique() {
        let corpus = ChordCorpus::build().unwrap();
        let toks: BTreeSet<Vec<usize>> = corpus
            .symbols()
            .map(|s| crate::chord::tokenize_symbol(s).unwrap())
            .collect();
        assert_eq!(toks.len(), corpus.len());
    }

    #[test]
    fn tsv_round_trip() {
        let corpus = ChordCorpus::build().unwrap();
        let text = corpus.to_tsv();
        assert!(text.lines().any(|l| l == "Cmaj7\t0,4,7,11"));
        assert_eq!(ChordCorpus::from_tsv(&text).unwrap(), corpus);
        assert!(ChordCorpus::from_tsv("C\t0,4,7\nC\t0,4,7\n").is_err());
        assert!(ChordCorpus::from_tsv("C 0,4,7\n").is_err());
    }
}
