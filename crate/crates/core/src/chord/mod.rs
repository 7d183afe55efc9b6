//! Chord symbols, their pitch-class semantics, and the Chord-Former model.

pub mod chordformer;
pub mod corpus;
pub mod oracle;
pub mod symbol;
pub mod tokenize;
pub mod vocab;

pub use chordformer::{train_chordformer, ChordFormer, ChordFormerConfig, ChordFormerMetrics};
pub use corpus::{ChordCorpus, CorpusEntry};
pub use oracle::{expand_to_register, oracle_pitch_classes, PitchClassSet, TheoryError};
pub use symbol::{Alteration, ChordParseError, ChordSymbol, Extension, Quality};
pub use tokenize::{tokenize_symbol, TokenizeError, L_SYM};
pub use vocab::{ChordVocabulary, VocabError, NO_CHORD};

/// Parses and labels a symbol in one go.
pub fn pitch_classes_of(text: &str) -> crate::Result<PitchClassSet> {
    Ok(oracle_pitch_classes(&ChordSymbol::parse(text)?)?)
}
