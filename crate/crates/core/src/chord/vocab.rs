//! Chord-symbol vocabulary with token 0 reserved for "no chord".

use std::collections::HashMap;

use thiserror::Error;

pub const NO_CHORD: &str = "N.C.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChordVocabulary {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("chord `{0}` is not in the vocabulary")]
    OutOfVocabulary(String),
    #[error("vocabulary line {line}: {reason}")]
    Format { line: usize, reason: String },
}

impl ChordVocabulary {
    /// Sorted, deduplicated symbols after the reserved no-chord token.
    pub fn from_symbols<'a>(symbols: impl IntoIterator<Item = &'a str>) -> Self {
        let mut list: Vec<String> = symbols.into_iter().filter(|s| *s != NO_CHORD).map(str::to_string).collect();
        list.sort();
        list.dedup();
        list.insert(0, NO_CHORD.to_string());
        Self::from_list(list)
    }

    fn from_list(symbols: Vec<String>) -> Self {
        let index = symbols.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        ChordVocabulary { symbols, index }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `None` maps to the no-chord token.
    pub fn token(&self, chord: Option<&str>) -> Result<usize, VocabError> {
        match chord {
            None => Ok(0),
            Some(s) => self.index.get(s).copied().ok_or_else(|| VocabError::OutOfVocabulary(s.to_string())),
        }
    }

    pub fn symbol(&self, token: usize) -> Option<&str> {
        self.symbols.get(token).map(String::as_str)
    }

    /// Inverse of [`token`](Self::token); token 0 decodes to `None`.
    pub fn chord(&self, token: usize) -> Option<Option<&str>> {
        match token {
            0 => Some(None),
            t => self.symbol(t).map(Some),
        }
    }

    /// One symbol per line in token order.
    pub fn save(&self) -> String {
        let mut out = self.symbols.join("\n");
        out.push('\n');
        out
    }

    pub fn load(text: &str) -> Result<Self, VocabError> {
        let symbols: Vec<String> = text.lines().map(str::to_string).collect();
        if symbols.first().map(String::as_str) != Some(NO_CHORD) {
            return Err(VocabError::Format {
                line: 1,
                reason: format!("first entry must be {NO_CHORD}"),
            });
        }
        let vocab = Self::from_list(symbols);
        if vocab.index.len() != vocab.symbols.len() {
            let line = vocab
                .symbols
                .iter()
                .enumerate()
                .find(|(i, s)| vocab.index[*s] != *i)
                .map_or(0, |(i, _)| i + 1);
            return Err(VocabError::Format {
                line,
                reason: "duplicate symbol".into(),
            });
        }
        Ok(vocab)
    }
}
