//! Character-level tokenization of chord symbols.

use std::collections::HashMap;
use std::sync::OnceLock;

use thiserror::Error;

/// Fixed token length. Longer symbols are truncated; every corpus symbol
/// stays distinguishable by its first eight characters.
pub const L_SYM: usize = 8;
pub const PAD: usize = 0;

const CHARS: &str = include_str!("../../data/chord_chars.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("character `{ch}` at position {position} is not in the chord alphabet")]
pub struct TokenizeError {
    pub ch: char,
    pub position: usize,
}

fn alphabet() -> &'static HashMap<char, usize> {
    static MAP: OnceLock<HashMap<char, usize>> = OnceLock::new();
    MAP.get_or_init(|| {
        CHARS
            .lines()
            .filter(|l| !l.starts_with('#') || l.len() == 1)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(i, l)| (l.chars().next().unwrap(), i + 1))
            .collect()
    })
}

/// Number of distinct tokens including padding.
pub fn char_vocab_size() -> usize {
    alphabet().len() + 1
}

/// One token per character, padded or truncated to [`L_SYM`].
pub fn tokenize_symbol(text: &str) -> Result<Vec<usize>, TokenizeError> {
    let map = alphabet();
    let mut out = Vec::with_capacity(L_SYM);
    for (position, ch) in text.chars().enumerate() {
        let tok = *map.get(&ch).ok_or(TokenizeError { ch, position })?;
        if out.len() < L_SYM {
            out.push(tok);
        }
    }
    out.resize(L_SYM, PAD);
    Ok(out)
}
