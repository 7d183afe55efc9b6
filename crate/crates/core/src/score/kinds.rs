use std::collections::HashMap;
use std::sync::OnceLock;

const TABLE: &str = include_str!("../../data/kind_suffix.tsv");

fn table() -> &'static [(String, String)] {
    static T: OnceLock<Vec<(String, String)>> = OnceLock::new();
    T.get_or_init(|| {
        TABLE
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| l.split_once('\t'))
            .map(|(k, s)| (k.to_string(), s.to_string()))
            .collect()
    })
}

/// Chord-symbol suffix for a MusicXML `kind` value.
pub fn suffix_for_kind(kind: &str) -> Option<&'static str> {
    table().iter().find(|(k, _)| k == kind).map(|(_, s)| s.as_str())
}

/// Inverse lookup on quality-and-extension suffixes; suffixes that carry an
/// alteration (half-diminished) are never chosen.
pub fn kind_for_suffix(suffix: &str) -> Option<&'static str> {
    static R: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    R.get_or_init(|| {
        let mut m = HashMap::new();
        for (k, s) in table() {
            if !s.contains('b') && !s.contains('#') {
                m.entry(s.as_str()).or_insert(k.as_str());
            }
        }
        m
    })
    .get(suffix)
    .copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        assert_eq!(suffix_for_kind("major"), Some(""));
        assert_eq!(suffix_for_kind("half-diminished"), Some("m7b5"));
        assert_eq!(suffix_for_kind("major-minor"), Some("mmaj7"));
        assert_eq!(suffix_for_kind("power"), None);
        assert_eq!(kind_for_suffix("m7"), Some("minor-seventh"));
        assert_eq!(kind_for_suffix(""), Some("major"));
        assert_eq!(kind_for_suffix("m7b5"), None);
    }

    #[test]
    fn every_corpus_quality_has_a_kind() {
        let corpus = crate::chord::ChordCorpus::build().unwrap();
        for s in corpus.symbols() {
            let sym = crate::chord::ChordSymbol::parse(s).unwrap();
            assert!(kind_for_suffix(&sym.quality_suffix()).is_some(), "{s}");
        }
    }
}
