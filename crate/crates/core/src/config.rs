//! `key = value` text files.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("config line {line}: {reason}")]
pub struct ConfigError {
    pub line: usize,
    pub reason: String,
}

/// Non-blank, non-`#` lines split at the first `=`, with one-based line
/// numbers. Duplicate keys are errors.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>, ConfigError> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError {
                line: i + 1,
                reason: format!("expected `key = value`, found `{line}`"),
            });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        if out.iter().any(|(_, k, _)| *k == key) {
            return Err(ConfigError {
                line: i + 1,
                reason: format!("duplicate key `{key}`"),
            });
        }
        out.push((i + 1, key, v.trim().to_string()));
    }
    Ok(out)
}
