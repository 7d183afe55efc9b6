//! Model directory layout: `<name>.hgw` weights beside a `<name>.conf`
//! description holding the hyperparameters needed to rebuild the network.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use harmonia_kernel::ParameterStore;

use crate::chord::{ChordFormer, ChordFormerConfig, ChordVocabulary};
use crate::composer::{GenerationError, GptConfig, HarmonyGpt, RhythmNet};
use crate::config::parse_kv;
use crate::error::{Error, Result};
use crate::weights::{load_weights, save_weights};

pub const CHORDFORMER: &str = "chordformer";
pub const COMPOSER: &str = "composer";
pub const RHYTHM: &str = "rhythm";
pub const CHORD_VOCAB_FILE: &str = "composer.chords";

pub fn weights_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.hgw"))
}

fn conf_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.conf"))
}

pub(crate) fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Description {
    path: PathBuf,
    values: HashMap<String, String>,
}

impl Description {
    fn read(path: PathBuf) -> Result<Self> {
        let values = parse_kv(&read_text(&path)?)?.into_iter().map(|(_, k, v)| (k, v)).collect();
        Ok(Self { path, values })
    }

    fn usize(&self, key: &str) -> Result<usize> {
        let bad = |reason: String| {
            Error::from(GenerationError::ModelDescription {
                path: self.path.display().to_string(),
                reason,
            })
        };
        let v = self.values.get(key).ok_or_else(|| bad(format!("missing `{key}`")))?;
        v.parse().map_err(|_| bad(format!("`{key}` = `{v}` is not a count")))
    }
}

fn save(dir: &Path, name: &str, store: &ParameterStore, description: &[(&str, usize)]) -> Result<()> {
    let text: String = description.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    write_file(&conf_path(dir, name), text)?;
    save_weights(store, &weights_path(dir, name))
}

/// `None` when the weights file does not exist.
fn open(dir: &Path, name: &str) -> Result<Option<(ParameterStore, Description)>> {
    let w = weights_path(dir, name);
    if !w.exists() {
        return Ok(None);
    }
    let d = Description::read(conf_path(dir, name))?;
    Ok(Some((load_weights(&w)?, d)))
}

pub fn save_chordformer(dir: &Path, store: &ParameterStore, config: &ChordFormerConfig) -> Result<()> {
    save(
        dir,
        CHORDFORMER,
        store,
        &[
            ("layers", config.layers),
            ("heads", config.heads),
            ("width", config.width),
            ("ff_width", config.ff_width),
        ],
    )
}

pub fn load_chordformer(dir: &Path) -> Result<Option<(ChordFormer, ParameterStore)>> {
    let Some((store, d)) = open(dir, CHORDFORMER)? else {
        return Ok(None);
    };
    let config = ChordFormerConfig {
        layers: d.usize("layers")?,
        heads: d.usize("heads")?,
        width: d.usize("width")?,
        ff_width: d.usize("ff_width")?,
        ..ChordFormerConfig::default()
    };
    Ok(Some((ChordFormer::load(&store, &config)?, store)))
}

pub fn save_composer(dir: &Path, store: &ParameterStore, config: &GptConfig, vocab: &ChordVocabulary) -> Result<()> {
    save(
        dir,
        COMPOSER,
        store,
        &[
            ("layers", config.layers),
            ("heads", config.heads),
            ("width", config.width),
            ("ff_width", config.ff_width),
            ("context", config.context),
            ("chord_vocab", config.chord_vocab),
        ],
    )?;
    write_file(&dir.join(CHORD_VOCAB_FILE), vocab.save())
}

pub fn load_composer(dir: &Path) -> Result<Option<(HarmonyGpt, ParameterStore, ChordVocabulary)>> {
    let Some((store, d)) = open(dir, COMPOSER)? else {
        return Ok(None);
    };
    let config = GptConfig {
        layers: d.usize("layers")?,
        heads: d.usize("heads")?,
        width: d.usize("width")?,
        ff_width: d.usize("ff_width")?,
        context: d.usize("context")?,
        chord_vocab: d.usize("chord_vocab")?,
    };
    let vocab = ChordVocabulary::load(&read_text(&dir.join(CHORD_VOCAB_FILE))?)?;
    if vocab.len() != config.chord_vocab {
        return Err(GenerationError::ModelDescription {
            path: dir.join(CHORD_VOCAB_FILE).display().to_string(),
            reason: format!("{} chords listed but the model expects {}", vocab.len(), config.chord_vocab),
        }
        .into());
    }
    Ok(Some((HarmonyGpt::load(&store, config)?, store, vocab)))
}

pub fn save_rhythm(dir: &Path, store: &ParameterStore, hidden: usize) -> Result<()> {
    save(dir, RHYTHM, store, &[("hidden", hidden)])
}

pub fn load_rhythm(dir: &Path) -> Result<Option<(RhythmNet, ParameterStore)>> {
    let Some((store, d)) = open(dir, RHYTHM)? else {
        return Ok(None);
    };
    let net = RhythmNet::load(&store, d.usize("hidden")?)?;
    Ok(Some((net, store)))
}
