//! One function per subcommand. Each reads and writes only files.

use std::path::{Path, PathBuf};

use crate::chord::{train_chordformer, ChordCorpus, ChordFormerConfig, ChordFormerMetrics, ChordVocabulary};
use crate::composer::corpus::{echo_rhythm_corpus, gpt_examples, harmonize_with_rule, toy_corpus};
use crate::composer::{
    evaluate_rhythm_net, train_harmony_gpt, train_rhythm_net, GptConfig, GptTrainConfig, GptTrainReport, HarmonyGpt,
    OracleTheorist, RhythmTrainConfig,
};
use crate::error::{Error, Result};
use crate::event::{augment_corpus, read_scores_tsv, write_scores_tsv, StandardizedScore};
use crate::score::{filter_corpus, FilterReport, ScoreDocument};

use super::models::{read_text, save_chordformer, save_composer, save_rhythm, write_file};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// MusicXML files named directly or found (non-recursively) in directories,
/// in sorted order.
pub fn collect_score_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| matches!(f.extension().and_then(|e| e.to_str()), Some("musicxml" | "xml")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Parses and filters MusicXML files into a scores TSV.
pub fn ingest(inputs: &[PathBuf], out: &Path) -> Result<FilterReport> {
    let docs = collect_score_files(inputs)?
        .iter()
        .map(|p| ScoreDocument::read(p).map_err(io_err(p)))
        .collect::<Result<Vec<_>>>()?;
    let (scores, report) = filter_corpus(&docs);
    write_file(out, write_scores_tsv(&scores))?;
    Ok(report)
}

pub fn read_scores(path: &Path) -> Result<Vec<StandardizedScore>> {
    Ok(read_scores_tsv(&read_text(path)?)?)
}

/// Writes all twelve transpositions of every score; returns the count.
pub fn augment(input: &Path, out: &Path) -> Result<usize> {
    let scores = augment_corpus(&read_scores(input)?)?;
    write_file(out, write_scores_tsv(&scores))?;
    Ok(scores.len())
}

pub fn build_chord_corpus(out: &Path) -> Result<usize> {
    let corpus = ChordCorpus::build()?;
    write_file(out, corpus.to_tsv())?;
    Ok(corpus.len())
}

/// Trains on the corpus TSV (or the built-in enumeration) and saves the
/// model.
pub fn train_chordformer_stage(
    corpus: Option<&Path>,
    config: &ChordFormerConfig,
    model_dir: &Path,
) -> Result<ChordFormerMetrics> {
    let corpus = match corpus {
        Some(p) => ChordCorpus::from_tsv(&read_text(p)?).map_err(|e| Error::Io {
            path: p.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()),
        })?,
        None => ChordCorpus::build()?,
    };
    let (store, _, metrics) = train_chordformer(&corpus, config)?;
    save_chordformer(model_dir, &store, config)?;
    Ok(metrics)
}

/// Scores from a TSV, or the four-score toy corpus.
fn training_scores(scores: Option<&Path>, toy_seed: u64) -> Result<Vec<StandardizedScore>> {
    match scores {
        Some(p) => read_scores(p),
        None => Ok(toy_corpus(toy_seed)),
    }
}

/// Chord vocabulary covering the whole enumerated grammar plus any chord
/// spelled differently in the training scores.
pub fn composer_vocabulary(scores: &[StandardizedScore]) -> Result<ChordVocabulary> {
    let corpus = ChordCorpus::build()?;
    let extra: Vec<&str> = scores.iter().flat_map(|s| s.melody().iter().filter_map(|e| e.chord.as_deref())).collect();
    Ok(ChordVocabulary::from_symbols(corpus.symbols().chain(extra)))
}

#[derive(Debug, Clone)]
pub struct ComposerTraining {
    pub report: GptTrainReport,
    pub examples: usize,
    pub skipped_long: usize,
}

/// Rule-harmonizes the scores, then pretrains and fine-tunes Harmony-GPT.
/// Scores too long for the context are skipped.
pub fn train_composer_stage(
    scores: Option<&Path>,
    layers: usize,
    gpt: &GptTrainConfig,
    window: u8,
    model_dir: &Path,
) -> Result<ComposerTraining> {
    let scores = training_scores(scores, 3)?;
    let vocab = composer_vocabulary(&scores)?;
    let config = GptConfig {
        layers,
        ..GptConfig::toy(vocab.len())
    };
    let (fit, long): (Vec<_>, Vec<_>) = scores.into_iter().partition(|s| 2 * s.len() + 2 <= config.context);
    let harmonized = harmonize_with_rule(&fit, &OracleTheorist, window)?;
    let examples = gpt_examples(&harmonized, &vocab)?;
    let mut r = harmonia_kernel::rng::seeded(gpt.seed);
    let mut store = harmonia_kernel::ParameterStore::new();
    let model = HarmonyGpt::new(&mut store, config, &mut r)?;
    let report = train_harmony_gpt(&model, &mut store, &examples, gpt)?;
    save_composer(model_dir, &store, &config, &vocab)?;
    Ok(ComposerTraining {
        report,
        examples: examples.len(),
        skipped_long: long.len(),
    })
}

/// Trains Rhythm-Net to echo melody durations. Returns the losses and the
/// final MSE in squared sixteenths.
pub fn train_rhythm_stage(scores: Option<&Path>, config: &RhythmTrainConfig, model_dir: &Path) -> Result<(Vec<f32>, f32)> {
    let corpus = echo_rhythm_corpus(&training_scores(scores, 3)?);
    let (store, net, losses) = train_rhythm_net(&corpus, config)?;
    let mse = evaluate_rhythm_net(&store, &net, &corpus)?;
    save_rhythm(model_dir, &store, config.hidden)?;
    Ok((losses, mse))
}
