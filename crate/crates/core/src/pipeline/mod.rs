//! End-to-end orchestration: ingest, harmonize, render.

pub mod models;
pub mod stages;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use harmonia_kernel::ParameterStore;

use crate::chord::{ChordFormer, ChordVocabulary};
use crate::composer::{
    allowed_pitches, ChordFormerTheorist, Composer, ComposerConfig, GenerationError, HarmonyLine, HarmonyModel,
    OracleTheorist, RhythmModel, Sampling, Theorist,
};
use crate::conductor::{render_additive, wav_bytes, ConductorError, SynthVoiceConfig};
use crate::config::{parse_kv, ConfigError};
use crate::error::{Error, Result};
use crate::event::{StandardizedScore, REST};
use crate::score::{parse_score, serialize_score, HarmonizedScore, ScoreDocument};

use models::{load_chordformer, load_composer, load_rhythm, weights_path, write_file};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoristChoice {
    Oracle,
    ChordFormer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub model_dir: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub composer: ComposerConfig,
    pub synth: SynthVoiceConfig,
    pub sample_rate: u32,
    pub theorist: TheoristChoice,
    pub strict: bool,
    pub dump_steps: bool,
    pub allow_stub: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("corpus"),
            model_dir: PathBuf::from("models"),
            out_dir: PathBuf::from("out"),
            seed: 1,
            composer: ComposerConfig::default(),
            synth: SynthVoiceConfig::default(),
            sample_rate: 44100,
            theorist: TheoristChoice::ChordFormer,
            strict: false,
            dump_steps: false,
            allow_stub: false,
        }
    }
}

fn flag(line: usize, v: &str) -> std::result::Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(ConfigError {
            line,
            reason: format!("`{v}` is not a boolean"),
        }),
    }
}

fn number<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> std::result::Result<T, ConfigError> {
    v.parse().map_err(|_| ConfigError {
        line,
        reason: format!("`{key}` = `{v}` is not a valid number"),
    })
}

impl PipelineConfig {
    /// Starts from the defaults and applies every `key = value` line.
    /// Voice keys (`attack`, `tempo_bpm`, ...) go to the synth settings.
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = Self::default();
        let mut top_k = 4usize;
        let mut top_p = 0.9f32;
        let mut nucleus = false;
        for (line, key, value) in parse_kv(text)? {
            let v = value.as_str();
            match key.as_str() {
                "corpus_dir" => c.corpus_dir = PathBuf::from(v),
                "model_dir" => c.model_dir = PathBuf::from(v),
                "out_dir" => c.out_dir = PathBuf::from(v),
                "seed" => c.seed = number(line, &key, v)?,
                "sampling" => {
                    nucleus = match v {
                        "top-k" => false,
                        "nucleus" => true,
                        _ => {
                            return Err(ConfigError {
                                line,
                                reason: format!("sampling must be `top-k` or `nucleus`, found `{v}`"),
                            }
                            .into())
                        }
                    }
                }
                "top_k" => top_k = number(line, &key, v)?,
                "top_p" => top_p = number(line, &key, v)?,
                "window" => c.composer.window = number(line, &key, v)?,
                "sample_rate" => c.sample_rate = number(line, &key, v)?,
                "theorist" => {
                    c.theorist = match v {
                        "oracle" => TheoristChoice::Oracle,
                        "chordformer" => TheoristChoice::ChordFormer,
                        _ => {
                            return Err(ConfigError {
                                line,
                                reason: format!("theorist must be `oracle` or `chordformer`, found `{v}`"),
                            }
                            .into())
                        }
                    }
                }
                "strict" => c.strict = flag(line, v)?,
                "dump_steps" => c.dump_steps = flag(line, v)?,
                "allow_stub" => c.allow_stub = flag(line, v)?,
                _ => {
                    let known = c.synth.set(line, &key, v).map_err(|e| ConfigError {
                        line,
                        reason: e.to_string(),
                    })?;
                    if !known {
                        return Err(ConfigError {
                            line,
                            reason: format!("unknown key `{key}`"),
                        }
                        .into());
                    }
                }
            }
        }
        c.composer.sampling = if nucleus { Sampling::Nucleus(top_p) } else { Sampling::TopK(top_k) };
        c.synth.validate().map_err(|e| ConfigError {
            line: 0,
            reason: e.to_string(),
        })?;
        Ok(c)
    }

    /// The composer settings with the pipeline seed applied.
    pub fn composer_config(&self) -> ComposerConfig {
        ComposerConfig {
            seed: self.seed,
            ..self.composer
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Models,
    Harmony,
    Audio,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Ingest => "ingest",
            Stage::Models => "models",
            Stage::Harmony => "harmony",
            Stage::Audio => "audio",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub const EXIT_PARSE: i32 = 2;
pub const EXIT_THEORY: i32 = 3;
pub const EXIT_GENERATION: i32 = 4;
pub const EXIT_AUDIO: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

/// Process exit code for an error raised in `stage`.
pub fn exit_code(stage: Stage, error: &Error) -> i32 {
    match error {
        Error::Config(_) => EXIT_USAGE,
        Error::Score(_) | Error::Event(_) => match stage {
            Stage::Ingest => EXIT_PARSE,
            Stage::Models | Stage::Harmony => EXIT_GENERATION,
            Stage::Audio | Stage::Output => EXIT_AUDIO,
        },
        Error::ChordParse(_) | Error::Theory(_) | Error::Tokenize(_) => match stage {
            Stage::Ingest => EXIT_PARSE,
            _ => EXIT_THEORY,
        },
        Error::Conductor(_) => EXIT_AUDIO,
        Error::Generation(_) | Error::Vocab(_) | Error::Kernel(_) | Error::Weights(_) => EXIT_GENERATION,
        Error::Io { .. } => match stage {
            Stage::Ingest => EXIT_PARSE,
            Stage::Models | Stage::Harmony => EXIT_GENERATION,
            Stage::Audio | Stage::Output => EXIT_AUDIO,
        },
    }
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        exit_code(self.stage, &self.source)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError>;
}

impl<T, E: Into<Error>> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> std::result::Result<T, PipelineError> {
        self.map_err(|e| PipelineError {
            stage,
            source: e.into(),
        })
    }
}

/// The trained models found in the model directory, with stand-ins where
/// `allow_stub` permits them.
pub struct LoadedModels {
    pub composer: Composer,
    pub chordformer: Option<(ChordFormer, ParameterStore)>,
    pub theorist: TheoristChoice,
}

impl LoadedModels {
    pub fn load(config: &PipelineConfig) -> Result<Self> {
        let dir = &config.model_dir;
        let missing = |name: &str| -> Result<()> {
            if config.allow_stub {
                Ok(())
            } else {
                Err(GenerationError::MissingModel {
                    model: name.to_string(),
                    path: weights_path(dir, name).display().to_string(),
                }
                .into())
            }
        };
        let (harmony, vocab) = match load_composer(dir)? {
            Some((model, store, vocab)) => (HarmonyModel::Gpt { model, store }, vocab),
            None => {
                missing(models::COMPOSER)?;
                (HarmonyModel::Stub, ChordVocabulary::from_symbols([]))
            }
        };
        let rhythm = match load_rhythm(dir)? {
            Some((net, store)) => RhythmModel::Net { net, store },
            None => {
                missing(models::RHYTHM)?;
                RhythmModel::Echo
            }
        };
        let (chordformer, theorist) = match config.theorist {
            TheoristChoice::Oracle => (None, TheoristChoice::Oracle),
            TheoristChoice::ChordFormer => match load_chordformer(dir)? {
                Some(cf) => (Some(cf), TheoristChoice::ChordFormer),
                None => {
                    missing(models::CHORDFORMER)?;
                    (None, TheoristChoice::Oracle)
                }
            },
        };
        Ok(Self {
            composer: Composer {
                harmony,
                rhythm,
                chord_vocab: vocab,
            },
            chordformer,
            theorist,
        })
    }

    pub fn theorist(&self) -> Box<dyn Theorist + '_> {
        match &self.chordformer {
            Some((model, store)) => Box::new(ChordFormerTheorist { model, store }),
            None => Box::new(OracleTheorist),
        }
    }

    pub fn summary(&self) -> String {
        let h = match self.composer.harmony {
            HarmonyModel::Stub => "uniform stub",
            HarmonyModel::Gpt { .. } => "harmony-gpt",
        };
        let r = match self.composer.rhythm {
            RhythmModel::Echo => "echo",
            RhythmModel::Net { .. } => "rhythm-net",
        };
        let t = match self.theorist {
            TheoristChoice::Oracle => "oracle",
            TheoristChoice::ChordFormer => "chord-former",
        };
        format!("harmony {h}, rhythm {r}, theorist {t}")
    }
}

/// Harmony notes that break the chord-tone or above-melody rule.
pub fn count_violations(
    score: &StandardizedScore,
    line: &HarmonyLine,
    theorist: &dyn Theorist,
    window: u8,
) -> Result<usize> {
    let mut n = 0;
    for (e, h) in score.melody().iter().zip(&line.notes) {
        if h.pitch == REST {
            continue;
        }
        let ok = match (&e.chord, e.is_rest()) {
            (Some(chord), false) => allowed_pitches(theorist.pitch_classes(chord)?, e.pitch, window).contains(&h.pitch),
            _ => false,
        };
        n += usize::from(!ok);
    }
    Ok(n)
}

#[derive(Debug, Clone)]
pub struct Harmonization {
    pub harmonized: HarmonizedScore,
    pub line: HarmonyLine,
    pub violations: usize,
}

pub fn harmonize(score: &StandardizedScore, models: &LoadedModels, config: &PipelineConfig) -> Result<Harmonization> {
    let theorist = models.theorist();
    let cc = config.composer_config();
    let line = models.composer.generate(score, theorist.as_ref(), &cc)?;
    let violations = count_violations(score, &line, theorist.as_ref(), cc.window)?;
    let harmonized = HarmonizedScore::new(score.clone(), line.notes.clone())?;
    Ok(Harmonization {
        harmonized,
        line,
        violations,
    })
}

pub fn render_wav(harmonized: &HarmonizedScore, config: &PipelineConfig) -> std::result::Result<Vec<u8>, ConductorError> {
    wav_bytes(&render_additive(harmonized, &config.synth, config.sample_rate)?)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub musicxml: PathBuf,
    pub wav: PathBuf,
    pub steps: Option<PathBuf>,
    pub timings: Vec<(Stage, Duration)>,
    pub events: usize,
    pub violations: usize,
    pub fallbacks: usize,
    pub log_prob: f64,
    pub models: String,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "models: {}", self.models)?;
        for (stage, d) in &self.timings {
            writeln!(f, "{stage}: {:.3} s", d.as_secs_f64())?;
        }
        writeln!(f, "events: {}", self.events)?;
        writeln!(f, "constraint violations: {}", self.violations)?;
        writeln!(f, "zero-mass fallbacks: {}", self.fallbacks)?;
        writeln!(f, "harmony log-probability: {:.6}", self.log_prob)?;
        writeln!(f, "musicxml: {}", self.musicxml.display())?;
        write!(f, "wav: {}", self.wav.display())?;
        if let Some(p) = &self.steps {
            write!(f, "\nsteps: {}", p.display())?;
        }
        Ok(())
    }
}

fn output_stem(input: &Path) -> String {
    input.file_stem().map_or_else(|| "score".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Writes every file or none: on failure the ones already written are
/// removed.
pub fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let mut written = Vec::new();
    for (path, bytes) in files {
        if let Err(e) = write_file(path, bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            let _ = std::fs::remove_file(path);
            return Err(e);
        }
        written.push(path.clone());
    }
    Ok(())
}

/// Ingest, harmonize and render one score into `config.out_dir`.
pub fn run_pipeline(input: &Path, config: &PipelineConfig) -> std::result::Result<RunReport, PipelineError> {
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: Stage, timings: &mut Vec<(Stage, Duration)>| {
        timings.push((stage, clock.elapsed()));
        clock = Instant::now();
    };

    let doc = ScoreDocument::read(input)
        .map_err(|source| Error::Io {
            path: input.display().to_string(),
            source,
        })
        .at(Stage::Ingest)?;
    let score = parse_score(&doc, config.strict).at(Stage::Ingest)?;
    lap(Stage::Ingest, &mut timings);

    let models = LoadedModels::load(config).at(Stage::Models)?;
    lap(Stage::Models, &mut timings);

    let h = harmonize(&score, &models, config).at(Stage::Harmony)?;
    if h.violations > 0 {
        return Err(GenerationError::ConstraintViolation(h.violations)).at(Stage::Harmony);
    }
    lap(Stage::Harmony, &mut timings);

    let wav = render_wav(&h.harmonized, config).at(Stage::Audio)?;
    let xml = serialize_score(&h.harmonized).at(Stage::Audio)?;
    lap(Stage::Audio, &mut timings);

    let stem = output_stem(input);
    let musicxml = config.out_dir.join(format!("{stem}.harmonized.musicxml"));
    let wav_path = config.out_dir.join(format!("{stem}.wav"));
    let mut files = vec![(musicxml.clone(), xml.text.into_bytes()), (wav_path.clone(), wav)];
    let steps = config.dump_steps.then(|| config.out_dir.join(format!("{stem}.steps.tsv")));
    if let Some(p) = &steps {
        files.push((p.clone(), h.line.dump_tsv().into_bytes()));
    }
    write_all(&files).at(Stage::Output)?;
    lap(Stage::Output, &mut timings);

    Ok(RunReport {
        musicxml,
        wav: wav_path,
        steps,
        timings,
        events: score.len(),
        violations: h.violations,
        fallbacks: h.line.fallbacks,
        log_prob: h.line.log_prob(),
        models: models.summary(),
    })
}
