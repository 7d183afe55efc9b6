//! `harmonia`: melody harmonization pipeline and its training stages.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harmonia_core::chord::ChordFormerConfig;
use harmonia_core::composer::{GptTrainConfig, RhythmTrainConfig};
use harmonia_core::conductor::{train_toy_gan, GanTrainConfig, GaussianTarget};
use harmonia_core::pipeline::{
    exit_code, harmonize, render_wav, run_pipeline, stages, write_all, LoadedModels, PipelineConfig, PipelineError, Stage,
    EXIT_GENERATION, EXIT_USAGE,
};
use harmonia_core::score::{parse_harmonized, parse_score, serialize_score, ScoreDocument};
use harmonia_core::Error;

#[derive(Parser, Debug)]
#[command(name = "harmonia", version, about = "Adds a higher harmony voice to a melody and renders it to audio")]
struct Cli {
    /// `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reject MusicXML elements outside the supported subset.
    #[arg(long, global = true)]
    strict: bool,
    /// Use the uniform-prior harmony model, echo rhythm and oracle theorist
    /// for any model without trained weights.
    #[arg(long, global = true)]
    allow_stub: bool,
    /// Also write the per-step sampling record.
    #[arg(long, global = true)]
    dump_steps: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Model directory.
    #[arg(long, global = true)]
    models: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and filter MusicXML files into a scores TSV.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long, default_value = "scores.tsv")]
        output: PathBuf,
    },
    /// Expand a scores TSV with all twelve transpositions.
    Augment {
        input: PathBuf,
        #[arg(short, long, default_value = "augmented.tsv")]
        output: PathBuf,
    },
    /// Write the enumerated, oracle-labelled chord corpus.
    BuildChordCorpus {
        #[arg(short, long, default_value = "chords.tsv")]
        output: PathBuf,
    },
    /// Train the Chord-Former theorist.
    TrainChordformer {
        /// Corpus TSV; the built-in enumeration when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train Harmony-GPT on rule-harmonized scores.
    TrainComposer {
        /// Scores TSV; the four-score toy corpus when omitted.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        layers: usize,
        #[arg(long)]
        pretrain_steps: Option<u64>,
        #[arg(long)]
        finetune_steps: Option<u64>,
    },
    /// Train Rhythm-Net on melody durations.
    TrainRhythm {
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Add the harmony voice to a MusicXML score.
    Harmonize { input: PathBuf },
    /// Render a harmonized MusicXML score to WAV.
    Render { input: PathBuf },
    /// Ingest, harmonize and render one score.
    Run { input: PathBuf },
    /// Train the toy conditional WGAN-GP on a 1-D Gaussian.
    GanDemo {
        #[arg(long, default_value_t = 3.0)]
        mean: f32,
        #[arg(long, default_value_t = 0.5)]
        std: f32,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Finite-difference check of every layer's backward pass.
    GradCheck,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

fn fail(stage: Stage) -> impl FnOnce(Error) -> Failure {
    move |e| Failure {
        code: exit_code(stage, &e),
        message: format!("{stage} stage failed: {e}"),
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Failure> {
    let mut c = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure {
                code: EXIT_USAGE,
                message: format!("cannot read config {}: {e}", p.display()),
            })?;
            PipelineConfig::from_kv(&text).map_err(|e| Failure {
                code: EXIT_USAGE,
                message: format!("{}: {e}", p.display()),
            })?
        }
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.out_dir = o.clone();
    }
    if let Some(m) = &cli.models {
        c.model_dir = m.clone();
    }
    c.strict |= cli.strict;
    c.allow_stub |= cli.allow_stub;
    c.dump_steps |= cli.dump_steps;
    Ok(c)
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "score".into(), |s| s.to_string_lossy().into_owned())
}

fn read_doc(p: &Path) -> Result<ScoreDocument, Failure> {
    ScoreDocument::read(p)
        .map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })
        .map_err(fail(Stage::Ingest))
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let config = load_config(cli)?;
    let out = |name: &Path| if name.is_absolute() { name.to_path_buf() } else { config.out_dir.join(name) };
    match &cli.command {
        Command::Ingest { inputs, output } => {
            let path = out(output);
            let r = stages::ingest(inputs, &path).map_err(fail(Stage::Ingest))?;
            println!(
                "kept {} scores, dropped {} ({} unparseable, {} without melody, {} without chords) -> {}",
                r.kept,
                r.dropped(),
                r.unparseable,
                r.no_melody,
                r.no_chords,
                path.display()
            );
        }
        Command::Augment { input, output } => {
            let path = out(output);
            let n = stages::augment(input, &path).map_err(fail(Stage::Ingest))?;
            println!("{n} scores -> {}", path.display());
        }
        Command::BuildChordCorpus { output } => {
            let path = out(output);
            let n = stages::build_chord_corpus(&path).map_err(fail(Stage::Harmony))?;
            println!("{n} chord symbols -> {}", path.display());
        }
        Command::TrainChordformer { corpus, epochs } => {
            let mut cf = ChordFormerConfig {
                seed: cli.seed.unwrap_or(ChordFormerConfig::default().seed),
                ..Default::default()
            };
            if let Some(e) = epochs {
                cf.epochs = *e;
            }
            let m = stages::train_chordformer_stage(corpus.as_deref(), &cf, &config.model_dir).map_err(fail(Stage::Models))?;
            println!(
                "{} steps, final loss {:.5}, train accuracy {:.4}, held-out accuracy {:.4} -> {}",
                m.steps,
                m.epoch_losses.last().copied().unwrap_or(f32::NAN),
                m.train_accuracy,
                m.holdout_accuracy,
                config.model_dir.display()
            );
        }
        Command::TrainComposer {
            scores,
            layers,
            pretrain_steps,
            finetune_steps,
        } => {
            let mut g = GptTrainConfig::default();
            if let Some(s) = cli.seed {
                g.seed = s;
            }
            if let Some(s) = pretrain_steps {
                g.pretrain_steps = *s;
            }
            if let Some(s) = finetune_steps {
                g.finetune_steps = *s;
            }
            let t = stages::train_composer_stage(scores.as_deref(), *layers, &g, config.composer.window, &config.model_dir)
                .map_err(fail(Stage::Models))?;
            println!(
                "{} examples ({} too long, skipped), pretrain loss {:.5}, fine-tune loss {:.5} -> {}",
                t.examples,
                t.skipped_long,
                t.report.pretrain_losses.last().copied().unwrap_or(f32::NAN),
                t.report.finetune_losses.last().copied().unwrap_or(f32::NAN),
                config.model_dir.display()
            );
        }
        Command::TrainRhythm { scores, steps } => {
            let mut rc = RhythmTrainConfig::default();
            if let Some(s) = cli.seed {
                rc.seed = s;
            }
            if let Some(s) = steps {
                rc.steps = *s;
            }
            let (losses, mse) = stages::train_rhythm_stage(scores.as_deref(), &rc, &config.model_dir).map_err(fail(Stage::Models))?;
            println!(
                "final loss {:.3e}, MSE {:.3e} squared sixteenths -> {}",
                losses.last().copied().unwrap_or(f32::NAN),
                mse,
                config.model_dir.display()
            );
        }
        Command::Harmonize { input } => {
            let score = parse_score(&read_doc(input)?, config.strict).map_err(|e| fail(Stage::Ingest)(e.into()))?;
            let models = LoadedModels::load(&config).map_err(fail(Stage::Models))?;
            let h = harmonize(&score, &models, &config).map_err(fail(Stage::Harmony))?;
            if h.violations > 0 {
                return Err(Failure {
                    code: EXIT_GENERATION,
                    message: format!("{} constraint violations", h.violations),
                });
            }
            let xml = serialize_score(&h.harmonized).map_err(|e| fail(Stage::Output)(e.into()))?;
            let path = config.out_dir.join(format!("{}.harmonized.musicxml", stem(input)));
            let mut files = vec![(path.clone(), xml.text.into_bytes())];
            if config.dump_steps {
                files.push((config.out_dir.join(format!("{}.steps.tsv", stem(input))), h.line.dump_tsv().into_bytes()));
            }
            write_all(&files).map_err(fail(Stage::Output))?;
            println!("models: {}", models.summary());
            println!("harmony log-probability: {:.6}", h.line.log_prob());
            println!("{}", path.display());
        }
        Command::Render { input } => {
            let score = parse_harmonized(&read_doc(input)?, config.strict).map_err(|e| fail(Stage::Ingest)(e.into()))?;
            let wav = render_wav(&score, &config).map_err(|e| fail(Stage::Audio)(e.into()))?;
            let path = config.out_dir.join(format!("{}.wav", stem(input)));
            write_all(&[(path.clone(), wav)]).map_err(fail(Stage::Output))?;
            println!("{}", path.display());
        }
        Command::Run { input } => {
            let report = run_pipeline(input, &config)?;
            println!("{report}");
        }
        Command::GanDemo { mean, std, steps, lambda } => {
            let mut g = GanTrainConfig::default();
            if let Some(s) = cli.seed {
                g.seed = s;
            }
            if let Some(s) = steps {
                g.generator_steps = *s;
            }
            if let Some(l) = lambda {
                g.lambda = *l;
            }
            let (_, m) = train_toy_gan(GaussianTarget { mean: *mean, std: *std }, &g)
                .map_err(|e| fail(Stage::Audio)(e.into()))?;
            println!(
                "target mean {mean} std {std}; generated mean {:.4} std {:.4}; last critic loss {:.4}, penalty {:.4}",
                m.sample_mean,
                m.sample_std,
                m.d_losses.last().copied().unwrap_or(f64::NAN),
                m.penalties.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::GradCheck => {
            let entries = harmonia_kernel::suite::layer_suite(cli.seed.unwrap_or(1)).map_err(|e| fail(Stage::Models)(e.into()))?;
            let mut failed = 0;
            for e in &entries {
                let r = &e.report;
                println!(
                    "{} {}/{}: max rel {:.2e}, max abs {:.2e}",
                    if r.passed { "ok  " } else { "FAIL" },
                    e.layer,
                    e.input,
                    r.max_rel_error,
                    r.max_abs_error
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                return Err(Failure {
                    code: 1,
                    message: format!("{failed} gradient checks failed"),
                });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
