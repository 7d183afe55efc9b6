//! Constrained autoregressive harmony generation and scoring.

use harmonia_kernel::{rng, sample_nucleus, sample_top_k, KernelRng, ParameterStore};

use super::gpt::{interleave, melody_position, GptInput, HarmonyGpt};
use super::rhythm::{RhythmNet, RhythmState};
use super::GenerationError;
use crate::chord::{expand_to_register, ChordFormer, ChordVocabulary, PitchClassSet, TheoryError};
use crate::chord::{oracle_pitch_classes, ChordSymbol};
use crate::error::Result;
use crate::event::{Event, GridDuration, NoteVocabulary, StandardizedScore, REST};
use crate::score::HarmonyNote;

/// Resolves chord text to pitch classes.
pub trait Theorist {
    fn pitch_classes(&self, chord: &str) -> Result<PitchClassSet>;
}

/// The rule-based interval table.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleTheorist;

impl Theorist for OracleTheorist {
    fn pitch_classes(&self, chord: &str) -> Result<PitchClassSet> {
        Ok(oracle_pitch_classes(&ChordSymbol::parse(chord)?)?)
    }
}

/// The trained Chord-Former. An empty prediction is an unresolvable chord.
pub struct ChordFormerTheorist<'a> {
    pub model: &'a ChordFormer,
    pub store: &'a ParameterStore,
}

impl Theorist for ChordFormerTheorist<'_> {
    fn pitch_classes(&self, chord: &str) -> Result<PitchClassSet> {
        let set = self.model.predict(self.store, chord)?;
        if set.is_empty() {
            return Err(TheoryError::Unresolved { chord: chord.to_string() }.into());
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampling {
    TopK(usize),
    Nucleus(f32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposerConfig {
    pub sampling: Sampling,
    /// Semitones above the melody note searched for chord tones.
    pub window: u8,
    pub seed: u64,
}

impl Default for ComposerConfig {
    fn default() -> Self {
        Self {
            sampling: Sampling::TopK(4),
            window: 12,
            seed: 1,
        }
    }
}

impl ComposerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GenerationError::InvalidConfig(m).into());
        match self.sampling {
            Sampling::TopK(0) => return bad("top-k needs k >= 1".into()),
            Sampling::Nucleus(p) if !(p > 0.0 && p <= 1.0) => return bad(format!("nucleus p={p} outside (0, 1]")),
            _ => {}
        }
        if self.window == 0 {
            return bad("window must be at least one semitone".into());
        }
        Ok(())
    }
}

pub enum HarmonyModel {
    /// Uniform prior; all musical choices come from the mask.
    Stub,
    Gpt { model: HarmonyGpt, store: ParameterStore },
}

pub enum RhythmModel {
    /// Harmony notes copy the melody duration.
    Echo,
    Net { net: RhythmNet, store: ParameterStore },
}

pub struct Composer {
    pub harmony: HarmonyModel,
    pub rhythm: RhythmModel,
    pub chord_vocab: ChordVocabulary,
}

/// A probability vector over the note vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    pub probs: Vec<f32>,
    pub masked: bool,
}

impl StepDistribution {
    pub fn uniform() -> Self {
        Self {
            probs: vec![1.0 / NoteVocabulary::SIZE as f32; NoteVocabulary::SIZE],
            masked: false,
        }
    }
}

/// Zeroes everything outside `allowed` and renormalizes. If the allowed
/// pitches carry no prior mass the result is uniform over them and the
/// second value is `true`.
pub fn mask_to_chord_tones(dist: &StepDistribution, allowed: &[u8]) -> Result<(StepDistribution, bool)> {
    if allowed.is_empty() {
        return Err(GenerationError::InvalidConfig("empty allowed set".into()).into());
    }
    let mass: f64 = allowed.iter().map(|&p| dist.probs[p as usize] as f64).sum();
    let mut probs = vec![0.0f32; dist.probs.len()];
    let fallback = !(mass > 0.0);
    for &p in allowed {
        probs[p as usize] = if fallback {
            (1.0 / allowed.len() as f64) as f32
        } else {
            (dist.probs[p as usize] as f64 / mass) as f32
        };
    }
    Ok((StepDistribution { probs, masked: true }, fallback))
}

/// Chord tones strictly above `melody`, within `window` semitones; widened
/// by an octave once if that is empty.
pub fn allowed_pitches(pcs: PitchClassSet, melody: u8, window: u8) -> Vec<u8> {
    let low = melody as u16 + 1;
    for w in [window as u16, window as u16 + 12] {
        let high = (melody as u16 + w).min(127);
        if low > high {
            break;
        }
        let set = expand_to_register(pcs, low as u8, high as u8).unwrap_or_default();
        if !set.is_empty() {
            return set;
        }
    }
    Vec::new()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub melody_pitch: u8,
    pub chord: Option<String>,
    pub chosen: u8,
    pub log_prob: f64,
    pub fallback: bool,
    /// Masked probability of each allowed pitch.
    pub allowed: Vec<(u8, f32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonyLine {
    pub notes: Vec<HarmonyNote>,
    pub steps: Vec<StepRecord>,
    pub fallbacks: usize,
}

impl HarmonyLine {
    pub fn log_prob(&self) -> f64 {
        self.steps.iter().map(|s| s.log_prob).sum()
    }

    /// Tab-separated per-step dump: step, melody, chord, chosen, log-prob,
    /// then `pitch:prob` pairs.
    pub fn dump_tsv(&self) -> String {
        let mut out = String::from("step\tmelody\tchord\tchosen\tlog_prob\tallowed\n");
        for s in &self.steps {
            let allowed: Vec<String> = s.allowed.iter().map(|(p, q)| format!("{p}:{q:.6}")).collect();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{:.9}\t{}\n",
                s.step,
                s.melody_pitch,
                s.chord.as_deref().unwrap_or(crate::chord::NO_CHORD),
                s.chosen,
                s.log_prob,
                allowed.join(" ")
            ));
        }
        out
    }
}

/// Room before the next melody onset, or the melody note's own length for
/// the last event.
fn capacity(melody: &[Event], t: usize) -> GridDuration {
    match melody.get(t + 1) {
        Some(next) => {
            let steps = ((next.onset - melody[t].onset) * 4).floor().to_integer();
            GridDuration::new(steps.max(1) as u32).expect("positive")
        }
        None => melody[t].duration,
    }
}

impl Composer {
    pub fn stub(chord_vocab: ChordVocabulary) -> Self {
        Self {
            harmony: HarmonyModel::Stub,
            rhythm: RhythmModel::Echo,
            chord_vocab,
        }
    }

    /// Conditioning token for a chord. Chords the model never saw are
    /// conditioned as no-chord; the mask still uses the real chord.
    fn chord_token(&self, chord: Option<&str>) -> usize {
        self.chord_vocab.token(chord).unwrap_or(0)
    }

    fn check_context(&self, events: usize) -> Result<()> {
        if let HarmonyModel::Gpt { model, .. } = &self.harmony {
            let needed = 2 * events + 1;
            if needed > model.config().context {
                return Err(GenerationError::ContextOverflow {
                    needed,
                    context: model.config().context,
                }
                .into());
            }
        }
        Ok(())
    }

    fn prior(&self, input: &GptInput) -> Result<StepDistribution> {
        match &self.harmony {
            HarmonyModel::Stub => Ok(StepDistribution::uniform()),
            HarmonyModel::Gpt { model, store } => Ok(StepDistribution {
                probs: model.next_distribution(store, input)?,
                masked: false,
            }),
        }
    }

    fn duration(&self, event: &Event, cap: GridDuration, state: &RhythmState) -> Result<(GridDuration, RhythmState)> {
        match &self.rhythm {
            RhythmModel::Echo => Ok((event.duration.min(cap), state.clone())),
            RhythmModel::Net { net, store } => net.predict(store, event, cap, state),
        }
    }

    fn initial_rhythm_state(&self) -> RhythmState {
        match &self.rhythm {
            RhythmModel::Echo => RhythmState { h: vec![], c: vec![] },
            RhythmModel::Net { net, .. } => net.initial_state(),
        }
    }

    /// Samples one harmony note per melody event. Rests and no-chord steps
    /// produce rests with log-probability zero.
    pub fn generate(&self, score: &StandardizedScore, theorist: &dyn Theorist, config: &ComposerConfig) -> Result<HarmonyLine> {
        config.validate()?;
        let melody = score.melody();
        self.check_context(melody.len())?;
        let mut r = rng::seeded(config.seed);
        let mut input = interleave(&[], false);
        let mut state = self.initial_rhythm_state();
        let mut line = HarmonyLine {
            notes: Vec::with_capacity(melody.len()),
            steps: Vec::new(),
            fallbacks: 0,
        };
        for (t, e) in melody.iter().enumerate() {
            let chord_tok = self.chord_token(e.chord.as_deref());
            let bucket = e.duration.bucket();
            input.push(e.pitch as usize, chord_tok, bucket);
            let (dur, next_state) = self.duration(e, capacity(melody, t), &state)?;
            state = next_state;
            let pitch = match (&e.chord, e.is_rest()) {
                (Some(chord), false) => {
                    let (dist, fallback, _) = self.step_distribution(&input, e, chord, theorist, config.window, t)?;
                    let tok = sample(&dist, config.sampling, &mut r)?;
                    let p = dist.probs[tok];
                    line.fallbacks += fallback as usize;
                    line.steps.push(StepRecord {
                        step: t,
                        melody_pitch: e.pitch,
                        chord: Some(chord.clone()),
                        chosen: tok as u8,
                        log_prob: (p as f64).ln(),
                        fallback,
                        allowed: allowed_probs(&dist),
                    });
                    tok as u8
                }
                _ => {
                    line.steps.push(StepRecord {
                        step: t,
                        melody_pitch: e.pitch,
                        chord: e.chord.clone(),
                        chosen: REST,
                        log_prob: 0.0,
                        fallback: false,
                        allowed: vec![],
                    });
                    REST
                }
            };
            let duration = if pitch == REST { e.duration.min(capacity(melody, t)) } else { dur };
            line.notes.push(HarmonyNote {
                pitch,
                duration,
                onset: e.onset,
            });
            input.push(pitch as usize, chord_tok, bucket);
        }
        Ok(line)
    }

    fn step_distribution(
        &self,
        input: &GptInput,
        e: &Event,
        chord: &str,
        theorist: &dyn Theorist,
        window: u8,
        t: usize,
    ) -> Result<(StepDistribution, bool, Vec<u8>)> {
        let pcs = theorist.pitch_classes(chord)?;
        let allowed = allowed_pitches(pcs, e.pitch, window);
        if allowed.is_empty() {
            return Err(GenerationError::NoAllowedPitch {
                step: t,
                melody_pitch: e.pitch,
                chord: chord.to_string(),
            }
            .into());
        }
        let prior = self.prior(input)?;
        let (dist, fallback) = mask_to_chord_tones(&prior, &allowed)?;
        Ok((dist, fallback, allowed))
    }

    /// Sum of masked log-probabilities of `harmony` under the same rules as
    /// generation. A step with zero probability gives negative infinity.
    pub fn sequence_log_prob(
        &self,
        score: &StandardizedScore,
        harmony: &[HarmonyNote],
        theorist: &dyn Theorist,
        config: &ComposerConfig,
    ) -> Result<f64> {
        let melody = score.melody();
        if harmony.len() != melody.len() {
            return Err(GenerationError::InvalidConfig("harmony is not aligned with the melody".into()).into());
        }
        self.check_context(melody.len())?;
        let mut steps = Vec::with_capacity(melody.len());
        for (e, h) in melody.iter().zip(harmony) {
            let chord_tok = self.chord_token(e.chord.as_deref());
            steps.push((e.pitch as usize, Some(h.pitch as usize), chord_tok, e.duration.bucket()));
        }
        let full = interleave(&steps, false);
        let priors: Option<Vec<Vec<f32>>> = match &self.harmony {
            HarmonyModel::Stub => None,
            HarmonyModel::Gpt { model, store } => {
                let positions: Vec<usize> = (0..melody.len()).map(melody_position).collect();
                Some(model.distributions_at(store, &full, &positions)?)
            }
        };
        let mut total = 0.0f64;
        for (t, (e, h)) in melody.iter().zip(harmony).enumerate() {
            let Some(chord) = e.chord.as_deref().filter(|_| !e.is_rest()) else {
                if h.pitch != REST {
                    return Ok(f64::NEG_INFINITY);
                }
                continue;
            };
            let pcs = theorist.pitch_classes(chord)?;
            let allowed = allowed_pitches(pcs, e.pitch, config.window);
            if allowed.is_empty() {
                return Err(GenerationError::NoAllowedPitch {
                    step: t,
                    melody_pitch: e.pitch,
                    chord: chord.to_string(),
                }
                .into());
            }
            let prior = match &priors {
                None => StepDistribution::uniform(),
                Some(p) => StepDistribution {
                    probs: p[t].clone(),
                    masked: false,
                },
            };
            let (dist, _) = mask_to_chord_tones(&prior, &allowed)?;
            let p = dist.probs[h.pitch as usize];
            if p == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += (p as f64).ln();
        }
        Ok(total)
    }
}

fn allowed_probs(dist: &StepDistribution) -> Vec<(u8, f32)> {
    dist.probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, &p)| (i as u8, p))
        .collect()
}

fn sample(dist: &StepDistribution, sampling: Sampling, r: &mut KernelRng) -> Result<usize> {
    Ok(match sampling {
        Sampling::TopK(k) => sample_top_k(&dist.probs, k, r)?,
        Sampling::Nucleus(p) => sample_nucleus(&dist.probs, p, r)?,
    })
}

