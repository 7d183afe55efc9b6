//! Training corpora built from scores with manufactured harmony targets.

use harmonia_kernel::{rng, KernelRng};
use rand::Rng;

use super::decode::{allowed_pitches, Theorist};
use super::gpt::{interleave, melody_position, GptExample};
use super::rhythm::{rhythm_features, RhythmSequence};
use super::GenerationError;
use crate::chord::ChordVocabulary;
use crate::error::Result;
use crate::event::{Beats, ChordChange, Event, GridDuration, StandardizedScore, REST};
use crate::score::{HarmonizedScore, HarmonyNote};

/// Nearest chord tone above each melody note, held for the melody note's
/// duration. Rests and no-chord steps get rests.
pub fn nearest_tone_harmony(score: &StandardizedScore, theorist: &dyn Theorist, window: u8) -> Result<Vec<HarmonyNote>> {
    let mut out = Vec::with_capacity(score.len());
    for (t, e) in score.melody().iter().enumerate() {
        let pitch = match (&e.chord, e.is_rest()) {
            (Some(chord), false) => {
                let allowed = allowed_pitches(theorist.pitch_classes(chord)?, e.pitch, window);
                *allowed.first().ok_or_else(|| GenerationError::NoAllowedPitch {
                    step: t,
                    melody_pitch: e.pitch,
                    chord: chord.clone(),
                })?
            }
            _ => REST,
        };
        out.push(HarmonyNote {
            pitch,
            duration: e.duration,
            onset: e.onset,
        });
    }
    Ok(out)
}

pub fn harmonize_with_rule(scores: &[StandardizedScore], theorist: &dyn Theorist, window: u8) -> Result<Vec<HarmonizedScore>> {
    scores
        .iter()
        .map(|s| Ok(HarmonizedScore::new(s.clone(), nearest_tone_harmony(s, theorist, window)?)?))
        .collect()
}

/// Interleaved sequence with end marker; harmony positions are the
/// fine-tuning targets.
pub fn gpt_example(score: &HarmonizedScore, vocab: &ChordVocabulary) -> Result<GptExample> {
    let melody = score.score().melody();
    let mut steps = Vec::with_capacity(melody.len());
    for (e, h) in melody.iter().zip(score.harmony()) {
        let chord = vocab.token(e.chord.as_deref())?;
        steps.push((e.pitch as usize, Some(h.pitch as usize), chord, e.duration.bucket()));
    }
    let input = interleave(&steps, true);
    let mut harmony_targets = vec![None; input.len()];
    for (t, h) in score.harmony().iter().enumerate() {
        harmony_targets[melody_position(t)] = Some(h.pitch as usize);
    }
    Ok(GptExample { input, harmony_targets })
}

pub fn gpt_examples(scores: &[HarmonizedScore], vocab: &ChordVocabulary) -> Result<Vec<GptExample>> {
    scores.iter().map(|s| gpt_example(s, vocab)).collect()
}

/// Melody rhythm features paired with harmony durations.
pub fn rhythm_sequence(score: &HarmonizedScore) -> RhythmSequence {
    RhythmSequence {
        features: score.score().melody().iter().map(rhythm_features).collect(),
        targets: score.harmony().iter().map(|h| h.duration.whole_notes_f32()).collect(),
    }
}

/// Targets equal to the melody's own durations.
pub fn echo_rhythm_corpus(scores: &[StandardizedScore]) -> Vec<RhythmSequence> {
    scores
        .iter()
        .map(|s| RhythmSequence {
            features: s.melody().iter().map(rhythm_features).collect(),
            targets: s.melody().iter().map(|e| e.duration.whole_notes_f32()).collect(),
        })
        .collect()
}

const DURATIONS: [u32; 6] = [2, 4, 4, 6, 8, 16];

/// Contiguous random melody over `chords`, with occasional rests and a
/// chord change every one to three events.
pub fn random_score(r: &mut KernelRng, events: usize, chords: &[&str], rest_rate: f64) -> StandardizedScore {
    let mut melody = Vec::with_capacity(events);
    let mut track: Vec<ChordChange> = Vec::new();
    let mut onset = Beats::from_integer(0);
    let mut until_change = 0;
    for _ in 0..events {
        if until_change == 0 {
            let chord = chords[r.random_range(0..chords.len())].to_string();
            if track.last().map(|c| c.chord.as_deref()) != Some(Some(chord.as_str())) {
                track.push(ChordChange { onset, chord: Some(chord) });
            }
            until_change = r.random_range(1..=3);
        }
        until_change -= 1;
        let pitch = if r.random_bool(rest_rate) { REST } else { r.random_range(55..=84) };
        let duration = GridDuration::new(DURATIONS[r.random_range(0..DURATIONS.len())]).expect("positive");
        melody.push(Event::new(pitch, duration, onset, None).expect("valid event"));
        onset += duration.beats();
    }
    StandardizedScore::with_chords(melody, track).expect("generated in order")
}

/// Four short scores used for memorization training.
pub fn toy_corpus(seed: u64) -> Vec<StandardizedScore> {
    const PROGRESSIONS: [&[&str]; 4] = [
        &["C", "Am7", "Dm7", "G7"],
        &["F", "A#maj7", "Gm7", "C7"],
        &["Em", "Am", "B7", "Em7"],
        &["D", "Bm7", "Em7", "A7"],
    ];
    let mut r = rng::seeded(seed);
    PROGRESSIONS.iter().map(|p| random_score(&mut r, 8, p, 0.1)).collect()
}
