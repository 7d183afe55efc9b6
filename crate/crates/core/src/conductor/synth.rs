//! Deterministic additive synthesis.

use std::f64::consts::PI;

use num_rational::Rational64;

use super::ConductorError;
use crate::event::{Beats, REST};
use crate::score::HarmonizedScore;

pub const SUPPORTED_RATES: [u32; 2] = [22050, 44100];
/// Peak level after normalization.
pub const NORMALIZED_PEAK: f64 = 0.9;

/// Mono samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub rate: u32,
    pub samples: Vec<f32>,
}

impl Waveform {
    pub fn seconds(&self) -> f64 {
        self.samples.len() as f64 / self.rate as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVoiceConfig {
    /// Amplitude of harmonic k+1.
    pub partials: Vec<f64>,
    pub attack: f64,
    pub decay: f64,
    pub sustain: f64,
    pub release: f64,
    pub master_gain: f64,
    pub melody_gain: f64,
    pub harmony_gain: f64,
    pub tempo_bpm: u32,
}

impl Default for SynthVoiceConfig {
    fn default() -> Self {
        Self {
            partials: vec![1.0, 0.5, 0.25, 0.125],
            attack: 0.01,
            decay: 0.05,
            sustain: 0.8,
            release: 0.05,
            master_gain: 0.25,
            melody_gain: 1.0,
            harmony_gain: 0.7,
            tempo_bpm: 120,
        }
    }
}

impl SynthVoiceConfig {
    pub fn validate(&self) -> Result<(), ConductorError> {
        let bad = |m: &str| Err(ConductorError::InvalidVoice(m.to_string()));
        if self.partials.is_empty() {
            return bad("at least one partial is required");
        }
        if self.partials.iter().any(|a| !a.is_finite()) {
            return bad("partial amplitudes must be finite");
        }
        let times = [self.attack, self.decay, self.release];
        if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("envelope times must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.sustain) {
            return bad("sustain level must lie in [0, 1]");
        }
        let gains = [self.master_gain, self.melody_gain, self.harmony_gain];
        if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return bad("gains must be finite and non-negative");
        }
        if self.tempo_bpm == 0 {
            return bad("tempo must be positive");
        }
        Ok(())
    }

    /// Parses `key = value` lines; unknown keys are errors and missing keys
    /// keep their defaults.
    pub fn from_kv(text: &str) -> Result<Self, ConductorError> {
        let mut c = Self::default();
        for (line, key, value) in crate::config::parse_kv(text)? {
            if !c.set(line, &key, &value)? {
                return Err(ConductorError::InvalidVoice(format!("line {line}: unknown key `{key}`")));
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Applies one setting. Returns `false` for keys that are not voice
    /// settings.
    pub fn set(&mut self, line: usize, key: &str, value: &str) -> Result<bool, ConductorError> {
        let num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| ConductorError::InvalidVoice(format!("line {line}: `{v}` is not a number")))
        };
        match key {
            "partials" => self.partials = value.split(',').map(|v| num(v.trim())).collect::<Result<_, _>>()?,
            "attack" => self.attack = num(value)?,
            "decay" => self.decay = num(value)?,
            "sustain" => self.sustain = num(value)?,
            "release" => self.release = num(value)?,
            "master_gain" => self.master_gain = num(value)?,
            "melody_gain" => self.melody_gain = num(value)?,
            "harmony_gain" => self.harmony_gain = num(value)?,
            "tempo_bpm" => {
                self.tempo_bpm = value
                    .parse()
                    .map_err(|_| ConductorError::InvalidVoice(format!("line {line}: bad tempo `{value}`")))?
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Sample index of a position in beats, rounded down.
    pub fn sample_at(&self, beats: Beats, rate: u32) -> usize {
        (beats * Rational64::from_integer(60 * rate as i64) / Rational64::from_integer(self.tempo_bpm as i64))
            .floor()
            .to_integer() as usize
    }

    /// Total samples for a score of `beats` length, rounded up.
    pub fn length_samples(&self, beats: Beats, rate: u32) -> usize {
        (beats * Rational64::from_integer(60 * rate as i64) / Rational64::from_integer(self.tempo_bpm as i64))
            .ceil()
            .to_integer() as usize
    }

    /// Envelope level `t` seconds into a note lasting `length` seconds. The
    /// release ends with the note.
    pub fn envelope(&self, t: f64, length: f64) -> f64 {
        let gate = (length - self.release).max(0.0);
        let held = |t: f64| {
            if t < self.attack {
                t / self.attack
            } else if t < self.attack + self.decay {
                1.0 - (1.0 - self.sustain) * (t - self.attack) / self.decay
            } else {
                self.sustain
            }
        };
        if t < gate {
            held(t)
        } else if self.release == 0.0 {
            0.0
        } else {
            held(gate) * (1.0 - (t - gate) / self.release).max(0.0)
        }
    }
}

pub fn midi_frequency(pitch: u8) -> f64 {
    440.0 * 2f64.powf((pitch as f64 - 69.0) / 12.0)
}

/// Adds one note into `out`, which starts at sample 0 of the score.
pub fn render_note(out: &mut [f64], pitch: u8, start: usize, end: usize, gain: f64, config: &SynthVoiceConfig, rate: u32) {
    let freq = midi_frequency(pitch);
    let nyquist = rate as f64 / 2.0;
    let length = (end - start) as f64 / rate as f64;
    let end = end.min(out.len());
    for (i, slot) in out[start.min(end)..end].iter_mut().enumerate() {
        let t = i as f64 / rate as f64;
        let mut v = 0.0;
        for (k, amp) in config.partials.iter().enumerate() {
            let f = freq * (k + 1) as f64;
            if f >= nyquist {
                break;
            }
            v += amp * (2.0 * PI * f * t).sin();
        }
        *slot += gain * config.master_gain * config.envelope(t, length) * v;
    }
}

/// Melody then harmony notes summed without normalization.
pub fn render_raw(score: &HarmonizedScore, config: &SynthVoiceConfig, rate: u32) -> Result<Vec<f64>, ConductorError> {
    config.validate()?;
    if !SUPPORTED_RATES.contains(&rate) {
        return Err(ConductorError::UnsupportedRate(rate));
    }
    if score.score().is_empty() {
        return Err(ConductorError::EmptyScore);
    }
    let mut out = vec![0.0f64; config.length_samples(score.length_beats(), rate)];
    let melody = score.score().melody().iter().map(|e| (e.pitch, e.onset, e.end(), config.melody_gain));
    let harmony = score
        .harmony()
        .iter()
        .map(|h| (h.pitch, h.onset, h.onset + h.duration.beats(), config.harmony_gain));
    for (pitch, onset, end, gain) in melody.chain(harmony) {
        if pitch == REST {
            continue;
        }
        let (s, e) = (config.sample_at(onset, rate), config.sample_at(end, rate));
        render_note(&mut out, pitch, s, e, gain, config, rate);
    }
    Ok(out)
}

/// Scales to [`NORMALIZED_PEAK`] if any sample exceeds full scale.
pub fn normalize(samples: &[f64]) -> Vec<f32> {
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if peak > 1.0 { NORMALIZED_PEAK / peak } else { 1.0 };
    samples.iter().map(|v| (v * scale).clamp(-1.0, 1.0) as f32).collect()
}

pub fn render_additive(score: &HarmonizedScore, config: &SynthVoiceConfig, rate: u32) -> Result<Waveform, ConductorError> {
    let raw = render_raw(score, config, rate)?;
    Ok(Waveform {
        rate,
        samples: normalize(&raw),
    })
}
