use harmonia_core::conductor::synth::{normalize, render_raw};
use harmonia_core::conductor::*;
use harmonia_core::event::{Beats, Event, GridDuration, StandardizedScore, REST};
use harmonia_core::score::{HarmonizedScore, HarmonyNote};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

fn b(n: i64, d: i64) -> Beats {
    Beats::new(n, d)
}

/// `(pitch, sixteenths)` voices laid end to end; harmony copies the melody
/// onsets.
fn harmonized(melody: &[(u8, u32)], harmony: &[(u8, u32)]) -> HarmonizedScore {
    let mut onset = b(0, 1);
    let mut events = Vec::new();
    let mut notes = Vec::new();
    for (&(p, d), &(hp, hd)) in melody.iter().zip(harmony) {
        let d = GridDuration::new(d).unwrap();
        events.push(Event::new(p, d, onset, None).unwrap());
        notes.push(HarmonyNote {
            pitch: hp,
            duration: GridDuration::new(hd).unwrap(),
            onset,
        });
        onset += d.beats();
    }
    HarmonizedScore::new(StandardizedScore::with_chords(events, vec![]).unwrap(), notes).unwrap()
}

#[test]
fn a4_one_second_peaks_at_440() {
    // Half note at 120 BPM is one second.
    let s = harmonized(&[(69, 8)], &[(REST, 8)]);
    let w = render_additive(&s, &SynthVoiceConfig::default(), 44100).unwrap();
    assert_eq!(w.samples.len(), 44100);
    let mut buf: Vec<Complex<f64>> = w.samples.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    let peak = (1..buf.len() / 2).max_by(|&i, &j| buf[i].norm().total_cmp(&buf[j].norm())).unwrap();
    let hz = peak as f64 * 44100.0 / buf.len() as f64;
    assert!((hz - 440.0).abs() <= 1.0, "{hz}");
}

#[test]
fn spectral_peak_tracks_pitch() {
    for pitch in [48u8, 60, 64, 81, 93] {
        let s = harmonized(&[(pitch, 8)], &[(REST, 8)]);
        let w = render_additive(&s, &SynthVoiceConfig::default(), 22050).unwrap();
        let mut buf: Vec<Complex<f64>> = w.samples.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let peak = (1..buf.len() / 2).max_by(|&i, &j| buf[i].norm().total_cmp(&buf[j].norm())).unwrap();
        let hz = peak as f64 * 22050.0 / buf.len() as f64;
        assert!((hz - synth::midi_frequency(pitch)).abs() <= 1.0, "{pitch}: {hz}");
    }
}

#[test]
fn rests_render_silence_with_exact_length() {
    let s = harmonized(&[(REST, 3), (REST, 2)], &[(REST, 3), (REST, 2)]);
    let w = render_additive(&s, &SynthVoiceConfig::default(), 22050).unwrap();
    // 5/4 beats at half a second per beat.
    assert_eq!(w.samples.len(), (1.25f64 * 0.5 * 22050.0).ceil() as usize);
    assert!(w.samples.iter().all(|&v| v == 0.0));
}

#[test]
fn voices_mix_linearly() {
    let cfg = SynthVoiceConfig::default();
    let both = harmonized(&[(60, 4), (62, 4)], &[(64, 4), (67, 2)]);
    let melody = harmonized(&[(60, 4), (62, 4)], &[(REST, 4), (REST, 2)]);
    let harmony = harmonized(&[(REST, 4), (REST, 4)], &[(64, 4), (67, 2)]);
    let (a, m, h) = (
        render_raw(&both, &cfg, 44100).unwrap(),
        render_raw(&melody, &cfg, 44100).unwrap(),
        render_raw(&harmony, &cfg, 44100).unwrap(),
    );
    let sum: Vec<f64> = m.iter().zip(&h).map(|(x, y)| x + y).collect();
    assert_eq!(a, sum);
    assert_eq!(render_additive(&both, &cfg, 44100).unwrap().samples, normalize(&sum));
}

#[test]
fn loud_mix_is_normalized() {
    let cfg = SynthVoiceConfig {
        master_gain: 2.0,
        ..Default::default()
    };
    let s = harmonized(&[(60, 8)], &[(67, 8)]);
    let w = render_additive(&s, &cfg, 22050).unwrap();
    let peak = w.samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    assert!((peak - 0.9).abs() < 1e-6, "{peak}");
    let quiet = render_additive(&s, &SynthVoiceConfig::default(), 22050).unwrap();
    assert!(quiet.samples.iter().all(|v| v.abs() <= 1.0));
}

#[test]
fn render_errors() {
    let s = harmonized(&[(60, 4)], &[(REST, 4)]);
    assert!(matches!(
        render_additive(&s, &SynthVoiceConfig::default(), 48000),
        Err(ConductorError::UnsupportedRate(48000))
    ));
    let empty = HarmonizedScore::new(StandardizedScore::with_chords(vec![], vec![]).unwrap(), vec![]).unwrap();
    assert!(matches!(
        render_additive(&empty, &SynthVoiceConfig::default(), 44100),
        Err(ConductorError::EmptyScore)
    ));
    let bad = SynthVoiceConfig {
        sustain: 1.5,
        ..Default::default()
    };
    assert!(bad.validate().is_err());
    let none = SynthVoiceConfig {
        partials: vec![],
        ..Default::default()
    };
    assert!(none.validate().is_err());
}

#[test]
fn voice_config_from_text() {
    let text = "# voice\npartials = 1, 0.3\nattack = 0.02\ntempo_bpm = 90\n";
    let c = SynthVoiceConfig::from_kv(text).unwrap();
    assert_eq!(c.partials, vec![1.0, 0.3]);
    assert_eq!((c.attack, c.tempo_bpm, c.release), (0.02, 90, 0.05));
    assert!(SynthVoiceConfig::from_kv("volume = 3").is_err());
    assert!(SynthVoiceConfig::from_kv("attack 3").is_err());
    assert!(SynthVoiceConfig::from_kv("attack = x").is_err());
}

#[test]
fn wav_layout_and_quantization() {
    let w = Waveform {
        rate: 44100,
        samples: vec![0.0; 44100],
    };
    let bytes = wav_bytes(&w).unwrap();
    assert_eq!(bytes.len(), 44 + 88200);
    let mut header = Vec::new();
    header.extend_from_slice(b"RIFF");
    header.extend_from_slice(&(36u32 + 88200).to_le_bytes());
    header.extend_from_slice(b"WAVEfmt ");
    header.extend_from_slice(&16u32.to_le_bytes());
    header.extend_from_slice(&1u16.to_le_bytes());
    header.extend_from_slice(&1u16.to_le_bytes());
    header.extend_from_slice(&44100u32.to_le_bytes());
    header.extend_from_slice(&88200u32.to_le_bytes());
    header.extend_from_slice(&2u16.to_le_bytes());
    header.extend_from_slice(&16u16.to_le_bytes());
    header.extend_from_slice(b"data");
    header.extend_from_slice(&88200u32.to_le_bytes());
    assert_eq!(&bytes[..44], &header[..]);

    assert_eq!(wav::quantize(1.0), 32767);
    assert_eq!(wav::quantize(-1.0), -32767);
    assert_eq!(wav::quantize(0.5), 16384);
    assert_eq!(wav::quantize(-0.5), -16384);
    assert_eq!(wav::quantize(1.5), 32767);
}

#[test]
fn wav_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.wav");
    let s = harmonized(&[(60, 4), (64, 2)], &[(67, 4), (REST, 2)]);
    let w = render_additive(&s, &SynthVoiceConfig::default(), 22050).unwrap();
    write_wav(&w, &path).unwrap();
    let (rate, pcm) = read_wav(&path).unwrap();
    assert_eq!(rate, 22050);
    assert_eq!(pcm, w.samples.iter().map(|&v| wav::quantize(v)).collect::<Vec<_>>());
}

#[test]
fn golden_pcm_values() {
    let values = [0.0f32, 1.0, -1.0, 0.5, -0.5, 0.25, -0.75, 1e-5, -1e-5, 0.999];
    let w = Waveform {
        rate: 44100,
        samples: values.to_vec(),
    };
    let golden = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/pcm_values.wav")).unwrap();
    assert_eq!(wav_bytes(&w).unwrap(), golden);
}

#[test]
fn golden_short_score() {
    let s = harmonized(&[(69, 4), (REST, 2), (76, 2)], &[(73, 4), (REST, 2), (81, 1)]);
    let w = render_additive(&s, &SynthVoiceConfig::default(), 22050).unwrap();
    let golden = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/short_score.wav")).unwrap();
    let ours = wav_bytes(&w).unwrap();
    assert_eq!(ours.len(), golden.len());
    let diffs = ours.iter().zip(&golden).filter(|(a, b)| a != b).count();
    assert_eq!(diffs, 0);
}
