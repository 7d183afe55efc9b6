use harmonia_core::chord::{ChordCorpus, ChordVocabulary};
use harmonia_core::composer::corpus::{echo_rhythm_corpus, gpt_examples, harmonize_with_rule, random_score, toy_corpus};
use harmonia_core::composer::*;
use harmonia_core::event::{transpose, Beats, ChordChange, Event, GridDuration, NoteVocabulary, StandardizedScore, REST};
use harmonia_core::Error;
use harmonia_kernel::{rng, ParameterStore};
use proptest::prelude::*;
use rand::Rng;

fn vocab() -> ChordVocabulary {
    ChordVocabulary::from_symbols(ChordCorpus::build().unwrap().symbols())
}

fn score(notes: &[(u8, u32)], chord: &str) -> StandardizedScore {
    let mut onset = Beats::from_integer(0);
    let mut melody = Vec::new();
    for &(p, d) in notes {
        let d = GridDuration::new(d).unwrap();
        melody.push(Event::new(p, d, onset, None).unwrap());
        onset += d.beats();
    }
    StandardizedScore::with_chords(
        melody,
        vec![ChordChange {
            onset: Beats::from_integer(0),
            chord: Some(chord.into()),
        }],
    )
    .unwrap()
}

fn gpt_with_random_head(vocab: &ChordVocabulary, seed: u64) -> HarmonyModel {
    let mut r = rng::seeded(seed);
    let mut store = ParameterStore::new();
    let config = GptConfig {
        layers: 2,
        heads: 2,
        width: 16,
        ff_width: 32,
        context: 64,
        chord_vocab: vocab.len(),
    };
    let model = HarmonyGpt::new(&mut store, config, &mut r).unwrap();
    let id = store.id("gpt.head.weight").unwrap();
    for v in store.value_mut(id).data_mut() {
        *v = rng::normal(&mut r, 0.0, 1.0);
    }
    HarmonyModel::Gpt { model, store }
}

#[test]
fn uniform_prior_over_triad() {
    let (d, fallback) = mask_to_chord_tones(&StepDistribution::uniform(), &[60, 64, 67]).unwrap();
    assert!(!fallback && d.masked);
    for p in [60, 64, 67] {
        assert!((d.probs[p] - 1.0 / 3.0).abs() < 1e-7);
    }
    assert_eq!(d.probs.iter().filter(|&&p| p > 0.0).count(), 3);
}

#[test]
fn full_range_only_drops_special_tokens() {
    let all: Vec<u8> = (0..128).collect();
    let mut prior = StepDistribution::uniform();
    prior.probs[5] *= 3.0;
    let s: f32 = prior.probs.iter().sum();
    prior.probs.iter_mut().for_each(|p| *p /= s);
    let (d, _) = mask_to_chord_tones(&prior, &all).unwrap();
    let mass: f32 = prior.probs[..128].iter().sum();
    for p in 0..128 {
        assert!((d.probs[p] - prior.probs[p] / mass).abs() < 1e-7);
    }
    assert!(d.probs[128..].iter().all(|&p| p == 0.0));
}

#[test]
fn zero_mass_falls_back_to_uniform() {
    let mut prior = StepDistribution::uniform();
    prior.probs.iter_mut().for_each(|p| *p = 0.0);
    prior.probs[NoteVocabulary::EOS] = 1.0;
    let (d, fallback) = mask_to_chord_tones(&prior, &[70, 74]).unwrap();
    assert!(fallback);
    assert_eq!((d.probs[70], d.probs[74]), (0.5, 0.5));
    assert!(mask_to_chord_tones(&prior, &[]).is_err());
}

#[test]
fn cmaj7_above_e4() {
    let pcs = OracleTheorist.pitch_classes("Cmaj7").unwrap();
    assert_eq!(allowed_pitches(pcs, 64, 12), vec![67, 71, 72, 76]);
    let s = score(&[(64, 4)], "Cmaj7");
    let composer = Composer::stub(vocab());
    for seed in 0..20 {
        let cfg = ComposerConfig {
            seed,
            ..Default::default()
        };
        let line = composer.generate(&s, &OracleTheorist, &cfg).unwrap();
        assert!([67, 71, 72, 76].contains(&line.notes[0].pitch));
        assert!((line.log_prob() - 0.25f64.ln()).abs() < 1e-6);
    }
}

#[test]
fn window_widens_once_then_errors() {
    // C major has no tone in 61..=61; the octave-widened window finds 64.
    let pcs = OracleTheorist.pitch_classes("C").unwrap();
    assert_eq!(allowed_pitches(pcs, 60, 1), vec![64, 67, 72]);
    let c_sharp = OracleTheorist.pitch_classes("C#").unwrap();
    assert!(allowed_pitches(c_sharp, 125, 12).is_empty());
    let s = score(&[(125, 4)], "C#");
    let err = Composer::stub(vocab()).generate(&s, &OracleTheorist, &ComposerConfig::default());
    assert!(matches!(err, Err(Error::Generation(GenerationError::NoAllowedPitch { step: 0, .. }))));
}

#[test]
fn rests_and_no_chord_give_rests() {
    let mut s = score(&[(60, 4), (REST, 4), (62, 4)], "C");
    let composer = Composer::stub(vocab());
    let line = composer.generate(&s, &OracleTheorist, &ComposerConfig::default()).unwrap();
    assert_eq!(line.notes[1].pitch, REST);
    assert_eq!(line.steps[1].log_prob, 0.0);
    assert_eq!(line.notes.iter().map(|n| n.onset).collect::<Vec<_>>(), s.melody().iter().map(|e| e.onset).collect::<Vec<_>>());

    let (melody, _) = s.clone().into_parts();
    s = StandardizedScore::with_chords(
        melody,
        vec![ChordChange {
            onset: Beats::from_integer(0),
            chord: None,
        }],
    )
    .unwrap();
    let line = composer.generate(&s, &OracleTheorist, &ComposerConfig::default()).unwrap();
    assert!(line.notes.iter().all(|n| n.pitch == REST));
    assert_eq!(line.log_prob(), 0.0);
}

#[test]
fn unknown_chord_aborts_with_text() {
    let s = score(&[(60, 4)], "Cdim9");
    let err = Composer::stub(vocab()).generate(&s, &OracleTheorist, &ComposerConfig::default()).unwrap_err();
    assert!(err.to_string().contains("Cdim9"), "{err}");
}

#[test]
fn config_validation() {
    for sampling in [Sampling::TopK(0), Sampling::Nucleus(0.0), Sampling::Nucleus(1.5)] {
        let cfg = ComposerConfig {
            sampling,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
    let cfg = ComposerConfig {
        window: 0,
        ..Default::default()
    };
    assert!(cfg.validate().is_err());
    assert!(ComposerConfig::default().validate().is_ok());
}

#[test]
fn uniform_three_steps_of_four() {
    // Each melody note sees exactly four tones of Cmaj7 within an octave.
    let s = score(&[(64, 4), (64, 4), (64, 4)], "Cmaj7");
    let h = Composer::stub(vocab()).generate(&s, &OracleTheorist, &ComposerConfig::default()).unwrap();
    let lp = Composer::stub(vocab())
        .sequence_log_prob(&s, &h.notes, &OracleTheorist, &ComposerConfig::default())
        .unwrap();
    assert!((lp - 3.0 * 0.25f64.ln()).abs() < 1e-9);
}

#[test]
fn off_constraint_harmony_is_negative_infinity() {
    let s = score(&[(64, 4)], "Cmaj7");
    let composer = Composer::stub(vocab());
    let mut h = composer.generate(&s, &OracleTheorist, &ComposerConfig::default()).unwrap().notes;
    h[0].pitch = 68;
    let lp = composer.sequence_log_prob(&s, &h, &OracleTheorist, &ComposerConfig::default()).unwrap();
    assert_eq!(lp, f64::NEG_INFINITY);
}

#[test]
fn generation_is_deterministic_and_factorizes() {
    let v = vocab();
    let composer = Composer {
        harmony: gpt_with_random_head(&v, 3),
        rhythm: RhythmModel::Echo,
        chord_vocab: v,
    };
    let mut r = rng::seeded(9);
    for seed in 0..5 {
        let s = random_score(&mut r, 12, &["C", "Am7", "F#m7b5", "B7#9"], 0.15);
        let cfg = ComposerConfig {
            seed,
            sampling: Sampling::Nucleus(0.9),
            ..Default::default()
        };
        let a = composer.generate(&s, &OracleTheorist, &cfg).unwrap();
        let b = composer.generate(&s, &OracleTheorist, &cfg).unwrap();
        assert_eq!(a, b);
        let lp = composer.sequence_log_prob(&s, &a.notes, &OracleTheorist, &cfg).unwrap();
        assert!((lp - a.log_prob()).abs() < 1e-6, "{lp} vs {}", a.log_prob());
    }
}

#[test]
fn context_overflow_is_an_error() {
    let v = vocab();
    let composer = Composer {
        harmony: gpt_with_random_head(&v, 1),
        rhythm: RhythmModel::Echo,
        chord_vocab: v,
    };
    let s = score(&vec![(60, 1); 32], "C");
    let err = composer.generate(&s, &OracleTheorist, &ComposerConfig::default()).unwrap_err();
    assert!(matches!(err, Error::Generation(GenerationError::ContextOverflow { needed: 65, context: 64 })));
}

#[test]
fn untrained_gpt_is_uniform() {
    let v = vocab();
    let mut r = rng::seeded(0);
    let mut store = ParameterStore::new();
    let model = HarmonyGpt::new(&mut store, GptConfig::toy(v.len()), &mut r).unwrap();
    let input = gpt::interleave(&[(60, Some(64), 3, 3), (62, None, 3, 3)], false);
    let p = model.next_distribution(&store, &input).unwrap();
    let entropy: f32 = -p.iter().map(|&q| q * q.ln()).sum::<f32>();
    assert!((entropy - (NoteVocabulary::SIZE as f32).ln()).abs() < 1e-5);
}

#[test]
fn future_melody_does_not_leak() {
    let v = vocab();
    let HarmonyModel::Gpt { model, store } = gpt_with_random_head(&v, 5) else { unreachable!() };
    let a = gpt::interleave(&[(60, Some(64), 3, 3), (62, Some(67), 4, 7), (65, None, 4, 2)], false);
    let mut b = a.clone();
    b.tokens[5] = 71;
    b.chords[5] = 9;
    let pa = model.distributions_at(&store, &a, &[1, 3]).unwrap();
    let pb = model.distributions_at(&store, &b, &[1, 3]).unwrap();
    assert_eq!(pa, pb);
    let last_a = model.distributions_at(&store, &a, &[5]).unwrap();
    let last_b = model.distributions_at(&store, &b, &[5]).unwrap();
    assert_ne!(last_a, last_b);
}

#[test]
fn first_pretrain_loss_is_log_vocab_and_reproducible() {
    let v = vocab();
    let scores = toy_corpus(3);
    let ex = gpt_examples(&harmonize_with_rule(&scores, &OracleTheorist, 12).unwrap(), &v).unwrap();
    let cfg = GptTrainConfig {
        pretrain_steps: 3,
        finetune_steps: 3,
        ..Default::default()
    };
    let config = GptConfig {
        layers: 1,
        heads: 2,
        width: 32,
        ff_width: 64,
        context: 64,
        chord_vocab: v.len(),
    };
    let run = || {
        let mut store = ParameterStore::new();
        let model = HarmonyGpt::new(&mut store, config, &mut rng::seeded(cfg.seed)).unwrap();
        train_harmony_gpt(&model, &mut store, &ex, &cfg).unwrap()
    };
    let a = run();
    let ln_v = (NoteVocabulary::SIZE as f32).ln();
    assert!((a.pretrain_losses[0] - ln_v).abs() < 0.05 * ln_v);
    assert_eq!(a, run());
}

#[test]
fn snap_examples() {
    let cap = GridDuration::new(16).unwrap();
    assert_eq!(snap_and_clamp(0.26, cap).sixteenths(), 4);
    assert_eq!(snap_and_clamp(0.26, GridDuration::new(2).unwrap()).sixteenths(), 2);
    assert_eq!(snap_and_clamp(-1.0, cap).sixteenths(), 1);
}

#[test]
fn zero_weight_rhythm_net_is_constant() {
    let mut store = ParameterStore::new();
    let net = RhythmNet::new(&mut store, 8, &mut rng::seeded(0)).unwrap();
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        store.value_mut(id).data_mut().fill(0.0);
    }
    let mut r = rng::seeded(2);
    let s = random_score(&mut r, 10, &["C"], 0.0);
    let mut state = net.initial_state();
    let mut outs = Vec::new();
    for e in s.melody() {
        let (y, next) = net.step(&store, &rhythm::rhythm_features(e), &state).unwrap();
        outs.push(y);
        state = next;
    }
    assert!(outs.iter().all(|&y| y == outs[0]));
}

#[test]
fn rhythm_net_learns_echo_and_constant() {
    let scores = toy_corpus(3);
    let echo = echo_rhythm_corpus(&scores);
    let cfg = RhythmTrainConfig::default();
    let (store, net, losses) = train_rhythm_net(&echo, &cfg).unwrap();
    assert!(evaluate_rhythm_net(&store, &net, &echo).unwrap() < 1e-3);
    assert_eq!(losses, train_rhythm_net(&echo, &cfg).unwrap().2);
    for s in &scores {
        let mut state = net.initial_state();
        for e in s.melody() {
            let (d, next) = net.predict(&store, e, GridDuration::new(64).unwrap(), &state).unwrap();
            assert!(d.sixteenths().abs_diff(e.duration.sixteenths()) <= 1);
            state = next;
        }
    }

    let constant: Vec<RhythmSequence> = echo
        .iter()
        .map(|s| RhythmSequence {
            features: s.features.clone(),
            targets: vec![0.375; s.targets.len()],
        })
        .collect();
    let (store, net, _) = train_rhythm_net(&constant, &cfg).unwrap();
    let mut state = net.initial_state();
    for f in &constant[0].features {
        let (y, next) = net.step(&store, f, &state).unwrap();
        assert!((y - 0.375).abs() < 1.0 / 32.0, "{y}");
        state = next;
    }
}

#[test]
fn stub_scale_degrees_survive_transposition() {
    let composer = Composer::stub(vocab());
    let mut r = rng::seeded(12);
    let chords = ["C", "Dm7", "G7", "Am", "Fmaj7"];
    for _ in 0..10 {
        let s = random_score(&mut r, 10, &chords, 0.1);
        let shift = r.random_range(-5..=6);
        let t = transpose(&s, shift).unwrap();
        assert_eq!(t.octave_folds, 0);
        let cfg = ComposerConfig::default();
        let a = composer.generate(&s, &OracleTheorist, &cfg).unwrap();
        let b = composer.generate(&t.score, &OracleTheorist, &cfg).unwrap();
        for (x, y) in a.notes.iter().zip(&b.notes) {
            if x.pitch == REST {
                assert_eq!(y.pitch, REST);
            } else {
                assert_eq!(y.pitch as i32 - x.pitch as i32, shift);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masked_distributions_are_proper(
        logits in proptest::collection::vec(-8.0f32..8.0, NoteVocabulary::SIZE),
        allowed in proptest::collection::btree_set(0u8..128, 1..20),
    ) {
        let probs = harmonia_kernel::loss::softmax(&logits);
        let prior = StepDistribution { probs, masked: false };
        let allowed: Vec<u8> = allowed.into_iter().collect();
        let (d, _) = mask_to_chord_tones(&prior, &allowed).unwrap();
        let sum: f64 = d.probs.iter().map(|&p| p as f64).sum();
        prop_assert!((sum - 1.0).abs() < 1e-6);
        for (i, &p) in d.probs.iter().enumerate() {
            prop_assert!(p >= 0.0);
            if !allowed.contains(&(i as u8)) {
                prop_assert_eq!(p, 0.0);
            }
        }
    }

    #[test]
    fn generated_lines_obey_constraints(seed in 0u64..1000) {
        let composer = Composer::stub(vocab());
        let mut r = rng::seeded(seed);
        let chords = ["C", "Am7b5", "D7b9", "Gmaj9", "Ebaug", "F#dim7", "Bbm6"];
        let chords: Vec<String> = chords.iter().map(|c| c.parse::<harmonia_core::chord::ChordSymbol>().unwrap().canonical()).collect();
        let chords: Vec<&str> = chords.iter().map(String::as_str).collect();
        let s = random_score(&mut r, 16, &chords, 0.1);
        let cfg = ComposerConfig { seed, ..Default::default() };
        let line = composer.generate(&s, &OracleTheorist, &cfg).unwrap();
        prop_assert_eq!(line.notes.len(), s.len());
        for (e, h) in s.melody().iter().zip(&line.notes) {
            prop_assert_eq!(e.onset, h.onset);
            if h.pitch != REST {
                let pcs = OracleTheorist.pitch_classes(e.chord.as_deref().unwrap()).unwrap();
                prop_assert!(pcs.contains(h.pitch % 12));
                prop_assert!(h.pitch > e.pitch);
            }
        }
    }
}
