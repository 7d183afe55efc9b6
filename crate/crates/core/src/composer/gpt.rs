//! Harmony-GPT: a decoder-only transformer over the interleaved sequence
//! `[BOS, m1, h1, m2, h2, ...]`.
//!
//! Every position's input is the sum of four embeddings: its token, its
//! position, the chord of its event, and the melody duration bucket of its
//! event. The output at `m_t` predicts `h_t`.

use harmonia_kernel::block::BlockCache;
use harmonia_kernel::loss::{softmax, softmax_cross_entropy};
use harmonia_kernel::{
    lr_schedule, Embedding, Grads, KernelError, KernelRng, LayerNorm, LayerNormCache, Linear, Optimizer, ParameterStore,
    Tensor, TransformerBlock,
};

use crate::event::{NoteVocabulary, DURATION_BUCKETS};
use crate::error::{Error, Result};

/// Bucket used for the BOS and EOS positions, which have no event.
pub const NO_DURATION: usize = DURATION_BUCKETS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GptConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ff_width: usize,
    pub context: usize,
    pub chord_vocab: usize,
}

impl GptConfig {
    pub fn toy(chord_vocab: usize) -> Self {
        Self {
            layers: 4,
            heads: 4,
            width: 128,
            ff_width: 256,
            context: 256,
            chord_vocab,
        }
    }
}

/// Model input: one entry per sequence position.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GptInput {
    pub tokens: Vec<usize>,
    pub chords: Vec<usize>,
    pub durations: Vec<usize>,
}

impl GptInput {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn push(&mut self, token: usize, chord: usize, duration: usize) {
        self.tokens.push(token);
        self.chords.push(chord);
        self.durations.push(duration);
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            tokens: self.tokens[..len].to_vec(),
            chords: self.chords[..len].to_vec(),
            durations: self.durations[..len].to_vec(),
        }
    }
}

/// Interleaves melody and harmony tokens. `steps` gives, per event, the
/// melody token, harmony token (if already known), chord token and duration
/// bucket. With `eos`, an end marker is appended.
pub fn interleave(steps: &[(usize, Option<usize>, usize, usize)], eos: bool) -> GptInput {
    let mut input = GptInput::default();
    input.push(NoteVocabulary::BOS, 0, NO_DURATION);
    for &(m, h, chord, dur) in steps {
        input.push(m, chord, dur);
        if let Some(h) = h {
            input.push(h, chord, dur);
        }
    }
    if eos {
        input.push(NoteVocabulary::EOS, 0, NO_DURATION);
    }
    input
}

/// Position of `m_t` (zero-based `t`) in the interleaved sequence.
pub fn melody_position(t: usize) -> usize {
    2 * t + 1
}

#[derive(Debug, Clone)]
pub struct HarmonyGpt {
    config: GptConfig,
    token: Embedding,
    pos: Embedding,
    chord: Embedding,
    dur: Embedding,
    blocks: Vec<TransformerBlock>,
    ln_f: LayerNorm,
    head: Linear,
}

pub struct GptCache {
    input: GptInput,
    blocks: Vec<BlockCache>,
    ln_f: LayerNormCache,
    hidden: Tensor,
}

impl HarmonyGpt {
    /// The output head starts at zero, so an untrained model predicts the
    /// uniform distribution.
    pub fn new(store: &mut ParameterStore, config: GptConfig, rng: &mut KernelRng) -> Result<Self> {
        let w = config.width;
        Ok(Self {
            config,
            token: Embedding::new(store, "gpt.token", NoteVocabulary::SIZE, w, rng)?,
            pos: Embedding::new(store, "gpt.pos", config.context, w, rng)?,
            chord: Embedding::new(store, "gpt.chord", config.chord_vocab, w, rng)?,
            dur: Embedding::new(store, "gpt.duration", DURATION_BUCKETS + 1, w, rng)?,
            blocks: (0..config.layers)
                .map(|i| TransformerBlock::new(store, &format!("gpt.block{i}"), w, config.heads, config.ff_width, true, rng))
                .collect::<std::result::Result<_, _>>()?,
            ln_f: LayerNorm::new(store, "gpt.ln_f", w)?,
            head: Linear::zeroed(store, "gpt.head", w, NoteVocabulary::SIZE)?,
        })
    }

    pub fn load(store: &ParameterStore, config: GptConfig) -> Result<Self> {
        let w = config.width;
        Ok(Self {
            config,
            token: Embedding::load(store, "gpt.token", NoteVocabulary::SIZE, w)?,
            pos: Embedding::load(store, "gpt.pos", config.context, w)?,
            chord: Embedding::load(store, "gpt.chord", config.chord_vocab, w)?,
            dur: Embedding::load(store, "gpt.duration", DURATION_BUCKETS + 1, w)?,
            blocks: (0..config.layers)
                .map(|i| TransformerBlock::load(store, &format!("gpt.block{i}"), w, config.heads, config.ff_width, true))
                .collect::<std::result::Result<_, _>>()?,
            ln_f: LayerNorm::load(store, "gpt.ln_f", w)?,
            head: Linear::load(store, "gpt.head", w, NoteVocabulary::SIZE)?,
        })
    }

    pub fn config(&self) -> GptConfig {
        self.config
    }

    /// Logits `[len, vocab]` for every position.
    pub fn forward(&self, store: &ParameterStore, input: &GptInput) -> Result<(Tensor, GptCache)> {
        let n = input.len();
        if n > self.config.context {
            return Err(KernelError::InvalidArgument(format!(
                "sequence of {n} positions exceeds the context of {}",
                self.config.context
            ))
            .into());
        }
        let positions: Vec<usize> = (0..n).collect();
        let mut x = self.token.forward(store, &input.tokens)?;
        x.add_assign(&self.pos.forward(store, &positions)?)?;
        x.add_assign(&self.chord.forward(store, &input.chords)?)?;
        x.add_assign(&self.dur.forward(store, &input.durations)?)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(store, &x)?;
            x = y;
            caches.push(c);
        }
        let (hidden, ln_f) = self.ln_f.forward(store, &x)?;
        let logits = self.head.forward(store, &hidden)?;
        Ok((
            logits,
            GptCache {
                input: input.clone(),
                blocks: caches,
                ln_f,
                hidden,
            },
        ))
    }

    pub fn backward(&self, store: &ParameterStore, grads: &mut Grads, cache: &GptCache, dlogits: &Tensor) -> Result<()> {
        let dh = self.head.backward(store, grads, &cache.hidden, dlogits)?;
        let mut dx = self.ln_f.backward(store, grads, &cache.ln_f, &dh)?;
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = b.backward(store, grads, c, &dx)?;
        }
        let input = &cache.input;
        self.token.backward(grads, &input.tokens, &dx)?;
        self.pos.backward(grads, &(0..input.len()).collect::<Vec<_>>(), &dx)?;
        self.chord.backward(grads, &input.chords, &dx)?;
        self.dur.backward(grads, &input.durations, &dx)?;
        Ok(())
    }

    /// Next-token distribution after the last position of `input`.
    pub fn next_distribution(&self, store: &ParameterStore, input: &GptInput) -> Result<Vec<f32>> {
        let (logits, _) = self.forward(store, input)?;
        Ok(softmax(logits.row(logits.rows() - 1)))
    }

    /// Distributions read at the given positions of one forward pass.
    pub fn distributions_at(&self, store: &ParameterStore, input: &GptInput, positions: &[usize]) -> Result<Vec<Vec<f32>>> {
        let (logits, _) = self.forward(store, input)?;
        Ok(positions.iter().map(|&p| softmax(logits.row(p))).collect())
    }
}

/// One training example: the full interleaved sequence with EOS, and the
/// harmony tokens (`None` where nothing is predicted in fine-tuning).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GptExample {
    pub input: GptInput,
    pub harmony_targets: Vec<Option<usize>>,
}

impl GptExample {
    /// Shifted next-token targets over the whole sequence.
    pub fn next_token_targets(&self) -> Vec<Option<usize>> {
        let t = &self.input.tokens;
        (0..t.len()).map(|i| t.get(i + 1).copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GptTrainConfig {
    pub pretrain_steps: u64,
    pub finetune_steps: u64,
    pub peak_lr: f32,
    pub warmup_steps: u64,
    pub weight_decay: f32,
    pub seed: u64,
}

impl Default for GptTrainConfig {
    fn default() -> Self {
        Self {
            pretrain_steps: 100,
            finetune_steps: 300,
            peak_lr: 1e-3,
            warmup_steps: 20,
            weight_decay: 0.01,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GptTrainReport {
    pub pretrain_losses: Vec<f32>,
    pub finetune_losses: Vec<f32>,
}

/// One full-batch optimizer step over `examples`; returns the mean loss
/// before the update.
fn batch_step(
    model: &HarmonyGpt,
    store: &mut ParameterStore,
    examples: &[GptExample],
    targets: &dyn Fn(&GptExample) -> Vec<Option<usize>>,
    opt: &Optimizer,
    lr: f32,
) -> Result<f32> {
    let mut grads = store.new_grads();
    let mut total = 0.0f64;
    for ex in examples {
        let (logits, cache) = model.forward(store, &ex.input)?;
        let (loss, dlogits) = softmax_cross_entropy(&logits, &targets(ex))?;
        total += loss as f64;
        model.backward(store, &mut grads, &cache, &dlogits)?;
    }
    let loss = (total / examples.len() as f64) as f32;
    if !loss.is_finite() {
        return Err(Error::Kernel(KernelError::Divergence {
            step: store.step(),
            what: "harmony-gpt loss".into(),
        }));
    }
    grads.scale(1.0 / examples.len() as f32);
    store.accumulate(&grads)?;
    opt.step(store, lr)?;
    Ok(loss)
}

/// Next-event pretraining, then harmony-only fine-tuning. Each phase runs
/// its own warmup and cosine decay.
pub fn train_harmony_gpt(
    model: &HarmonyGpt,
    store: &mut ParameterStore,
    examples: &[GptExample],
    config: &GptTrainConfig,
) -> Result<GptTrainReport> {
    if examples.is_empty() {
        return Err(KernelError::InvalidArgument("empty training corpus".into()).into());
    }
    let opt = Optimizer::adamw(config.weight_decay);
    let mut report = GptTrainReport {
        pretrain_losses: Vec::with_capacity(config.pretrain_steps as usize),
        finetune_losses: Vec::with_capacity(config.finetune_steps as usize),
    };
    for s in 0..config.pretrain_steps {
        let lr = lr_schedule(s, config.warmup_steps, config.pretrain_steps, config.peak_lr);
        let next = |ex: &GptExample| ex.next_token_targets();
        report.pretrain_losses.push(batch_step(model, store, examples, &next, &opt, lr)?);
    }
    for s in 0..config.finetune_steps {
        let lr = lr_schedule(s, config.warmup_steps, config.finetune_steps, config.peak_lr);
        let harm = |ex: &GptExample| ex.harmony_targets.clone();
        report.finetune_losses.push(batch_step(model, store, examples, &harm, &opt, lr)?);
    }
    Ok(report)
}
