//! Chord-Former: a small encoder-only transformer from symbol characters to
//! a multi-hot pitch-class vector.

use harmonia_kernel::{
    loss::sigmoid_binary_cross_entropy, lr_schedule, rng, Embedding, KernelError, KernelRng, LayerNorm, LayerNormCache, Linear,
    Optimizer, ParameterStore, Tensor, TransformerBlock,
};
use harmonia_kernel::block::BlockCache;
use harmonia_kernel::layers::sigmoid;

use super::corpus::ChordCorpus;
use super::oracle::PitchClassSet;
use super::tokenize::{char_vocab_size, tokenize_symbol, L_SYM, PAD};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordFormerConfig {
    pub layers: usize,
    pub heads: usize,
    pub width: usize,
    pub ff_width: usize,
    pub lr: f32,
    /// Decoupled weight decay; zero means plain Adam.
    pub weight_decay: f32,
    pub batch_size: usize,
    /// Linear warmup steps before cosine decay; zero keeps the rate constant.
    pub warmup_steps: u64,
    pub epochs: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for ChordFormerConfig {
    fn default() -> Self {
        Self {
            layers: 2,
            heads: 4,
            width: 64,
            ff_width: 128,
            lr: 2e-3,
            weight_decay: 0.3,
            batch_size: 64,
            warmup_steps: 300,
            epochs: 200,
            holdout_fraction: 0.1,
            seed: 7,
        }
    }
}

/// Positions counted from the end of the symbol, so suffix tokens land on
/// the same embedding whether the root has an accidental or not.
fn reversed_positions(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

#[derive(Debug, Clone)]
pub struct ChordFormer {
    embed: Embedding,
    pos: Embedding,
    blocks: Vec<TransformerBlock>,
    ln_f: LayerNorm,
    head: Linear,
}

pub struct ChordFormerCache {
    ids: Vec<usize>,
    blocks: Vec<BlockCache>,
    ln_f: LayerNormCache,
    pooled: Tensor,
}

impl ChordFormer {
    /// Fresh parameters; the output head starts at zero so every untrained
    /// prediction is exactly 0.5.
    pub fn new(store: &mut ParameterStore, config: &ChordFormerConfig, rng: &mut KernelRng) -> Result<Self> {
        let w = config.width;
        let embed = Embedding::new(store, "chord.embed", char_vocab_size(), w, rng)?;
        let pos = Embedding::new(store, "chord.pos", L_SYM, w, rng)?;
        let blocks = (0..config.layers)
            .map(|i| TransformerBlock::new(store, &format!("chord.block{i}"), w, config.heads, config.ff_width, false, rng))
            .collect::<std::result::Result<_, _>>()?;
        let ln_f = LayerNorm::new(store, "chord.ln_f", w)?;
        let head = Linear::zeroed(store, "chord.head", w, 12)?;
        Ok(Self {
            embed,
            pos,
            blocks,
            ln_f,
            head,
        })
    }

    pub fn load(store: &ParameterStore, config: &ChordFormerConfig) -> Result<Self> {
        let w = config.width;
        Ok(Self {
            embed: Embedding::load(store, "chord.embed", char_vocab_size(), w)?,
            pos: Embedding::load(store, "chord.pos", L_SYM, w)?,
            blocks: (0..config.layers)
                .map(|i| TransformerBlock::load(store, &format!("chord.block{i}"), w, config.heads, config.ff_width, false))
                .collect::<std::result::Result<_, _>>()?,
            ln_f: LayerNorm::load(store, "chord.ln_f", w)?,
            head: Linear::load(store, "chord.head", w, 12)?,
        })
    }

    /// Logits for one tokenized symbol. Padding is dropped rather than
    /// masked, so pooling averages only the real characters.
    pub fn forward(&self, store: &ParameterStore, tokens: &[usize]) -> Result<(Vec<f32>, ChordFormerCache)> {
        let n = tokens.iter().position(|&t| t == PAD).unwrap_or(tokens.len());
        if n == 0 {
            return Err(KernelError::InvalidArgument("empty chord symbol".into()).into());
        }
        let ids = tokens[..n].to_vec();
        let mut x = self.embed.forward(store, &ids)?;
        x.add_assign(&self.pos.forward(store, &reversed_positions(n))?)?;
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(store, &x)?;
            x = y;
            caches.push(c);
        }
        let (y, ln_f) = self.ln_f.forward(store, &x)?;
        let w = y.cols();
        let mut pooled = vec![0.0f32; w];
        for r in 0..n {
            for (p, v) in pooled.iter_mut().zip(y.row(r)) {
                *p += v;
            }
        }
        pooled.iter_mut().for_each(|p| *p /= n as f32);
        let pooled = Tensor::from_vec(&[1, w], pooled)?;
        let logits = self.head.forward(store, &pooled)?.into_data();
        Ok((
            logits,
            ChordFormerCache {
                ids,
                blocks: caches,
                ln_f,
                pooled,
            },
        ))
    }

    pub fn backward(
        &self,
        store: &ParameterStore,
        grads: &mut harmonia_kernel::Grads,
        cache: &ChordFormerCache,
        dlogits: &[f32],
    ) -> Result<()> {
        let n = cache.ids.len();
        let dl = Tensor::from_vec(&[1, 12], dlogits.to_vec())?;
        let dpooled = self.head.backward(store, grads, &cache.pooled, &dl)?;
        let w = dpooled.len();
        let mut dy = Tensor::zeros(&[n, w]);
        for r in 0..n {
            for (d, v) in dy.row_mut(r).iter_mut().zip(dpooled.data()) {
                *d = v / n as f32;
            }
        }
        let mut dx = self.ln_f.backward(store, grads, &cache.ln_f, &dy)?;
        for (b, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            dx = b.backward(store, grads, c, &dx)?;
        }
        self.embed.backward(grads, &cache.ids, &dx)?;
        self.pos.backward(grads, &reversed_positions(n), &dx)?;
        Ok(())
    }

    pub fn probabilities(&self, store: &ParameterStore, text: &str) -> Result<[f32; 12]> {
        let (logits, _) = self.forward(store, &tokenize_symbol(text)?)?;
        let mut out = [0.0; 12];
        for (o, z) in out.iter_mut().zip(logits) {
            *o = sigmoid(z);
        }
        Ok(out)
    }

    /// Pitch classes whose probability is strictly above one half.
    pub fn predict(&self, store: &ParameterStore, text: &str) -> Result<PitchClassSet> {
        let probs = self.probabilities(store, text)?;
        Ok((0..12u8).filter(|&p| probs[p as usize] > 0.5).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChordFormerMetrics {
    pub epoch_losses: Vec<f32>,
    pub train_accuracy: f64,
    pub holdout_accuracy: f64,
    pub holdout_symbols: Vec<String>,
    pub steps: u64,
}

/// Seeded split of corpus indices into (train, held-out).
pub fn split_corpus(len: usize, holdout_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..len).collect();
    let mut r = rng::seeded(seed ^ 0x5eed_5b17);
    rng::shuffle(&mut idx, &mut r);
    let held = ((len as f64) * holdout_fraction).round() as usize;
    let holdout = idx.split_off(len - held);
    (idx, holdout)
}

pub fn exact_match_accuracy(model: &ChordFormer, store: &ParameterStore, corpus: &ChordCorpus, idx: &[usize]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(1.0);
    }
    let mut hits = 0usize;
    for &i in idx {
        let e = &corpus.entries()[i];
        if model.predict(store, &e.symbol)? == e.pitch_classes {
            hits += 1;
        }
    }
    Ok(hits as f64 / idx.len() as f64)
}

/// Adam (AdamW when weight decay is set) on per-pitch-class binary
/// cross-entropy, mean over each minibatch.
pub fn train_chordformer(corpus: &ChordCorpus, config: &ChordFormerConfig) -> Result<(ParameterStore, ChordFormer, ChordFormerMetrics)> {
    let mut r = rng::seeded(config.seed);
    let mut store = ParameterStore::new();
    let model = ChordFormer::new(&mut store, config, &mut r)?;
    let (mut train, holdout) = split_corpus(corpus.len(), config.holdout_fraction, config.seed);
    let samples: Vec<(Vec<usize>, [f32; 12])> = corpus
        .entries()
        .iter()
        .map(|e| Ok((tokenize_symbol(&e.symbol)?, e.pitch_classes.to_multi_hot())))
        .collect::<Result<_>>()?;
    let opt = if config.weight_decay > 0.0 {
        Optimizer::adamw(config.weight_decay)
    } else {
        Optimizer::adam()
    };
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let total_steps = (config.epochs * train.len().div_ceil(config.batch_size.max(1))) as u64;
    for _ in 0..config.epochs {
        rng::shuffle(&mut train, &mut r);
        let mut total = 0.0f64;
        for batch in train.chunks(config.batch_size.max(1)) {
            let mut grads = store.new_grads();
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let (tokens, target) = &samples[i];
                let (logits, cache) = model.forward(&store, tokens)?;
                let (loss, dlogits) = sigmoid_binary_cross_entropy(&logits, target)?;
                batch_loss += loss as f64;
                model.backward(&store, &mut grads, &cache, &dlogits)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Kernel(KernelError::Divergence {
                    step: store.step(),
                    what: "chord-former loss".into(),
                }));
            }
            grads.scale(1.0 / batch.len() as f32);
            store.accumulate(&grads)?;
            let lr = if config.warmup_steps == 0 {
                config.lr
            } else {
                lr_schedule(store.step(), config.warmup_steps, total_steps, config.lr)
            };
            opt.step(&mut store, lr)?;
            total += batch_loss;
        }
        epoch_losses.push((total / train.len().max(1) as f64) as f32);
    }
    let metrics = ChordFormerMetrics {
        epoch_losses,
        train_accuracy: exact_match_accuracy(&model, &store, corpus, &train)?,
        holdout_accuracy: exact_match_accuracy(&model, &store, corpus, &holdout)?,
        holdout_symbols: holdout.iter().map(|&i| corpus.entries()[i].symbol.clone()).collect(),
        steps: store.step(),
    };
    Ok((store, model, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn untrained_predicts_empty_set() {
        let mut store = ParameterStore::new();
        let model = ChordFormer::new(&mut store, &ChordFormerConfig::default(), &mut rng::seeded(1)).unwrap();
        for text in ["C", "Cmaj7", "F#m7b5"] {
            assert_eq!(model.probabilities(&store, text).unwrap(), [0.5; 12]);
            assert!(model.predict(&store, text).unwrap().is_empty());
        }
        assert!(model.predict(&store, "C?").is_err());
    }

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (a, b) = split_corpus(100, 0.1, 3);
        assert_eq!((a.len(), b.len()), (90, 10));
        assert_eq!(split_corpus(100, 0.1, 3), (a.clone(), b.clone()));
        let mut all: Vec<_> = a.into_iter().chain(b).collect();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn zero_epochs_reports_untrained_metrics() {
        let corpus = ChordCorpus::build().unwrap();
        let cfg = ChordFormerConfig {
            epochs: 0,
            ..Default::default()
        };
        let (store, _, m) = train_chordformer(&corpus, &cfg).unwrap();
        assert_eq!(store.step(), 0);
        assert_eq!(m.holdout_accuracy, 0.0);
        assert!(m.epoch_losses.is_empty());
    }

    #[test]
    fn short_runs_are_bitwise_reproducible() {
        let corpus = ChordCorpus::from_entries(ChordCorpus::build().unwrap().entries()[..40].to_vec());
        let cfg = ChordFormerConfig {
            epochs: 2,
            batch_size: 8,
            ..Default::default()
        };
        let (a, _, ma) = train_chordformer(&corpus, &cfg).unwrap();
        let (b, _, mb) = train_chordformer(&corpus, &cfg).unwrap();
        assert_eq!(a.snapshot(), b.snapshot());
        assert_eq!(ma, mb);
    }
}
