//! Rhythm-Net: an LSTM regressor from melody rhythm to harmony duration.

use harmonia_kernel::loss::mse;
use harmonia_kernel::{lr_schedule, rng, Grads, KernelError, KernelRng, Linear, LstmCell, LstmStepCache, Optimizer, ParameterStore, Tensor};
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::event::{Beats, Event, GridDuration};

pub const RHYTHM_FEATURES: usize = 2;

/// Melody duration in whole notes and the onset's position within a 4/4
/// bar, in `[0, 1)`.
pub fn rhythm_features(event: &Event) -> [f32; RHYTHM_FEATURES] {
    let phase = (event.onset % Beats::from(4)) / 4;
    [event.duration.whole_notes_f32(), phase.to_f32().unwrap_or(0.0)]
}

#[derive(Debug, Clone, Copy)]
pub struct RhythmNet {
    cell: LstmCell,
    head: Linear,
    hidden: usize,
}

/// Recurrent state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RhythmState {
    pub h: Vec<f32>,
    pub c: Vec<f32>,
}

struct StepCache {
    lstm: LstmStepCache,
    h: Vec<f32>,
}

impl RhythmNet {
    pub fn new(store: &mut ParameterStore, hidden: usize, rng: &mut KernelRng) -> Result<Self> {
        Ok(Self {
            cell: LstmCell::new(store, "rhythm.lstm", RHYTHM_FEATURES, hidden, rng)?,
            head: Linear::new(store, "rhythm.head", hidden, 1, rng)?,
            hidden,
        })
    }

    pub fn load(store: &ParameterStore, hidden: usize) -> Result<Self> {
        Ok(Self {
            cell: LstmCell::load(store, "rhythm.lstm", RHYTHM_FEATURES, hidden)?,
            head: Linear::load(store, "rhythm.head", hidden, 1)?,
            hidden,
        })
    }

    pub fn initial_state(&self) -> RhythmState {
        RhythmState {
            h: vec![0.0; self.hidden],
            c: vec![0.0; self.hidden],
        }
    }

    /// Raw head output in whole notes and the next state.
    pub fn step(&self, store: &ParameterStore, features: &[f32], state: &RhythmState) -> Result<(f32, RhythmState)> {
        let (h, c, _) = self.cell.step(store, features, &state.h, &state.c)?;
        let y = self.head.forward(store, &Tensor::from_vec(&[1, self.hidden], h.clone())?)?;
        Ok((y.data()[0], RhythmState { h, c }))
    }

    /// Grid-snapped prediction, clamped to `1..=capacity` sixteenths.
    pub fn predict(
        &self,
        store: &ParameterStore,
        event: &Event,
        capacity: GridDuration,
        state: &RhythmState,
    ) -> Result<(GridDuration, RhythmState)> {
        let (raw, next) = self.step(store, &rhythm_features(event), state)?;
        Ok((snap_and_clamp(raw, capacity), next))
    }

    /// Mean squared error over one sequence with gradients accumulated
    /// through time.
    fn sequence_loss(
        &self,
        store: &ParameterStore,
        grads: &mut Grads,
        features: &[[f32; RHYTHM_FEATURES]],
        targets: &[f32],
    ) -> Result<f32> {
        let mut state = self.initial_state();
        let mut caches = Vec::with_capacity(features.len());
        let mut preds = Vec::with_capacity(features.len());
        for f in features {
            let (h, c, lstm) = self.cell.step(store, f, &state.h, &state.c)?;
            let y = self.head.forward(store, &Tensor::from_vec(&[1, self.hidden], h.clone())?)?;
            preds.push(y.data()[0]);
            caches.push(StepCache { lstm, h: h.clone() });
            state = RhythmState { h, c };
        }
        let (loss, dpred) = mse(&preds, targets)?;
        let mut dh_next = vec![0.0; self.hidden];
        let mut dc_next = vec![0.0; self.hidden];
        for (cache, &dp) in caches.iter().zip(&dpred).rev() {
            let hx = Tensor::from_vec(&[1, self.hidden], cache.h.clone())?;
            let dy = Tensor::from_vec(&[1, 1], vec![dp])?;
            let dh_head = self.head.backward(store, grads, &hx, &dy)?;
            let dh: Vec<f32> = dh_head.data().iter().zip(&dh_next).map(|(a, b)| a + b).collect();
            let (_, dh_prev, dc_prev) = self.cell.backward(store, grads, &cache.lstm, &dh, &dc_next)?;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        Ok(loss)
    }
}

/// Nearest sixteenth (ties up), then clamped to `1..=capacity`.
pub fn snap_and_clamp(raw_whole_notes: f32, capacity: GridDuration) -> GridDuration {
    let snapped = GridDuration::snap_whole_notes(raw_whole_notes);
    snapped.min(capacity)
}

/// Per-sequence features and target harmony durations in whole notes.
#[derive(Debug, Clone, PartialEq)]
pub struct RhythmSequence {
    pub features: Vec<[f32; RHYTHM_FEATURES]>,
    pub targets: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhythmTrainConfig {
    pub hidden: usize,
    pub lr: f32,
    pub steps: u64,
    pub seed: u64,
    /// Cosine-decay the learning rate to zero over `steps`.
    pub cosine_decay: bool,
}

impl Default for RhythmTrainConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            lr: 1e-3,
            steps: 5000,
            seed: 5,
            cosine_decay: true,
        }
    }
}

/// RMSprop on the mean per-sequence MSE, one full-batch step per
/// iteration. Returns the parameters and the loss before each step.
pub fn train_rhythm_net(corpus: &[RhythmSequence], config: &RhythmTrainConfig) -> Result<(ParameterStore, RhythmNet, Vec<f32>)> {
    if corpus.iter().all(|s| s.features.is_empty()) {
        return Err(KernelError::InvalidArgument("empty rhythm corpus".into()).into());
    }
    let mut r = rng::seeded(config.seed);
    let mut store = ParameterStore::new();
    let net = RhythmNet::new(&mut store, config.hidden, &mut r)?;
    let opt = Optimizer::rmsprop();
    let seqs: Vec<&RhythmSequence> = corpus.iter().filter(|s| !s.features.is_empty()).collect();
    let mut losses = Vec::with_capacity(config.steps as usize);
    for step in 0..config.steps {
        let mut grads = store.new_grads();
        let mut total = 0.0f64;
        for s in &seqs {
            total += net.sequence_loss(&store, &mut grads, &s.features, &s.targets)? as f64;
        }
        let loss = (total / seqs.len() as f64) as f32;
        if !loss.is_finite() {
            return Err(Error::Kernel(KernelError::Divergence {
                step: store.step(),
                what: "rhythm-net loss".into(),
            }));
        }
        grads.scale(1.0 / seqs.len() as f32);
        store.accumulate(&grads)?;
        let lr = if config.cosine_decay { lr_schedule(step, 0, config.steps, config.lr) } else { config.lr };
        opt.step(&mut store, lr)?;
        losses.push(loss);
    }
    Ok((store, net, losses))
}

/// Mean squared error of the raw head output over a corpus, in squared
/// sixteenths.
pub fn evaluate_rhythm_net(store: &ParameterStore, net: &RhythmNet, corpus: &[RhythmSequence]) -> Result<f32> {
    let mut total = 0.0f64;
    let mut n = 0usize;
    for s in corpus {
        let mut state = net.initial_state();
        for (f, t) in s.features.iter().zip(&s.targets) {
            let (y, next) = net.step(store, f, &state)?;
            total += ((y - t) as f64).powi(2);
            n += 1;
            state = next;
        }
    }
    Ok(if n == 0 { 0.0 } else { (total * 256.0 / n as f64) as f32 })
}
