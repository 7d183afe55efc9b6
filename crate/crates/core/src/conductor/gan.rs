//! Adversarial objectives and a toy one-dimensional WGAN-GP harness.

use harmonia_kernel::{rng, Grads, KernelRng, Optimizer, ParamId, ParameterStore};

use super::ConductorError;

/// Probabilities are clamped to `[GAN_EPS, 1 - GAN_EPS]` before logs.
pub const GAN_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanValue {
    pub value: f64,
    /// Inputs that had to be clamped.
    pub clamped: usize,
}

/// `mean log D(x) + mean log(1 - D(G(z)))`.
pub fn gan_value(d_real: &[f64], d_fake: &[f64]) -> Result<GanValue, ConductorError> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(ConductorError::InvalidProbability("empty batch".into()));
    }
    let mut clamped = 0;
    let mut clamp = |p: f64| -> Result<f64, ConductorError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ConductorError::InvalidProbability(format!("{p} is outside [0, 1]")));
        }
        let c = p.clamp(GAN_EPS, 1.0 - GAN_EPS);
        clamped += (c != p) as usize;
        Ok(c)
    };
    let mut real = 0.0;
    for &p in d_real {
        real += clamp(p)?.ln();
    }
    let mut fake = 0.0;
    for &p in d_fake {
        fake += (1.0 - clamp(p)?).ln();
    }
    Ok(GanValue {
        value: real / d_real.len() as f64 + fake / d_fake.len() as f64,
        clamped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Tanh,
    /// Negative inputs scaled by the slope.
    LeakyRelu(f32),
    Identity,
}

impl Activation {
    fn apply(self, z: f32) -> f32 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::LeakyRelu(s) => {
                if z > 0.0 {
                    z
                } else {
                    s * z
                }
            }
            Activation::Identity => z,
        }
    }

    /// Derivative, given the activation output.
    fn slope(self, a: f32) -> f32 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::LeakyRelu(s) => {
                if a > 0.0 {
                    1.0
                } else {
                    s
                }
            }
            Activation::Identity => 1.0,
        }
    }

    /// Second derivative, given the activation output.
    fn curvature(self, a: f32) -> f32 {
        match self {
            Activation::Tanh => -2.0 * a * (1.0 - a * a),
            Activation::LeakyRelu(_) | Activation::Identity => 0.0,
        }
    }
}

/// One hidden layer: `act(x W1 + b1) W2 + b2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mlp {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub activation: Activation,
}

impl Mlp {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        dims: (usize, usize, usize),
        activation: Activation,
        rng: &mut KernelRng,
    ) -> Result<Self, ConductorError> {
        let (input, hidden, output) = dims;
        Ok(Self {
            w1: store.xavier(&format!("{prefix}.w1"), input, hidden, rng)?,
            b1: store.zeros(&format!("{prefix}.b1"), &[hidden])?,
            w2: store.xavier(&format!("{prefix}.w2"), hidden, output, rng)?,
            b2: store.zeros(&format!("{prefix}.b2"), &[output])?,
            input,
            hidden,
            output,
            activation,
        })
    }

    /// Output and hidden activations.
    pub fn forward(&self, store: &ParameterStore, x: &[f32]) -> (Vec<f32>, Vec<f32>) {
        let w1 = store.value(self.w1).data();
        let w2 = store.value(self.w2).data();
        let mut a = store.value(self.b1).data().to_vec();
        for (i, &xi) in x.iter().enumerate() {
            for (j, aj) in a.iter_mut().enumerate() {
                *aj += xi * w1[i * self.hidden + j];
            }
        }
        a.iter_mut().for_each(|v| *v = self.activation.apply(*v));
        let mut y = store.value(self.b2).data().to_vec();
        for (j, &aj) in a.iter().enumerate() {
            for (k, yk) in y.iter_mut().enumerate() {
                *yk += aj * w2[j * self.output + k];
            }
        }
        (y, a)
    }

    /// Accumulates parameter gradients (when `grads` is given) and returns
    /// the input gradient.
    pub fn backward(&self, store: &ParameterStore, grads: Option<&mut Grads>, x: &[f32], a: &[f32], dy: &[f32]) -> Vec<f32> {
        let w1 = store.value(self.w1).data();
        let w2 = store.value(self.w2).data();
        let dz: Vec<f32> = (0..self.hidden)
            .map(|j| {
                let da: f32 = (0..self.output).map(|k| dy[k] * w2[j * self.output + k]).sum();
                da * self.activation.slope(a[j])
            })
            .collect();
        if let Some(g) = grads {
            for (j, &aj) in a.iter().enumerate() {
                for (k, &d) in dy.iter().enumerate() {
                    g.slot_mut(self.w2)[j * self.output + k] += aj * d;
                }
            }
            for (k, &d) in dy.iter().enumerate() {
                g.slot_mut(self.b2)[k] += d;
            }
            for (i, &xi) in x.iter().enumerate() {
                for (j, &d) in dz.iter().enumerate() {
                    g.slot_mut(self.w1)[i * self.hidden + j] += xi * d;
                }
            }
            for (j, &d) in dz.iter().enumerate() {
                g.slot_mut(self.b1)[j] += d;
            }
        }
        (0..self.input)
            .map(|i| (0..self.hidden).map(|j| w1[i * self.hidden + j] * dz[j]).sum())
            .collect()
    }

    /// Gradient of a scalar output with respect to the input.
    pub fn input_gradient(&self, store: &ParameterStore, a: &[f32]) -> Vec<f32> {
        debug_assert_eq!(self.output, 1);
        self.backward(store, None, &[], a, &[1.0])
    }

    /// Parameter gradients of `L(input_gradient(x))` given `dg = dL/dg`.
    fn input_gradient_backward(&self, store: &ParameterStore, grads: &mut Grads, x: &[f32], a: &[f32], dg: &[f32]) {
        let w1 = store.value(self.w1).data();
        let w2 = store.value(self.w2).data();
        for j in 0..self.hidden {
            let slope = self.activation.slope(a[j]);
            let u = w2[j] * slope;
            let mut du = 0.0;
            for (i, &d) in dg.iter().enumerate() {
                grads.slot_mut(self.w1)[i * self.hidden + j] += d * u;
                du += w1[i * self.hidden + j] * d;
            }
            grads.slot_mut(self.w2)[j] += du * slope;
            // u depends on z through the slope.
            let dz = du * w2[j] * self.activation.curvature(a[j]);
            for (i, &xi) in x.iter().enumerate() {
                grads.slot_mut(self.w1)[i * self.hidden + j] += xi * dz;
            }
            grads.slot_mut(self.b1)[j] += dz;
        }
    }
}

/// `lambda * mean((|grad_x D(x)| - 1)^2)` over `points`, where the
/// gradient is taken over the first `sample_dim` input coordinates.
/// Critic gradients are accumulated when `grads` is given.
pub fn gradient_penalty(
    critic: &Mlp,
    store: &ParameterStore,
    points: &[Vec<f32>],
    sample_dim: usize,
    lambda: f64,
    mut grads: Option<&mut Grads>,
) -> f64 {
    let n = points.len() as f64;
    let mut total = 0.0f64;
    for x in points {
        let (_, a) = critic.forward(store, x);
        let g = critic.input_gradient(store, &a);
        let norm = g[..sample_dim].iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        total += (norm - 1.0).powi(2);
        if let Some(grads) = grads.as_deref_mut() {
            if norm > 0.0 {
                let scale = lambda * 2.0 * (norm - 1.0) / (norm * n);
                let mut dg = vec![0.0f32; g.len()];
                for i in 0..sample_dim {
                    dg[i] = (scale * g[i] as f64) as f32;
                }
                critic.input_gradient_backward(store, grads, x, &a, &dg);
            }
        }
    }
    lambda * total / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanDims {
    pub sample_dim: usize,
    pub cond_dim: usize,
    pub noise_dim: usize,
    pub hidden: usize,
    pub critic_hidden: usize,
    pub critic_activation: Activation,
}

impl Default for GanDims {
    fn default() -> Self {
        Self {
            sample_dim: 1,
            cond_dim: 1,
            noise_dim: 4,
            hidden: 16,
            critic_hidden: 32,
            critic_activation: Activation::LeakyRelu(0.2),
        }
    }
}

/// Generator over `[c, z]` and critic over `[x, c]`.
#[derive(Debug, Clone)]
pub struct GanPair {
    pub generator: Mlp,
    pub critic: Mlp,
    pub generator_store: ParameterStore,
    pub critic_store: ParameterStore,
    pub dims: GanDims,
}

impl GanPair {
    pub fn new(dims: GanDims, rng: &mut KernelRng) -> Result<Self, ConductorError> {
        let mut generator_store = ParameterStore::new();
        let mut critic_store = ParameterStore::new();
        let generator = Mlp::new(
            &mut generator_store,
            "gan.generator",
            (dims.cond_dim + dims.noise_dim, dims.hidden, dims.sample_dim),
            Activation::Tanh,
            rng,
        )?;
        let critic = Mlp::new(
            &mut critic_store,
            "gan.critic",
            (dims.sample_dim + dims.cond_dim, dims.critic_hidden, 1),
            dims.critic_activation,
            rng,
        )?;
        Ok(Self {
            generator,
            critic,
            generator_store,
            critic_store,
            dims,
        })
    }

    pub fn generate(&self, cond: &[f32], noise: &[f32]) -> Vec<f32> {
        let input = [cond, noise].concat();
        self.generator.forward(&self.generator_store, &input).0
    }

    pub fn critic_score(&self, sample: &[f32], cond: &[f32]) -> f32 {
        let input = [sample, cond].concat();
        self.critic.forward(&self.critic_store, &input).0[0]
    }

    pub fn draw_noise(&self, rng: &mut KernelRng) -> Vec<f32> {
        (0..self.dims.noise_dim).map(|_| rng::normal(rng, 0.0, 1.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WganLosses {
    pub d_loss: f64,
    pub g_loss: f64,
    /// Already scaled by lambda.
    pub penalty: f64,
}

/// Critic loss `mean D(fake) - mean D(real) + penalty` and generator loss
/// `-mean D(fake)`, with noise and interpolation weights drawn from `rng`.
/// Critic gradients of `d_loss` go into `grads` when given.
pub fn wgan_gp_losses(
    pair: &GanPair,
    real: &[Vec<f32>],
    cond: &[Vec<f32>],
    lambda: f64,
    rng: &mut KernelRng,
    mut grads: Option<&mut Grads>,
) -> Result<WganLosses, ConductorError> {
    if real.is_empty() || real.len() != cond.len() {
        return Err(ConductorError::InvalidBatch(format!("{} samples, {} conditions", real.len(), cond.len())));
    }
    if !(lambda >= 0.0) {
        return Err(ConductorError::InvalidBatch(format!("lambda {lambda} must be non-negative")));
    }
    let n = real.len() as f64;
    let mut d_real = 0.0f64;
    let mut d_fake = 0.0f64;
    let mut interpolates = Vec::with_capacity(real.len());
    let scale = (1.0 / n) as f32;
    for (x, c) in real.iter().zip(cond) {
        let noise = pair.draw_noise(rng);
        let fake = pair.generate(c, &noise);
        let eps = rng::uniform_f32(rng);
        let real_in = [x.as_slice(), c].concat();
        let fake_in = [fake.as_slice(), c].concat();
        let (yr, ar) = pair.critic.forward(&pair.critic_store, &real_in);
        let (yf, af) = pair.critic.forward(&pair.critic_store, &fake_in);
        d_real += yr[0] as f64;
        d_fake += yf[0] as f64;
        if let Some(g) = grads.as_deref_mut() {
            pair.critic.backward(&pair.critic_store, Some(g), &real_in, &ar, &[-scale]);
            pair.critic.backward(&pair.critic_store, Some(g), &fake_in, &af, &[scale]);
        }
        let mut hat: Vec<f32> = x.iter().zip(&fake).map(|(r, f)| eps * r + (1.0 - eps) * f).collect();
        hat.extend_from_slice(c);
        interpolates.push(hat);
    }
    let penalty = gradient_penalty(
        &pair.critic,
        &pair.critic_store,
        &interpolates,
        pair.dims.sample_dim,
        lambda,
        grads,
    );
    if !penalty.is_finite() {
        return Err(ConductorError::Divergence("non-finite gradient penalty".into()));
    }
    Ok(WganLosses {
        d_loss: (d_fake - d_real) / n + penalty,
        g_loss: -d_fake / n,
        penalty,
    })
}

/// Generator loss `-mean D(G(c, z))` with its generator gradients.
fn generator_step_grads(pair: &GanPair, cond: &[Vec<f32>], rng: &mut KernelRng, grads: &mut Grads) -> f64 {
    let n = cond.len() as f64;
    let mut total = 0.0f64;
    for c in cond {
        let noise = pair.draw_noise(rng);
        let g_in = [c.as_slice(), &noise].concat();
        let (fake, ga) = pair.generator.forward(&pair.generator_store, &g_in);
        let d_in = [fake.as_slice(), c].concat();
        let (y, da) = pair.critic.forward(&pair.critic_store, &d_in);
        total += y[0] as f64;
        let dx = pair.critic.backward(&pair.critic_store, None, &d_in, &da, &[(-1.0 / n) as f32]);
        pair.generator
            .backward(&pair.generator_store, Some(grads), &g_in, &ga, &dx[..pair.dims.sample_dim]);
    }
    -total / n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTarget {
    pub mean: f32,
    pub std: f32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanTrainConfig {
    pub dims: GanDims,
    pub generator_steps: usize,
    pub critic_steps: usize,
    pub batch_size: usize,
    pub lambda: f64,
    pub generator_lr: f32,
    pub critic_lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub seed: u64,
    /// Samples drawn to measure the final generator.
    pub eval_samples: usize,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            dims: GanDims::default(),
            generator_steps: 3000,
            critic_steps: 5,
            batch_size: 64,
            lambda: 0.03,
            generator_lr: 1e-4,
            critic_lr: 4e-4,
            beta1: 0.5,
            beta2: 0.9,
            seed: 21,
            eval_samples: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanMetrics {
    pub sample_mean: f64,
    pub sample_std: f64,
    /// Last critic step's losses for each generator step.
    pub d_losses: Vec<f64>,
    pub g_losses: Vec<f64>,
    pub penalties: Vec<f64>,
}

/// Alternating WGAN-GP training with Adam and a constant conditioning
/// vector of ones.
pub fn train_toy_gan(target: GaussianTarget, config: &GanTrainConfig) -> Result<(GanPair, GanMetrics), ConductorError> {
    if config.batch_size == 0 || config.critic_steps == 0 {
        return Err(ConductorError::InvalidBatch("batch size and critic steps must be positive".into()));
    }
    let mut r = rng::seeded(config.seed);
    let mut pair = GanPair::new(config.dims, &mut r)?;
    let opt = Optimizer {
        beta1: config.beta1,
        beta2: config.beta2,
        ..Optimizer::adam()
    };
    let cond = vec![vec![1.0f32; config.dims.cond_dim]; config.batch_size];
    let mut metrics = GanMetrics {
        sample_mean: 0.0,
        sample_std: 0.0,
        d_losses: Vec::with_capacity(config.generator_steps),
        g_losses: Vec::with_capacity(config.generator_steps),
        penalties: Vec::with_capacity(config.generator_steps),
    };
    for _ in 0..config.generator_steps {
        let mut last = None;
        for _ in 0..config.critic_steps {
            let real: Vec<Vec<f32>> = (0..config.batch_size)
                .map(|_| (0..config.dims.sample_dim).map(|_| rng::normal(&mut r, target.mean, target.std)).collect())
                .collect();
            let mut grads = pair.critic_store.new_grads();
            let losses = wgan_gp_losses(&pair, &real, &cond, config.lambda, &mut r, Some(&mut grads))?;
            if !losses.d_loss.is_finite() {
                return Err(ConductorError::Divergence("non-finite critic loss".into()));
            }
            pair.critic_store.accumulate(&grads)?;
            opt.step(&mut pair.critic_store, config.critic_lr)?;
            last = Some(losses);
        }
        let mut grads = pair.generator_store.new_grads();
        let g_loss = generator_step_grads(&pair, &cond, &mut r, &mut grads);
        if !g_loss.is_finite() {
            return Err(ConductorError::Divergence("non-finite generator loss".into()));
        }
        pair.generator_store.accumulate(&grads)?;
        opt.step(&mut pair.generator_store, config.generator_lr)?;
        let last = last.expect("at least one critic step");
        metrics.d_losses.push(last.d_loss);
        metrics.penalties.push(last.penalty);
        metrics.g_losses.push(g_loss);
    }
    let mut eval = rng::seeded(config.seed ^ 0xe7a1);
    let c = vec![1.0f32; config.dims.cond_dim];
    let samples: Vec<f64> = (0..config.eval_samples)
        .map(|_| pair.generate(&c, &pair.draw_noise(&mut eval))[0] as f64)
        .collect();
    let n = samples.len().max(1) as f64;
    metrics.sample_mean = samples.iter().sum::<f64>() / n;
    metrics.sample_std = (samples.iter().map(|s| (s - metrics.sample_mean).powi(2)).sum::<f64>() / n).sqrt();
    Ok((pair, metrics))
}
