//! A minimal differentiable kernel.
//!
//! Dense row-major `f32` arrays, layers with hand-written backward passes,
//! the Adam/AdamW/RMSprop update rules, a warm-up/cosine learning-rate
//! schedule, top-k and nucleus sampling, and a finite-difference gradient
//! checker. There is no autodiff graph: every layer keeps whatever it needs
//! from the forward pass in an explicit cache and the caller threads it into
//! `backward`.

pub mod attention;
pub mod block;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod lstm;
pub mod optim;
pub mod params;
pub mod rng;
pub mod sampling;
pub mod suite;
pub mod tensor;

pub use attention::{AttentionCache, SelfAttention};
pub use block::{BlockCache, TransformerBlock};
pub use error::{KernelError, Result};
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{Embedding, LayerNorm, LayerNormCache, Linear};
pub use lstm::{LstmCell, LstmStepCache};
pub use optim::{lr_schedule, Optimizer, OptimizerKind};
pub use params::{Grads, ParamId, ParameterStore};
pub use rng::KernelRng;
pub use sampling::{nucleus_support, sample_nucleus, sample_top_k, top_k_support};
pub use tensor::Tensor;
