//! Audio rendering and the adversarial objective harness.

pub mod gan;
pub mod synth;
pub mod wav;

pub use gan::{gan_value, train_toy_gan, wgan_gp_losses, GanPair, GanTrainConfig, GaussianTarget, WganLosses};
pub use synth::{render_additive, SynthVoiceConfig, Waveform};
pub use wav::{read_wav, wav_bytes, write_wav};

use harmonia_kernel::KernelError;

#[derive(Debug, thiserror::Error)]
pub enum ConductorError {
    #[error("score has no events to render")]
    EmptyScore,
    #[error("sample rate {0} is not supported")]
    UnsupportedRate(u32),
    #[error("invalid synth voice: {0}")]
    InvalidVoice(String),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error("unsupported wav layout: {0}")]
    UnsupportedWav(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid probability: {0}")]
    InvalidProbability(String),
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
