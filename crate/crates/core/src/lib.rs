//! Melody harmonization pipeline: score ingestion, chord theory, harmony
//! generation and audio rendering.

pub mod chord;
pub mod composer;
pub mod conductor;
pub mod config;
pub mod error;
pub mod event;
pub mod pipeline;
pub mod score;
pub mod weights;

pub use error::{Error, Result};
