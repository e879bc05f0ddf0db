//! IO, file formats and pipeline orchestration for stereo utterance
//! clustering.
//!
//! The numerical work lives in `stereoclust-core`; this crate decodes stereo
//! WAV recordings, applies annotation manifests, reads and writes embedding
//! and model files, synthesizes the test corpus, and wires everything into
//! the `stereoclust` command-line binary.

pub mod audio;
pub mod commands;
pub mod config;
pub mod formats;
pub mod report;
pub mod synth;

pub use audio::{cut_and_segment, decode_wav, load_manifest, StereoSignal, UtteranceSpan};
pub use config::ExperimentConfig;
