//! Core algorithms for stereo utterance clustering.
//!
//! Everything in this crate is pure computation over in-memory buffers:
//! channel-combination transforms, the log-mel spectral embedder,
//! per-speaker full-covariance Gaussian mixtures fitted with K-means
//! initialized EM, and the paired split/evaluate statistics (error rates,
//! z-scores, Mann-Whitney U, PCA projections).
//!
//! The crate is `no_std` (with `alloc`); file formats, WAV decoding and the
//! command-line pipeline live in the companion `stereoclust` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod channel;
pub mod embed;
pub mod experiment;
pub mod gmm;
pub mod linalg;
pub mod stats;

mod kmeans;
mod spectrum;

pub use channel::{CombinationMethod, ProcessedSignal, StereoSegment};
pub use embed::{EmbeddingSet, EmbeddingVector, SpectralEmbedderConfig};
pub use experiment::{ExperimentReport, RunResult, SplitPlan};
pub use gmm::{FitConfig, ModelBank, SpeakerModel};

/// FNV-1a over arbitrary bytes. Used wherever a stable, platform-independent
/// hash is needed (per-speaker seed derivation, provenance digests).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Mixes a base seed with a stream index so derived RNG streams stay
/// independent of evaluation order.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the xor keeps single-bit changes in either
    // input from producing correlated streams.
    let mut z = base ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
