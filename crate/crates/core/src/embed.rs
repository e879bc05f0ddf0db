//! Fixed-dimension embeddings of processed signals.
//!
//! The built-in embedder condenses a signal into log-mel filterbank
//! statistics: per-band mean and standard deviation over frames,
//! concatenated, padded or truncated to the target dimension and
//! L2-normalized. It is a deterministic stand-in for any external
//! utterance-level encoder; externally computed vectors enter through
//! [`EmbeddingSet`] via the file format in the `stereoclust` crate.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::channel::{CombinationMethod, ProcessedSignal};
use crate::spectrum;

/// Settings of the built-in log-mel statistics embedder.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEmbedderConfig {
    /// Number of triangular mel filters.
    pub n_mels: usize,
    /// Analysis frame length in seconds.
    pub frame_length: f64,
    /// Hop between frame starts in seconds.
    pub frame_hop: f64,
    /// FFT length; `None` picks the next power of two at or above the frame
    /// length in samples.
    pub fft_size: Option<usize>,
    /// Output dimension D. The pooled `2 * n_mels` statistics are zero-padded
    /// or truncated to this length before normalization.
    pub output_dim: usize,
}

impl Default for SpectralEmbedderConfig {
    fn default() -> Self {
        SpectralEmbedderConfig {
            n_mels: 40,
            frame_length: 0.025,
            frame_hop: 0.010,
            fft_size: None,
            output_dim: 256,
        }
    }
}

impl SpectralEmbedderConfig {
    fn validate(&self) -> Result<(), EmbedError> {
        if self.n_mels == 0
            || self.output_dim == 0
            || self.frame_hop <= 0.0
            || self.frame_hop.is_nan()
            || self.frame_hop > self.frame_length
        {
            return Err(EmbedError::BadConfig);
        }
        if let Some(fft) = self.fft_size {
            if !fft.is_power_of_two() {
                return Err(EmbedError::BadConfig);
            }
        }
        Ok(())
    }

    fn frame_samples(&self, sample_rate: u32) -> usize {
        (libm::round(self.frame_length * sample_rate as f64) as usize).max(1)
    }

    fn hop_samples(&self, sample_rate: u32) -> usize {
        (libm::round(self.frame_hop * sample_rate as f64) as usize).max(1)
    }
}

/// A fixed-dimension feature vector for one segment of one speaker.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub speaker_id: String,
    pub index: usize,
    pub method: CombinationMethod,
}

/// A validated collection of same-dimension, same-method embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSet {
    dimension: usize,
    method: CombinationMethod,
    entries: Vec<EmbeddingVector>,
}

impl EmbeddingSet {
    pub fn new(dimension: usize, method: CombinationMethod) -> Self {
        EmbeddingSet {
            dimension,
            method,
            entries: Vec::new(),
        }
    }

    pub fn from_entries(
        dimension: usize,
        method: CombinationMethod,
        entries: Vec<EmbeddingVector>,
    ) -> Result<Self, EmbedError> {
        let mut set = EmbeddingSet::new(dimension, method);
        for entry in entries {
            set.push(entry)?;
        }
        Ok(set)
    }

    /// Appends an entry, enforcing the set invariants: matching dimension and
    /// method, finite values, unique `(speaker_id, index)` keys.
    pub fn push(&mut self, entry: EmbeddingVector) -> Result<(), EmbedError> {
        if entry.method != self.method {
            return Err(EmbedError::MethodMismatch {
                expected: self.method,
                found: entry.method,
            });
        }
        if entry.values.len() != self.dimension {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dimension,
                found: entry.values.len(),
            });
        }
        if entry.values.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite {
                speaker_id: entry.speaker_id,
                index: entry.index,
            });
        }
        if self
            .entries
            .iter()
            .any(|e| e.speaker_id == entry.speaker_id && e.index == entry.index)
        {
            return Err(EmbedError::DuplicateKey {
                speaker_id: entry.speaker_id,
                index: entry.index,
            });
        }
        self.entries.push(entry);
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn method(&self) -> CombinationMethod {
        self.method
    }

    pub fn entries(&self) -> &[EmbeddingVector] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Speaker ids present in the set, sorted and deduplicated.
    pub fn speakers(&self) -> Vec<&str> {
        let set: BTreeSet<&str> = self.entries.iter().map(|e| e.speaker_id.as_str()).collect();
        set.into_iter().collect()
    }

    /// Entries grouped per speaker, sorted by segment index — the shape the
    /// experiment harness consumes.
    pub fn by_speaker(&self) -> BTreeMap<String, Vec<EmbeddingVector>> {
        let mut out: BTreeMap<String, Vec<EmbeddingVector>> = BTreeMap::new();
        for entry in &self.entries {
            out.entry(entry.speaker_id.clone())
                .or_default()
                .push(entry.clone());
        }
        for vectors in out.values_mut() {
            vectors.sort_by_key(|v| v.index);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("signal is shorter than one analysis frame")]
    SignalTooShort,
    #[error("embedder configuration violates its invariants")]
    BadConfig,
    #[error("FFT size {fft} is smaller than the {frame}-sample frame")]
    FftTooSmall { fft: usize, frame: usize },
    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding method mismatch: expected {expected}, found {found}")]
    MethodMismatch {
        expected: CombinationMethod,
        found: CombinationMethod,
    },
    #[error("non-finite embedding values for speaker {speaker_id} segment {index}")]
    NonFinite { speaker_id: String, index: usize },
    #[error("duplicate embedding key: speaker {speaker_id} segment {index}")]
    DuplicateKey { speaker_id: String, index: usize },
}

/// Embeds a processed signal as `[per-band mean ‖ per-band std]` of its
/// log-mel frames, resized to the configured dimension and L2-normalized.
///
/// Deterministic for fixed input and config.
pub fn embed_spectral(
    signal: &ProcessedSignal,
    config: &SpectralEmbedderConfig,
) -> Result<EmbeddingVector, EmbedError> {
    let mut values = pooled_features(signal, config)?;
    values.resize(config.output_dim, 0.0);
    let norm = libm::sqrt(values.iter().map(|v| v * v).sum());
    if norm > 0.0 {
        for v in values.iter_mut() {
            *v /= norm;
        }
    }
    Ok(EmbeddingVector {
        values,
        speaker_id: signal.speaker_id.clone(),
        index: signal.index,
        method: signal.method,
    })
}

/// The pooled `[mean ‖ std]` statistics before resizing and normalization.
fn pooled_features(
    signal: &ProcessedSignal,
    config: &SpectralEmbedderConfig,
) -> Result<Vec<f64>, EmbedError> {
    config.validate()?;
    let frame = config.frame_samples(signal.sample_rate);
    let hop = config.hop_samples(signal.sample_rate);
    if signal.samples.len() < frame {
        return Err(EmbedError::SignalTooShort);
    }
    let fft = config.fft_size.unwrap_or_else(|| frame.next_power_of_two());
    if fft < frame {
        return Err(EmbedError::FftTooSmall { fft, frame });
    }

    let bank = spectrum::mel_filterbank(config.n_mels, fft, signal.sample_rate);
    let frames = spectrum::log_mel_frames(&signal.samples, frame, hop, fft, &bank);
    let n = frames.len() as f64;

    let mut mean = alloc::vec![0.0; config.n_mels];
    for row in &frames {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }

    // population std: a single-frame signal legitimately pools to zeros here,
    // and a band that is bitwise constant across frames gets an exact zero
    // rather than the rounding residue of the two-pass formula
    let mut std = alloc::vec![0.0; config.n_mels];
    for (band, s) in std.iter_mut().enumerate() {
        let first = frames[0][band];
        if frames.iter().all(|row| row[band] == first) {
            continue;
        }
        let mut acc = 0.0;
        for row in &frames {
            let d = row[band] - mean[band];
            acc += d * d;
        }
        *s = libm::sqrt(acc / n);
    }

    let mut out = mean;
    out.extend(std);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    fn signal(samples: Vec<f64>, rate: u32) -> ProcessedSignal {
        ProcessedSignal {
            speaker_id: "spk".to_string(),
            index: 1,
            method: CombinationMethod::Mono,
            samples,
            sample_rate: rate,
        }
    }

    fn tone(freq: f64, rate: u32, seconds: f64, amplitude: f64) -> Vec<f64> {
        let n = (rate as f64 * seconds) as usize;
        (0..n)
            .map(|t| {
                amplitude * libm::sin(2.0 * core::f64::consts::PI * freq * t as f64 / rate as f64)
            })
            .collect()
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = libm::sqrt(a.iter().map(|x| x * x).sum());
        let nb: f64 = libm::sqrt(b.iter().map(|x| x * x).sum());
        dot / (na * nb)
    }

    #[test]
    fn zero_signal_pools_to_constant_means_and_zero_stds() {
        let cfg = SpectralEmbedderConfig::default();
        let sig = signal(vec![0.0; 16000], 16000);
        let pooled = pooled_features(&sig, &cfg).unwrap();
        let (means, stds) = pooled.split_at(cfg.n_mels);
        assert!(means.iter().all(|&m| m == means[0]));
        assert!(stds.iter().all(|&s| s == 0.0));
        // floored energies: every band sits at ln(1e-10)
        assert!((means[0] - libm::log(1e-10)).abs() < 1e-12);

        let emb = embed_spectral(&sig, &cfg).unwrap();
        let norm: f64 = emb.values.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn embedding_is_bitwise_deterministic() {
        let cfg = SpectralEmbedderConfig::default();
        let sig = signal(tone(440.0, 16000, 1.0, 0.5), 16000);
        let a = embed_spectral(&sig, &cfg).unwrap();
        let b = embed_spectral(&sig, &cfg).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn distinct_tones_embed_apart_and_amplitude_barely_matters() {
        let cfg = SpectralEmbedderConfig::default();
        let low = embed_spectral(&signal(tone(440.0, 16000, 1.0, 0.5), 16000), &cfg).unwrap();
        let high = embed_spectral(&signal(tone(3000.0, 16000, 1.0, 0.5), 16000), &cfg).unwrap();
        let low_quiet =
            embed_spectral(&signal(tone(440.0, 16000, 1.0, 0.25), 16000), &cfg).unwrap();

        assert!(cosine(&low.values, &high.values) < 0.9);
        assert!(cosine(&low.values, &low_quiet.values) > 0.99);
    }

    #[test]
    fn unit_norm_holds_for_random_signals() {
        let cfg = SpectralEmbedderConfig::default();
        let mut state = 0x12345678u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..5 {
            let samples: Vec<f64> = (0..8000).map(|_| next()).collect();
            let emb = embed_spectral(&signal(samples, 8000), &cfg).unwrap();
            let norm: f64 = emb.values.iter().map(|v| v * v).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_the_input_leaves_std_features_unchanged() {
        // scaling shifts every log energy by the same constant, so the std
        // half of the pooled features stays put (up to log rounding)
        let cfg = SpectralEmbedderConfig::default();
        let base = tone(620.0, 16000, 1.0, 0.3);
        let doubled: Vec<f64> = base.iter().map(|v| v * 2.0).collect();

        let p1 = pooled_features(&signal(base, 16000), &cfg).unwrap();
        let p2 = pooled_features(&signal(doubled, 16000), &cfg).unwrap();
        for m in cfg.n_mels..2 * cfg.n_mels {
            assert!((p1[m] - p2[m]).abs() < 1e-12, "std band {m} moved");
        }
    }

    #[test]
    fn too_short_signal_is_rejected() {
        let cfg = SpectralEmbedderConfig::default();
        let sig = signal(vec![0.1; 100], 16000); // frame is 400 samples
        assert_eq!(embed_spectral(&sig, &cfg), Err(EmbedError::SignalTooShort));
    }

    #[test]
    fn truncating_config_still_yields_unit_norm() {
        let cfg = SpectralEmbedderConfig {
            output_dim: 32, // below 2 * n_mels: truncation path
            ..SpectralEmbedderConfig::default()
        };
        let sig = signal(tone(500.0, 8000, 0.5, 0.4), 8000);
        let emb = embed_spectral(&sig, &cfg).unwrap();
        assert_eq!(emb.values.len(), 32);
        let norm: f64 = emb.values.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn set_rejects_mixed_methods_and_duplicates() {
        let entry = |method, index| EmbeddingVector {
            values: vec![0.0, 1.0],
            speaker_id: "a".to_string(),
            index,
            method,
        };
        let mut set = EmbeddingSet::new(2, CombinationMethod::Sum);
        set.push(entry(CombinationMethod::Sum, 1)).unwrap();
        assert!(matches!(
            set.push(entry(CombinationMethod::Mono, 2)),
            Err(EmbedError::MethodMismatch { .. })
        ));
        assert!(matches!(
            set.push(entry(CombinationMethod::Sum, 1)),
            Err(EmbedError::DuplicateKey { .. })
        ));
        let short = EmbeddingVector {
            values: vec![0.0],
            speaker_id: "b".to_string(),
            index: 1,
            method: CombinationMethod::Sum,
        };
        assert!(matches!(
            set.push(short),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }
}
