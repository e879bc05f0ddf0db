//! The declarative experiment configuration.
//!
//! A single TOML file drives every subcommand. The only mandatory fields are
//! the master `seed` and the `methods` list; all section seeds are derived
//! from the master seed, so a config never falls back to wall-clock
//! randomness.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use stereoclust_core::channel::CombinationMethod;
use stereoclust_core::embed::SpectralEmbedderConfig;
use stereoclust_core::experiment::SplitPlan;
use stereoclust_core::gmm::FitConfig;
use stereoclust_core::{derive_seed, fnv1a64};

use crate::synth::SynthConfig;

// seed stream tags for the per-stage RNGs derived from the master seed
const STREAM_SYNTH: u64 = 0x53594e54; // "SYNT"
const STREAM_FIT: u64 = 0x46495420; // "FIT "
const STREAM_PLAN: u64 = 0x504c414e; // "PLAN"

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    output_dir: Option<PathBuf>,
    methods: Vec<String>,
    input: Option<RawInput>,
    #[serde(default)]
    embedder: RawEmbedder,
    #[serde(default)]
    fit: RawFit,
    #[serde(default)]
    plan: RawPlan,
    #[serde(default)]
    synth: RawSynth,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    audio: Vec<PathBuf>,
    manifests: Vec<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEmbedder {
    mode: String,
    n_mels: usize,
    frame_length: f64,
    frame_hop: f64,
    fft_size: Option<usize>,
    output_dim: usize,
    external_files: Option<BTreeMap<String, PathBuf>>,
}

impl Default for RawEmbedder {
    fn default() -> Self {
        let spectral = SpectralEmbedderConfig::default();
        RawEmbedder {
            mode: "spectral".into(),
            n_mels: spectral.n_mels,
            frame_length: spectral.frame_length,
            frame_hop: spectral.frame_hop,
            fft_size: spectral.fft_size,
            output_dim: spectral.output_dim,
            external_files: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawFit {
    n_components: usize,
    max_iterations: usize,
    convergence_tol: f64,
    covariance_ridge: f64,
    kmeans_restarts: usize,
}

impl Default for RawFit {
    fn default() -> Self {
        let fit = FitConfig::default();
        RawFit {
            n_components: fit.n_components,
            max_iterations: fit.max_iterations,
            convergence_tol: fit.convergence_tol,
            covariance_ridge: fit.covariance_ridge,
            kmeans_restarts: fit.kmeans_restarts,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawPlan {
    train_fraction: f64,
    repeats: usize,
    protocol: String,
    kfold_k: usize,
}

impl Default for RawPlan {
    fn default() -> Self {
        RawPlan {
            train_fraction: 0.7,
            repeats: 50,
            protocol: "repeated-split".into(),
            kfold_k: 10,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawSynth {
    n_speakers: usize,
    seconds_per_speaker: u32,
    sample_rate: u32,
    base_hz: f64,
    spacing: f64,
    pole_radius: f64,
    noise_floor: f64,
}

impl Default for RawSynth {
    fn default() -> Self {
        let synth = SynthConfig::default();
        RawSynth {
            n_speakers: synth.n_speakers,
            seconds_per_speaker: synth.seconds_per_speaker,
            sample_rate: synth.sample_rate,
            base_hz: synth.base_hz,
            spacing: synth.spacing,
            pole_radius: synth.pole_radius,
            noise_floor: synth.noise_floor,
        }
    }
}

/// Where embeddings come from.
#[derive(Debug, Clone)]
pub enum EmbedderMode {
    /// Built-in deterministic embedder over the decoded audio.
    Spectral(SpectralEmbedderConfig),
    /// Pre-computed DVEC files, one per method.
    External(BTreeMap<CombinationMethod, PathBuf>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    RepeatedSplit,
    KFold(usize),
}

/// Paired audio/manifest inputs.
#[derive(Debug, Clone)]
pub struct InputPaths {
    pub audio: Vec<PathBuf>,
    pub manifests: Vec<PathBuf>,
}

/// A fully validated experiment configuration with derived seeds.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub methods: Vec<CombinationMethod>,
    pub input: Option<InputPaths>,
    pub embedder: EmbedderMode,
    pub fit: FitConfig,
    pub plan: SplitPlan,
    pub protocol: Protocol,
    pub synth: SynthConfig,
    /// FNV-1a of the raw config file plus any command-line overrides;
    /// stamped into every report for provenance.
    pub config_hash: u64,
}

impl ExperimentConfig {
    pub fn load(
        path: &Path,
        out_override: Option<PathBuf>,
        seed_override: Option<u64>,
    ) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let raw: RawConfig =
            toml::from_str(&String::from_utf8_lossy(&bytes)).map_err(|source| {
                ConfigError::Toml {
                    path: path.to_path_buf(),
                    source,
                }
            })?;

        let seed = seed_override.unwrap_or(raw.seed);
        let mut config_hash = fnv1a64(&bytes);
        if let Some(s) = seed_override {
            config_hash ^= fnv1a64(&s.to_le_bytes());
        }

        if raw.methods.is_empty() {
            return Err(ConfigError::Invalid("methods must not be empty".into()));
        }
        let mut methods = Vec::new();
        for name in &raw.methods {
            let method: CombinationMethod = name.parse().map_err(|_| {
                ConfigError::Invalid(format!(
                    "unknown method {name:?} (expected MONO, SUM, HSTACK or SUMDIF)"
                ))
            })?;
            if methods.contains(&method) {
                return Err(ConfigError::Invalid(format!("duplicate method {name}")));
            }
            methods.push(method);
        }
        methods.sort();

        let output_dir = out_override.or(raw.output_dir).ok_or_else(|| {
            ConfigError::Invalid("output_dir missing (set it or pass --out)".into())
        })?;

        let input = match raw.input {
            Some(input) => {
                if input.audio.len() != input.manifests.len() {
                    return Err(ConfigError::Invalid(format!(
                        "{} audio files but {} manifests",
                        input.audio.len(),
                        input.manifests.len()
                    )));
                }
                Some(InputPaths {
                    audio: input.audio,
                    manifests: input.manifests,
                })
            }
            None => None,
        };

        let embedder = match raw.embedder.mode.as_str() {
            "spectral" => EmbedderMode::Spectral(SpectralEmbedderConfig {
                n_mels: raw.embedder.n_mels,
                frame_length: raw.embedder.frame_length,
                frame_hop: raw.embedder.frame_hop,
                fft_size: raw.embedder.fft_size,
                output_dim: raw.embedder.output_dim,
            }),
            "external" => {
                let files = raw.embedder.external_files.ok_or_else(|| {
                    ConfigError::Invalid("external mode needs [embedder.external_files]".into())
                })?;
                let mut typed = BTreeMap::new();
                for (name, file) in files {
                    let method: CombinationMethod = name.parse().map_err(|_| {
                        ConfigError::Invalid(format!("unknown method {name:?} in external_files"))
                    })?;
                    typed.insert(method, file);
                }
                for method in &methods {
                    if !typed.contains_key(method) {
                        return Err(ConfigError::Invalid(format!(
                            "external mode: no embedding file for {method}"
                        )));
                    }
                }
                EmbedderMode::External(typed)
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "embedder mode must be \"spectral\" or \"external\", got {other:?}"
                )))
            }
        };

        if !(raw.plan.train_fraction > 0.0 && raw.plan.train_fraction < 1.0) {
            return Err(ConfigError::Invalid(
                "plan.train_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        if raw.plan.repeats == 0 {
            return Err(ConfigError::Invalid(
                "plan.repeats must be at least 1".into(),
            ));
        }
        let protocol = match raw.plan.protocol.as_str() {
            "repeated-split" => Protocol::RepeatedSplit,
            "kfold" => {
                if raw.plan.kfold_k < 2 {
                    return Err(ConfigError::Invalid(
                        "plan.kfold_k must be at least 2".into(),
                    ));
                }
                Protocol::KFold(raw.plan.kfold_k)
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "plan.protocol must be \"repeated-split\" or \"kfold\", got {other:?}"
                )))
            }
        };

        Ok(ExperimentConfig {
            seed,
            output_dir,
            methods,
            input,
            embedder,
            fit: FitConfig {
                n_components: raw.fit.n_components,
                max_iterations: raw.fit.max_iterations,
                convergence_tol: raw.fit.convergence_tol,
                covariance_ridge: raw.fit.covariance_ridge,
                rng_seed: derive_seed(seed, STREAM_FIT),
                kmeans_restarts: raw.fit.kmeans_restarts,
            },
            plan: SplitPlan {
                train_fraction: raw.plan.train_fraction,
                rng_seed: derive_seed(seed, STREAM_PLAN),
                repeats: raw.plan.repeats,
            },
            protocol,
            synth: SynthConfig {
                n_speakers: raw.synth.n_speakers,
                seconds_per_speaker: raw.synth.seconds_per_speaker,
                sample_rate: raw.synth.sample_rate,
                seed: derive_seed(seed, STREAM_SYNTH),
                base_hz: raw.synth.base_hz,
                spacing: raw.synth.spacing,
                pole_radius: raw.synth.pole_radius,
                noise_floor: raw.synth.noise_floor,
            },
            config_hash,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(text: &str) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        file.write_all(text.as_bytes()).unwrap();
        file
    }

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let file = write_config(
            r#"
seed = 42
output_dir = "out"
methods = ["MONO", "SUMDIF"]
"#,
        );
        let config = ExperimentConfig::load(file.path(), None, None).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(
            config.methods,
            vec![CombinationMethod::Mono, CombinationMethod::Sumdif]
        );
        assert_eq!(config.plan.repeats, 50);
        assert_eq!(config.fit.n_components, 1);
        assert!(matches!(config.embedder, EmbedderMode::Spectral(_)));
        assert!(matches!(config.protocol, Protocol::RepeatedSplit));
        // derived seeds differ per stage but are functions of the master
        assert_ne!(config.fit.rng_seed, config.plan.rng_seed);
    }

    #[test]
    fn seed_override_changes_derived_seeds_and_hash() {
        let file = write_config("seed = 1\noutput_dir = \"o\"\nmethods = [\"MONO\"]\n");
        let base = ExperimentConfig::load(file.path(), None, None).unwrap();
        let overridden = ExperimentConfig::load(file.path(), None, Some(2)).unwrap();
        assert_ne!(base.fit.rng_seed, overridden.fit.rng_seed);
        assert_ne!(base.config_hash, overridden.config_hash);
    }

    #[test]
    fn external_mode_requires_every_method() {
        let file = write_config(
            r#"
seed = 7
output_dir = "out"
methods = ["MONO", "SUM"]

[embedder]
mode = "external"

[embedder.external_files]
MONO = "mono.dvec"
"#,
        );
        let err = ExperimentConfig::load(file.path(), None, None).unwrap_err();
        assert!(err.to_string().contains("no embedding file for SUM"));
    }

    #[test]
    fn bad_method_names_are_rejected() {
        let file = write_config("seed = 1\noutput_dir = \"o\"\nmethods = [\"mono\"]\n");
        assert!(ExperimentConfig::load(file.path(), None, None).is_err());
    }

    #[test]
    fn missing_seed_is_a_parse_error() {
        let file = write_config("output_dir = \"o\"\nmethods = [\"MONO\"]\n");
        assert!(matches!(
            ExperimentConfig::load(file.path(), None, None),
            Err(ConfigError::Toml { .. })
        ));
    }

    #[test]
    fn out_override_wins() {
        let file = write_config("seed = 1\nmethods = [\"MONO\"]\n");
        let config =
            ExperimentConfig::load(file.path(), Some(PathBuf::from("elsewhere")), None).unwrap();
        assert_eq!(config.output_dir, PathBuf::from("elsewhere"));
    }
}
