//! Per-speaker full-covariance Gaussian mixtures.
//!
//! One mixture is fitted per speaker with K-means initialized EM; test
//! vectors are scored under every model and assigned to the speaker with the
//! maximum log-likelihood. Responsibilities and scores stay in log space
//! throughout, and every covariance carries a diagonal ridge so the
//! few-samples-in-many-dimensions regime stays positive definite.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::embed::EmbeddingVector;
use crate::kmeans;
use crate::linalg;
use crate::{derive_seed, fnv1a64};

const LN_2PI: f64 = 1.8378770664093453; // ln(2*pi)

/// Knobs of a per-speaker mixture fit.
#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    /// Mixture components per speaker.
    pub n_components: usize,
    /// Upper bound on EM update steps.
    pub max_iterations: usize,
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    pub convergence_tol: f64,
    /// Added to every covariance diagonal at init and after each M-step.
    pub covariance_ridge: f64,
    pub rng_seed: u64,
    /// Lloyd restarts; the one with the lowest within-cluster sum of squares wins.
    pub kmeans_restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_components: 1,
            max_iterations: 100,
            convergence_tol: 1e-3,
            covariance_ridge: 1e-6,
            rng_seed: 0,
            kmeans_restarts: 10,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<(), FitError> {
        if self.n_components == 0
            || self.max_iterations == 0
            || self.convergence_tol <= 0.0
            || self.convergence_tol.is_nan()
            || self.covariance_ridge < 0.0
            || self.kmeans_restarts == 0
        {
            return Err(FitError::BadConfig);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("fit configuration violates its invariants")]
    BadConfig,
    #[error("need at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("speaker {speaker_id} has {got} vectors but {needed} are required")]
    UnderSampledSpeaker {
        speaker_id: String,
        needed: usize,
        got: usize,
    },
    #[error("training vectors disagree on dimension: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training vectors contain non-finite values")]
    NonFinite,
    #[error("mixture weights must be non-negative and sum to 1")]
    InvalidWeights,
    #[error("covariance matrix is not symmetric")]
    NotSymmetric,
    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("model bank must be non-empty")]
    EmptyBank,
    #[error("duplicate speaker id in bank: {speaker_id}")]
    DuplicateSpeaker { speaker_id: String },
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("vector has dimension {found} but the model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// K-means derived starting point for EM: cluster fractions, centroids, and
/// per-cluster sample covariances (plus ridge).
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureInit {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covariances: Vec<Vec<f64>>,
}

#[derive(Clone)]
struct ComponentScorer {
    log_weight: f64,
    mean: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl ComponentScorer {
    fn new(weight: f64, mean: Vec<f64>, covariance: &[f64], dim: usize) -> Result<Self, FitError> {
        let chol = linalg::cholesky(covariance, dim).ok_or(FitError::NotPositiveDefinite)?;
        let log_det = linalg::log_det_from_cholesky(&chol, dim);
        Ok(ComponentScorer {
            log_weight: if weight > 0.0 {
                libm::log(weight)
            } else {
                f64::NEG_INFINITY
            },
            mean,
            chol,
            log_norm: -0.5 * (dim as f64 * LN_2PI + log_det),
        })
    }

    /// `log(alpha * phi(x))`, using `scratch` as a dim-sized work buffer.
    fn log_weighted_density(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        if self.log_weight == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let dim = self.mean.len();
        for ((slot, &xv), &mv) in scratch.iter_mut().zip(x).zip(&self.mean) {
            *slot = xv - mv;
        }
        linalg::forward_substitute(&self.chol, dim, scratch);
        let maha: f64 = scratch.iter().map(|v| v * v).sum();
        self.log_weight + self.log_norm - 0.5 * maha
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&t| libm::exp(t - max)).sum();
    max + libm::log(sum)
}

/// One fitted speaker mixture: weights on the simplex, means, and symmetric
/// positive-definite covariances. Cholesky factors are cached at
/// construction, so scoring never refactorizes.
#[derive(Clone)]
pub struct SpeakerModel {
    speaker_id: String,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
    dim: usize,
    scorers: Vec<ComponentScorer>,
}

impl core::fmt::Debug for SpeakerModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("SpeakerModel")
            .field("speaker_id", &self.speaker_id)
            .field("n_components", &self.weights.len())
            .field("dim", &self.dim)
            .finish()
    }
}

impl SpeakerModel {
    /// Validates the mixture invariants and caches the per-component
    /// Cholesky factors.
    pub fn new(
        speaker_id: String,
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Vec<f64>>,
    ) -> Result<Self, FitError> {
        let m = weights.len();
        if m == 0 || means.len() != m || covariances.len() != m {
            return Err(FitError::InvalidWeights);
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(FitError::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0 || w.is_nan()) || libm::fabs(sum - 1.0) > 1e-12 {
            return Err(FitError::InvalidWeights);
        }
        for mean in &means {
            if mean.len() != dim {
                return Err(FitError::DimensionMismatch {
                    expected: dim,
                    found: mean.len(),
                });
            }
        }
        for cov in &covariances {
            if cov.len() != dim * dim {
                return Err(FitError::DimensionMismatch {
                    expected: dim * dim,
                    found: cov.len(),
                });
            }
            for a in 0..dim {
                for b in (a + 1)..dim {
                    let diff = libm::fabs(cov[a * dim + b] - cov[b * dim + a]);
                    if diff > 1e-8 * (1.0 + libm::fabs(cov[a * dim + b])) {
                        return Err(FitError::NotSymmetric);
                    }
                }
            }
        }
        let mut scorers = Vec::with_capacity(m);
        for c in 0..m {
            scorers.push(ComponentScorer::new(
                weights[c],
                means[c].clone(),
                &covariances[c],
                dim,
            )?);
        }
        Ok(SpeakerModel {
            speaker_id,
            weights,
            means,
            covariances,
            dim,
            scorers,
        })
    }

    pub fn speaker_id(&self) -> &str {
        &self.speaker_id
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    /// Row-major `dim * dim` covariance per component.
    pub fn covariances(&self) -> &[Vec<f64>] {
        &self.covariances
    }

    /// `ln f(x)` of the mixture density at `x`.
    ///
    /// Finite for every finite input: the densities are evaluated in log
    /// space via the cached Cholesky factors, so nothing underflows.
    pub fn log_density(&self, x: &[f64]) -> Result<f64, ScoreError> {
        if x.len() != self.dim {
            return Err(ScoreError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        let mut scratch = vec![0.0; self.dim];
        let terms: Vec<f64> = self
            .scorers
            .iter()
            .map(|s| s.log_weighted_density(x, &mut scratch))
            .collect();
        Ok(log_sum_exp(&terms))
    }
}

/// An ordered collection of speaker models with unique ids.
#[derive(Clone, Debug)]
pub struct ModelBank {
    models: Vec<SpeakerModel>,
}

impl ModelBank {
    pub fn new(models: Vec<SpeakerModel>) -> Result<Self, FitError> {
        if models.is_empty() {
            return Err(FitError::EmptyBank);
        }
        for (i, model) in models.iter().enumerate() {
            if models[..i].iter().any(|m| m.speaker_id == model.speaker_id) {
                return Err(FitError::DuplicateSpeaker {
                    speaker_id: model.speaker_id.clone(),
                });
            }
        }
        Ok(ModelBank { models })
    }

    pub fn models(&self) -> &[SpeakerModel] {
        &self.models
    }

    /// Log-density of `x` under every model, in bank order.
    pub fn log_densities(&self, x: &[f64]) -> Result<Vec<f64>, ScoreError> {
        self.models.iter().map(|m| m.log_density(x)).collect()
    }

    /// Speaker with the maximum log-likelihood for `x`.
    ///
    /// Exact ties resolve to the smallest speaker id, so the decision does
    /// not depend on bank order.
    pub fn classify(&self, x: &[f64]) -> Result<&str, ScoreError> {
        let mut best: Option<(f64, &str)> = None;
        for model in &self.models {
            let ll = model.log_density(x)?;
            best = Some(match best {
                None => (ll, model.speaker_id()),
                Some((best_ll, best_id)) => {
                    if ll > best_ll || (ll == best_ll && model.speaker_id() < best_id) {
                        (ll, model.speaker_id())
                    } else {
                        (best_ll, best_id)
                    }
                }
            });
        }
        Ok(best.expect("bank is non-empty by construction").1)
    }
}

fn check_data(vectors: &[Vec<f64>]) -> Result<usize, FitError> {
    let dim = match vectors.first() {
        Some(v) => v.len(),
        None => return Err(FitError::TooFewVectors { needed: 1, got: 0 }),
    };
    for v in vectors {
        if v.len() != dim {
            return Err(FitError::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(FitError::NonFinite);
        }
    }
    Ok(dim)
}

/// Weighted biased covariance of `data` around `mean`, mirrored so the
/// result is exactly symmetric, with `ridge` added to the diagonal.
fn weighted_covariance(
    data: &[Vec<f64>],
    resp: impl Fn(usize) -> f64,
    mean: &[f64],
    total: f64,
    ridge: f64,
) -> Vec<f64> {
    let dim = mean.len();
    let mut cov = vec![0.0; dim * dim];
    let mut diff = vec![0.0; dim];
    for (i, row) in data.iter().enumerate() {
        let r = resp(i);
        if r == 0.0 {
            continue;
        }
        for ((slot, &x), &m) in diff.iter_mut().zip(row).zip(mean) {
            *slot = x - m;
        }
        for a in 0..dim {
            let ra = r * diff[a];
            for b in a..dim {
                cov[a * dim + b] += ra * diff[b];
            }
        }
    }
    let denom = total.max(1e-300);
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / denom;
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }
    for a in 0..dim {
        cov[a * dim + a] += ridge;
    }
    cov
}

/// Seeded K-means initialization: best of `kmeans_restarts` Lloyd runs by
/// within-cluster sum of squares; weights are cluster fractions, means the
/// centroids, covariances the per-cluster sample covariances plus ridge.
pub fn kmeans_init(vectors: &[Vec<f64>], config: &FitConfig) -> Result<MixtureInit, FitError> {
    config.validate()?;
    let dim = check_data(vectors)?;
    let k = config.n_components;
    if vectors.len() < k {
        return Err(FitError::TooFewVectors {
            needed: k,
            got: vectors.len(),
        });
    }

    let mut best: Option<kmeans::KmeansRun> = None;
    for restart in 0..config.kmeans_restarts {
        let run = kmeans::lloyd(
            vectors,
            k,
            derive_seed(config.rng_seed, restart as u64),
            100,
        );
        if best.as_ref().is_none_or(|b| run.wcss < b.wcss) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");

    let n = vectors.len() as f64;
    let mut counts = vec![0usize; k];
    for &a in &run.assignments {
        counts[a] += 1;
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mut covariances = Vec::with_capacity(k);
    for (c, (centroid, &count)) in run.centroids.iter().zip(&counts).enumerate() {
        covariances.push(weighted_covariance(
            vectors,
            |i| if run.assignments[i] == c { 1.0 } else { 0.0 },
            centroid,
            count as f64,
            config.covariance_ridge,
        ));
    }
    let _ = dim;
    Ok(MixtureInit {
        weights,
        means: run.centroids,
        covariances,
    })
}

/// EM fit with the per-iteration total log-likelihood trace.
///
/// The trace is non-decreasing up to numerical slack; the fit stops when the
/// mean per-sample log-likelihood improves by less than the configured
/// tolerance or after `max_iterations` update steps.
pub fn em_fit_traced(
    speaker_id: &str,
    vectors: &[Vec<f64>],
    config: &FitConfig,
) -> Result<(SpeakerModel, Vec<f64>), FitError> {
    config.validate()?;
    let dim = check_data(vectors)?;
    let init = kmeans_init(vectors, config)?;

    let m = config.n_components;
    let n = vectors.len();
    let nf = n as f64;
    let mut weights = init.weights;
    let mut means = init.means;
    let mut covariances = init.covariances;

    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * m];
    let mut scratch = vec![0.0; dim];

    loop {
        let mut scorers = Vec::with_capacity(m);
        for c in 0..m {
            scorers.push(ComponentScorer::new(
                weights[c],
                means[c].clone(),
                &covariances[c],
                dim,
            )?);
        }

        let mut ll = 0.0;
        for (i, x) in vectors.iter().enumerate() {
            let row = &mut resp[i * m..(i + 1) * m];
            for (slot, scorer) in row.iter_mut().zip(&scorers) {
                *slot = scorer.log_weighted_density(x, &mut scratch);
            }
            let lse = log_sum_exp(row);
            ll += lse;
            for slot in row.iter_mut() {
                *slot = libm::exp(*slot - lse);
            }
        }
        trace.push(ll);

        if trace.len() >= 2 {
            let improvement = (ll - trace[trace.len() - 2]) / nf;
            if improvement < config.convergence_tol {
                break;
            }
        }
        if trace.len() > config.max_iterations {
            break;
        }

        for c in 0..m {
            let nc: f64 = (0..n).map(|i| resp[i * m + c]).sum();
            let nc_safe = nc.max(1e-300);
            weights[c] = nc / nf;
            let mean = &mut means[c];
            mean.iter_mut().for_each(|v| *v = 0.0);
            for (i, x) in vectors.iter().enumerate() {
                let r = resp[i * m + c];
                for (slot, &v) in mean.iter_mut().zip(x) {
                    *slot += r * v;
                }
            }
            mean.iter_mut().for_each(|v| *v /= nc_safe);
            covariances[c] = weighted_covariance(
                vectors,
                |i| resp[i * m + c],
                mean,
                nc,
                config.covariance_ridge,
            );
        }
    }

    let model = SpeakerModel::new(speaker_id.into(), weights, means, covariances)?;
    Ok((model, trace))
}

/// EM fit of one speaker mixture. See [`em_fit_traced`] for the variant that
/// also reports the log-likelihood trajectory.
pub fn em_fit(
    speaker_id: &str,
    vectors: &[Vec<f64>],
    config: &FitConfig,
) -> Result<SpeakerModel, FitError> {
    em_fit_traced(speaker_id, vectors, config).map(|(model, _)| model)
}

/// Fits one mixture per speaker and assembles the bank in ascending speaker
/// id order. Each fit derives its own seed from the speaker id, so the
/// result does not depend on evaluation order.
pub fn train_bank(
    sets: &BTreeMap<String, Vec<EmbeddingVector>>,
    config: &FitConfig,
) -> Result<ModelBank, FitError> {
    config.validate()?;
    let needed = config.n_components.max(2);
    let mut dim: Option<usize> = None;
    let mut models = Vec::with_capacity(sets.len());
    for (speaker_id, vectors) in sets {
        if vectors.len() < needed {
            return Err(FitError::UnderSampledSpeaker {
                speaker_id: speaker_id.clone(),
                needed,
                got: vectors.len(),
            });
        }
        let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
        if let Some(expected) = dim {
            if rows[0].len() != expected {
                return Err(FitError::DimensionMismatch {
                    expected,
                    found: rows[0].len(),
                });
            }
        } else {
            dim = Some(rows[0].len());
        }
        let per_speaker = FitConfig {
            rng_seed: derive_seed(config.rng_seed, fnv1a64(speaker_id.as_bytes())),
            ..config.clone()
        };
        models.push(em_fit(speaker_id, &rows, &per_speaker)?);
    }
    ModelBank::new(models)
}
