//! The repeated train/test experiment over the four feature variants.
//!
//! Within a run every method sees the same per-speaker train/test split, so
//! method comparisons are paired. Error rates are aggregated into per-method
//! means, z-scores against the pooled population of all runs of all methods,
//! and pairwise Mann-Whitney tests.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::CombinationMethod;
use crate::embed::EmbeddingVector;
use crate::gmm::{train_bank, FitConfig, FitError, ScoreError};
use crate::stats::{self, EvalError};
use crate::{derive_seed, fnv1a64};

/// Repeated random split plan: `train_fraction` of each speaker's segments
/// go to training, the rest to test, `repeats` times.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPlan {
    pub train_fraction: f64,
    pub rng_seed: u64,
    pub repeats: usize,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            train_fraction: 0.7,
            rng_seed: 0,
            repeats: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("split plan violates its invariants (0 < train_fraction < 1, repeats >= 1)")]
    BadPlan,
    #[error("speaker {speaker_id} has only {got} segments; at least {needed} are required")]
    TooFewSegments {
        speaker_id: String,
        needed: usize,
        got: usize,
    },
}

/// Train and test segment indices for one speaker.
pub type Split = BTreeMap<String, (Vec<usize>, Vec<usize>)>;

/// Seeded 70/30-style split of each speaker's segment indices.
///
/// The shuffle seed is derived from the plan seed, the run index and the
/// speaker id, so the result is independent of both evaluation order and
/// roster iteration. `floor(train_fraction * t)` indices train; a guard
/// keeps at least one index on each side.
pub fn split_train_test(
    indices: &BTreeMap<String, Vec<usize>>,
    plan: &SplitPlan,
    run: usize,
) -> Result<Split, SplitError> {
    if !(plan.train_fraction > 0.0 && plan.train_fraction < 1.0) || plan.repeats == 0 {
        return Err(SplitError::BadPlan);
    }
    let mut out = Split::new();
    for (speaker_id, speaker_indices) in indices {
        let t = speaker_indices.len();
        if t < 2 {
            return Err(SplitError::TooFewSegments {
                speaker_id: speaker_id.clone(),
                needed: 2,
                got: t,
            });
        }
        let seed = derive_seed(
            derive_seed(plan.rng_seed, run as u64),
            fnv1a64(speaker_id.as_bytes()),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = speaker_indices.clone();
        shuffled.shuffle(&mut rng);

        let mut n_train = libm::floor(plan.train_fraction * t as f64) as usize;
        n_train = n_train.clamp(1, t - 1);
        let mut train = shuffled[..n_train].to_vec();
        let mut test = shuffled[n_train..].to_vec();
        train.sort_unstable();
        test.sort_unstable();
        out.insert(speaker_id.clone(), (train, test));
    }
    Ok(out)
}

/// Per-speaker (train, test) index pairs for each of `k` folds of a seeded
/// shuffle. Every speaker needs at least `k` segments.
pub fn kfold_splits(
    indices: &BTreeMap<String, Vec<usize>>,
    k: usize,
    rng_seed: u64,
) -> Result<Vec<Split>, SplitError> {
    if k < 2 {
        return Err(SplitError::BadPlan);
    }
    let mut shuffles: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (speaker_id, speaker_indices) in indices {
        if speaker_indices.len() < k {
            return Err(SplitError::TooFewSegments {
                speaker_id: speaker_id.clone(),
                needed: k,
                got: speaker_indices.len(),
            });
        }
        let seed = derive_seed(rng_seed, fnv1a64(speaker_id.as_bytes()));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shuffled = speaker_indices.clone();
        shuffled.shuffle(&mut rng);
        shuffles.insert(speaker_id.clone(), shuffled);
    }

    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let mut split = Split::new();
        for (speaker_id, shuffled) in &shuffles {
            let t = shuffled.len();
            // fold boundaries spread the remainder over the first folds
            let start = fold * t / k;
            let end = (fold + 1) * t / k;
            let mut test = shuffled[start..end].to_vec();
            let mut train: Vec<usize> = shuffled[..start]
                .iter()
                .chain(&shuffled[end..])
                .copied()
                .collect();
            train.sort_unstable();
            test.sort_unstable();
            split.insert(speaker_id.clone(), (train, test));
        }
        folds.push(split);
    }
    Ok(folds)
}

/// Predictions and ground truth of one (method, run) evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub method: CombinationMethod,
    pub run_index: usize,
    pub predictions: Vec<String>,
    pub truth: Vec<String>,
    pub error_rate: f64,
}

/// Aggregated outcome of the full experiment.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExperimentReport {
    pub per_method_mean_error: BTreeMap<CombinationMethod, f64>,
    pub run_results: Vec<RunResult>,
    /// Per-method z-scores of the run error rates, standardized against the
    /// pooled population of all runs of all methods. Empty when that
    /// population has zero variance.
    pub zscores: BTreeMap<CombinationMethod, Vec<f64>>,
    /// Two-sided Mann-Whitney p-values per unordered method pair, keyed by
    /// the methods in ascending order. Degenerate pairs are omitted.
    pub pairwise_p: BTreeMap<(CombinationMethod, CombinationMethod), f64>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error("no methods in the corpus")]
    NoMethods,
    #[error("roster mismatch for method {method}: {detail}")]
    RosterMismatch {
        method: CombinationMethod,
        detail: String,
    },
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Score(#[from] ScoreError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Embeddings of one method, grouped per speaker and sorted by segment index.
pub type MethodCorpus = BTreeMap<String, Vec<EmbeddingVector>>;

fn segment_indices(corpus: &MethodCorpus) -> BTreeMap<String, Vec<usize>> {
    corpus
        .iter()
        .map(|(speaker, vectors)| {
            (
                speaker.clone(),
                vectors.iter().map(|v| v.index).collect::<Vec<usize>>(),
            )
        })
        .collect()
}

fn check_rosters(
    corpus: &BTreeMap<CombinationMethod, MethodCorpus>,
) -> Result<BTreeMap<String, Vec<usize>>, ExperimentError> {
    let mut methods = corpus.iter();
    let (_, reference) = methods.next().ok_or(ExperimentError::NoMethods)?;
    let reference_indices = segment_indices(reference);
    for (&method, method_corpus) in corpus.iter().skip(1) {
        let indices = segment_indices(method_corpus);
        if let Some(speaker) = reference_indices.keys().find(|s| !indices.contains_key(*s)) {
            return Err(ExperimentError::RosterMismatch {
                method,
                detail: format!("speaker {speaker} is missing"),
            });
        }
        if let Some(speaker) = indices.keys().find(|s| !reference_indices.contains_key(*s)) {
            return Err(ExperimentError::RosterMismatch {
                method,
                detail: format!("speaker {speaker} is not in the other methods"),
            });
        }
        for (speaker, reference_list) in &reference_indices {
            if indices[speaker] != *reference_list {
                return Err(ExperimentError::RosterMismatch {
                    method,
                    detail: format!("segment indices differ for speaker {speaker}"),
                });
            }
        }
    }
    Ok(reference_indices)
}

fn evaluate_split(
    method: CombinationMethod,
    method_corpus: &MethodCorpus,
    split: &Split,
    fit: &FitConfig,
    run_index: usize,
) -> Result<RunResult, ExperimentError> {
    let mut train_sets: BTreeMap<String, Vec<EmbeddingVector>> = BTreeMap::new();
    for (speaker, vectors) in method_corpus {
        let (train_idx, _) = &split[speaker];
        let selected: Vec<EmbeddingVector> = vectors
            .iter()
            .filter(|v| train_idx.binary_search(&v.index).is_ok())
            .cloned()
            .collect();
        train_sets.insert(speaker.clone(), selected);
    }
    let bank = train_bank(&train_sets, fit)?;

    let mut predictions = Vec::new();
    let mut truth = Vec::new();
    for (speaker, vectors) in method_corpus {
        let (_, test_idx) = &split[speaker];
        for vector in vectors {
            if test_idx.binary_search(&vector.index).is_ok() {
                predictions.push(String::from(bank.classify(&vector.values)?));
                truth.push(speaker.clone());
            }
        }
    }
    let error_rate = stats::error_rate(&predictions, &truth)?;
    Ok(RunResult {
        method,
        run_index,
        predictions,
        truth,
        error_rate,
    })
}

fn aggregate(run_results: Vec<RunResult>) -> Result<ExperimentReport, ExperimentError> {
    let mut per_method_runs: BTreeMap<CombinationMethod, Vec<f64>> = BTreeMap::new();
    for result in &run_results {
        per_method_runs
            .entry(result.method)
            .or_default()
            .push(result.error_rate);
    }
    let per_method_mean_error: BTreeMap<CombinationMethod, f64> = per_method_runs
        .iter()
        .map(|(&method, rates)| (method, rates.iter().sum::<f64>() / rates.len() as f64))
        .collect();

    // pooled z-scores: one population across every (method, run) error rate
    let pooled: Vec<f64> = per_method_runs.values().flatten().copied().collect();
    let mut zscores: BTreeMap<CombinationMethod, Vec<f64>> = BTreeMap::new();
    if let Ok(standardized) = stats::zscore(&pooled) {
        let mut cursor = 0;
        for (&method, rates) in &per_method_runs {
            zscores.insert(method, standardized[cursor..cursor + rates.len()].to_vec());
            cursor += rates.len();
        }
    }

    let mut pairwise_p = BTreeMap::new();
    let methods: Vec<CombinationMethod> = zscores.keys().copied().collect();
    for (i, &first) in methods.iter().enumerate() {
        for &second in &methods[i + 1..] {
            match stats::mann_whitney_u(&zscores[&first], &zscores[&second]) {
                Ok(summary) => {
                    pairwise_p.insert((first, second), summary.p_value);
                }
                Err(EvalError::Degenerate) => {}
                Err(other) => return Err(other.into()),
            }
        }
    }

    Ok(ExperimentReport {
        per_method_mean_error,
        run_results,
        zscores,
        pairwise_p,
    })
}

/// Runs the paired repeated-split experiment.
///
/// All methods must carry identical speaker rosters and segment indices;
/// within a run every method is trained and tested on the same split. The
/// per-run fit seed is derived from `fit.rng_seed` and the run index, so the
/// report is a pure function of its inputs.
pub fn run_experiment(
    corpus: &BTreeMap<CombinationMethod, MethodCorpus>,
    plan: &SplitPlan,
    fit: &FitConfig,
) -> Result<ExperimentReport, ExperimentError> {
    let indices = check_rosters(corpus)?;
    let mut run_results = Vec::new();
    for run in 0..plan.repeats {
        let split = split_train_test(&indices, plan, run)?;
        let fit_run = FitConfig {
            rng_seed: derive_seed(fit.rng_seed, run as u64),
            ..fit.clone()
        };
        for (&method, method_corpus) in corpus {
            run_results.push(evaluate_split(
                method,
                method_corpus,
                &split,
                &fit_run,
                run,
            )?);
        }
    }
    aggregate(run_results)
}

/// K-fold variant of [`run_experiment`]; fold index plays the run role.
pub fn run_experiment_kfold(
    corpus: &BTreeMap<CombinationMethod, MethodCorpus>,
    k: usize,
    rng_seed: u64,
    fit: &FitConfig,
) -> Result<ExperimentReport, ExperimentError> {
    let indices = check_rosters(corpus)?;
    let folds = kfold_splits(&indices, k, rng_seed)?;
    let mut run_results = Vec::new();
    for (fold, split) in folds.iter().enumerate() {
        let fit_run = FitConfig {
            rng_seed: derive_seed(fit.rng_seed, fold as u64),
            ..fit.clone()
        };
        for (&method, method_corpus) in corpus {
            run_results.push(evaluate_split(
                method,
                method_corpus,
                split,
                &fit_run,
                fold,
            )?);
        }
    }
    aggregate(run_results)
}
