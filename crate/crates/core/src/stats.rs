//! Evaluation statistics: classification error rates, z-scores,
//! Mann-Whitney U tests and 2-D PCA projections.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("prediction and truth lists differ in length: {predictions} vs {truth}")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("input must be non-empty")]
    Empty,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("sample standard deviation is zero")]
    ZeroVariance,
    #[error("all values across both samples are identical")]
    Degenerate,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("input rows disagree on dimension: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot project onto {k} components of {dim}-dimensional data")]
    BadProjection { k: usize, dim: usize },
}

/// Fraction of positions where prediction and truth disagree.
pub fn error_rate<T: PartialEq>(predictions: &[T], truth: &[T]) -> Result<f64, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let mismatches = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p != t)
        .count();
    Ok(mismatches as f64 / predictions.len() as f64)
}

/// Standardizes values to mean 0 and sample (n-1) standard deviation 1.
pub fn zscore(values: &[f64]) -> Result<Vec<f64>, EvalError> {
    if values.len() < 2 {
        return Err(EvalError::TooFewValues {
            needed: 2,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(EvalError::ZeroVariance);
    }
    let std = libm::sqrt(var);
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

/// Outcome of a two-sided Mann-Whitney U test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatSummary {
    /// U statistic of the first sample; `U(a,b) + U(b,a) == n*m`.
    pub u_statistic: f64,
    /// Tie- and continuity-corrected normal deviate.
    pub z_value: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Midranks of the pooled samples plus the sizes of tie groups.
fn midranks(pooled: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = pooled.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| pooled[i].partial_cmp(&pooled[j]).expect("finite values"));

    let mut ranks = vec![0.0; n];
    let mut tie_groups = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pooled[order[end]] == pooled[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) share the average 1-based rank
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        tie_groups.push(end - start);
        start = end;
    }
    (ranks, tie_groups)
}

/// `P(U <= u)` for the U statistic of the smaller sample under the null,
/// by dynamic programming over rank subsets. Valid only without ties.
fn exact_u_cdf(k: usize, total: usize, u: f64) -> f64 {
    // ways[j][s]: subsets of size j from the ranks seen so far with rank sum s
    let max_sum: usize = (total - k + 1..=total).sum();
    let mut ways = vec![vec![0.0f64; max_sum + 1]; k + 1];
    ways[0][0] = 1.0;
    for rank in 1..=total {
        for j in (1..=k.min(rank)).rev() {
            for s in (rank..=max_sum).rev() {
                let add = ways[j - 1][s - rank];
                if add > 0.0 {
                    ways[j][s] += add;
                }
            }
        }
    }
    let offset = k * (k + 1) / 2;
    let mut favorable = 0.0;
    let mut all = 0.0;
    for (s, &count) in ways[k].iter().enumerate() {
        if count == 0.0 {
            continue;
        }
        all += count;
        if (s - offset) as f64 <= u {
            favorable += count;
        }
    }
    favorable / all
}

/// Two-sided Mann-Whitney U test with midrank tie handling.
///
/// Small untied samples (`min(n, m) <= 8`) get an exact p-value by
/// enumerating the null distribution of U; larger or tied samples use the
/// normal approximation with tie-corrected variance and continuity
/// correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<StatSummary, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let (n, m) = (a.len(), b.len());
    let total = n + m;

    let mut pooled = Vec::with_capacity(total);
    pooled.extend_from_slice(a);
    pooled.extend_from_slice(b);
    let (ranks, tie_groups) = midranks(&pooled);
    if tie_groups.len() == 1 {
        return Err(EvalError::Degenerate);
    }

    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let u_a = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let nm = (n * m) as f64;

    let mean_u = nm / 2.0;
    let tie_term: f64 = tie_groups
        .iter()
        .map(|&t| (t * t * t - t) as f64)
        .sum::<f64>()
        / (total * (total - 1)) as f64;
    let var_u = nm / 12.0 * ((total + 1) as f64 - tie_term);
    let z = if var_u > 0.0 {
        let centered = u_a - mean_u;
        let corrected = if centered > 0.0 {
            centered - 0.5
        } else if centered < 0.0 {
            centered + 0.5
        } else {
            0.0
        };
        corrected / libm::sqrt(var_u)
    } else {
        0.0
    };

    let has_ties = tie_groups.iter().any(|&t| t > 1);
    let p = if !has_ties && n.min(m) <= 8 {
        let (k, u_k) = if n <= m { (n, u_a) } else { (m, nm - u_a) };
        let u_low = u_k.min(nm - u_k);
        (2.0 * exact_u_cdf(k, total, u_low)).min(1.0)
    } else {
        if var_u <= 0.0 {
            return Err(EvalError::Degenerate);
        }
        libm::erfc(libm::fabs(z) / core::f64::consts::SQRT_2).min(1.0)
    };

    Ok(StatSummary {
        u_statistic: u_a,
        z_value: z,
        p_value: p,
    })
}

/// Projects vectors onto the top-`k` principal components of their sample
/// covariance.
///
/// Components are sorted by descending eigenvalue; each component is
/// oriented so its largest-magnitude loading is positive.
pub fn pca_project(vectors: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>, EvalError> {
    if vectors.len() < k + 1 {
        return Err(EvalError::TooFewValues {
            needed: k + 1,
            got: vectors.len(),
        });
    }
    let dim = vectors[0].len();
    if k == 0 || k > dim {
        return Err(EvalError::BadProjection { k, dim });
    }
    for row in vectors {
        if row.len() != dim {
            return Err(EvalError::DimensionMismatch {
                expected: dim,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
    }

    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for row in vectors {
        for (slot, &v) in mean.iter_mut().zip(row) {
            *slot += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= n;
    }

    let mut cov = vec![0.0; dim * dim];
    let mut diff = vec![0.0; dim];
    for row in vectors {
        for ((slot, &v), &m) in diff.iter_mut().zip(row).zip(&mean) {
            *slot = v - m;
        }
        for a in 0..dim {
            for b in a..dim {
                cov[a * dim + b] += diff[a] * diff[b];
            }
        }
    }
    for a in 0..dim {
        for b in a..dim {
            let v = cov[a * dim + b] / (n - 1.0);
            cov[a * dim + b] = v;
            cov[b * dim + a] = v;
        }
    }

    let (_, eigenvectors) = linalg::symmetric_eigen(&cov, dim);
    let mut components: Vec<Vec<f64>> = (0..k)
        .map(|c| eigenvectors[c * dim..(c + 1) * dim].to_vec())
        .collect();
    for component in components.iter_mut() {
        let mut lead = 0;
        for (i, &v) in component.iter().enumerate() {
            if libm::fabs(v) > libm::fabs(component[lead]) {
                lead = i;
            }
        }
        if component[lead] < 0.0 {
            for v in component.iter_mut() {
                *v = -*v;
            }
        }
    }

    Ok(vectors
        .iter()
        .map(|row| {
            components
                .iter()
                .map(|component| {
                    row.iter()
                        .zip(&mean)
                        .zip(component)
                        .map(|((&v, &m), &c)| (v - m) * c)
                        .sum()
                })
                .collect()
        })
        .collect())
}
