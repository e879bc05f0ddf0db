//! Seeded Lloyd's algorithm used to initialize mixture fits.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) struct KmeansRun {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub wcss: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One Lloyd run with random-point initialization from `seed`.
///
/// Ties in the nearest-centroid test go to the lowest cluster index, and an
/// emptied cluster steals the point currently farthest from its centroid,
/// so the run is fully determined by the seed.
pub(crate) fn lloyd(data: &[Vec<f64>], k: usize, seed: u64, max_iter: usize) -> KmeansRun {
    debug_assert!(k >= 1 && data.len() >= k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = index::sample(&mut rng, data.len(), k)
        .into_iter()
        .map(|i| data[i].clone())
        .collect();

    let mut assignments = vec![0usize; data.len()];
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, point) in data.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = squared_distance(point, &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let d = squared_distance(point, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assignments[i] != best {
                assignments[i] = best;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..k {
            while counts[c] == 0 {
                // steal the farthest point from a cluster that can spare one
                let mut victim = usize::MAX;
                let mut victim_d = -1.0;
                for (i, point) in data.iter().enumerate() {
                    if counts[assignments[i]] < 2 {
                        continue;
                    }
                    let d = squared_distance(point, &centroids[assignments[i]]);
                    if d > victim_d {
                        victim_d = d;
                        victim = i;
                    }
                }
                counts[assignments[victim]] -= 1;
                assignments[victim] = c;
                counts[c] += 1;
                changed = true;
            }
        }

        let dim = data[0].len();
        let mut next: Vec<Vec<f64>> = vec![vec![0.0; dim]; k];
        for (point, &a) in data.iter().zip(&assignments) {
            for (slot, &v) in next[a].iter_mut().zip(point) {
                *slot += v;
            }
        }
        for (c, centroid) in next.iter_mut().enumerate() {
            for v in centroid.iter_mut() {
                *v /= counts[c] as f64;
            }
        }
        centroids = next;

        if !changed {
            break;
        }
    }

    let wcss = data
        .iter()
        .zip(&assignments)
        .map(|(point, &a)| squared_distance(point, &centroids[a]))
        .sum();
    KmeansRun {
        assignments,
        centroids,
        wcss,
    }
}
