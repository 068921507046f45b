//! Centroid bookkeeping for mini-batch k-means, plus a full-set Lloyd
//! baseline.
//!
//! Every centroid carries the number of samples it has absorbed. A seed
//! counts as its own first sample, and the update rate for the next sample is
//! `1 / count` after incrementing, which turns the incremental update into an
//! exact running mean.

use crate::error::{check_dim, Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{sq_euclidean_slice, DenseVector};

#[derive(Debug, Clone, PartialEq)]
pub struct CentroidBank {
    centroids: Vec<DenseVector>,
    counts: Vec<u64>,
    dim: usize,
}

/// Result of a nearest-centroid query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assignment {
    pub label: usize,
    /// Squared Euclidean distance to the chosen centroid.
    pub distance: f64,
    /// `1 / count(label)` at query time.
    pub gamma: f64,
}

impl CentroidBank {
    pub fn new(centroids: Vec<DenseVector>, counts: Vec<u64>) -> Result<Self> {
        let first = centroids.first().ok_or(Error::Empty("CentroidBank"))?;
        let dim = first.dim();
        check_dim("centroid counts", centroids.len(), counts.len())?;
        for c in &centroids {
            check_dim("centroid dim", dim, c.dim())?;
            if !c.is_finite() {
                return Err(Error::NonFinite("centroid"));
            }
        }
        Ok(Self {
            centroids,
            counts,
            dim,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroids(&self) -> &[DenseVector] {
        &self.centroids
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn assign(&self, h: &DenseVector) -> Result<Assignment> {
        check_dim("assign", self.dim, h.dim())?;
        let (label, distance) = self.nearest(h.as_slice());
        let count = self.counts[label];
        let gamma = if count == 0 { 1.0 } else { 1.0 / count as f64 };
        Ok(Assignment {
            label,
            distance,
            gamma,
        })
    }

    /// Nearest centroid by squared distance; ties go to the lowest index.
    pub(crate) fn nearest(&self, h: &[f64]) -> (usize, f64) {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.centroids.iter().enumerate() {
            let d = sq_euclidean_slice(c.as_slice(), h);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        (best, best_d)
    }

    /// Increments `counts[label]`, then moves the centroid toward `h` by
    /// `gamma = 1 / counts[label]`. Returns the gamma used.
    pub fn update_centroid(&mut self, label: usize, h: &DenseVector) -> Result<f64> {
        if label >= self.k() {
            return Err(Error::invalid(format!(
                "centroid label {label} out of range for k = {}",
                self.k()
            )));
        }
        check_dim("update_centroid", self.dim, h.dim())?;
        self.counts[label] += 1;
        let gamma = 1.0 / self.counts[label] as f64;
        let c = self.centroids[label].as_mut_slice();
        for (cv, hv) in c.iter_mut().zip(h.iter()) {
            *cv = (1.0 - gamma) * *cv + gamma * hv;
        }
        Ok(gamma)
    }

    /// Sum of squared distances from each feature to its nearest centroid.
    pub fn inertia(&self, features: &[DenseVector]) -> f64 {
        features.iter().map(|f| self.nearest(f.as_slice()).1).sum()
    }
}

/// k-means++ seeding: the first seed is uniform, each later seed is drawn
/// with probability proportional to its squared distance from the nearest
/// seed chosen so far. Every seed starts with count 1.
pub fn seed_kmeanspp(
    features: &[DenseVector],
    k: usize,
    rng: &mut SeededRng,
) -> Result<CentroidBank> {
    let idx = kmeanspp_indices(features, k, rng)?;
    let centroids = idx.iter().map(|&i| features[i].clone()).collect();
    CentroidBank::new(centroids, vec![1; k])
}

/// The sample indices chosen by [`seed_kmeanspp`].
pub fn kmeanspp_indices(
    features: &[DenseVector],
    k: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if features.len() < k {
        return Err(Error::invalid(format!(
            "k-means++ needs at least k = {k} samples, got {}",
            features.len()
        )));
    }
    let dim = features[0].dim();
    for f in features {
        check_dim("k-means++ feature", dim, f.dim())?;
    }
    let first = rng.below(features.len());
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = features
        .iter()
        .map(|f| sq_euclidean_slice(f.as_slice(), features[first].as_slice()))
        .collect();
    while chosen.len() < k {
        let next = rng.weighted_index(&d2).ok_or_else(|| {
            Error::invalid(format!(
                "k-means++ found zero squared-distance mass after {} seeds (fewer than k distinct samples)",
                chosen.len()
            ))
        })?;
        chosen.push(next);
        let seed = features[next].as_slice();
        for (d, f) in d2.iter_mut().zip(features) {
            let nd = sq_euclidean_slice(f.as_slice(), seed);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(chosen)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub labels: Vec<usize>,
    /// Final centroids; counts hold the final cluster sizes.
    pub bank: CentroidBank,
    pub iterations: usize,
    /// Objective after each assignment step.
    pub objective_history: Vec<f64>,
}

/// Full-set Lloyd iterations from k-means++ seeds, stopping when no centroid
/// moves more than `tol` (Euclidean) or after `max_iters` rounds.
///
/// A cluster that ends an assignment step empty is re-seeded at the sample
/// farthest from its own assigned centroid.
pub fn lloyd_kmeans(
    features: &[DenseVector],
    k: usize,
    rng: &mut SeededRng,
    max_iters: usize,
    tol: f64,
) -> Result<LloydResult> {
    let seeded = seed_kmeanspp(features, k, rng)?;
    let dim = seeded.dim();
    let mut centroids: Vec<Vec<f64>> = seeded
        .centroids
        .iter()
        .map(|c| c.as_slice().to_vec())
        .collect();
    let mut labels = vec![0usize; features.len()];
    let mut dists = vec![0.0f64; features.len()];
    let mut objective_history = Vec::new();
    let mut iterations = 0;

    let assign_all = |centroids: &[Vec<f64>], labels: &mut [usize], dists: &mut [f64]| -> f64 {
        let mut objective = 0.0;
        for (i, f) in features.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, cent) in centroids.iter().enumerate() {
                let d = sq_euclidean_slice(cent, f.as_slice());
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            labels[i] = best;
            dists[i] = best_d;
            objective += best_d;
        }
        objective
    };

    while iterations < max_iters {
        iterations += 1;
        objective_history.push(assign_all(&centroids, &mut labels, &mut dists));

        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (f, &l) in features.iter().zip(&labels) {
            sizes[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(f.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] == 0 {
                let far = argmax(&dists);
                dists[far] = 0.0;
                sums[c] = features[far].as_slice().to_vec();
                sizes[c] = 1;
                let old = labels[far];
                sizes[old] -= 1;
                for (s, v) in sums[old].iter_mut().zip(features[far].iter()) {
                    *s -= v;
                }
                labels[far] = c;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            if sizes[c] == 0 {
                // Only reachable when a re-seed emptied a singleton donor.
                continue;
            }
            let n = sizes[c] as f64;
            let new: Vec<f64> = sums[c].iter().map(|s| s / n).collect();
            shift = shift.max(sq_euclidean_slice(&new, &centroids[c]).sqrt());
            centroids[c] = new;
        }
        if shift < tol {
            break;
        }
    }
    assign_all(&centroids, &mut labels, &mut dists);

    let mut counts = vec![0u64; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let bank = CentroidBank::new(
        centroids
            .into_iter()
            .map(DenseVector::new)
            .collect::<Result<Vec<_>>>()?,
        counts,
    )?;
    Ok(LloydResult {
        labels,
        bank,
        iterations,
        objective_history,
    })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
