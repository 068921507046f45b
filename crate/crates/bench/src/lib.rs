//! Shared fixtures for the criterion benches.

use driftclust::dataio::gen_blobs;
use driftclust::{Dataset, DenseVector, SeededRng};

/// `n` random vectors of dimension `dim` with entries in `[-1, 1)`.
pub fn random_vectors(n: usize, dim: usize, seed: u64) -> Vec<DenseVector> {
    let mut rng = SeededRng::new(seed);
    (0..n)
        .map(|_| DenseVector::new((0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).unwrap())
        .collect()
}

/// The 10-blob, 50-dimensional benchmark set at a reduced size.
pub fn blob_benchmark(points_per_cluster: usize, seed: u64) -> Dataset {
    gen_blobs(
        10,
        points_per_cluster,
        50,
        10.0,
        1.0,
        &mut SeededRng::new(seed),
    )
    .unwrap()
}
