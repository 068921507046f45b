use super::{Dataset, Pixels};
use crate::backbone::Shape;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Isotropic Gaussian blobs around `k` centers drawn uniformly on the sphere
/// of radius `separation`. Samples are stored cluster by cluster with shape
/// `(1, dim, 1)` and carry their cluster index as ground truth.
pub fn gen_blobs(
    k: usize,
    points_per_cluster: usize,
    dim: usize,
    separation: f64,
    noise_sigma: f64,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if k == 0 || points_per_cluster == 0 || dim == 0 {
        return Err(Error::invalid("blob counts and dimension must be positive"));
    }
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(Error::invalid(format!(
            "separation must be positive, got {separation}"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::invalid(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| loop {
            let g: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break g.iter().map(|v| separation * v / norm).collect();
            }
        })
        .collect();
    let mut values = Vec::with_capacity(k * points_per_cluster * dim);
    let mut labels = Vec::with_capacity(k * points_per_cluster);
    for (label, c) in centers.iter().enumerate() {
        for _ in 0..points_per_cluster {
            values.extend(c.iter().map(|&cv| cv + noise_sigma * rng.normal()));
            labels.push(label);
        }
    }
    Dataset::new(
        format!("blobs-k{k}-n{points_per_cluster}-d{dim}"),
        Shape::new(1, dim, 1),
        Pixels::Floats(values),
        Some(labels),
    )
}
