use driftclust::clustering::kmeanspp_indices;
use driftclust::dataio::gen_blobs;
use driftclust::{lloyd_kmeans, seed_kmeanspp, CentroidBank, DenseVector, SeededRng};
use proptest::prelude::*;

fn v(xs: &[f64]) -> DenseVector {
    DenseVector::new(xs.to_vec()).unwrap()
}

fn random_points(n: usize, dim: usize, rng: &mut SeededRng) -> Vec<DenseVector> {
    (0..n)
        .map(|_| v(&(0..dim).map(|_| rng.uniform(-5.0, 5.0)).collect::<Vec<_>>()))
        .collect()
}

#[test]
fn streaming_updates_telescope_to_the_mean() {
    let mut rng = SeededRng::new(31);
    for trial in 0..20 {
        let n = 1 + rng.below(1000);
        let dim = 1 + rng.below(16);
        let pts = random_points(n, dim, &mut rng);
        let mut bank = CentroidBank::new(vec![pts[0].clone()], vec![1]).unwrap();
        for p in &pts[1..] {
            bank.update_centroid(0, p).unwrap();
        }
        for d in 0..dim {
            let mean = pts.iter().map(|p| p[d]).sum::<f64>() / n as f64;
            let got = bank.centroids()[0][d];
            assert!((got - mean).abs() < 1e-9, "trial {trial}: {got} vs {mean}");
        }
        assert_eq!(bank.counts()[0], n as u64);
    }
}

#[test]
fn assign_matches_exhaustive_scan() {
    let mut rng = SeededRng::new(4);
    let cents = random_points(5, 3, &mut rng);
    let bank = CentroidBank::new(cents.clone(), vec![1, 2, 3, 4, 5]).unwrap();
    for p in random_points(50, 3, &mut rng) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in cents.iter().enumerate() {
            let d: f64 = c.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        let a = bank.assign(&p).unwrap();
        assert_eq!(a.label, best.0);
        assert!((a.distance - best.1).abs() < 1e-12);
        assert_eq!(a.gamma, 1.0 / (best.0 + 1) as f64);
    }
}

#[test]
fn kmeanspp_two_points_takes_both() {
    let f = vec![v(&[0.0, 0.0]), v(&[10.0, 10.0])];
    for seed in 0..20 {
        let mut idx = kmeanspp_indices(&f, 2, &mut SeededRng::new(seed)).unwrap();
        idx.sort_unstable();
        assert_eq!(idx, vec![0, 1]);
    }
    let same = vec![v(&[1.0]), v(&[1.0]), v(&[1.0])];
    assert!(seed_kmeanspp(&same, 2, &mut SeededRng::new(0)).is_err());
    assert!(seed_kmeanspp(&f, 3, &mut SeededRng::new(0)).is_err());
}

/// Textbook Lloyd started from given centers; no empty-cluster handling.
fn oracle_lloyd(points: &[DenseVector], mut centers: Vec<Vec<f64>>, iters: usize) -> Vec<usize> {
    let mut labels = vec![0; points.len()];
    for _ in 0..iters {
        for (i, p) in points.iter().enumerate() {
            labels[i] = (0..centers.len())
                .min_by(|&a, &b| {
                    let da: f64 = centers[a]
                        .iter()
                        .zip(p.iter())
                        .map(|(c, x)| (c - x).powi(2))
                        .sum();
                    let db: f64 = centers[b]
                        .iter()
                        .zip(p.iter())
                        .map(|(c, x)| (c - x).powi(2))
                        .sum();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap();
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&DenseVector> = points
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == c)
                .map(|(p, _)| p)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (d, value) in center.iter_mut().enumerate() {
                *value = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    labels
}

/// Equal up to a bijective relabeling.
fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(&x, &y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

#[test]
fn lloyd_agrees_with_independent_oracle() {
    let mut agree = 0;
    for seed in 0..20u64 {
        let data = gen_blobs(4, 50, 5, 8.0, 1.0, &mut SeededRng::new(1000 + seed)).unwrap();
        let pts: Vec<DenseVector> = (0..data.len()).map(|i| v(&data.sample(i))).collect();
        let result = lloyd_kmeans(&pts, 4, &mut SeededRng::new(seed), 300, 1e-9).unwrap();
        let init = kmeanspp_indices(&pts, 4, &mut SeededRng::new(seed)).unwrap();
        let oracle = oracle_lloyd(
            &pts,
            init.iter().map(|&i| pts[i].as_slice().to_vec()).collect(),
            300,
        );
        if same_partition(&oracle, &result.labels) {
            agree += 1;
        }
    }
    assert!(agree >= 19, "agreement on {agree}/20 seeds");
}

#[test]
fn lloyd_trivial_cases() {
    let two = vec![v(&[0.0]), v(&[4.0])];
    let r = lloyd_kmeans(&two, 2, &mut SeededRng::new(1), 10, 0.0).unwrap();
    assert_ne!(r.labels[0], r.labels[1]);

    let mut rng = SeededRng::new(2);
    let pts = random_points(30, 3, &mut rng);
    let r = lloyd_kmeans(&pts, 1, &mut rng, 10, 0.0).unwrap();
    for d in 0..3 {
        let mean = pts.iter().map(|p| p[d]).sum::<f64>() / 30.0;
        assert!((r.bank.centroids()[0][d] - mean).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lloyd_objective_never_increases(seed in any::<u64>(), n in 5usize..60, k in 1usize..5) {
        let mut rng = SeededRng::new(seed);
        let pts = random_points(n, 2, &mut rng);
        let r = lloyd_kmeans(&pts, k, &mut rng, 50, 0.0).unwrap();
        for w in r.objective_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0), "{:?}", r.objective_history);
        }
        prop_assert!(r.labels.iter().all(|&l| l < k));
    }

    #[test]
    fn update_touches_one_centroid(seed in any::<u64>(), label in 0usize..4) {
        let mut rng = SeededRng::new(seed);
        let cents = random_points(4, 3, &mut rng);
        let mut bank = CentroidBank::new(cents, vec![1; 4]).unwrap();
        let before = bank.clone();
        let p = random_points(1, 3, &mut rng).remove(0);
        let _ = bank.assign(&p).unwrap();
        prop_assert_eq!(&bank, &before);
        let gamma = bank.update_centroid(label, &p).unwrap();
        prop_assert_eq!(gamma, 0.5);
        for i in 0..4 {
            if i == label {
                prop_assert_eq!(bank.counts()[i], 2);
            } else {
                prop_assert_eq!(&bank.centroids()[i], &before.centroids()[i]);
                prop_assert_eq!(bank.counts()[i], 1);
            }
        }
    }
}
