use std::collections::HashMap;

use driftclust::{build_contingency, entropy, nmi, nmi_report, SeededRng};

/// Entropies and mutual information straight from empirical probabilities.
fn brute_nmi(t: &[usize], y: &[usize]) -> f64 {
    let n = t.len() as f64;
    let mut pt: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<usize, f64> = HashMap::new();
    let mut pty: HashMap<(usize, usize), f64> = HashMap::new();
    for (&a, &b) in t.iter().zip(y) {
        *pt.entry(a).or_default() += 1.0;
        *py.entry(b).or_default() += 1.0;
        *pty.entry((a, b)).or_default() += 1.0;
    }
    pt.values_mut().for_each(|p| *p /= n);
    py.values_mut().for_each(|p| *p /= n);
    pty.values_mut().for_each(|p| *p /= n);
    let h = |m: &HashMap<usize, f64>| -m.values().map(|p| p * p.ln()).sum::<f64>();
    let (ht, hy) = (h(&pt), h(&py));
    if ht == 0.0 || hy == 0.0 {
        return if pt.len() == 1 && py.len() == 1 {
            1.0
        } else {
            0.0
        };
    }
    let mi: f64 = pty
        .iter()
        .map(|(&(a, b), &p)| p * (p / (pt[&a] * py[&b])).ln())
        .sum();
    mi / (ht * hy).sqrt()
}

#[test]
fn matches_brute_force_on_random_pairs() {
    let mut rng = SeededRng::new(15);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = 1 + rng.below(50);
        let lt = 1 + rng.below(6);
        let ly = 1 + rng.below(6);
        let t: Vec<usize> = (0..n).map(|_| rng.below(lt)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.below(ly)).collect();
        let got = nmi(&t, &y).unwrap();
        let want = brute_nmi(&t, &y);
        worst = worst.max((got - want).abs());
        assert!((got - want).abs() < 1e-10, "{t:?} {y:?}: {got} vs {want}");
    }
    assert!(worst < 1e-10);
}

#[test]
fn fixed_examples() {
    assert!((nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap() - 1.0).abs() < 1e-12);
    assert!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap().abs() < 1e-12);
    let (t, y) = ([0, 0, 1, 1, 1, 1], [0, 0, 0, 1, 1, 1]);
    assert!((nmi(&t, &y).unwrap() - brute_nmi(&t, &y)).abs() < 1e-12);
    // The same value by hand from the 2x2 table [[2,0],[1,3]].
    let ln = f64::ln;
    let ht = -(2.0 / 6.0 * ln(2.0 / 6.0) + 4.0 / 6.0 * ln(4.0 / 6.0));
    let hy = ln(2.0);
    let mi = 2.0 / 6.0 * ln((2.0 / 6.0) / (2.0 / 6.0 * 0.5))
        + 1.0 / 6.0 * ln((1.0 / 6.0) / (4.0 / 6.0 * 0.5))
        + 3.0 / 6.0 * ln((3.0 / 6.0) / (4.0 / 6.0 * 0.5));
    assert!((nmi(&t, &y).unwrap() - mi / (ht * hy).sqrt()).abs() < 1e-12);
}

#[test]
fn degenerate_partitions_follow_convention() {
    let r = nmi_report(&[0, 0, 0], &[1, 1, 1]).unwrap();
    assert_eq!((r.value, r.degenerate), (1.0, true));
    let r = nmi_report(&[0, 1, 2], &[5, 5, 5]).unwrap();
    assert_eq!((r.value, r.degenerate), (0.0, true));
    assert!(nmi(&[0, 1], &[0]).is_err());
}

#[test]
fn contingency_matches_counting_oracle() {
    let mut rng = SeededRng::new(3);
    let t: Vec<usize> = (0..1000).map(|_| rng.below(10)).collect();
    let y: Vec<usize> = (0..1000).map(|_| rng.below(10)).collect();
    let table = build_contingency(&t, &y).unwrap();
    let mut oracle: HashMap<(usize, usize), u64> = HashMap::new();
    for (&a, &b) in t.iter().zip(&y) {
        *oracle.entry((a, b)).or_default() += 1;
    }
    assert_eq!(table.n, 1000);
    for (r, class) in table.classes.iter().enumerate() {
        for (c, cluster) in table.clusters.iter().enumerate() {
            let want = oracle.get(&(*class, *cluster)).copied().unwrap_or(0);
            assert_eq!(table.counts[r][c], want);
        }
    }
    assert_eq!(table.row_sums.iter().sum::<u64>(), 1000);
    assert_eq!(table.col_sums.iter().sum::<u64>(), 1000);
}

#[test]
fn entropy_examples() {
    assert_eq!(entropy(&[5], 5), 0.0);
    assert!((entropy(&[3, 3], 6) - std::f64::consts::LN_2).abs() < 1e-15);
    let direct: f64 = [1.0f64, 2.0, 3.0]
        .iter()
        .map(|c| -(c / 6.0) * (c / 6.0).ln())
        .sum();
    assert!((entropy(&[1, 2, 3], 6) - direct).abs() < 1e-15);
    assert_eq!(entropy(&[0, 4], 4), 0.0);
}
