//! Normalized mutual information between two labelings.
//!
//! `NMI = I(t, y) / sqrt(H(t) H(y))` with natural logarithms. When either
//! labeling has zero entropy the ratio is undefined; we return 1.0 when both
//! labelings are a single block (identical partitions) and 0.0 otherwise, and
//! flag the result as degenerate.

use std::collections::BTreeMap;

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    /// Distinct truth labels in ascending order (row keys).
    pub classes: Vec<usize>,
    /// Distinct predicted labels in ascending order (column keys).
    pub clusters: Vec<usize>,
    /// `counts[a][b]`: samples with truth `classes[a]` and prediction `clusters[b]`.
    pub counts: Vec<Vec<u64>>,
    pub n: u64,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
}

fn index_labels(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut keys: BTreeMap<usize, usize> = BTreeMap::new();
    for &l in labels {
        keys.entry(l).or_insert(0);
    }
    for (i, v) in keys.values_mut().enumerate() {
        *v = i;
    }
    let idx = labels.iter().map(|l| keys[l]).collect();
    (keys.into_keys().collect(), idx)
}

pub fn build_contingency(truth: &[usize], pred: &[usize]) -> Result<ContingencyTable> {
    check_dim("label sequence length", truth.len(), pred.len())?;
    if truth.is_empty() {
        return Err(Error::Empty("label sequences"));
    }
    let (classes, ti) = index_labels(truth);
    let (clusters, pi) = index_labels(pred);
    let mut counts = vec![vec![0u64; clusters.len()]; classes.len()];
    for (&a, &b) in ti.iter().zip(&pi) {
        counts[a][b] += 1;
    }
    let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
    let col_sums = (0..clusters.len())
        .map(|b| counts.iter().map(|r| r[b]).sum())
        .collect();
    Ok(ContingencyTable {
        classes,
        clusters,
        counts,
        n: truth.len() as u64,
        row_sums,
        col_sums,
    })
}

/// Shannon entropy (nats) of a count marginal summing to `n`.
pub fn entropy(marginal: &[u64], n: u64) -> f64 {
    debug_assert_eq!(marginal.iter().sum::<u64>(), n);
    if n == 0 {
        return 0.0;
    }
    let ln_n = (n as f64).ln();
    let nf = n as f64;
    marginal
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let c = c as f64;
            -(c / nf) * (c.ln() - ln_n)
        })
        .sum::<f64>()
        .max(0.0)
}

impl ContingencyTable {
    pub fn mutual_information(&self) -> f64 {
        let ln_n = (self.n as f64).ln();
        let nf = self.n as f64;
        let mut mi = 0.0;
        for (a, row) in self.counts.iter().enumerate() {
            let ln_a = (self.row_sums[a] as f64).ln();
            for (b, &c) in row.iter().enumerate() {
                if c == 0 {
                    continue;
                }
                let cf = c as f64;
                let ln_b = (self.col_sums[b] as f64).ln();
                mi += (cf / nf) * (cf.ln() + ln_n - ln_a - ln_b);
            }
        }
        mi.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmiReport {
    pub value: f64,
    /// Set when either entropy is zero and the fallback convention applied.
    pub degenerate: bool,
}

pub fn nmi_report(truth: &[usize], pred: &[usize]) -> Result<NmiReport> {
    let table = build_contingency(truth, pred)?;
    let ht = entropy(&table.row_sums, table.n);
    let hy = entropy(&table.col_sums, table.n);
    if ht == 0.0 || hy == 0.0 {
        let identical = table.classes.len() == 1 && table.clusters.len() == 1;
        return Ok(NmiReport {
            value: if identical { 1.0 } else { 0.0 },
            degenerate: true,
        });
    }
    let value = (table.mutual_information() / (ht * hy).sqrt()).clamp(0.0, 1.0);
    Ok(NmiReport {
        value,
        degenerate: false,
    })
}

pub fn nmi(truth: &[usize], pred: &[usize]) -> Result<f64> {
    nmi_report(truth, pred).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn contingency_small_cases() {
        let t = build_contingency(&[0, 1], &[0, 1]).unwrap();
        assert_eq!(t.counts, vec![vec![1, 0], vec![0, 1]]);
        let t = build_contingency(&[0, 0], &[1, 1]).unwrap();
        assert_eq!(t.counts, vec![vec![2]]);
        assert_eq!(t.clusters, vec![1]);
        assert!(build_contingency(&[0], &[0, 1]).is_err());
        assert!(build_contingency(&[], &[]).is_err());
    }

    #[test]
    fn contingency_matches_hashmap_oracle() {
        let mut rng = SeededRng::new(19);
        let truth: Vec<usize> = (0..1000).map(|_| rng.below(10)).collect();
        let pred: Vec<usize> = (0..1000).map(|_| rng.below(10)).collect();
        let mut oracle: HashMap<(usize, usize), u64> = HashMap::new();
        for (&a, &b) in truth.iter().zip(&pred) {
            *oracle.entry((a, b)).or_default() += 1;
        }
        let t = build_contingency(&truth, &pred).unwrap();
        for (ai, &a) in t.classes.iter().enumerate() {
            for (bi, &b) in t.clusters.iter().enumerate() {
                assert_eq!(t.counts[ai][bi], oracle.get(&(a, b)).copied().unwrap_or(0));
            }
        }
        assert_eq!(t.row_sums.iter().sum::<u64>(), 1000);
        assert_eq!(t.col_sums.iter().sum::<u64>(), 1000);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(entropy(&[5], 5), 0.0);
        assert!((entropy(&[3, 3], 6) - std::f64::consts::LN_2).abs() < 1e-15);
        let oracle = -(1.0 / 6.0 * (1.0f64 / 6.0).ln()
            + 2.0 / 6.0 * (2.0f64 / 6.0).ln()
            + 3.0 / 6.0 * (3.0f64 / 6.0).ln());
        assert!((entropy(&[1, 2, 3], 6) - oracle).abs() < 1e-15);
        assert_eq!(entropy(&[0, 4], 4), 0.0);
    }

    #[test]
    fn nmi_fixed_examples() {
        assert!((nmi(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(nmi(&[0, 1, 0, 1], &[0, 0, 1, 1]).unwrap().abs() < 1e-15);

        // 2x2 table [[2,0],[1,3]] over n = 6, entropies written out by hand.
        let p = |c: f64| c / 6.0;
        let ht = -(p(2.0) * p(2.0).ln() + p(4.0) * p(4.0).ln());
        let hy = -(p(3.0) * p(3.0).ln() + p(3.0) * p(3.0).ln());
        let hj = -(p(2.0) * p(2.0).ln() + p(1.0) * p(1.0).ln() + p(3.0) * p(3.0).ln());
        let want = (ht + hy - hj) / (ht * hy).sqrt();
        let got = nmi(&[0, 0, 1, 1, 1, 1], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn nmi_degenerate_convention() {
        let r = nmi_report(&[0, 1, 2], &[4, 4, 4]).unwrap();
        assert_eq!(
            r,
            NmiReport {
                value: 0.0,
                degenerate: true
            }
        );
        let r = nmi_report(&[7, 7], &[1, 1]).unwrap();
        assert_eq!(
            r,
            NmiReport {
                value: 1.0,
                degenerate: true
            }
        );
        assert!(nmi(&[0, 1], &[0]).is_err());
    }

    proptest! {
        #[test]
        fn nmi_symmetric_bounded_permutation_invariant(
            pairs in proptest::collection::vec((0usize..5, 0usize..5), 1..80),
            perm_seed in any::<u64>(),
        ) {
            let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let ab = nmi(&a, &b).unwrap();
            let ba = nmi(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));

            let mut perm: Vec<usize> = (0..5).map(|i| i + 100).collect();
            SeededRng::new(perm_seed).shuffle(&mut perm);
            let relabeled: Vec<usize> = b.iter().map(|&l| perm[l]).collect();
            prop_assert!((nmi(&a, &relabeled).unwrap() - ab).abs() <= 1e-12);

            let distinct = a.iter().collect::<std::collections::BTreeSet<_>>().len();
            if distinct > 1 {
                prop_assert!((nmi(&a, &a).unwrap() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
