//! Small dense linear algebra over `f64`.
//!
//! Matrices are row-major. Everything here is deliberately naive: the
//! workloads are desk-scale and bit-level determinism matters more than
//! throughput, so loops always accumulate in index order.

use std::ops::Index;

use crate::error::{check_dim, Error, Result};

/// A dense, finite, non-empty vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("DenseVector"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseVector"));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "DenseVector dimension must be positive");
        Self {
            data: vec![0.0; dim],
        }
    }

    /// Wraps values produced by an internal computation over finite inputs.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl AsRef<[f64]> for DenseVector {
    fn as_ref(&self) -> &[f64] {
        &self.data
    }
}

/// A dense, finite, row-major matrix with positive dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("DenseMatrix"));
        }
        check_dim("DenseMatrix data length", rows * cols, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(
            rows > 0 && cols > 0,
            "DenseMatrix dimensions must be positive"
        );
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(
            rows > 0 && cols > 0,
            "DenseMatrix dimensions must be positive"
        );
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Returns `self + alpha * other`.
    pub fn add_scaled(&self, other: &DenseMatrix, alpha: f64) -> Result<DenseMatrix> {
        check_dim("add_scaled rows", self.rows, other.rows)?;
        check_dim("add_scaled cols", self.cols, other.cols)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `m · v`.
pub fn matvec(m: &DenseMatrix, v: &DenseVector) -> Result<DenseVector> {
    check_dim("matvec", m.cols, v.dim())?;
    let mut out = vec![0.0; m.rows];
    matvec_into(m, v.as_slice(), &mut out);
    Ok(DenseVector::from_vec_unchecked(out))
}

/// Unchecked kernel behind [`matvec`]; `out.len() == m.rows()`.
#[inline]
pub(crate) fn matvec_into(m: &DenseMatrix, v: &[f64], out: &mut [f64]) {
    debug_assert_eq!(m.cols, v.len());
    debug_assert_eq!(m.rows, out.len());
    for (r, o) in out.iter_mut().enumerate() {
        *o = dot(m.row(r), v);
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean distance.
pub fn sq_euclidean(a: &DenseVector, b: &DenseVector) -> Result<f64> {
    check_dim("sq_euclidean", a.dim(), b.dim())?;
    Ok(sq_euclidean_slice(a.as_slice(), b.as_slice()))
}

#[inline]
pub(crate) fn sq_euclidean_slice(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Index of the smallest value; ties go to the lowest index.
pub fn argmin(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Empty("argmin"));
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if !v.is_finite() {
            return Err(Error::NonFinite("argmin"));
        }
        if v < values[best] {
            best = i;
        }
    }
    if !values[0].is_finite() {
        return Err(Error::NonFinite("argmin"));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn vecf(v: &[f64]) -> DenseVector {
        DenseVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn matvec_identity() {
        let out = matvec(&DenseMatrix::identity(2), &vecf(&[3.0, 5.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 5.0]);
    }

    #[test]
    fn matvec_zero_matrix() {
        let out = matvec(&DenseMatrix::zeros(3, 2), &vecf(&[7.0, -2.0])).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn matvec_hand_computed() {
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = matvec(&m, &vecf(&[1.0, 1.0])).unwrap();
        assert_eq!(out.as_slice(), &[3.0, 7.0]);
    }

    #[test]
    fn matvec_rejects_mismatch() {
        let err = matvec(&DenseMatrix::zeros(2, 3), &vecf(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn sq_euclidean_cases() {
        let a = vecf(&[1.5, -2.0, 4.0]);
        assert_eq!(sq_euclidean(&a, &a).unwrap(), 0.0);
        assert_eq!(
            sq_euclidean(&vecf(&[0.0, 0.0]), &vecf(&[3.0, 4.0])).unwrap(),
            25.0
        );
        assert!(sq_euclidean(&vecf(&[0.0]), &vecf(&[3.0, 4.0])).is_err());
    }

    #[test]
    fn sq_euclidean_matches_loop_oracle() {
        let mut rng = SeededRng::new(11);
        let a: Vec<f64> = (0..10).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let b: Vec<f64> = (0..10).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let mut oracle = 0.0;
        for i in 0..10 {
            oracle += (a[i] - b[i]) * (a[i] - b[i]);
        }
        let got = sq_euclidean(&vecf(&a), &vecf(&b)).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle.max(1.0));
    }

    #[test]
    fn argmin_cases() {
        assert_eq!(argmin(&[3.0, 1.0, 2.0]).unwrap(), 1);
        assert_eq!(argmin(&[5.0, 5.0, 5.0]).unwrap(), 0);
        assert!(matches!(argmin(&[]), Err(Error::Empty(_))));
        assert!(argmin(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn argmin_matches_linear_scan() {
        let mut rng = SeededRng::new(3);
        let values: Vec<f64> = (0..100).map(|_| rng.uniform(0.0, 1.0)).collect();
        let mut best = 0;
        for i in 0..values.len() {
            if values[i] < values[best] {
                best = i;
            }
        }
        assert_eq!(argmin(&values).unwrap(), best);
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(DenseVector::new(vec![]).is_err());
        assert!(DenseVector::new(vec![f64::INFINITY]).is_err());
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(DenseMatrix::new(0, 2, vec![]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    proptest! {
        #[test]
        fn matvec_is_linear(
            seed in any::<u64>(),
            alpha in -10.0f64..10.0,
            beta in -10.0f64..10.0,
            rows in 1usize..8,
            cols in 1usize..8,
        ) {
            let mut rng = SeededRng::new(seed);
            let m = DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform(-3.0, 3.0));
            let a: Vec<f64> = (0..cols).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let b: Vec<f64> = (0..cols).map(|_| rng.uniform(-3.0, 3.0)).collect();
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = matvec(&m, &vecf(&combo)).unwrap();
            let ma = matvec(&m, &vecf(&a)).unwrap();
            let mb = matvec(&m, &vecf(&b)).unwrap();
            for r in 0..rows {
                let rhs = alpha * ma[r] + beta * mb[r];
                let scale = lhs[r].abs().max(rhs.abs()).max(1.0);
                prop_assert!((lhs[r] - rhs).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn sq_euclidean_symmetric_and_discerning(
            a in proptest::collection::vec(-1e3f64..1e3, 1..12),
            shift in proptest::collection::vec(-1e3f64..1e3, 12),
        ) {
            let b: Vec<f64> = a.iter().zip(&shift).map(|(x, s)| x + s).collect();
            let (va, vb) = (vecf(&a), vecf(&b));
            prop_assert_eq!(sq_euclidean(&va, &vb).unwrap(), sq_euclidean(&vb, &va).unwrap());
            prop_assert_eq!(sq_euclidean(&va, &va).unwrap(), 0.0);
            if a != b {
                prop_assert!(sq_euclidean(&va, &vb).unwrap() > 0.0);
            }
        }
    }
}
