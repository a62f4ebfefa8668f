//! CSR matrices, index-subset extraction and Jacobi-preconditioned CG.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("entry ({row}, {col}) outside a {rows}x{cols} matrix")]
    OutOfRange { row: usize, col: usize, rows: usize, cols: usize },
    #[error("index set must be strictly increasing and below {bound}")]
    BadIndexSet { bound: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("vector of length {got} where {expected} was expected")]
    Dimension { expected: usize, got: usize },
    #[error("non-positive diagonal entry {value} in row {row}")]
    NonPositiveDiagonal { row: usize, value: f64 },
    #[error("negative quadratic form {0}; matrix is not positive semidefinite")]
    NegativeQuadraticForm(f64),
    #[error("curvature {0} along a search direction; matrix is not positive definite")]
    Indefinite(f64),
}

/// Compressed sparse row matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, row_ptr: vec![0; rows + 1], col_idx: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed.
    /// Explicit zeros are kept so that assembled patterns stay structural.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        let mut counts = vec![0usize; rows + 1];
        for &(row, col, _) in triplets {
            if row >= rows || col >= cols {
                return Err(LinalgError::OutOfRange { row, col, rows, cols });
            }
            counts[row + 1] += 1;
        }
        for r in 0..rows {
            counts[r + 1] += counts[r];
        }
        // Bucket by row, then sort each row by column and merge duplicates.
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(row, col, v) in triplets {
            bucket[next[row]] = (col, v);
            next[row] += 1;
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..rows {
            let entries = &mut bucket[counts[r]..counts[r + 1]];
            // Stable sort keeps the summation order of duplicates deterministic.
            entries.sort_by_key(|e| e.0);
            for &(c, v) in entries.iter() {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { rows, cols, row_ptr, col_idx, values })
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let rows = dense.len();
        let cols = dense.first().map_or(0, |r| r.len());
        let triplets: Vec<_> = dense
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(move |(j, v)| (i, j, *v))
            })
            .collect();
        Self::from_triplets(rows, cols, &triplets).expect("indices in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Index into `values` of entry `(r, c)` if it is in the pattern.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].binary_search(&c).ok().map(|k| range.start + k)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.cols]; self.rows];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] += v;
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<_> = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v)))
            .collect();
        Self::from_triplets(self.cols, self.rows, &triplets).expect("indices in range")
    }

    /// Positions of the diagonal entries in `values` (None where not stored).
    pub fn diagonal_positions(&self) -> Vec<Option<usize>> {
        (0..self.rows.min(self.cols))
            .map(|r| {
                let range = self.row_ptr[r]..self.row_ptr[r + 1];
                self.col_idx[range.clone()].binary_search(&r).ok().map(|k| range.start + k)
            })
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|r| self.get(r, r)).collect()
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }

    /// Re-expresses this matrix on the union of its pattern and `other`'s,
    /// padding with explicit zeros.
    pub fn on_union_pattern(&self, other: &Self) -> Self {
        let mut triplets: Vec<_> = (0..self.rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .collect();
        triplets.extend((0..other.rows).flat_map(|r| other.row(r).map(move |(c, _)| (r, c, 0.0))));
        Self::from_triplets(self.rows, self.cols, &triplets).expect("indices in range")
    }

    /// `self + scale * other` for matrices sharing a pattern.
    pub fn add_scaled_same_pattern(&self, scale: f64, other: &Self) -> Self {
        assert!(self.same_pattern(other), "patterns differ");
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v += scale * o;
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    /// `(self * x)[rows[a]]` for each `a`, touching only the selected rows.
    pub fn mul_rows(&self, x: &[f64], rows: &[usize], out: &mut [f64]) {
        for (o, &r) in out.iter_mut().zip(rows) {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *o = s;
        }
    }

    /// Principal submatrix on a sorted, duplicate-free index set:
    /// `r[a, b] = self[idx[a], idx[b]]`.
    pub fn submatrix(&self, idx: &[usize]) -> Result<Self, LinalgError> {
        if self.rows != self.cols {
            return Err(LinalgError::NotSquare { rows: self.rows, cols: self.cols });
        }
        check_index_set(idx, self.rows)?;
        if idx.len() == self.rows {
            return Ok(self.clone());
        }
        let mut local = vec![usize::MAX; self.rows];
        for (a, &i) in idx.iter().enumerate() {
            local[i] = a;
        }
        let mut row_ptr = Vec::with_capacity(idx.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &r in idx {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = local[self.col_idx[k]];
                if c != usize::MAX {
                    col_idx.push(c);
                    values.push(self.values[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { rows: idx.len(), cols: idx.len(), row_ptr, col_idx, values })
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| self.row(r).all(|(c, v)| (v - self.get(c, r)).abs() <= tol))
    }

    /// Debug dump: one `row col value` line per stored entry.
    pub fn to_triplet_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.rows, self.cols, self.nnz());
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let _ = writeln!(s, "{r} {c} {v:.17e}");
            }
        }
        s
    }
}

pub(crate) fn check_index_set(idx: &[usize], bound: usize) -> Result<(), LinalgError> {
    let sorted = idx.windows(2).all(|w| w[0] < w[1]);
    if !sorted || idx.last().is_some_and(|&i| i >= bound) {
        return Err(LinalgError::BadIndexSet { bound });
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sqrt(v^T a v)`.
pub fn energy_norm(a: &SparseMatrix, v: &[f64]) -> Result<f64, LinalgError> {
    if v.len() != a.cols() {
        return Err(LinalgError::Dimension { expected: a.cols(), got: v.len() });
    }
    let q = dot(v, &a.mul_vec(v));
    if q < 0.0 {
        // Rounding can push a zero form slightly negative.
        let scale = dot(v, v) * a.values().iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if q >= -1e-14 * scale {
            return Ok(0.0);
        }
        return Err(LinalgError::NegativeQuadraticForm(q));
    }
    Ok(q.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Estimated `||x_k - x*||_A / ||x_0 - x*||_A` at termination.
    pub estimated_energy_reduction: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgSettings {
    /// Required estimated energy error reduction relative to the start.
    pub reduction: f64,
    pub max_iter: usize,
    /// Delay window of the energy error estimate.
    pub delay: usize,
}

impl Default for CgSettings {
    fn default() -> Self {
        Self { reduction: 1e-3, max_iter: 2000, delay: 5 }
    }
}

/// Jacobi-preconditioned conjugate gradients.
///
/// The energy error is estimated from the CG scalars: each iteration removes
/// exactly `alpha_j * (r_j, z_j)` from `||x - x_j||_A^2`, so the sum of the
/// last `delay` contributions is a lower bound for the error `delay` steps
/// back, and the sum of all contributions bounds the initial error. The
/// iteration stops once that ratio drops below `reduction^2`.
pub fn pcg_jacobi(
    a: &SparseMatrix,
    rhs: &[f64],
    x0: &[f64],
    settings: &CgSettings,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare { rows: n, cols: a.cols() });
    }
    for v in [rhs.len(), x0.len()] {
        if v != n {
            return Err(LinalgError::Dimension { expected: n, got: v });
        }
    }
    let mut inv_diag = Vec::with_capacity(n);
    for (row, d) in a.diagonal().into_iter().enumerate() {
        if !(d > 0.0) {
            return Err(LinalgError::NonPositiveDiagonal { row, value: d });
        }
        inv_diag.push(1.0 / d);
    }

    let mut x = x0.to_vec();
    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let rz0 = rz;
    let mut ap = vec![0.0; n];
    let mut decrements: Vec<f64> = Vec::new();
    let mut report =
        SolveReport { iterations: 0, estimated_energy_reduction: 0.0, converged: true };
    if rz0 <= 0.0 {
        return Ok((x, report));
    }
    let delay = settings.delay.max(1);
    let mut total = 0.0;

    while report.iterations < settings.max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(LinalgError::Indefinite(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        report.iterations += 1;
        decrements.push(alpha * rz);
        total += alpha * rz;
        let rz_new = dot(&r, &z);

        if rz_new <= 1e-28 * rz0 {
            report.estimated_energy_reduction = 0.0;
            return Ok((x, report));
        }
        let k = decrements.len();
        if k >= delay {
            let tail: f64 = decrements[k - delay..].iter().sum();
            let ratio = (tail / total).max(0.0).sqrt();
            report.estimated_energy_reduction = ratio;
            if ratio <= settings.reduction {
                return Ok((x, report));
            }
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    report.converged = false;
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn random_triplets(rng: &mut StdRng, n: usize, count: usize) -> Vec<(usize, usize, f64)> {
        (0..count).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(-1.0..1.0))).collect()
    }

    fn random_spd(rng: &mut StdRng, n: usize) -> Vec<Vec<f64>> {
        let b: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let s: f64 = (0..n).map(|k| b[i][k] * b[j][k]).sum();
                        s + if i == j { n as f64 } else { 0.0 }
                    })
                    .collect()
            })
            .collect()
    }

    fn laplacian_1d(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn duplicates_accumulate() {
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_triplets() {
        let m = SparseMatrix::from_triplets(3, 4, &[]).unwrap();
        assert_eq!(m.nnz(), 0);
        assert_eq!(m.row_ptr(), &[0, 0, 0, 0]);
        assert_eq!(m.to_dense(), vec![vec![0.0; 4]; 3]);
    }

    #[test]
    fn out_of_range_triplet() {
        assert_eq!(
            SparseMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]),
            Err(LinalgError::OutOfRange { row: 2, col: 0, rows: 2, cols: 2 })
        );
    }

    #[test]
    fn random_triplets_match_dense_accumulation() {
        let mut rng = StdRng::seed_from_u64(7);
        let t = random_triplets(&mut rng, 20, 150);
        let mut dense = vec![vec![0.0; 20]; 20];
        for &(i, j, v) in &t {
            dense[i][j] += v;
        }
        let m = SparseMatrix::from_triplets(20, 20, &t).unwrap();
        let got = m.to_dense();
        for i in 0..20 {
            for j in 0..20 {
                assert!((got[i][j] - dense[i][j]).abs() < 1e-14);
            }
            let cols = &m.col_idx()[m.row_ptr()[i]..m.row_ptr()[i + 1]];
            assert!(cols.windows(2).all(|w| w[0] < w[1]));
        }
        assert_eq!(m.row_ptr()[20], m.nnz());
    }

    #[test]
    fn submatrix_edge_cases() {
        let m = laplacian_1d(5);
        assert_eq!(m.submatrix(&[0, 1, 2, 3, 4]).unwrap(), m);
        let e = m.submatrix(&[]).unwrap();
        assert_eq!((e.rows(), e.cols()), (0, 0));
        assert!(matches!(m.submatrix(&[2, 1]), Err(LinalgError::BadIndexSet { .. })));
        assert!(matches!(m.submatrix(&[1, 1]), Err(LinalgError::BadIndexSet { .. })));
        assert!(matches!(m.submatrix(&[5]), Err(LinalgError::BadIndexSet { .. })));
        let rect = SparseMatrix::zeros(2, 3);
        assert!(matches!(rect.submatrix(&[0]), Err(LinalgError::NotSquare { .. })));
    }

    #[test]
    fn submatrix_matches_dense_gather() {
        let mut rng = StdRng::seed_from_u64(3);
        let dense = random_spd(&mut rng, 10);
        let m = SparseMatrix::from_dense(&dense);
        let idx = [1, 3, 7];
        let s = m.submatrix(&idx).unwrap();
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                assert_eq!(s.get(a, b), dense[i][j]);
            }
        }
        assert!(s.is_symmetric(0.0));
    }

    #[test]
    fn identity_solve_one_iteration() {
        let a = SparseMatrix::identity(4);
        let b = [1.0, -2.0, 3.0, 0.5];
        let (x, rep) = pcg_jacobi(&a, &b, &[0.0; 4], &CgSettings::default()).unwrap();
        assert_eq!(x, b.to_vec());
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
    }

    #[test]
    fn zero_rhs_zero_iterations() {
        let a = laplacian_1d(6);
        let (x, rep) = pcg_jacobi(&a, &[0.0; 6], &[0.0; 6], &CgSettings::default()).unwrap();
        assert_eq!(x, vec![0.0; 6]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn laplacian_energy_reduction_against_cholesky() {
        let n = 50;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| ((i as f64) * 0.3).sin() + 1.0).collect();
        let dense = DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let exact = dense.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        let settings = CgSettings { reduction: 1e-3, ..Default::default() };
        let (x, rep) = pcg_jacobi(&a, &b, &vec![0.0; n], &settings).unwrap();
        assert!(rep.converged);
        let err: Vec<f64> = x.iter().zip(exact.iter()).map(|(x, e)| x - e).collect();
        let e_now = energy_norm(&a, &err).unwrap();
        let e_start = energy_norm(&a, exact.as_slice()).unwrap();
        assert!(e_now <= 1e-3 * e_start, "{e_now} vs {e_start}");
    }

    #[test]
    fn non_positive_diagonal_rejected() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 0.0]]);
        assert!(matches!(
            pcg_jacobi(&a, &[1.0, 1.0], &[0.0, 0.0], &CgSettings::default()),
            Err(LinalgError::NonPositiveDiagonal { row: 1, .. })
        ));
    }

    #[test]
    fn max_iter_flags_without_failing() {
        let a = laplacian_1d(40);
        let b = vec![1.0; 40];
        let s = CgSettings { reduction: 1e-12, max_iter: 3, delay: 5 };
        let (_, rep) = pcg_jacobi(&a, &b, &vec![0.0; 40], &s).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn energy_norm_cases() {
        let a = SparseMatrix::identity(2);
        assert_eq!(energy_norm(&a, &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(energy_norm(&a, &[3.0, 4.0]).unwrap(), 5.0);
        let neg = SparseMatrix::from_dense(&[vec![-1.0]]);
        assert!(matches!(energy_norm(&neg, &[1.0]), Err(LinalgError::NegativeQuadraticForm(_))));
        let mut rng = StdRng::seed_from_u64(11);
        let d = random_spd(&mut rng, 8);
        let v: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut q = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                q += v[i] * d[i][j] * v[j];
            }
        }
        let got = energy_norm(&SparseMatrix::from_dense(&d), &v).unwrap();
        assert!((got - q.sqrt()).abs() <= 1e-13 * q.sqrt());
    }

    proptest! {
        #[test]
        fn full_submatrix_is_identity_selection(seed in 0u64..1000, n in 1usize..15) {
            let mut rng = StdRng::seed_from_u64(seed);
            let m = SparseMatrix::from_triplets(n, n, &random_triplets(&mut rng, n, 3 * n)).unwrap();
            let all: Vec<usize> = (0..n).collect();
            prop_assert_eq!(m.submatrix(&all).unwrap(), m);
        }

        #[test]
        fn submatrix_commutes_with_transpose(seed in 0u64..1000, n in 1usize..15) {
            let mut rng = StdRng::seed_from_u64(seed);
            let m = SparseMatrix::from_triplets(n, n, &random_triplets(&mut rng, n, 3 * n)).unwrap();
            let idx: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            prop_assert_eq!(
                m.transpose().submatrix(&idx).unwrap(),
                m.submatrix(&idx).unwrap().transpose()
            );
        }

        #[test]
        fn nested_extraction_is_consistent(seed in 0u64..1000, n in 1usize..20) {
            let mut rng = StdRng::seed_from_u64(seed);
            let m = SparseMatrix::from_triplets(n, n, &random_triplets(&mut rng, n, 4 * n)).unwrap();
            let outer: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
            let inner_pos: Vec<usize> = (0..outer.len()).filter(|_| rng.gen_bool(0.5)).collect();
            let inner: Vec<usize> = inner_pos.iter().map(|&p| outer[p]).collect();
            prop_assert_eq!(
                m.submatrix(&outer).unwrap().submatrix(&inner_pos).unwrap(),
                m.submatrix(&inner).unwrap()
            );
        }

        #[test]
        fn cg_terminates_within_n_iterations(seed in 0u64..500, n in 1usize..=30) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = SparseMatrix::from_dense(&random_spd(&mut rng, n));
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = CgSettings { reduction: 0.0, max_iter: n, delay: 5 };
            let (x, _) = pcg_jacobi(&a, &b, &vec![0.0; n], &s).unwrap();
            let ax = a.mul_vec(&x);
            let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(res <= 1e-8 * bn, "residual {} vs {}", res, bn);
        }
    }
}
