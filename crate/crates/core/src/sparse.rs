//! Symmetric sparse operators (CSR) and a sparse Cholesky wrapper.

use std::io::Write;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Symmetric sparse matrix in compressed-row form; both triangles are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; dim + 1];
        let mut col_idx = Vec::with_capacity(trip.len());
        let mut values: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator { dim, row_ptr, col_idx, values }
    }

    pub fn diagonal_matrix(diag: &[f64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &d)| (i, i, d)).collect())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.dim {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for r in 0..self.dim {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            s += x[r] * row;
        }
        s
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (r, c, v) in self.triplets() {
            if r == c {
                d[r] += v;
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.values[self.row_ptr[r]..self.row_ptr[r + 1]].iter().sum()).collect()
    }

    /// αA + βB.
    pub fn linear_combination(alpha: f64, a: &SparseOperator, beta: f64, b: &SparseOperator) -> SparseOperator {
        assert_eq!(a.dim, b.dim);
        let trip = a
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(b.triplets().map(|(r, c, v)| (r, c, beta * v)))
            .collect();
        SparseOperator::from_triplets(a.dim, trip)
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let t = SparseOperator::from_triplets(self.dim, self.triplets().map(|(r, c, v)| (c, r, v)).collect());
        let diff = SparseOperator::linear_combination(1.0, self, -1.0, &t);
        diff.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Principal submatrix with row/column `skip` removed.
    pub fn without_index(&self, skip: usize) -> SparseOperator {
        let shift = |i: usize| if i > skip { i - 1 } else { i };
        let trip =
            self.triplets().filter(|&(r, c, _)| r != skip && c != skip).map(|(r, c, v)| (shift(r), shift(c), v)).collect();
        SparseOperator::from_triplets(self.dim - 1, trip)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<Triplet<usize, usize, f64>> =
            self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.dim, self.dim, &trip)
            .map_err(|e| Error::Numeric(format!("sparse matrix construction failed: {e:?}")))
    }

    /// Coordinate-list text: one `row col value` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "% {} {} {}", self.dim, self.dim, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite operator.
pub struct Cholesky {
    dim: usize,
    llt: Llt<usize, f64>,
}

impl Cholesky {
    pub fn new(a: &SparseOperator) -> Result<Self> {
        let m = a.to_faer()?;
        let llt = m
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Numeric(format!("Cholesky factorization failed (matrix not positive definite?): {e:?}")))?;
        Ok(Cholesky { dim: a.dim, llt })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = Mat::<f64>::from_fn(self.dim, 1, |i, _| b[i]);
        let x = self.llt.solve(&rhs);
        (0..self.dim).map(|i| x[(i, 0)]).collect()
    }

    /// Solve for several right-hand sides at once.
    pub fn solve_many(&self, bs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        if bs.is_empty() {
            return Vec::new();
        }
        let rhs = Mat::<f64>::from_fn(self.dim, bs.len(), |i, j| bs[j][i]);
        let x = self.llt.solve(&rhs);
        (0..bs.len()).map(|j| (0..self.dim).map(|i| x[(i, j)]).collect()).collect()
    }
}

/// Pseudo-inverse solves with a PSD operator whose kernel is the constants
/// (the stiffness matrix of a connected mesh): pins vertex 0.
pub struct PinnedSolver {
    chol: Cholesky,
}

impl PinnedSolver {
    pub fn new(k: &SparseOperator) -> Result<Self> {
        Ok(PinnedSolver { chol: Cholesky::new(&k.without_index(0))? })
    }

    /// Returns some x with Kx = r for mean-zero r (x₀ = 0).
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        let y = self.chol.solve(&r[1..]);
        let mut x = Vec::with_capacity(r.len());
        x.push(0.0);
        x.extend(y);
        x
    }

    /// rᵀK⁺r after removing the plain mean of r.
    pub fn dual_seminorm_sq(&self, r: &[f64]) -> f64 {
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let rc: Vec<f64> = r.iter().map(|v| v - mean).collect();
        let x = self.solve(&rc);
        rc.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>().max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseOperator::from_triplets(2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 0, 1.0), (0, 1, 1.0)]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![4.0, 1.0]);
        assert_eq!(a.asymmetry(), 0.0);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseOperator::from_triplets(n, t);
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = Cholesky::new(&a).unwrap().solve(&b);
        let r = a.matvec(&x);
        let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }
}
