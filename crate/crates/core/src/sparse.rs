//! Compressed-row sparse matrices for the finite-volume stencils.

use nalgebra::DMatrix;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Below this many multiply-adds the column loop stays sequential.
const PARALLEL_WORK: usize = 1 << 16;

/// Square or rectangular matrix in compressed sparse row layout.
///
/// Column indices inside each row are sorted, so two matrices assembled from
/// the same triplets are bit-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entries of row `r` as `(column, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r)
            .find(|&(col, _)| col == c)
            .map_or(0.0, |(_, v)| v)
    }

    /// `y = A x` for a vector slice.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *out = acc;
        }
    }

    /// Sparse times dense: `A * B`.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.ncols, "sparse-dense shape mismatch");
        let mut out = DMatrix::zeros(self.nrows, b.ncols());
        self.mul_dense_acc(1.0, b, &mut out);
        out
    }

    /// Accumulates `out += alpha * A * B`, parallel over the columns of `B`.
    pub fn mul_dense_acc(&self, alpha: f64, b: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        assert_eq!(b.nrows(), self.ncols);
        assert_eq!(out.nrows(), self.nrows);
        assert_eq!(out.ncols(), b.ncols());
        if self.nrows == 0 || b.ncols() == 0 {
            return;
        }
        let kernel = |(dst, src): (&mut [f64], &[f64])| {
            for (r, out) in dst.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * src[self.col_idx[k]];
                }
                *out += alpha * acc;
            }
        };
        let dst = out.as_mut_slice().chunks_mut(self.nrows);
        let src = b.as_slice().chunks(self.ncols);
        if self.nnz() * b.ncols() < PARALLEL_WORK {
            dst.zip(src).for_each(kernel);
        } else {
            let dst = out.as_mut_slice().par_chunks_mut(self.nrows);
            dst.zip(b.as_slice().par_chunks(self.ncols)).for_each(kernel);
        }
    }

    /// Right-scales columns: returns `A * diag(d)`.
    pub fn scale_columns(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.ncols);
        let values = self
            .col_idx
            .iter()
            .zip(&self.values)
            .map(|(&c, &v)| v * d[c])
            .collect();
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                trip.push((c, r, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                out[(r, c)] = v;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Coordinate-list text export, one `row col value` line per entry (0-based).
    pub fn to_coo_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# coordinate list, 0-based: row col value");
        let _ = writeln!(s, "# nrows = {}, ncols = {}, nnz = {}", self.nrows, self.ncols, self.nnz());
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                let _ = writeln!(s, "{r} {c} {v:e}");
            }
        }
        s
    }
}
