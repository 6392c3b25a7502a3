use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex matrix in compressed sparse row layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<Complex64>,
    ) -> Result<Self> {
        let m = Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("CSR matrix: {msg}")));
        if self.row_ptr.len() != self.nrows + 1 || self.row_ptr[0] != 0 {
            return bad("row pointer length or origin is wrong");
        }
        if self.row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("row pointers decrease");
        }
        if *self.row_ptr.last().unwrap() != self.col_idx.len() || self.col_idx.len() != self.values.len() {
            return bad("entry counts disagree");
        }
        if self.col_idx.iter().any(|&c| c >= self.ncols) {
            return bad("column index out of range");
        }
        Ok(())
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, Complex64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            if r >= nrows || c >= ncols {
                return Err(Error::invalid(format!("triplet ({r}, {c}) outside {nrows}x{ncols}")));
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for (c, v) in row {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(nrows, ncols, row_ptr, col_idx, values)
    }

    pub fn from_dense(m: &DMatrix<Complex64>) -> Self {
        let mut triplets = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != Complex64::new(0.0, 0.0) {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &triplets).expect("dense entries are in range")
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

    /// Entries of row `r` as `(column, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        let triplets: Vec<_> = (0..self.nrows)
            .flat_map(|r| self.row(r).map(move |(c, v)| (c, r, v.conj())))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &triplets).expect("transposed indices are in range")
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &CsrMatrix) -> Result<Self> {
        Error::check_dim(self.ncols, rhs.nrows)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); rhs.ncols];
        let mut touched = vec![false; rhs.ncols];
        let mut cols = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in rhs.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                if acc[c] != Complex64::new(0.0, 0.0) {
                    col_idx.push(c);
                    values.push(acc[c]);
                }
                acc[c] = Complex64::new(0.0, 0.0);
                touched[c] = false;
            }
            cols.clear();
            row_ptr.push(col_idx.len());
        }
        Self::new(self.nrows, rhs.ncols, row_ptr, col_idx, values)
    }

    /// `y = self * x`.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Diagonal entries if every stored entry sits on the diagonal.
    pub fn diagonal_if_diagonal(&self) -> Option<Vec<Complex64>> {
        if self.nrows != self.ncols {
            return None;
        }
        let mut diag = vec![Complex64::new(0.0, 0.0); self.nrows];
        for (r, d) in diag.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                if c == r {
                    *d += v;
                } else if v != Complex64::new(0.0, 0.0) {
                    return None;
                }
            }
        }
        Some(diag)
    }
}
