//! Coordinate and compressed-row sparse matrices.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Triplet accumulator. Duplicates are summed by [`CooMatrix::to_csr`].
#[derive(Clone, Debug, Default)]
pub struct CooMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> CooMatrix<T> {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    /// Adds a dense element matrix at the given global indices.
    pub fn push_block<const N: usize>(&mut self, dofs: &[usize; N], block: &[[T; N]; N]) {
        for a in 0..N {
            for b in 0..N {
                self.push(dofs[a], dofs[b], block[a][b]);
            }
        }
    }

    pub fn push_block_dyn(&mut self, dofs: &[usize], block: &[T]) {
        let n = dofs.len();
        for a in 0..n {
            for b in 0..n {
                self.push(dofs[a], dofs[b], block[a * n + b]);
            }
        }
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    /// Compresses to CSR. Entries are stably sorted by `(row, col)` and
    /// duplicates summed in insertion order, so the result depends only on
    /// the sequence of pushes.
    pub fn to_csr(mut self) -> CsrMatrix<T> {
        self.entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<T> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("previous entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

/// Compressed sparse row matrix with sorted column indices. The stored
/// pattern is structural: explicitly assembled zeros are kept.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut coo = CooMatrix::new(n, n);
        for i in 0..n {
            coo.push(i, i, T::one());
        }
        coo.to_csr()
    }

    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut coo = CooMatrix::new(n_rows, n_cols);
        for &(i, j, v) in triplets {
            coo.push(i, j, v);
        }
        coo.to_csr()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => T::zero(),
        }
    }

    /// Structural pattern as sorted `(row, col)` pairs.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.triplets().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = T::zero();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n_rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A x`
    pub fn quadratic_form(&self, x: &[T]) -> T {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| *a * *b).sum()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn scaled(&self, c: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + alpha · other`; the pattern is the union of both patterns.
    pub fn add_scaled(&self, alpha: T, other: &Self) -> Result<Self> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                got: other.n_rows,
            });
        }
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(col_idx.capacity());
        for i in 0..self.n_rows {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                let (j, v) = match (a.peek(), b.peek()) {
                    (None, None) => break,
                    (Some(&(ja, va)), None) => {
                        a.next();
                        (ja, va)
                    }
                    (None, Some(&(jb, vb))) => {
                        b.next();
                        (jb, alpha * vb)
                    }
                    (Some(&(ja, va)), Some(&(jb, vb))) => {
                        if ja < jb {
                            a.next();
                            (ja, va)
                        } else if jb < ja {
                            b.next();
                            (jb, alpha * vb)
                        } else {
                            a.next();
                            b.next();
                            (ja, va + alpha * vb)
                        }
                    }
                };
                col_idx.push(j);
                values.push(v);
            }
            row_ptr[i + 1] = col_idx.len();
        }
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// `max |A_ij - A_ji|` over the stored pattern.
    pub fn asymmetry(&self) -> T {
        self.triplets()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(T::zero(), T::max)
    }

    /// `D^{-1/2} A D^{-1/2}` with `D = diag(A)`; rows and columns with a
    /// non-positive diagonal are left unscaled.
    pub fn diagonally_scaled(&self) -> Self {
        let s: Vec<T> = self
            .diagonal()
            .into_iter()
            .map(|d| if d > T::zero() { T::one() / d.sqrt() } else { T::one() })
            .collect();
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] = out.values[k] * s[i] * s[out.col_idx[k]];
            }
        }
        out
    }

    pub fn to_dense_f64(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows, self.n_cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v.to_f64_lossy();
        }
        m
    }

    /// Coordinate text export: one `i j value` line per stored entry,
    /// 0-based indices, sorted by row then column.
    pub fn write_coordinate(&self, mut w: impl Write) -> std::io::Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i} {j} {:.17e}", v.to_f64_lossy())?;
        }
        Ok(())
    }
}
